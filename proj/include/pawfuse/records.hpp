#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pawfuse {

inline constexpr std::size_t kFeatureCount = 12;

/// One metadata column. `name` is the canonical short name, `column` the
/// header used by the competition CSV, which doubles as the phrase that gets
/// embedded.
struct FeatureField {
  std::string name;
  std::string column;
};

using Schema = std::vector<FeatureField>;

/// Focus, Eyes, Face, Near, Action, Accessory, Group, Collage, Human,
/// Occlusion, Info, Blur.
const Schema& default_schema();

/// Canonical index (0..11) of a feature name or alias, case-insensitive.
std::optional<std::size_t> feature_index(std::string_view name);

struct MetadataRecord {
  std::string id;
  std::array<std::uint8_t, kFeatureCount> features{};
  std::optional<int> pawpularity;
  std::optional<std::filesystem::path> image_path;

  int feature(std::string_view name) const;
};

/// Throws ContractError when a record breaks the value-domain invariants.
void validate_record(const MetadataRecord& record);

std::vector<MetadataRecord> parse_csv(std::istream& in);
std::vector<MetadataRecord> parse_csv(const std::filesystem::path& path);

/// Writes `Id,<12 competition columns>[,Pawpularity]`. The label column is
/// emitted when any record carries one.
void write_csv(std::ostream& out, const std::vector<MetadataRecord>& records);

struct Prediction {
  std::string id;
  double pawpularity = 0.0;  // 0..100
};

void write_predictions(std::ostream& out, const std::vector<Prediction>& predictions);

enum class Species { cat, dog, unknown };

std::string_view species_name(Species s);

struct Annotation {
  std::string id;
  Species species = Species::unknown;
  int count = 0;
};

/// `id,species,count` with species in {cat, dog, unknown}.
std::vector<Annotation> parse_annotations(std::istream& in);
std::vector<Annotation> parse_annotations(const std::filesystem::path& path);

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view line, char sep);

}  // namespace pawfuse
