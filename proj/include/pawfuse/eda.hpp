#pragma once

#include "pawfuse/dedup.hpp"
#include "pawfuse/records.hpp"

#include <json.hpp>

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pawfuse {

struct Histogram {
  std::vector<double> edges;          // bins + 1 edges
  std::vector<std::size_t> counts;

  std::size_t total() const;
  std::size_t nonzero_bins() const;
};

/// `bins` equal-width bins starting at `lo`. Values outside are clipped into
/// the first or last bin so every value is counted once.
Histogram make_histogram(std::span<const double> values, double lo, double width, std::size_t bins);

struct Correlation {
  std::string feature;
  double r = 0.0;
  bool defined = true;  // false when either side has zero variance; r is then 0
};

/// Pearson r of each of the 12 features against pawpularity.
std::vector<Correlation> correlation_vector(std::span<const MetadataRecord> records);

double pearson(std::span<const double> x, std::span<const double> y, bool* defined = nullptr);

struct ImageStat {
  std::string id;
  int width = 0;
  int height = 0;
};

/// Box-plot style summary of labels within one category.
struct LabelStats {
  std::string key;
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
};

LabelStats label_stats(std::string key, std::vector<double> labels);

struct EdaReport {
  std::size_t records = 0;
  std::size_t images_read = 0;
  double label_mean = 0.0;
  double label_std = 0.0;
  Histogram width;
  Histogram height;
  Histogram ratio;        // width / height
  Histogram pawpularity;  // 101 unit bins
  std::vector<Correlation> correlations;
  int duplicate_threshold = 0;
  std::vector<DuplicateGroup> duplicates;
  std::vector<LabelStats> by_species;  // only with annotations
  std::vector<LabelStats> by_count;
  std::vector<std::string> warnings;
};

EdaReport eda_report(std::span<const MetadataRecord> records, std::span<const ImageStat> images,
                     std::vector<DuplicateGroup> duplicates, int duplicate_threshold,
                     const std::vector<Annotation>* annotations = nullptr,
                     std::vector<std::string> warnings = {});

nlohmann::ordered_json to_json(const EdaReport& report);

/// eda_report.json plus {width,height,ratio,pawpularity}_hist.csv with
/// columns bin_low,bin_high,count.
void write_eda_report(const EdaReport& report, const std::filesystem::path& dir);
void write_histogram_csv(std::ostream& out, const Histogram& h);

}  // namespace pawfuse
