#include "pawfuse/records.hpp"

#include "pawfuse/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

namespace pawfuse {
namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::optional<int> parse_int(std::string_view s) {
  int v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end) return std::nullopt;
  return v;
}

bool read_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

}  // namespace

const Schema& default_schema() {
  static const Schema schema = {
      {"Focus", "Subject Focus"}, {"Eyes", "Eyes"},           {"Face", "Face"},
      {"Near", "Near"},           {"Action", "Action"},       {"Accessory", "Accessory"},
      {"Group", "Group"},         {"Collage", "Collage"},     {"Human", "Human"},
      {"Occlusion", "Occlusion"}, {"Info", "Info"},           {"Blur", "Blur"},
  };
  return schema;
}

std::optional<std::size_t> feature_index(std::string_view name) {
  const std::string key = to_lower(trim(name));
  const Schema& schema = default_schema();
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (to_lower(schema[i].name) == key || to_lower(schema[i].column) == key) return i;
  }
  return std::nullopt;
}

int MetadataRecord::feature(std::string_view name) const {
  auto idx = feature_index(name);
  if (!idx) throw SchemaError(fmt::format("unknown feature '{}'", name));
  return features[*idx];
}

void validate_record(const MetadataRecord& record) {
  for (std::uint8_t v : record.features) {
    if (v > 1) throw ContractError(fmt::format("record {}: non-binary feature", record.id));
  }
  if (record.pawpularity && (*record.pawpularity < 0 || *record.pawpularity > 100)) {
    throw ContractError(fmt::format("record {}: pawpularity outside [0, 100]", record.id));
  }
  // Blurred photos never get the Eyes flag.
  if (record.features[11] == 1 && record.features[1] == 1) {
    throw ContractError(fmt::format("record {}: Eyes must be 0 when Blur is 1", record.id));
  }
}

std::vector<MetadataRecord> parse_csv(std::istream& in) {
  std::string line;
  if (!read_line(in, line)) throw SchemaError("csv: missing header row");
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);

  constexpr int kId = -1;
  constexpr int kLabel = -2;
  std::vector<int> column_role;
  std::array<bool, kFeatureCount> seen{};
  bool has_id = false;
  bool has_label = false;
  for (const std::string& raw : split(line, ',')) {
    const std::string col = to_lower(trim(raw));
    if (col == "id") {
      column_role.push_back(kId);
      has_id = true;
    } else if (col == "pawpularity") {
      column_role.push_back(kLabel);
      has_label = true;
    } else if (auto idx = feature_index(col)) {
      if (seen[*idx]) throw SchemaError(fmt::format("csv: column '{}' repeated", trim(raw)));
      seen[*idx] = true;
      column_role.push_back(static_cast<int>(*idx));
    } else {
      throw SchemaError(fmt::format("csv: unknown column '{}'", trim(raw)));
    }
  }
  if (!has_id) throw SchemaError("csv: no Id column");
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (!seen[i]) {
      throw SchemaError(fmt::format("csv: missing column '{}'", default_schema()[i].column));
    }
  }

  std::vector<MetadataRecord> records;
  std::unordered_set<std::string> ids;
  std::size_t line_no = 1;
  while (read_line(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != column_role.size()) {
      throw RowError(fmt::format("csv line {}: expected {} fields, got {}", line_no,
                                 column_role.size(), cells.size()),
                     line_no);
    }
    MetadataRecord rec;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string cell = trim(cells[c]);
      const int role = column_role[c];
      if (role == kId) {
        rec.id = cell;
      } else if (role == kLabel) {
        if (cell.empty() && has_label) continue;
        auto v = parse_int(cell);
        if (!v || *v < 0 || *v > 100) {
          throw RowError(fmt::format("csv line {}: pawpularity '{}' not in 0..100", line_no, cell),
                         line_no);
        }
        rec.pawpularity = *v;
      } else {
        auto v = parse_int(cell);
        if (!v || (*v != 0 && *v != 1)) {
          throw RowError(fmt::format("csv line {}: feature '{}' has non-binary value '{}'",
                                     line_no, default_schema()[role].name, cell),
                         line_no);
        }
        rec.features[role] = static_cast<std::uint8_t>(*v);
      }
    }
    if (rec.id.empty()) throw RowError(fmt::format("csv line {}: empty Id", line_no), line_no);
    if (rec.features[11] == 1 && rec.features[1] == 1) {
      throw RowError(fmt::format("csv line {}: Eyes must be 0 when Blur is 1", line_no), line_no);
    }
    if (!ids.insert(rec.id).second) {
      throw CollisionError(fmt::format("csv line {}: duplicate Id '{}'", line_no, rec.id));
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<MetadataRecord> parse_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_csv(in);
}

void write_csv(std::ostream& out, const std::vector<MetadataRecord>& records) {
  const bool labeled = std::any_of(records.begin(), records.end(),
                                   [](const MetadataRecord& r) { return r.pawpularity.has_value(); });
  out << "Id";
  for (const auto& f : default_schema()) out << ',' << f.column;
  if (labeled) out << ",Pawpularity";
  out << '\n';
  for (const auto& r : records) {
    out << r.id;
    for (std::uint8_t v : r.features) out << ',' << static_cast<int>(v);
    if (labeled) {
      out << ',';
      if (r.pawpularity) out << *r.pawpularity;
    }
    out << '\n';
  }
}

void write_predictions(std::ostream& out, const std::vector<Prediction>& predictions) {
  out << "Id,Pawpularity\n";
  for (const auto& p : predictions) out << fmt::format("{},{:.6f}\n", p.id, p.pawpularity);
}

std::string_view species_name(Species s) {
  switch (s) {
    case Species::cat: return "cat";
    case Species::dog: return "dog";
    case Species::unknown: return "unknown";
  }
  return "unknown";
}

std::vector<Annotation> parse_annotations(std::istream& in) {
  std::string line;
  if (!read_line(in, line)) throw SchemaError("annotations: missing header row");
  const auto header = split(line, ',');
  if (header.size() != 3 || to_lower(trim(header[0])) != "id" ||
      to_lower(trim(header[1])) != "species" || to_lower(trim(header[2])) != "count") {
    throw SchemaError("annotations: header must be id,species,count");
  }
  std::vector<Annotation> out;
  std::size_t line_no = 1;
  while (read_line(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 3) {
      throw RowError(fmt::format("annotations line {}: expected 3 fields", line_no), line_no);
    }
    Annotation a;
    a.id = trim(cells[0]);
    const std::string sp = to_lower(trim(cells[1]));
    if (sp == "cat") {
      a.species = Species::cat;
    } else if (sp == "dog") {
      a.species = Species::dog;
    } else if (sp == "unknown") {
      a.species = Species::unknown;
    } else {
      throw RowError(fmt::format("annotations line {}: unknown species '{}'", line_no, sp),
                     line_no);
    }
    auto count = parse_int(trim(cells[2]));
    if (!count || *count < 0) {
      throw RowError(fmt::format("annotations line {}: bad count", line_no), line_no);
    }
    a.count = *count;
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<Annotation> parse_annotations(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_annotations(in);
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      return out;
    }
    out.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace pawfuse
