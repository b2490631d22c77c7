#include "pawfuse/eda.hpp"

#include "pawfuse/errors.hpp"
#include "pawfuse/fusion.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <unordered_map>

namespace pawfuse {

std::size_t Histogram::total() const {
  std::size_t t = 0;
  for (std::size_t c : counts) t += c;
  return t;
}

std::size_t Histogram::nonzero_bins() const {
  return static_cast<std::size_t>(std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }));
}

Histogram make_histogram(std::span<const double> values, double lo, double width, std::size_t bins) {
  if (bins == 0 || !(width > 0.0)) throw ContractError("make_histogram: need positive bins and width");
  Histogram h;
  h.edges.resize(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) h.edges[i] = lo + width * static_cast<double>(i);
  h.counts.assign(bins, 0);
  for (double v : values) {
    const double pos = std::floor((v - lo) / width);
    const auto bin = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(bins - 1)));
    ++h.counts[bin];
  }
  return h;
}

double pearson(std::span<const double> x, std::span<const double> y, bool* defined) {
  if (x.size() != y.size() || x.empty()) throw ContractError("pearson: length mismatch");
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  const bool ok = sxx > 0.0 && syy > 0.0;
  if (defined) *defined = ok;
  return ok ? sxy / std::sqrt(sxx * syy) : 0.0;
}

std::vector<Correlation> correlation_vector(std::span<const MetadataRecord> records) {
  if (records.size() < 3) throw ContractError("correlation_vector: need at least 3 records");
  std::vector<double> labels;
  for (const auto& r : records) {
    if (!r.pawpularity) throw ContractError("correlation_vector: record '" + r.id + "' has no label");
    labels.push_back(*r.pawpularity);
  }
  std::vector<Correlation> out;
  std::vector<double> column(records.size());
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    for (std::size_t i = 0; i < records.size(); ++i) column[i] = records[i].features[f];
    Correlation c;
    c.feature = default_schema()[f].name;
    c.r = pearson(column, labels, &c.defined);
    out.push_back(std::move(c));
  }
  return out;
}

namespace {

double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

LabelStats label_stats(std::string key, std::vector<double> labels) {
  LabelStats s;
  s.key = std::move(key);
  s.n = labels.size();
  if (labels.empty()) return s;
  std::sort(labels.begin(), labels.end());
  double total = 0.0;
  for (double v : labels) total += v;
  s.mean = total / static_cast<double>(labels.size());
  s.std = labels.size() >= 2 ? std_baseline(labels).std : 0.0;
  s.min = labels.front();
  s.max = labels.back();
  s.q1 = quantile(labels, 0.25);
  s.median = quantile(labels, 0.5);
  s.q3 = quantile(labels, 0.75);
  return s;
}

EdaReport eda_report(std::span<const MetadataRecord> records, std::span<const ImageStat> images,
                     std::vector<DuplicateGroup> duplicates, int duplicate_threshold,
                     const std::vector<Annotation>* annotations, std::vector<std::string> warnings) {
  EdaReport rep;
  rep.records = records.size();
  rep.images_read = images.size();
  rep.duplicate_threshold = duplicate_threshold;
  rep.duplicates = std::move(duplicates);
  rep.warnings = std::move(warnings);

  std::vector<double> labels;
  std::unordered_map<std::string, double> label_of;
  for (const auto& r : records) {
    if (!r.pawpularity) throw ContractError("eda_report: record '" + r.id + "' has no label");
    labels.push_back(*r.pawpularity);
    label_of.emplace(r.id, *r.pawpularity);
  }
  if (!labels.empty()) {
    rep.label_mean = label_stats("all", labels).mean;
    rep.label_std = labels.size() >= 2 ? std_baseline(labels).std : 0.0;
  }
  rep.pawpularity = make_histogram(labels, 0.0, 1.0, 101);

  std::vector<double> widths, heights, ratios;
  double max_side = 0.0;
  for (const auto& im : images) {
    widths.push_back(im.width);
    heights.push_back(im.height);
    ratios.push_back(static_cast<double>(im.width) / im.height);
    max_side = std::max({max_side, static_cast<double>(im.width), static_cast<double>(im.height)});
  }
  constexpr double kSideBin = 64.0;
  const auto side_bins = static_cast<std::size_t>(std::max(1.0, std::ceil((max_side + 1.0) / kSideBin)));
  rep.width = make_histogram(widths, 0.0, kSideBin, side_bins);
  rep.height = make_histogram(heights, 0.0, kSideBin, side_bins);
  rep.ratio = make_histogram(ratios, 0.0, 0.05, 80);

  if (records.size() >= 3) {
    rep.correlations = correlation_vector(records);
  } else {
    rep.warnings.push_back("fewer than 3 records: correlations skipped");
  }

  if (annotations) {
    std::map<std::string, std::vector<double>> by_species;
    std::map<int, std::vector<double>> by_count;
    for (const auto& a : *annotations) {
      auto it = label_of.find(a.id);
      if (it == label_of.end()) {
        rep.warnings.push_back(fmt::format("annotation for unknown id '{}'", a.id));
        continue;
      }
      by_species[std::string(species_name(a.species))].push_back(it->second);
      by_count[a.count].push_back(it->second);
    }
    for (auto& [k, v] : by_species) rep.by_species.push_back(label_stats(k, std::move(v)));
    for (auto& [k, v] : by_count) rep.by_count.push_back(label_stats(std::to_string(k), std::move(v)));
  }
  return rep;
}

namespace {

nlohmann::ordered_json histogram_json(const Histogram& h) {
  return {{"edges", h.edges}, {"counts", h.counts}};
}

nlohmann::ordered_json stats_json(const std::vector<LabelStats>& stats) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& s : stats) {
    arr.push_back({{"key", s.key}, {"n", s.n}, {"mean", s.mean}, {"std", s.std}, {"min", s.min},
                   {"q1", s.q1}, {"median", s.median}, {"q3", s.q3}, {"max", s.max}});
  }
  return arr;
}

}  // namespace

nlohmann::ordered_json to_json(const EdaReport& r) {
  nlohmann::ordered_json j;
  j["records"] = r.records;
  j["images_read"] = r.images_read;
  j["label_mean"] = r.label_mean;
  j["label_std"] = r.label_std;
  j["histograms"] = {{"width", histogram_json(r.width)},
                     {"height", histogram_json(r.height)},
                     {"ratio", histogram_json(r.ratio)},
                     {"pawpularity", histogram_json(r.pawpularity)}};
  auto corr = nlohmann::ordered_json::array();
  for (const auto& c : r.correlations) {
    corr.push_back({{"feature", c.feature}, {"r", c.r}, {"defined", c.defined}});
  }
  j["correlations"] = corr;
  auto groups = nlohmann::ordered_json::array();
  std::size_t in_groups = 0;
  for (const auto& g : r.duplicates) {
    in_groups += g.ids.size();
    nlohmann::ordered_json gj{{"ids", g.ids}, {"max_distance", g.max_distance}};
    gj["label_spread"] = g.label_spread ? nlohmann::ordered_json(*g.label_spread) : nlohmann::ordered_json();
    groups.push_back(std::move(gj));
  }
  j["duplicates"] = {{"threshold", r.duplicate_threshold},
                     {"groups", r.duplicates.size()},
                     {"images_in_groups", in_groups},
                     {"members", groups}};
  if (!r.by_species.empty() || !r.by_count.empty()) {
    j["annotations"] = {{"by_species", stats_json(r.by_species)}, {"by_count", stats_json(r.by_count)}};
  }
  j["warnings"] = r.warnings;
  return j;
}

void write_histogram_csv(std::ostream& out, const Histogram& h) {
  out << "bin_low,bin_high,count\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    out << fmt::format("{},{},{}\n", h.edges[i], h.edges[i + 1], h.counts[i]);
  }
}

void write_eda_report(const EdaReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write = [&](const std::string& name, auto&& body) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw IoError("cannot write " + (dir / name).string());
    body(out);
    if (!out) throw IoError("write failed: " + (dir / name).string());
  };
  write("eda_report.json", [&](std::ostream& o) { o << to_json(report).dump(2) << '\n'; });
  write("width_hist.csv", [&](std::ostream& o) { write_histogram_csv(o, report.width); });
  write("height_hist.csv", [&](std::ostream& o) { write_histogram_csv(o, report.height); });
  write("ratio_hist.csv", [&](std::ostream& o) { write_histogram_csv(o, report.ratio); });
  write("pawpularity_hist.csv", [&](std::ostream& o) { write_histogram_csv(o, report.pawpularity); });
}

}  // namespace pawfuse
