#include "reid/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <unordered_set>

#include "reid/error.hpp"
#include "reid/io.hpp"
#include "reid/random.hpp"

namespace reid {

namespace {

template <typename T>
std::string join(const T& items) {
  std::ostringstream os;
  bool first = true;
  for (const auto& item : items) {
    if (!first) os << ", ";
    os << item;
    first = false;
  }
  return os.str();
}

template <typename Parse>
auto parse_field(const std::string& text, const std::string& where, Parse parse) {
  try {
    std::size_t used = 0;
    auto v = parse(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw FormatError(FormatErrc::schema, where + ": cannot parse '" + text + "'");
  }
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void DatasetManifest::validate() const {
  std::unordered_set<std::string> seen;
  for (const auto& r : records) {
    if (!seen.insert(r.image_id).second)
      throw ValidationError(name + ": duplicate image_id '" + r.image_id + "'");
    if (r.det_confidence && !std::isfinite(*r.det_confidence))
      throw ValidationError(name + ": non-finite det_confidence for '" + r.image_id + "'");
  }
}

DatasetManifest parse_manifest(std::string_view text, std::string name) {
  const CsvTable table = parse_csv(text, name);
  const auto id_col = table.column("image_id");
  const auto pid_col = table.column("person_id");
  const auto cam_col = table.column("camera_id");
  auto optional_col = [&](std::string_view col) -> std::optional<std::size_t> {
    if (!table.has_column(col)) return std::nullopt;
    return table.column(col);
  };
  const auto split_col = optional_col("split");
  const auto view_col = optional_col("view_label");
  const auto conf_col = optional_col("det_confidence");
  const auto frame_col = optional_col("frame_id");
  const auto track_col = optional_col("tracklet_id");

  auto to_int = [](const std::string& s, std::size_t* used) { return std::stoi(s, used); };
  auto to_ll = [](const std::string& s, std::size_t* used) { return std::stoll(s, used); };
  auto to_double = [](const std::string& s, std::size_t* used) { return std::stod(s, used); };

  DatasetManifest manifest{std::move(name), {}};
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::string where = manifest.name + ": row " + std::to_string(i + 1);
    ImageRecord r;
    r.image_id = row[id_col];
    if (r.image_id.empty()) throw FormatError(FormatErrc::schema, where + ": empty image_id");
    r.person_id = parse_field(row[pid_col], where + " person_id", to_int);
    r.camera_id = parse_field(row[cam_col], where + " camera_id", to_int);
    if (split_col && !row[*split_col].empty()) {
      const auto split = parse_split(row[*split_col]);
      if (!split) throw FormatError(FormatErrc::schema, where + ": unknown split '" + row[*split_col] + "'");
      r.split = *split;
    }
    if (view_col && !row[*view_col].empty()) {
      const auto view = parse_view_label(row[*view_col]);
      if (!view) throw FormatError(FormatErrc::schema, where + ": unknown view_label '" + row[*view_col] + "'");
      r.view_label = *view;
    }
    if (conf_col && !row[*conf_col].empty())
      r.det_confidence = parse_field(row[*conf_col], where + " det_confidence", to_double);
    if (frame_col && !row[*frame_col].empty())
      r.frame_id = parse_field(row[*frame_col], where + " frame_id", to_ll);
    if (track_col && !row[*track_col].empty()) r.tracklet_id = row[*track_col];
    manifest.records.push_back(std::move(r));
  }
  manifest.validate();
  return manifest;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  return parse_manifest(read_file(path), path.string());
}

std::string format_manifest(const DatasetManifest& manifest) {
  std::string out(kManifestHeader);
  out.push_back('\n');
  for (const auto& r : manifest.records) {
    out += r.image_id + ',' + std::to_string(r.person_id) + ',' + std::to_string(r.camera_id) + ',';
    out += to_string(r.split);
    out += ',';
    if (r.view_label) out += to_string(*r.view_label);
    out += ',';
    if (r.det_confidence) out += format_double(*r.det_confidence);
    out += ',';
    if (r.frame_id) out += std::to_string(*r.frame_id);
    out += ',';
    if (r.tracklet_id) out += *r.tracklet_id;
    out.push_back('\n');
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  write_file(path, format_manifest(manifest));
}

IdSplit id_split(const DatasetManifest& manifest) {
  IdSplit ids;
  for (const auto& r : manifest.records) {
    if (r.person_id == kJunkPersonId) continue;
    if (r.split == Split::train)
      ids.train.insert(r.person_id);
    else if (r.split != Split::distractor)
      ids.test.insert(r.person_id);
  }
  return ids;
}

// -- X-MARS ------------------------------------------------------------------

namespace {

struct TrackletInfo {
  int person_id = 0;
  int camera_id = 0;
};

std::map<std::string, TrackletInfo> collect_tracklets(const DatasetManifest& mars) {
  std::map<std::string, TrackletInfo> tracklets;
  for (const auto& r : mars.records) {
    if (!r.tracklet_id)
      throw ValidationError(mars.name + ": record '" + r.image_id + "' has no tracklet_id");
    auto [it, inserted] = tracklets.emplace(*r.tracklet_id, TrackletInfo{r.person_id, r.camera_id});
    if (!inserted && (it->second.person_id != r.person_id || it->second.camera_id != r.camera_id))
      throw ValidationError(mars.name + ": tracklet '" + *r.tracklet_id +
                            "' mixes person or camera ids");
  }
  return tracklets;
}

}  // namespace

SplitSpec generate_xmars_split(const DatasetManifest& mars, const std::set<int>& market_train_ids,
                               const std::set<int>& market_test_ids, std::uint64_t seed) {
  std::vector<int> both;
  std::set_intersection(market_train_ids.begin(), market_train_ids.end(), market_test_ids.begin(),
                        market_test_ids.end(), std::back_inserter(both));
  if (!both.empty())
    throw ValidationError("Market train and test id sets overlap: " + join(both));

  const auto tracklets = collect_tracklets(mars);
  std::set<int> orphans;
  for (const auto& [id, info] : tracklets) {
    if (info.person_id == kJunkPersonId) continue;
    if (!market_train_ids.contains(info.person_id) && !market_test_ids.contains(info.person_id))
      orphans.insert(info.person_id);
  }
  if (!orphans.empty())
    throw ValidationError("MARS ids found in neither Market split: " + join(orphans));

  SplitSpec split;
  split.seed = seed;
  // (person, camera) -> tracklets, both levels ordered for a stable draw order.
  std::map<std::pair<int, int>, std::vector<std::string>> test_groups;
  for (const auto& [id, info] : tracklets) {
    if (info.person_id == kJunkPersonId) {
      split.junk_tracklets.insert(id);
    } else if (market_train_ids.contains(info.person_id)) {
      split.train_ids.insert(info.person_id);
      split.train_tracklets.insert(id);
    } else {
      split.test_ids.insert(info.person_id);
      split.test_tracklets.insert(id);
      test_groups[{info.person_id, info.camera_id}].push_back(id);
    }
  }

  Rng rng(seed);
  for (const auto& [key, group] : test_groups)
    split.query_tracklets.insert(group[static_cast<std::size_t>(rng.below(group.size()))]);
  return split;
}

SplitVerification verify_split(const SplitSpec& split, const DatasetManifest& mars,
                               const std::set<int>& market_train_ids,
                               const std::set<int>& market_test_ids) {
  SplitVerification v;
  auto fail = [&](bool& flag, std::string msg) {
    flag = false;
    v.problems.push_back(std::move(msg));
  };
  for (int id : split.train_ids) {
    if (split.test_ids.contains(id)) fail(v.disjoint, "id " + std::to_string(id) + " on both sides");
    if (!market_train_ids.contains(id))
      fail(v.train_subset, "train id " + std::to_string(id) + " not in Market train");
  }
  for (int id : split.test_ids)
    if (!market_test_ids.contains(id))
      fail(v.test_subset, "test id " + std::to_string(id) + " not in Market test");

  for (const auto& [id, info] : collect_tracklets(mars)) {
    const int sides = int(split.train_tracklets.contains(id)) + int(split.test_tracklets.contains(id)) +
                      int(split.junk_tracklets.contains(id));
    if (sides != 1) {
      fail(v.tracklet_partition, "tracklet '" + id + "' appears on " + std::to_string(sides) + " sides");
      continue;
    }
    if (split.train_tracklets.contains(id) && !split.train_ids.contains(info.person_id))
      fail(v.tracklet_partition, "train tracklet '" + id + "' has a non-train id");
    if (split.test_tracklets.contains(id) && !split.test_ids.contains(info.person_id))
      fail(v.tracklet_partition, "test tracklet '" + id + "' has a non-test id");
  }
  for (const auto& id : split.query_tracklets)
    if (!split.test_tracklets.contains(id))
      fail(v.queries_in_test, "query tracklet '" + id + "' is not a test tracklet");
  return v;
}

OverlapMatrix overlap_report(const IdSplit& a, const IdSplit& b) {
  auto count = [](const std::set<int>& x, const std::set<int>& y) {
    std::size_t n = 0;
    for (int id : x) n += y.contains(id) ? 1 : 0;
    return n;
  };
  return {{{count(a.train, b.train), count(a.train, b.test)},
           {count(a.test, b.train), count(a.test, b.test)}}};
}

// -- Distractors -------------------------------------------------------------

std::vector<std::size_t> sample_distractor_indices(std::size_t pool_size, std::size_t n,
                                                   std::uint64_t seed) {
  if (n > pool_size) {
    std::ostringstream os;
    os << "cannot draw " << n << " distractors from a pool of " << pool_size;
    throw ValidationError(os.str());
  }
  std::vector<std::size_t> indices(pool_size);
  for (std::size_t i = 0; i < pool_size; ++i) indices[i] = i;
  Rng rng(seed);
  rng.shuffle(indices);
  indices.resize(n);
  std::sort(indices.begin(), indices.end());
  return indices;
}

DatasetManifest inject_distractors(const DatasetManifest& gallery, const DatasetManifest& pool,
                                   std::size_t n, std::uint64_t seed) {
  for (const auto& r : pool.records)
    if (r.person_id != kJunkPersonId)
      throw ValidationError(pool.name + ": distractor '" + r.image_id + "' has person_id " +
                            std::to_string(r.person_id) + ", expected " + std::to_string(kJunkPersonId));
  DatasetManifest out = gallery;
  for (std::size_t i : sample_distractor_indices(pool.records.size(), n, seed)) {
    ImageRecord r = pool.records[i];
    r.split = Split::distractor;
    out.records.push_back(std::move(r));
  }
  out.validate();
  return out;
}

// -- Threshold sweep ---------------------------------------------------------

bool is_detection(const ImageRecord& record) {
  return record.split == Split::test || record.split == Split::gallery ||
         record.split == Split::distractor;
}

std::vector<SweepResult> threshold_sweep(const DatasetManifest& manifest, long long num_frames,
                                         const std::vector<double>& targets) {
  if (num_frames <= 0) throw ValidationError("number of frames must be positive");
  std::vector<double> confidences;
  for (const auto& r : manifest.records) {
    if (!is_detection(r)) continue;
    if (!r.det_confidence || !r.frame_id)
      throw ValidationError(manifest.name + ": detection '" + r.image_id +
                            "' lacks det_confidence or frame_id");
    confidences.push_back(*r.det_confidence);
  }
  if (confidences.empty()) throw ValidationError(manifest.name + ": no detection records");
  std::sort(confidences.begin(), confidences.end(), std::greater<>());

  // Achievable operating points: threshold = a distinct confidence, keeping
  // every detection at or above it.
  struct Level {
    double threshold;
    std::size_t kept;
  };
  std::vector<Level> levels;
  for (std::size_t i = 0; i < confidences.size(); ++i)
    if (i + 1 == confidences.size() || confidences[i + 1] < confidences[i])
      levels.push_back({confidences[i], i + 1});

  const double frames = static_cast<double>(num_frames);
  const double max_average = static_cast<double>(confidences.size()) / frames;
  std::vector<SweepResult> results;
  for (double target : targets) {
    if (!(target > 0.0) || !std::isfinite(target))
      throw ValidationError("sweep targets must be positive");
    if (target > max_average) {
      std::ostringstream os;
      os << "target " << target << " detections per frame is unreachable; maximum achievable average is "
         << max_average;
      throw ComputationError(os.str());
    }
    const Level* best = &levels.front();
    double best_gap = std::abs(static_cast<double>(best->kept) / frames - target);
    for (const auto& level : levels) {
      const double avg = static_cast<double>(level.kept) / frames;
      const double gap = std::abs(avg - target);
      // strictly closer wins; equal gaps keep the earlier (lower-average) level
      if (gap < best_gap) {
        best = &level;
        best_gap = gap;
      }
    }
    SweepResult res;
    res.target = target;
    res.threshold = best->threshold;
    res.kept_detections = best->kept;
    res.achieved_average = static_cast<double>(best->kept) / frames;
    res.manifest.name = manifest.name;
    for (const auto& r : manifest.records)
      if (!is_detection(r) || *r.det_confidence >= best->threshold) res.manifest.records.push_back(r);
    results.push_back(std::move(res));
  }
  return results;
}

}  // namespace reid
