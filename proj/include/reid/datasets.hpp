#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "reid/records.hpp"

namespace reid {

/// Named list of image records.
struct DatasetManifest {
  std::string name;
  std::vector<ImageRecord> records;

  /// Unique image ids, finite confidences.
  void validate() const;
};

/// Exact header written by write_manifest.
inline constexpr std::string_view kManifestHeader =
    "image_id,person_id,camera_id,split,view_label,det_confidence,frame_id,tracklet_id";

/// Reads a manifest CSV. Only image_id, person_id and camera_id are required;
/// the other columns are optional and default to absent (split defaults to test).
DatasetManifest parse_manifest(std::string_view text, std::string name);
DatasetManifest read_manifest(const std::filesystem::path& path);
std::string format_manifest(const DatasetManifest& manifest);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

/// Identity sets of the two sides of a dataset. Query and gallery records count
/// towards the test side; junk ids are ignored.
struct IdSplit {
  std::set<int> train;
  std::set<int> test;
};

IdSplit id_split(const DatasetManifest& manifest);

// -- X-MARS ------------------------------------------------------------------

inline constexpr std::string_view kQueryRule =
    "one tracklet per (test id, camera) pair, drawn uniformly with the recorded seed";

/// Tracklet-level train/test reassignment following another dataset's identity split.
struct SplitSpec {
  std::set<int> train_ids;
  std::set<int> test_ids;
  std::set<std::string> train_tracklets;
  std::set<std::string> test_tracklets;
  std::set<std::string> query_tracklets;
  std::set<std::string> junk_tracklets;  // junk-id tracklets, gallery side only
  std::uint64_t seed = 0;
  std::string query_rule{kQueryRule};
};

/// Assigns every identity of `mars` to train or test according to the Market
/// split, moves all tracklets with their identity and draws query tracklets.
/// Identities found in neither Market set are an error listing them all.
SplitSpec generate_xmars_split(const DatasetManifest& mars, const std::set<int>& market_train_ids,
                               const std::set<int>& market_test_ids, std::uint64_t seed);

struct SplitVerification {
  bool disjoint = true;
  bool train_subset = true;
  bool test_subset = true;
  bool tracklet_partition = true;
  bool queries_in_test = true;
  std::vector<std::string> problems;

  bool ok() const { return problems.empty(); }
};

SplitVerification verify_split(const SplitSpec& split, const DatasetManifest& mars,
                               const std::set<int>& market_train_ids,
                               const std::set<int>& market_test_ids);

/// overlap[a_part][b_part] = |a_part ∩ b_part|, parts ordered {train, test}.
using OverlapMatrix = std::array<std::array<std::size_t, 2>, 2>;
OverlapMatrix overlap_report(const IdSplit& a, const IdSplit& b);

// -- Distractors -------------------------------------------------------------

/// n distinct indices of [0, pool_size), drawn with a seeded shuffle, returned ascending.
std::vector<std::size_t> sample_distractor_indices(std::size_t pool_size, std::size_t n,
                                                   std::uint64_t seed);

/// Gallery records followed by n sampled pool records (pool order kept), each
/// marked as a distractor. Pool records must carry the junk id.
DatasetManifest inject_distractors(const DatasetManifest& gallery, const DatasetManifest& pool,
                                   std::size_t n, std::uint64_t seed);

// -- Detection threshold sweep -----------------------------------------------

struct SweepResult {
  double target = 0.0;
  double threshold = 0.0;
  double achieved_average = 0.0;
  std::size_t kept_detections = 0;
  DatasetManifest manifest;
};

/// True for records that are detector output (test, gallery, distractor splits).
bool is_detection(const ImageRecord& record);

/// For each target average of detections per frame, picks the confidence
/// threshold whose kept count / num_frames is closest to the target (ties go
/// to the lower average). Non-detection records pass through unfiltered.
std::vector<SweepResult> threshold_sweep(const DatasetManifest& manifest, long long num_frames,
                                         const std::vector<double>& targets);

}  // namespace reid
