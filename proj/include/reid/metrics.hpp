#pragma once

#include <Eigen/Core>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "reid/embedding.hpp"
#include "reid/records.hpp"

namespace reid {

/// Single-query cross-camera evaluation settings.
struct EvalProtocolConfig {
  bool cross_camera = true;
  int junk_id = kJunkPersonId;
  std::vector<int> ranks_reported{1, 5, 10, 50};

  void validate() const;
};

/// Valid gallery entries of one query, best match first.
struct RankedList {
  std::string query_id;
  std::vector<Index> ordered_gallery;
  std::vector<bool> relevance;  // parallel to ordered_gallery
};

struct EvalReport {
  double map = 0.0;
  std::map<int, double> cmc;         // reported ranks only
  std::vector<double> cmc_curve;     // cmc_curve[x - 1] = CMC(x), x = 1..G
  std::vector<double> per_query_ap;  // evaluable queries, in query order
  std::vector<std::string> evaluated_queries;
  std::vector<std::string> excluded_queries;
  Index num_valid_queries = 0;
};

/// Gallery entry j is masked out iff it shares both person id and camera with
/// the query (cross-camera protocol only). Junk ids stay valid as negatives.
std::vector<bool> build_valid_mask(const ImageRecord& query, std::span<const ImageRecord> gallery,
                                   const EvalProtocolConfig& config);

/// Gallery j is relevant iff it carries the query's person id and that id is not junk.
std::vector<bool> relevance_flags(const ImageRecord& query, std::span<const ImageRecord> gallery,
                                  const EvalProtocolConfig& config);

/// Valid indices by ascending distance, ties by ascending index. `relevant`
/// may be empty, in which case every entry is marked non-relevant.
RankedList rank_gallery(const Eigen::Ref<const Eigen::VectorXd>& dist_row,
                        const std::vector<bool>& mask, const std::vector<bool>& relevant = {});

/// Mean of the precisions at every relevant position. std::nullopt when the
/// list contains no relevant entry (the query is not evaluable).
std::optional<double> average_precision(const RankedList& ranked);

/// 1-based position of the first relevant entry, if any.
std::optional<Index> first_hit(const RankedList& ranked);

EvalReport evaluate(const DistanceMatrix& dist, std::span<const ImageRecord> query,
                    std::span<const ImageRecord> gallery, const EvalProtocolConfig& config = {});

/// Round half away from zero to `decimals` places.
double round_half_away(double value, int decimals);

/// 100 * (value - base) / base, rounded to one decimal.
double relative_drop(double base, double value);

}  // namespace reid
