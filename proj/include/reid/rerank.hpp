#pragma once

#include <Eigen/Core>
#include <string_view>
#include <vector>

#include "reid/embedding.hpp"

namespace reid {

/// k-reciprocal encoding parameters (defaults of the original method).
struct KReciprocalParams {
  int k1 = 20;
  int k2 = 6;
  double lambda = 0.3;

  void validate() const;
};

enum class EcnMode { rank_dist, orig_dist };

std::string_view to_string(EcnMode mode);

struct EcnParams {
  int t = 4;
  EcnMode mode = EcnMode::rank_dist;

  void validate() const;
};

/// Assembles the symmetric (Q+G)^2 distance over queries followed by gallery.
Eigen::MatrixXd assemble_union(const Eigen::Ref<const Eigen::MatrixXd>& dist_qg,
                               const Eigen::Ref<const Eigen::MatrixXd>& dist_qq,
                               const Eigen::Ref<const Eigen::MatrixXd>& dist_gg);

/// Row-wise neighbor order over a square distance: self first, then ascending
/// distance, ties by ascending index. Only the first `depth` entries are kept.
std::vector<std::vector<Index>> neighbor_lists(const Eigen::MatrixXd& dist, Index depth);

/// Q x G re-ranked distance: (1 - lambda) * Jaccard + lambda * d^2 / max_row(d^2).
/// Jaccard distances come from Gaussian-weighted k-reciprocal sets with
/// k1/2 candidate expansion and k2 local query expansion.
Eigen::MatrixXd k_reciprocal_rerank(const Eigen::Ref<const Eigen::MatrixXd>& dist_qg,
                                    const Eigen::Ref<const Eigen::MatrixXd>& dist_qq,
                                    const Eigen::Ref<const Eigen::MatrixXd>& dist_gg,
                                    const KReciprocalParams& params = {});

/// Q x G Expanded Cross Neighborhood distance
///   (1 / 2t) * [sum_i d(N_i(p), g) + sum_i d(N_i(g), p)]
/// over each item's t nearest neighbors in the union set (self excluded).
/// rank_dist uses the mutual rank distance (pos_a(b) + pos_b(a)) / 2.
Eigen::MatrixXd ecn_rerank(const Eigen::Ref<const Eigen::MatrixXd>& dist_qg,
                           const Eigen::Ref<const Eigen::MatrixXd>& dist_qq,
                           const Eigen::Ref<const Eigen::MatrixXd>& dist_gg,
                           const EcnParams& params = {});

}  // namespace reid
