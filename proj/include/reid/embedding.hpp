#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "reid/error.hpp"
#include "reid/parallel.hpp"
#include "reid/records.hpp"

namespace reid {

using Eigen::Index;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// N embedding vectors (rows) with per-row identity metadata.
struct EmbeddingSet {
  RowMatrix<float> vectors;
  std::vector<std::string> image_ids;
  std::vector<int> person_ids;
  std::vector<int> camera_ids;

  Index size() const { return vectors.rows(); }
  Index dim() const { return vectors.cols(); }

  /// Throws ValidationError / FormatError(non_finite) if an invariant is broken.
  void validate() const;

  /// Rows as ImageRecord (split left at its default).
  std::vector<ImageRecord> records() const;

  /// Sub-set made of the given rows, in order.
  EmbeddingSet select(const std::vector<Index>& rows) const;
};

/// Concatenates rows of `b` after rows of `a`. Dimensions must agree.
EmbeddingSet concat(const EmbeddingSet& a, const EmbeddingSet& b);

/// Q x G distances in double precision with row/column labels.
struct DistanceMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> query_ids;
  std::vector<std::string> gallery_ids;

  Index rows() const { return values.rows(); }
  Index cols() const { return values.cols(); }
  void validate() const;
};

/// Scales every row to unit Euclidean norm. Zero rows are rejected by image id.
EmbeddingSet l2_normalize(const EmbeddingSet& set);

DistanceMatrix euclidean_distance_matrix(const EmbeddingSet& query, const EmbeddingSet& gallery);
DistanceMatrix cosine_distance_matrix(const EmbeddingSet& query, const EmbeddingSet& gallery);

enum class DistanceKind { euclidean, cosine };
DistanceMatrix distance_matrix(const EmbeddingSet& query, const EmbeddingSet& gallery,
                               DistanceKind kind);

// Expression-level kernels. Rows are observations; accumulation is in double
// whatever the input scalar.

template <typename DerivedQ, typename DerivedG>
Eigen::MatrixXd pairwise_euclidean(const Eigen::MatrixBase<DerivedQ>& query,
                                   const Eigen::MatrixBase<DerivedG>& gallery) {
  const RowMatrix<double> q = query.template cast<double>();
  const RowMatrix<double> g = gallery.template cast<double>();
  Eigen::MatrixXd out(q.rows(), g.rows());
  parallel_for(q.rows(), [&](Index i) {
    out.row(i) = (g.rowwise() - q.row(i)).rowwise().squaredNorm().cwiseSqrt().transpose();
  });
  return out;
}

/// 1 - cos(q_i, g_j), clamped to [0, 2]. Rows must be non-zero.
template <typename DerivedQ, typename DerivedG>
Eigen::MatrixXd pairwise_cosine(const Eigen::MatrixBase<DerivedQ>& query,
                                const Eigen::MatrixBase<DerivedG>& gallery) {
  RowMatrix<double> q = query.template cast<double>();
  RowMatrix<double> g = gallery.template cast<double>();
  q.array().colwise() /= q.rowwise().norm().array();
  g.array().colwise() /= g.rowwise().norm().array();
  Eigen::MatrixXd out(q.rows(), g.rows());
  parallel_for(q.rows(), [&](Index i) {
    out.row(i) = (1.0 - (g * q.row(i).transpose()).array()).cwiseMax(0.0).cwiseMin(2.0).transpose();
  });
  return out;
}

}  // namespace reid
