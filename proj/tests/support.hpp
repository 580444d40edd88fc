#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "reid/embedding.hpp"
#include "reid/random.hpp"
#include "reid/records.hpp"

namespace reid::test {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(REID_FIXTURE_DIR) / name;
}

inline nlohmann::json expected_values() {
  std::ifstream in(fixture("expected.json"));
  return nlohmann::json::parse(in);
}

/// Fresh per-test scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::path(REID_SCRATCH_DIR) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline Eigen::MatrixXd random_matrix(Rng& rng, Index rows, Index cols, double lo = -1.0, double hi = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
  return m;
}

inline EmbeddingSet random_embeddings(Rng& rng, Index n, Index d, const std::string& prefix = "x") {
  EmbeddingSet set;
  set.vectors = random_matrix(rng, n, d).cast<float>();
  for (Index i = 0; i < n; ++i) {
    set.image_ids.push_back(prefix + std::to_string(i));
    set.person_ids.push_back(static_cast<int>(rng.below(5)));
    set.camera_ids.push_back(static_cast<int>(rng.below(3)));
  }
  return set;
}

/// Random points in the plane and their symmetric Euclidean distance,
/// split into query/gallery blocks.
struct DistanceBlocks {
  Eigen::MatrixXd qg, qq, gg;
};

inline DistanceBlocks random_blocks(Rng& rng, Index q, Index g, Index dim = 4) {
  const Eigen::MatrixXd pts = random_matrix(rng, q + g, dim);
  Eigen::MatrixXd all(q + g, q + g);
  for (Index i = 0; i < q + g; ++i)
    for (Index j = 0; j < q + g; ++j) all(i, j) = (pts.row(i) - pts.row(j)).norm();
  return {all.topRightCorner(q, g), all.topLeftCorner(q, q), all.bottomRightCorner(g, g)};
}

/// Stable argsort of a row (ties by index).
inline std::vector<Index> argsort(const Eigen::Ref<const Eigen::VectorXd>& row) {
  std::vector<Index> order(static_cast<std::size_t>(row.size()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Index>(i);
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return row[a] < row[b]; });
  return order;
}

}  // namespace reid::test
