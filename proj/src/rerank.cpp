#include "reid/rerank.hpp"

#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace reid {

namespace {

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

void check_blocks(const Eigen::Ref<const Eigen::MatrixXd>& qg,
                  const Eigen::Ref<const Eigen::MatrixXd>& qq,
                  const Eigen::Ref<const Eigen::MatrixXd>& gg) {
  if (qq.rows() != qg.rows() || qq.cols() != qg.rows() || gg.rows() != qg.cols() ||
      gg.cols() != qg.cols()) {
    std::ostringstream os;
    os << "inconsistent distance blocks: qg " << qg.rows() << "x" << qg.cols() << ", qq "
       << qq.rows() << "x" << qq.cols() << ", gg " << gg.rows() << "x" << gg.cols();
    throw ValidationError(os.str());
  }
  if (!qg.allFinite() || !qq.allFinite() || !gg.allFinite())
    throw ValidationError("distance blocks hold non-finite values");
}

// Entries of `list` whose own top-(depth) list contains `self`.
std::vector<Index> reciprocal(const std::vector<std::vector<Index>>& lists, Index self, Index depth) {
  std::vector<Index> out;
  const auto& forward = lists[static_cast<std::size_t>(self)];
  for (Index i = 0; i < depth; ++i) {
    const Index c = forward[static_cast<std::size_t>(i)];
    const auto& back = lists[static_cast<std::size_t>(c)];
    if (std::find(back.begin(), back.begin() + depth, self) != back.begin() + depth)
      out.push_back(c);
  }
  return out;
}

}  // namespace

void KReciprocalParams::validate() const {
  if (k1 < 1 || k2 < 1) throw ValidationError("k1 and k2 must be positive");
  if (k2 > k1) throw ValidationError("k2 must not exceed k1");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("lambda must lie in [0, 1]");
}

std::string_view to_string(EcnMode mode) {
  return mode == EcnMode::rank_dist ? "rank-dist" : "orig-dist";
}

void EcnParams::validate() const {
  if (t < 1) throw ValidationError("ECN t must be at least 1");
}

Eigen::MatrixXd assemble_union(const Eigen::Ref<const Eigen::MatrixXd>& dist_qg,
                               const Eigen::Ref<const Eigen::MatrixXd>& dist_qq,
                               const Eigen::Ref<const Eigen::MatrixXd>& dist_gg) {
  check_blocks(dist_qg, dist_qq, dist_gg);
  const Index q = dist_qg.rows();
  const Index n = q + dist_qg.cols();
  Eigen::MatrixXd all(n, n);
  all.topLeftCorner(q, q) = dist_qq;
  all.topRightCorner(q, n - q) = dist_qg;
  all.bottomLeftCorner(n - q, q) = dist_qg.transpose();
  all.bottomRightCorner(n - q, n - q) = dist_gg;
  return all;
}

std::vector<std::vector<Index>> neighbor_lists(const Eigen::MatrixXd& dist, Index depth) {
  const Index n = dist.rows();
  depth = std::min(depth, n);
  std::vector<std::vector<Index>> lists(static_cast<std::size_t>(n));
  parallel_for(n, [&](Index i) {
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    auto before = [&](Index a, Index b) {
      if (a == i || b == i) return a == i && b != i;
      const double da = dist(i, a), db = dist(i, b);
      return da < db || (da == db && a < b);
    };
    std::partial_sort(order.begin(), order.begin() + depth, order.end(), before);
    order.resize(static_cast<std::size_t>(depth));
    lists[static_cast<std::size_t>(i)] = std::move(order);
  });
  return lists;
}

Eigen::MatrixXd k_reciprocal_rerank(const Eigen::Ref<const Eigen::MatrixXd>& dist_qg,
                                    const Eigen::Ref<const Eigen::MatrixXd>& dist_qq,
                                    const Eigen::Ref<const Eigen::MatrixXd>& dist_gg,
                                    const KReciprocalParams& params) {
  params.validate();
  Eigen::MatrixXd orig = assemble_union(dist_qg, dist_qq, dist_gg).array().square();
  const Index q = dist_qg.rows();
  const Index n = orig.rows();
  if (params.k1 >= n) {
    std::ostringstream os;
    os << "k1 too large for gallery: k1=" << params.k1 << " but the union holds " << n << " items";
    throw ValidationError(os.str());
  }
  for (Index i = 0; i < n; ++i) {
    const double peak = orig.row(i).maxCoeff();
    if (peak > 0.0) orig.row(i) /= peak;
  }

  const Index depth = params.k1 + 1;
  // numpy-style half-to-even rounding of k1 / 2
  const Index half_depth = static_cast<Index>(std::nearbyint(params.k1 / 2.0)) + 1;
  const auto ranks = neighbor_lists(orig, depth);

  std::vector<std::vector<Index>> expansions(static_cast<std::size_t>(n));
  parallel_for(n, [&](Index i) {
    const auto recip = reciprocal(ranks, i, depth);
    std::vector<Index> expansion = recip;
    std::vector<Index> sorted_recip = recip;
    std::sort(sorted_recip.begin(), sorted_recip.end());
    for (Index candidate : recip) {
      auto cand = reciprocal(ranks, candidate, half_depth);
      std::sort(cand.begin(), cand.end());
      std::vector<Index> shared;
      std::set_intersection(cand.begin(), cand.end(), sorted_recip.begin(), sorted_recip.end(),
                            std::back_inserter(shared));
      if (static_cast<double>(shared.size()) > 2.0 / 3.0 * static_cast<double>(cand.size()))
        expansion.insert(expansion.end(), cand.begin(), cand.end());
    }
    std::sort(expansion.begin(), expansion.end());
    expansion.erase(std::unique(expansion.begin(), expansion.end()), expansion.end());
    expansions[static_cast<std::size_t>(i)] = std::move(expansion);
  });

  std::vector<Eigen::Triplet<double>> triplets;
  for (Index i = 0; i < n; ++i) {
    const auto& members = expansions[static_cast<std::size_t>(i)];
    double total = 0.0;
    for (Index j : members) total += std::exp(-orig(i, j));
    for (Index j : members) triplets.emplace_back(i, j, std::exp(-orig(i, j)) / total);
  }
  SparseRows encoding(n, n);
  encoding.setFromTriplets(triplets.begin(), triplets.end());

  if (params.k2 > 1) {
    std::vector<Eigen::Triplet<double>> averaging;
    for (Index i = 0; i < n; ++i)
      for (Index k = 0; k < params.k2; ++k)
        averaging.emplace_back(i, ranks[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)],
                               1.0 / params.k2);
    SparseRows mean_op(n, n);
    mean_op.setFromTriplets(averaging.begin(), averaging.end());
    encoding = (mean_op * encoding).pruned();
  }

  // Column-major copy acts as the inverted index feature -> items.
  const Eigen::SparseMatrix<double, Eigen::ColMajor> inverted = encoding;
  Eigen::MatrixXd jaccard(q, n);
  parallel_for(q, [&](Index i) {
    Eigen::VectorXd shared = Eigen::VectorXd::Zero(n);
    for (SparseRows::InnerIterator f(encoding, i); f; ++f) {
      for (decltype(inverted)::InnerIterator it(inverted, f.col()); it; ++it)
        shared[it.row()] += std::min(f.value(), it.value());
    }
    jaccard.row(i) = (1.0 - shared.array() / (2.0 - shared.array())).transpose();
  });

  const double lambda = params.lambda;
  Eigen::MatrixXd out = (1.0 - lambda) * jaccard.rightCols(n - q) + lambda * orig.block(0, q, q, n - q);
  return out.cwiseMax(0.0);
}

Eigen::MatrixXd ecn_rerank(const Eigen::Ref<const Eigen::MatrixXd>& dist_qg,
                           const Eigen::Ref<const Eigen::MatrixXd>& dist_qq,
                           const Eigen::Ref<const Eigen::MatrixXd>& dist_gg,
                           const EcnParams& params) {
  params.validate();
  const Eigen::MatrixXd all = assemble_union(dist_qg, dist_qq, dist_gg);
  const Index q = dist_qg.rows();
  const Index n = all.rows();
  if (params.t >= n) {
    std::ostringstream os;
    os << "ECN t=" << params.t << " too large: the union holds " << n << " items";
    throw ValidationError(os.str());
  }

  const bool by_rank = params.mode == EcnMode::rank_dist;
  const auto lists = neighbor_lists(all, by_rank ? n : params.t + 1);

  Eigen::MatrixXd pair_dist;
  if (by_rank) {
    Eigen::MatrixXd position(n, n);
    parallel_for(n, [&](Index a) {
      const auto& order = lists[static_cast<std::size_t>(a)];
      for (Index pos = 0; pos < n; ++pos) position(a, order[static_cast<std::size_t>(pos)]) = static_cast<double>(pos);
    });
    pair_dist = 0.5 * (position + position.transpose());
  }
  const Eigen::MatrixXd& d = by_rank ? pair_dist : all;

  const Index t = params.t;
  Eigen::MatrixXd out(q, n - q);
  parallel_for(q, [&](Index p) {
    const auto& np = lists[static_cast<std::size_t>(p)];
    for (Index g = q; g < n; ++g) {
      const auto& ng = lists[static_cast<std::size_t>(g)];
      double sum = 0.0;
      for (Index i = 1; i <= t; ++i) {
        sum += d(np[static_cast<std::size_t>(i)], g);
        sum += d(ng[static_cast<std::size_t>(i)], p);
      }
      out(p, g - q) = sum / (2.0 * static_cast<double>(t));
    }
  });
  return out;
}

}  // namespace reid
