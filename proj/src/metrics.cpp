#include "reid/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace reid {

void EvalProtocolConfig::validate() const {
  if (ranks_reported.empty()) throw ValidationError("ranks_reported must not be empty");
  for (std::size_t i = 0; i < ranks_reported.size(); ++i) {
    if (ranks_reported[i] < 1) throw ValidationError("reported ranks must be >= 1");
    if (i > 0 && ranks_reported[i] <= ranks_reported[i - 1])
      throw ValidationError("reported ranks must be strictly ascending");
  }
}

std::vector<bool> build_valid_mask(const ImageRecord& query, std::span<const ImageRecord> gallery,
                                   const EvalProtocolConfig& config) {
  std::vector<bool> mask(gallery.size(), true);
  if (!config.cross_camera) return mask;
  for (std::size_t j = 0; j < gallery.size(); ++j) {
    const auto& g = gallery[j];
    if (g.person_id != config.junk_id && g.person_id == query.person_id &&
        g.camera_id == query.camera_id)
      mask[j] = false;
  }
  return mask;
}

std::vector<bool> relevance_flags(const ImageRecord& query, std::span<const ImageRecord> gallery,
                                  const EvalProtocolConfig& config) {
  std::vector<bool> rel(gallery.size(), false);
  if (query.person_id == config.junk_id) return rel;
  for (std::size_t j = 0; j < gallery.size(); ++j)
    rel[j] = gallery[j].person_id == query.person_id;
  return rel;
}

RankedList rank_gallery(const Eigen::Ref<const Eigen::VectorXd>& dist_row,
                        const std::vector<bool>& mask, const std::vector<bool>& relevant) {
  const auto g = static_cast<std::size_t>(dist_row.size());
  if (mask.size() != g) throw ValidationError("mask length does not match distance row");
  if (!relevant.empty() && relevant.size() != g)
    throw ValidationError("relevance length does not match distance row");

  RankedList out;
  for (std::size_t j = 0; j < g; ++j)
    if (mask[j]) out.ordered_gallery.push_back(static_cast<Index>(j));
  std::stable_sort(out.ordered_gallery.begin(), out.ordered_gallery.end(),
                   [&](Index a, Index b) { return dist_row[a] < dist_row[b]; });
  out.relevance.reserve(out.ordered_gallery.size());
  for (Index j : out.ordered_gallery)
    out.relevance.push_back(!relevant.empty() && relevant[static_cast<std::size_t>(j)]);
  return out;
}

std::optional<double> average_precision(const RankedList& ranked) {
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t pos = 0; pos < ranked.relevance.size(); ++pos) {
    if (!ranked.relevance[pos]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(pos + 1);
  }
  if (hits == 0) return std::nullopt;
  return sum / static_cast<double>(hits);
}

std::optional<Index> first_hit(const RankedList& ranked) {
  const auto it = std::find(ranked.relevance.begin(), ranked.relevance.end(), true);
  if (it == ranked.relevance.end()) return std::nullopt;
  return static_cast<Index>(it - ranked.relevance.begin()) + 1;
}

EvalReport evaluate(const DistanceMatrix& dist, std::span<const ImageRecord> query,
                    std::span<const ImageRecord> gallery, const EvalProtocolConfig& config) {
  config.validate();
  if (static_cast<Index>(query.size()) != dist.rows() ||
      static_cast<Index>(gallery.size()) != dist.cols()) {
    std::ostringstream os;
    os << "label arrays (" << query.size() << " queries, " << gallery.size()
       << " gallery) do not match the " << dist.rows() << "x" << dist.cols() << " distance matrix";
    throw ValidationError(os.str());
  }

  const auto q_count = query.size();
  std::vector<std::optional<double>> aps(q_count);
  std::vector<std::optional<Index>> hits(q_count);
  parallel_for(static_cast<Index>(q_count), [&](Index i) {
    const auto& q = query[static_cast<std::size_t>(i)];
    const auto ranked = rank_gallery(dist.values.row(i).transpose(),
                                     build_valid_mask(q, gallery, config),
                                     relevance_flags(q, gallery, config));
    aps[static_cast<std::size_t>(i)] = average_precision(ranked);
    hits[static_cast<std::size_t>(i)] = first_hit(ranked);
  });

  EvalReport report;
  std::vector<Index> hit_histogram(gallery.size() + 1, 0);
  for (std::size_t i = 0; i < q_count; ++i) {
    if (!aps[i]) {
      report.excluded_queries.push_back(query[i].image_id);
      continue;
    }
    report.per_query_ap.push_back(*aps[i]);
    report.evaluated_queries.push_back(query[i].image_id);
    ++hit_histogram[static_cast<std::size_t>(*hits[i])];
  }
  report.num_valid_queries = static_cast<Index>(report.per_query_ap.size());
  if (report.num_valid_queries == 0) throw ComputationError("no evaluable queries");

  const auto n = static_cast<double>(report.num_valid_queries);
  report.map = std::accumulate(report.per_query_ap.begin(), report.per_query_ap.end(), 0.0) / n;

  report.cmc_curve.resize(gallery.size());
  Index cumulative = 0;
  for (std::size_t x = 1; x <= gallery.size(); ++x) {
    cumulative += hit_histogram[x];
    report.cmc_curve[x - 1] = static_cast<double>(cumulative) / n;
  }
  for (int rank : config.ranks_reported) {
    const auto x = std::min<std::size_t>(static_cast<std::size_t>(rank), gallery.size());
    report.cmc[rank] = report.cmc_curve[x - 1];
  }
  return report;
}

double round_half_away(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(value * scale) / scale;
}

double relative_drop(double base, double value) {
  if (!(base > 0.0)) throw ValidationError("relative_drop: base must be positive");
  return round_half_away(100.0 * (value - base) / base, 1);
}

}  // namespace reid
