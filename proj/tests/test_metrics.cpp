#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "oracles/naive_eval.hpp"
#include "reid/error.hpp"
#include "reid/io.hpp"
#include "reid/metrics.hpp"
#include "support.hpp"

using namespace reid;

namespace {

ImageRecord rec(int pid, int cam, std::string id = "") {
  ImageRecord r;
  r.image_id = id.empty() ? "p" + std::to_string(pid) + "c" + std::to_string(cam) : id;
  r.person_id = pid;
  r.camera_id = cam;
  return r;
}

std::vector<ImageRecord> random_records(Rng& rng, Index n, int ids, int cams, const std::string& prefix,
                                        double junk_rate = 0.1) {
  std::vector<ImageRecord> out;
  for (Index i = 0; i < n; ++i) {
    const int pid = rng.uniform() < junk_rate ? -1 : static_cast<int>(rng.below(ids));
    out.push_back(rec(pid, static_cast<int>(rng.below(cams)), prefix + std::to_string(i)));
  }
  return out;
}

DistanceMatrix make_dist(const Eigen::MatrixXd& values, const std::vector<ImageRecord>& q,
                         const std::vector<ImageRecord>& g) {
  DistanceMatrix d;
  d.values = values;
  for (const auto& r : q) d.query_ids.push_back(r.image_id);
  for (const auto& r : g) d.gallery_ids.push_back(r.image_id);
  return d;
}

RankedList from_pattern(const std::vector<bool>& pattern) {
  RankedList list;
  list.relevance = pattern;
  for (std::size_t i = 0; i < pattern.size(); ++i) list.ordered_gallery.push_back(static_cast<Index>(i));
  return list;
}

}  // namespace

TEST_CASE("build_valid_mask") {
  const EvalProtocolConfig config;
  SUBCASE("definition case") {
    const std::vector<ImageRecord> gallery{rec(5, 1), rec(5, 2), rec(7, 1)};
    CHECK(build_valid_mask(rec(5, 1), gallery, config) == std::vector<bool>{false, true, true});
  }
  SUBCASE("distractors stay valid and non-relevant") {
    const std::vector<ImageRecord> gallery{rec(-1, 1), rec(-1, 2), rec(-1, 3)};
    CHECK(build_valid_mask(rec(5, 1), gallery, config) == std::vector<bool>(3, true));
    CHECK(relevance_flags(rec(5, 1), gallery, config) == std::vector<bool>(3, false));
  }
  SUBCASE("1000 random records against a per-record predicate") {
    Rng rng(101);
    const auto gallery = random_records(rng, 1000, 8, 4, "g", 0.2);
    for (const auto& query : random_records(rng, 20, 8, 4, "q", 0.2)) {
      const auto mask = build_valid_mask(query, gallery, config);
      const auto relevant = relevance_flags(query, gallery, config);
      for (std::size_t j = 0; j < gallery.size(); ++j) {
        const auto& g = gallery[j];
        const bool same = g.person_id == query.person_id && g.camera_id == query.camera_id;
        CHECK(mask[j] == !(same && g.person_id != -1));
        CHECK(relevant[j] == (query.person_id != -1 && g.person_id == query.person_id));
      }
    }
  }
  SUBCASE("same-camera entries stay valid without cross-camera filtering") {
    EvalProtocolConfig open;
    open.cross_camera = false;
    CHECK(build_valid_mask(rec(5, 1), std::vector{rec(5, 1)}, open) == std::vector<bool>{true});
  }
}

TEST_CASE("EvalProtocolConfig validation") {
  EvalProtocolConfig config;
  CHECK_NOTHROW(config.validate());
  config.ranks_reported = {5, 1};
  CHECK_THROWS_AS(config.validate(), ValidationError);
  config.ranks_reported = {0, 1};
  CHECK_THROWS_AS(config.validate(), ValidationError);
}

TEST_CASE("rank_gallery") {
  const Eigen::Vector3d row(0.3, 0.1, 0.2);
  CHECK(rank_gallery(row, {true, true, true}).ordered_gallery == std::vector<Index>{1, 2, 0});
  CHECK(rank_gallery(row, {true, false, true}).ordered_gallery == std::vector<Index>{2, 0});
  CHECK(rank_gallery(Eigen::Vector2d(0.5, 0.5), {true, true}).ordered_gallery == std::vector<Index>{0, 1});
  const auto ranked = rank_gallery(row, {true, true, true}, {true, false, false});
  CHECK(ranked.relevance == std::vector<bool>{false, false, true});
}

TEST_CASE("average_precision") {
  CHECK(*average_precision(from_pattern({true, true})) == 1.0);
  CHECK(*average_precision(from_pattern({true, false, true})) == doctest::Approx(0.5 * (1.0 + 2.0 / 3.0)).epsilon(1e-15));
  CHECK_FALSE(average_precision(from_pattern({false, false})).has_value());
  CHECK_FALSE(average_precision(from_pattern({})).has_value());
  CHECK(*first_hit(from_pattern({false, false, true})) == 3);

  Rng rng(55);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<bool> pattern(1 + rng.below(60));
    for (std::size_t i = 0; i < pattern.size(); ++i) pattern[i] = rng.uniform() < 0.3;
    pattern[rng.below(pattern.size())] = true;
    CHECK(std::abs(*average_precision(from_pattern(pattern)) - oracle::prefix_walk_ap(pattern)) <= 1e-12);
  }
}

TEST_CASE("evaluate: hand-evaluated CMC") {
  // Query a finds its match first, query b third.
  const std::vector<ImageRecord> q{rec(1, 0, "a"), rec(2, 0, "b")};
  const std::vector<ImageRecord> g{rec(1, 1, "g0"), rec(2, 1, "g1"), rec(3, 1, "g2"), rec(4, 1, "g3")};
  Eigen::MatrixXd values(2, 4);
  values << 0.1, 0.5, 0.6, 0.7,
            0.1, 0.3, 0.2, 0.4;
  EvalProtocolConfig config;
  config.ranks_reported = {1, 2, 3};
  const auto report = evaluate(make_dist(values, q, g), q, g, config);
  CHECK(report.cmc.at(1) == 0.5);
  CHECK(report.cmc.at(2) == 0.5);
  CHECK(report.cmc.at(3) == 1.0);
  CHECK(report.map == doctest::Approx((1.0 + 1.0 / 3.0) / 2.0));
  CHECK(report.num_valid_queries == 2);
}

TEST_CASE("evaluate: perfectly separated clusters") {
  std::vector<ImageRecord> q, g;
  Eigen::MatrixXd values(5, 20);
  for (int i = 0; i < 5; ++i) q.push_back(rec(i, 0, "q" + std::to_string(i)));
  for (int j = 0; j < 20; ++j) g.push_back(rec(j % 5, 1 + j % 3, "g" + std::to_string(j)));
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 20; ++j) values(i, j) = (j % 5 == i) ? 0.01 * (j + 1) : 10.0 + j;
  const auto report = evaluate(make_dist(values, q, g), q, g);
  CHECK(report.map == 1.0);
  CHECK(report.cmc.at(1) == 1.0);
}

TEST_CASE("evaluate: errors and exclusions") {
  const std::vector<ImageRecord> q{rec(1, 0, "a"), rec(9, 0, "lonely")};
  const std::vector<ImageRecord> g{rec(1, 1, "g0"), rec(9, 0, "g1")};
  const auto report = evaluate(make_dist(Eigen::MatrixXd::Ones(2, 2), q, g), q, g);
  CHECK(report.excluded_queries == std::vector<std::string>{"lonely"});
  CHECK(report.evaluated_queries == std::vector<std::string>{"a"});

  const std::vector<ImageRecord> q2{rec(9, 0, "lonely")};
  CHECK_THROWS_WITH_AS(evaluate(make_dist(Eigen::MatrixXd::Ones(1, 2), q2, g), q2, g), "no evaluable queries",
                       ComputationError);
  CHECK_THROWS_AS(evaluate(make_dist(Eigen::MatrixXd::Ones(1, 3), q2, g), q2, g), ValidationError);
}

TEST_CASE("evaluate equals the naive oracle on 200+ random instances") {
  Rng rng(2024);
  const std::vector<int> ranks{1, 2, 5, 10, 50};
  EvalProtocolConfig config;
  config.ranks_reported = ranks;
  int compared = 0;
  for (int trial = 0; trial < 240; ++trial) {
    const auto nq = 1 + static_cast<Index>(rng.below(30));
    const auto ng = 1 + static_cast<Index>(rng.below(100));
    const auto q = random_records(rng, nq, 6, 3, "q");
    const auto g = random_records(rng, ng, 6, 3, "g");
    Eigen::MatrixXd values = test::random_matrix(rng, nq, ng, 0.0, 1.0);
    // Coarse grid on some trials to exercise ties.
    if (trial % 3 == 0) values = (values * 4.0).array().round() / 4.0;
    const auto naive = oracle::naive_evaluate(values, q, g, ranks);
    if (naive.valid_queries == 0) {
      CHECK_THROWS_AS(evaluate(make_dist(values, q, g), q, g, config), ComputationError);
      continue;
    }
    const auto report = evaluate(make_dist(values, q, g), q, g, config);
    CHECK(std::abs(report.map - naive.map) <= 1e-12);
    for (int r : ranks) CHECK(std::abs(report.cmc.at(r) - naive.cmc.at(r)) <= 1e-12);
    CHECK(report.num_valid_queries == naive.valid_queries);
    ++compared;
  }
  CHECK(compared >= 200);
}

TEST_CASE("evaluate: invariants") {
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const auto q = random_records(rng, 20, 5, 3, "q", 0.0);
    const auto g = random_records(rng, 80, 5, 3, "g");
    const Eigen::MatrixXd values = test::random_matrix(rng, 20, 80, 0.0, 1.0);
    EvalReport report;
    try {
      report = evaluate(make_dist(values, q, g), q, g);
    } catch (const ComputationError&) {
      continue;
    }
    CHECK(report.map >= 0.0);
    CHECK(report.map <= 1.0);
    CHECK(std::is_sorted(report.cmc_curve.begin(), report.cmc_curve.end()));
    CHECK(report.cmc_curve.back() == 1.0);
    for (double v : report.cmc_curve) CHECK((v >= 0.0 && v <= 1.0));

    // Tie-free gallery permutation with consistent relabelling.
    std::vector<Index> perm(80);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::vector<ImageRecord> g2;
    Eigen::MatrixXd v2(20, 80);
    for (Index j = 0; j < 80; ++j) {
      g2.push_back(g[static_cast<std::size_t>(perm[static_cast<std::size_t>(j)])]);
      v2.col(j) = values.col(perm[static_cast<std::size_t>(j)]);
    }
    const auto permuted = evaluate(make_dist(v2, q, g2), q, g2);
    CHECK(std::abs(permuted.map - report.map) <= 1e-12);
    CHECK(permuted.cmc == report.cmc);
  }
}

TEST_CASE("AP: non-relevant items below keep AP, above can only lower it") {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ImageRecord> g;
    const ImageRecord q = rec(1, 0, "q");
    const auto n = 5 + rng.below(20);
    std::vector<double> d;
    for (std::size_t j = 0; j < n; ++j) {
      g.push_back(rec(rng.uniform() < 0.4 ? 1 : 2, 1, "g" + std::to_string(j)));
      d.push_back(rng.uniform(0.0, 1.0));
    }
    g[0].person_id = 1;
    auto ap_of = [&](const std::vector<ImageRecord>& gal, const std::vector<double>& dist) {
      const Eigen::VectorXd row = Eigen::Map<const Eigen::VectorXd>(dist.data(), static_cast<Index>(dist.size()));
      EvalProtocolConfig config;
      return *average_precision(rank_gallery(row, build_valid_mask(q, gal, config), relevance_flags(q, gal, config)));
    };
    const double base = ap_of(g, d);
    auto below = g;
    auto below_d = d;
    auto above = g;
    auto above_d = d;
    for (int k = 0; k < 5; ++k) {
      below.push_back(rec(3, 1, "b" + std::to_string(k)));
      below_d.push_back(2.0 + k);
      above.push_back(rec(3, 1, "a" + std::to_string(k)));
      above_d.push_back(rng.uniform(0.0, 1.0));
    }
    CHECK(std::abs(ap_of(below, below_d) - base) <= 1e-15);
    CHECK(ap_of(above, above_d) <= base + 1e-15);
  }
}

TEST_CASE("relative_drop") {
  CHECK(relative_drop(69.0, 56.5) == -18.1);
  CHECK(relative_drop(59.8, 47.5) == -20.6);
  CHECK(relative_drop(87.7, 80.8) == -7.9);
  CHECK(relative_drop(50.0, 50.0) == 0.0);
  CHECK_THROWS_AS(relative_drop(0.0, 1.0), ValidationError);
  CHECK_THROWS_AS(relative_drop(-2.0, 1.0), ValidationError);
  CHECK(round_half_away(-0.25, 1) == -0.3);
  CHECK(round_half_away(0.25, 1) == 0.3);
}

TEST_CASE("fixture: 30x100 instance matches the recorded oracle values") {
  const auto expected = test::expected_values()["eval_30x100"];
  const auto q = load_embeddings(test::fixture("eval_query.reid"));
  const auto g = load_embeddings(test::fixture("eval_gallery.reid"));
  for (auto [name, kind] : {std::pair{"euclidean", DistanceKind::euclidean}, {"cosine", DistanceKind::cosine}}) {
    const auto report = evaluate(distance_matrix(q, g, kind), q.records(), g.records());
    const auto& e = expected[name];
    CHECK(std::abs(report.map - e["map"].get<double>()) <= 1e-12);
    for (int r : {1, 5, 10, 50}) CHECK(std::abs(report.cmc.at(r) - e["cmc"][std::to_string(r)].get<double>()) <= 1e-12);
    CHECK(report.num_valid_queries == e["num_valid_queries"].get<int>());
  }
}
