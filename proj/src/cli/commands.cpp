#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <sstream>

#include "cli/report.hpp"
#include "reid/cli.hpp"
#include "reid/datasets.hpp"
#include "reid/embedding.hpp"
#include "reid/fusion.hpp"
#include "reid/io.hpp"
#include "reid/metrics.hpp"
#include "reid/random.hpp"
#include "reid/rerank.hpp"

namespace reid::cli {

namespace fs = std::filesystem;

namespace {

// -- shared plumbing ---------------------------------------------------------

struct Common {
  std::uint64_t seed = 0;
  int threads = 0;
  std::string out;
};

void add_common(CLI::App& cmd, Common& common, bool needs_out = true) {
  cmd.add_option("--seed", common.seed, "Random seed")->capture_default_str();
  cmd.add_option("--threads", common.threads, "Worker threads (0 = all cores)")->capture_default_str();
  auto* out = cmd.add_option("--out", common.out, "Output report path");
  if (needs_out) out->required();
}

const std::map<std::string, DistanceKind> kDistanceNames{{"euclidean", DistanceKind::euclidean},
                                                         {"cosine", DistanceKind::cosine}};

std::string distance_name(DistanceKind kind) {
  return kind == DistanceKind::cosine ? "cosine" : "euclidean";
}

void require_files(std::initializer_list<fs::path> paths) {
  for (const auto& p : paths)
    if (!p.empty() && !fs::is_regular_file(p))
      throw ValidationError("input file not found: '" + p.string() + "'");
}

void require_output_dir(const fs::path& out) {
  const auto dir = out.parent_path();
  if (!dir.empty() && !fs::is_directory(dir))
    throw ValidationError("output directory does not exist: '" + dir.string() + "'");
}

fs::path with_extension(fs::path p, const char* ext) {
  p.replace_extension(ext);
  return p;
}

json base_report(const std::string& command, const Common& common, json config) {
  config["seed"] = common.seed;
  config["threads"] = common.threads;
  config["out"] = common.out;
  return {{"command", command}, {"config", std::move(config)}, {kTimestampKey, timestamp_utc()}};
}

void require_same_ids(const std::vector<std::string>& a, const std::vector<ImageRecord>& b,
                      const std::string& what) {
  bool same = a.size() == b.size();
  for (std::size_t i = 0; same && i < a.size(); ++i) same = a[i] == b[i].image_id;
  if (!same)
    throw ValidationError(what + ": distance matrix labels do not match the manifest image ids");
}

// -- eval --------------------------------------------------------------------

struct EvalArgs {
  Common common;
  std::string query, gallery, dist, query_manifest, gallery_manifest;
  DistanceKind distance = DistanceKind::euclidean;
  std::vector<int> ranks{1, 5, 10, 50};
  bool no_cross_camera = false;
  int junk_id = kJunkPersonId;
};

void setup_eval(CLI::App& app, EvalArgs& a) {
  auto* cmd = app.add_subcommand("eval", "Evaluate mAP and CMC (single query, cross camera)");
  add_common(*cmd, a.common);
  cmd->add_option("--query", a.query, "Query embeddings (REID + sidecar CSV)");
  cmd->add_option("--gallery", a.gallery, "Gallery embeddings (REID + sidecar CSV)");
  cmd->add_option("--dist", a.dist, "Precomputed Q x G distances (RDMX)");
  cmd->add_option("--query-manifest", a.query_manifest, "Query manifest for --dist");
  cmd->add_option("--gallery-manifest", a.gallery_manifest, "Gallery manifest for --dist");
  cmd->add_option("--distance", a.distance, "Distance function")
      ->transform(CLI::CheckedTransformer(kDistanceNames, CLI::ignore_case).description("{euclidean,cosine}"))
      ->default_str("euclidean");
  cmd->add_option("--ranks", a.ranks, "Reported CMC ranks")->delimiter(',')->capture_default_str();
  cmd->add_flag("--no-cross-camera", a.no_cross_camera, "Keep same-camera true matches");
  cmd->add_option("--junk-id", a.junk_id, "Distractor person id")->capture_default_str();
}

int run_eval(const EvalArgs& a, std::ostream& out) {
  EvalProtocolConfig protocol{!a.no_cross_camera, a.junk_id, a.ranks};
  protocol.validate();
  const bool from_dist = !a.dist.empty();
  if (from_dist == (!a.query.empty() || !a.gallery.empty()))
    throw ValidationError("eval: give either --query/--gallery or --dist");
  require_output_dir(a.common.out);

  DistanceMatrix dist;
  std::vector<ImageRecord> q_records, g_records;
  json inputs;
  if (from_dist) {
    if (a.query_manifest.empty() || a.gallery_manifest.empty())
      throw ValidationError("eval: --dist needs --query-manifest and --gallery-manifest");
    require_files({a.dist, a.query_manifest, a.gallery_manifest});
    q_records = read_manifest(a.query_manifest).records;
    g_records = read_manifest(a.gallery_manifest).records;
    dist = load_distance_matrix(a.dist);
    require_same_ids(dist.query_ids, q_records, "query");
    require_same_ids(dist.gallery_ids, g_records, "gallery");
    inputs = input_digests({{"dist", a.dist}, {"query_manifest", a.query_manifest},
                            {"gallery_manifest", a.gallery_manifest}});
  } else {
    if (a.query.empty() || a.gallery.empty())
      throw ValidationError("eval: both --query and --gallery are required");
    require_files({a.query, sidecar_path(a.query), a.gallery, sidecar_path(a.gallery)});
    const auto q = load_embeddings(a.query);
    const auto g = load_embeddings(a.gallery);
    if (q.dim() != g.dim())
      throw ValidationError("dimension mismatch: query D=" + std::to_string(q.dim()) + ", gallery D=" +
                            std::to_string(g.dim()));
    q_records = q.records();
    g_records = g.records();
    inputs = input_digests({{"query", a.query}, {"query_manifest", sidecar_path(a.query)},
                            {"gallery", a.gallery}, {"gallery_manifest", sidecar_path(a.gallery)}});
    dist = distance_matrix(q, g, a.distance);
  }

  const EvalReport report = evaluate(dist, q_records, g_records, protocol);
  json config = {{"query", a.query},
                 {"gallery", a.gallery},
                 {"dist", a.dist},
                 {"query_manifest", a.query_manifest},
                 {"gallery_manifest", a.gallery_manifest},
                 {"distance", from_dist ? "precomputed" : distance_name(a.distance)},
                 {"ranks", a.ranks},
                 {"cross_camera", protocol.cross_camera},
                 {"junk_id", protocol.junk_id},
                 {"excluded_query_policy", "queries without a valid relevant gallery entry are excluded"}};
  json doc = base_report("eval", a.common, std::move(config));
  doc["inputs"] = inputs;
  doc.update(to_json(report));
  write_json(a.common.out, doc);
  write_file(with_extension(a.common.out, ".csv"), eval_csv(report));
  out << "mAP " << report.map << "  R-1 " << report.cmc_curve.front() << "  ("
      << report.num_valid_queries << " queries, " << report.excluded_queries.size()
      << " excluded)\n";
  return kExitOk;
}

// -- rerank ------------------------------------------------------------------

struct RerankArgs {
  Common common;
  std::string method = "k-reciprocal";
  std::string query, gallery, qg, qq, gg;
  DistanceKind distance = DistanceKind::euclidean;
  KReciprocalParams kr;
  EcnParams ecn;
  long long max_points = 8000;
};

const std::map<std::string, EcnMode> kEcnModes{{"rank-dist", EcnMode::rank_dist},
                                               {"orig-dist", EcnMode::orig_dist}};

void setup_rerank(CLI::App& app, RerankArgs& a) {
  auto* cmd = app.add_subcommand("rerank", "Re-rank a query/gallery distance (k-reciprocal or ECN)");
  add_common(*cmd, a.common);
  cmd->add_option("--method", a.method, "k-reciprocal | ecn")
      ->check(CLI::IsMember({"k-reciprocal", "ecn"}))
      ->capture_default_str();
  cmd->add_option("--query", a.query, "Query embeddings (REID)");
  cmd->add_option("--gallery", a.gallery, "Gallery embeddings (REID)");
  cmd->add_option("--qg", a.qg, "Query x gallery distances (RDMX)");
  cmd->add_option("--qq", a.qq, "Query x query distances (RDMX)");
  cmd->add_option("--gg", a.gg, "Gallery x gallery distances (RDMX)");
  cmd->add_option("--distance", a.distance, "Distance for embedding input")
      ->transform(CLI::CheckedTransformer(kDistanceNames, CLI::ignore_case).description("{euclidean,cosine}"))
      ->default_str("euclidean");
  cmd->add_option("--k1", a.kr.k1)->capture_default_str();
  cmd->add_option("--k2", a.kr.k2)->capture_default_str();
  cmd->add_option("--lambda", a.kr.lambda)->capture_default_str();
  cmd->add_option("--t", a.ecn.t, "ECN immediate neighbors")->capture_default_str();
  cmd->add_option_function<std::string>(
         "--ecn-mode", [&a](const std::string& v) { a.ecn.mode = kEcnModes.at(v); }, "rank-dist | orig-dist")
      ->check(CLI::IsMember({"rank-dist", "orig-dist"}));
  cmd->add_option("--max-points", a.max_points, "Refuse unions larger than this")->capture_default_str();
}

int run_rerank(const RerankArgs& a, std::ostream& out) {
  const bool kr = a.method == "k-reciprocal";
  if (kr) a.kr.validate(); else a.ecn.validate();
  const bool from_emb = !a.query.empty() || !a.gallery.empty();
  const bool from_dist = !a.qg.empty() || !a.qq.empty() || !a.gg.empty();
  if (from_emb == from_dist) throw ValidationError("rerank: give either --query/--gallery or --qg/--qq/--gg");
  require_output_dir(a.common.out);

  // Sizes are read from headers so oversize instances are refused before loading payloads.
  auto header_count = [](const fs::path& p, int which) -> std::uint64_t {
    const auto bytes = read_file(p);
    if (bytes.size() < 16) throw FormatError(FormatErrc::truncated, p.string() + ": truncated header");
    std::uint64_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(bytes[static_cast<std::size_t>(8 + 4 * which + i)]);
    return v;
  };
  json inputs;
  std::uint64_t q_count = 0, g_count = 0;
  if (from_emb) {
    if (a.query.empty() || a.gallery.empty()) throw ValidationError("rerank: both --query and --gallery are required");
    require_files({a.query, sidecar_path(a.query), a.gallery, sidecar_path(a.gallery)});
    q_count = header_count(a.query, 0);
    g_count = header_count(a.gallery, 0);
    inputs = input_digests({{"query", a.query}, {"gallery", a.gallery}});
  } else {
    if (a.qg.empty() || a.qq.empty() || a.gg.empty()) throw ValidationError("rerank: --qg, --qq and --gg are all required");
    require_files({a.qg, a.qq, a.gg});
    q_count = header_count(a.qg, 0);
    g_count = header_count(a.qg, 1);
    inputs = input_digests({{"qg", a.qg}, {"qq", a.qq}, {"gg", a.gg}});
  }
  const auto points = q_count + g_count;
  if (points > static_cast<std::uint64_t>(std::max(0LL, a.max_points))) {
    std::ostringstream os;
    os << "rerank: union of " << q_count << " queries and " << g_count << " gallery items ("
       << points << " points, ~" << (points * points * 8 * 3) / (1024 * 1024)
       << " MiB of dense work matrices) exceeds --max-points " << a.max_points;
    throw ValidationError(os.str());
  }

  DistanceMatrix qg, qq, gg;
  if (from_emb) {
    const auto q = load_embeddings(a.query);
    const auto g = load_embeddings(a.gallery);
    qg = distance_matrix(q, g, a.distance);
    qq = distance_matrix(q, q, a.distance);
    gg = distance_matrix(g, g, a.distance);
  } else {
    qg = load_distance_matrix(a.qg);
    qq = load_distance_matrix(a.qq);
    gg = load_distance_matrix(a.gg);
  }

  DistanceMatrix result{kr ? k_reciprocal_rerank(qg.values, qq.values, gg.values, a.kr)
                           : ecn_rerank(qg.values, qq.values, gg.values, a.ecn),
                        qg.query_ids, qg.gallery_ids};
  write_distance_matrix(a.common.out, result);

  json config = {{"method", a.method}, {"query", a.query}, {"gallery", a.gallery},
                 {"qg", a.qg}, {"qq", a.qq}, {"gg", a.gg},
                 {"distance", from_emb ? distance_name(a.distance) : "precomputed"},
                 {"max_points", a.max_points}};
  if (kr)
    config["params"] = {{"k1", a.kr.k1}, {"k2", a.kr.k2}, {"lambda", a.kr.lambda}};
  else
    config["params"] = {{"t", a.ecn.t}, {"mode", std::string(to_string(a.ecn.mode))}};
  json doc = base_report("rerank", a.common, std::move(config));
  doc["inputs"] = inputs;
  doc["output"] = {{"path", a.common.out}, {"sha256", sha256_file(a.common.out)},
                   {"rows", result.rows()}, {"cols", result.cols()}};
  write_json(with_extension(a.common.out, ".json"), doc);
  out << "re-ranked " << result.rows() << "x" << result.cols() << " distances with " << a.method << "\n";
  return kExitOk;
}

// -- xmars-split / overlap ---------------------------------------------------

struct XmarsArgs {
  Common common;
  std::string mars, market;
};

void setup_xmars(CLI::App& app, XmarsArgs& a) {
  auto* cmd = app.add_subcommand("xmars-split", "Reorder MARS tracklets along the Market-1501 id split");
  add_common(*cmd, a.common);
  cmd->add_option("--mars", a.mars, "MARS manifest (tracklet_id required)")->required();
  cmd->add_option("--market", a.market, "Market-1501 manifest (train/test splits)")->required();
}

json side_counts(const DatasetManifest& mars, const std::set<std::string>& tracklets,
                 const std::set<int>& ids) {
  std::size_t images = 0;
  for (const auto& r : mars.records) images += tracklets.contains(*r.tracklet_id) ? 1 : 0;
  return {{"ids", ids.size()}, {"tracklets", tracklets.size()}, {"images", images}};
}

int run_xmars(const XmarsArgs& a, std::ostream& out) {
  require_files({a.mars, a.market});
  require_output_dir(a.common.out);
  const auto mars = read_manifest(a.mars);
  const auto market_ids = id_split(read_manifest(a.market));
  const auto split = generate_xmars_split(mars, market_ids.train, market_ids.test, a.common.seed);
  const auto verification = verify_split(split, mars, market_ids.train, market_ids.test);

  json doc = base_report("xmars-split", a.common, {{"mars", a.mars}, {"market", a.market}});
  doc["inputs"] = input_digests({{"mars", a.mars}, {"market", a.market}});
  doc["split"] = to_json(split);
  doc["verification"] = to_json(verification);
  doc["summary"] = {{"train", side_counts(mars, split.train_tracklets, split.train_ids)},
                    {"test", side_counts(mars, split.test_tracklets, split.test_ids)},
                    {"query", side_counts(mars, split.query_tracklets, {})}};
  doc["overlap_mars_vs_market"] = overlap_report(id_split(mars), market_ids);
  write_json(a.common.out, doc);
  out << "X-MARS: " << split.train_ids.size() << " train ids, " << split.test_ids.size()
      << " test ids, " << split.query_tracklets.size() << " query tracklets"
      << (verification.ok() ? "" : " (verification FAILED)") << "\n";
  return verification.ok() ? kExitOk : kExitComputation;
}

struct OverlapArgs {
  Common common;
  std::string a, b;
};

void setup_overlap(CLI::App& app, OverlapArgs& a) {
  auto* cmd = app.add_subcommand("overlap", "Count identities shared between dataset parts");
  add_common(*cmd, a.common);
  cmd->add_option("--a", a.a, "First manifest (rows of the matrix)")->required();
  cmd->add_option("--b", a.b, "Second manifest (columns)")->required();
}

int run_overlap(const OverlapArgs& a, std::ostream& out) {
  require_files({a.a, a.b});
  require_output_dir(a.common.out);
  const auto m = overlap_report(id_split(read_manifest(a.a)), id_split(read_manifest(a.b)));
  json doc = base_report("overlap", a.common, {{"a", a.a}, {"b", a.b}});
  doc["inputs"] = input_digests({{"a", a.a}, {"b", a.b}});
  doc["parts"] = {"train", "test"};
  doc["overlap"] = m;
  write_json(a.common.out, doc);
  out << "          b.train  b.test\n"
      << "a.train " << std::setw(8) << m[0][0] << std::setw(8) << m[0][1] << "\n"
      << "a.test  " << std::setw(8) << m[1][0] << std::setw(8) << m[1][1] << "\n";
  return kExitOk;
}

// -- scalability -------------------------------------------------------------

struct ScalabilityArgs {
  Common common;
  std::string query, gallery, pool;
  std::vector<std::size_t> steps{0};
  DistanceKind distance = DistanceKind::euclidean;
};

void setup_scalability(CLI::App& app, ScalabilityArgs& a) {
  auto* cmd = app.add_subcommand("scalability", "Evaluate with growing numbers of injected distractors");
  add_common(*cmd, a.common);
  cmd->add_option("--query", a.query, "Query embeddings (REID)")->required();
  cmd->add_option("--gallery", a.gallery, "Base gallery embeddings (REID)")->required();
  cmd->add_option("--pool", a.pool, "Distractor pool embeddings (REID, person_id -1)")->required();
  cmd->add_option("--steps", a.steps, "Distractor counts")->delimiter(',')->capture_default_str();
  cmd->add_option("--distance", a.distance, "Distance function")
      ->transform(CLI::CheckedTransformer(kDistanceNames, CLI::ignore_case).description("{euclidean,cosine}"))
      ->default_str("euclidean");
}

int run_scalability(const ScalabilityArgs& a, std::ostream& out) {
  require_files({a.query, sidecar_path(a.query), a.gallery, sidecar_path(a.gallery), a.pool,
                 sidecar_path(a.pool)});
  require_output_dir(a.common.out);
  const auto q = load_embeddings(a.query);
  const auto g = load_embeddings(a.gallery);
  const auto pool = load_embeddings(a.pool);
  const auto max_step = *std::max_element(a.steps.begin(), a.steps.end());
  if (max_step > static_cast<std::size_t>(pool.size()))
    throw ValidationError("scalability: largest step " + std::to_string(max_step) +
                          " exceeds the distractor pool of " + std::to_string(pool.size()));
  if (q.dim() != g.dim() || q.dim() != pool.dim())
    throw ValidationError("scalability: embedding dimensions differ");

  const DatasetManifest gallery_manifest{"gallery", g.records()};
  const DatasetManifest pool_manifest{"pool", pool.records()};
  const auto q_records = q.records();
  const auto base = distance_matrix(q, g, a.distance);
  const auto to_pool = distance_matrix(q, pool, a.distance);

  json rows = json::array();
  std::ostringstream csv;
  csv << "distractors,mAP,R-1,mAP_drop_pct,R-1_drop_pct\n" << std::fixed << std::setprecision(1);
  double base_map = 0.0, base_r1 = 0.0;
  for (std::size_t step_index = 0; step_index < a.steps.size(); ++step_index) {
    const std::size_t n = a.steps[step_index];
    const auto injected = inject_distractors(gallery_manifest, pool_manifest, n, a.common.seed);
    const auto picked = sample_distractor_indices(static_cast<std::size_t>(pool.size()), n, a.common.seed);
    DistanceMatrix dist;
    dist.values.resize(base.rows(), base.cols() + static_cast<Index>(n));
    dist.values.leftCols(base.cols()) = base.values;
    for (std::size_t k = 0; k < picked.size(); ++k)
      dist.values.col(base.cols() + static_cast<Index>(k)) = to_pool.values.col(static_cast<Index>(picked[k]));
    dist.query_ids = base.query_ids;
    for (const auto& r : injected.records) dist.gallery_ids.push_back(r.image_id);

    const auto report = evaluate(dist, q_records, injected.records, EvalProtocolConfig{true, kJunkPersonId, {1}});
    const double map_pct = round_half_away(100.0 * report.map, 1);
    const double r1_pct = round_half_away(100.0 * report.cmc.at(1), 1);
    if (step_index == 0) {
      base_map = map_pct;
      base_r1 = r1_pct;
    }
    const double map_drop = relative_drop(base_map, map_pct);
    const double r1_drop = relative_drop(base_r1, r1_pct);
    rows.push_back({{"distractors", n}, {"gallery_size", injected.records.size()},
                    {"map", report.map}, {"rank1", report.cmc.at(1)},
                    {"map_pct", map_pct}, {"rank1_pct", r1_pct},
                    {"map_drop_pct", map_drop}, {"rank1_drop_pct", r1_drop}});
    csv << n << "," << map_pct << "," << r1_pct << "," << map_drop << "," << r1_drop << "\n";
  }

  json config = {{"query", a.query}, {"gallery", a.gallery}, {"pool", a.pool},
                 {"steps", a.steps}, {"distance", distance_name(a.distance)},
                 {"drop_reference", "first step"}};
  json doc = base_report("scalability", a.common, std::move(config));
  doc["inputs"] = input_digests({{"query", a.query}, {"gallery", a.gallery}, {"pool", a.pool}});
  doc["table"] = rows;
  write_json(a.common.out, doc);
  write_file(with_extension(a.common.out, ".csv"), csv.str());
  out << csv.str();
  return kExitOk;
}

// -- sweep -------------------------------------------------------------------

struct SweepArgs {
  Common common;
  std::string manifest;
  long long frames = 0;
  std::vector<double> targets{3, 5, 10, 20};
};

void setup_sweep(CLI::App& app, SweepArgs& a) {
  auto* cmd = app.add_subcommand("sweep", "Pick detection-confidence thresholds for target detections per frame");
  add_common(*cmd, a.common);
  cmd->add_option("--manifest", a.manifest, "Manifest with det_confidence and frame_id")->required();
  cmd->add_option("--frames", a.frames, "Number of video frames")->required();
  cmd->add_option("--targets", a.targets, "Average detections per frame")->delimiter(',')->capture_default_str();
}

int run_sweep(const SweepArgs& a, std::ostream& out) {
  require_files({a.manifest});
  require_output_dir(a.common.out);
  const auto manifest = read_manifest(a.manifest);
  const auto results = threshold_sweep(manifest, a.frames, a.targets);

  json entries = json::array();
  const fs::path out_path(a.common.out);
  for (const auto& r : results) {
    std::ostringstream name;
    name << out_path.stem().string() << ".target-" << r.target << ".csv";
    const fs::path filtered = out_path.parent_path() / name.str();
    write_manifest(filtered, r.manifest);
    entries.push_back({{"target", r.target}, {"threshold", r.threshold},
                       {"achieved_average", r.achieved_average}, {"kept_detections", r.kept_detections},
                       {"manifest", filtered.filename().string()}, {"sha256", sha256_file(filtered)}});
    out << "target " << r.target << ": threshold " << r.threshold << ", " << r.achieved_average
        << " detections/frame\n";
  }
  json doc = base_report("sweep", a.common,
                         {{"manifest", a.manifest}, {"frames", a.frames}, {"targets", a.targets}});
  doc["inputs"] = input_digests({{"manifest", a.manifest}});
  doc["sweep"] = entries;
  write_json(a.common.out, doc);
  return kExitOk;
}

// -- gradcheck / fuse-demo ---------------------------------------------------

struct FusionShapeArgs {
  Index units = 3;
  Index channels = 8;
  Index height = 4;
  Index width = 4;
};

void add_shape(CLI::App& cmd, FusionShapeArgs& s) {
  cmd.add_option("--units", s.units, "View units K")->capture_default_str();
  cmd.add_option("--channels", s.channels)->capture_default_str();
  cmd.add_option("--height", s.height)->capture_default_str();
  cmd.add_option("--width", s.width)->capture_default_str();
}

ViewUnitStack<double> random_stack(Rng& rng, const FusionShapeArgs& s) {
  ViewUnitStack<double> stack{{s.channels, s.height, s.width}, {}};
  stack.maps.resize(s.units, stack.shape.size());
  for (Index i = 0; i < stack.maps.size(); ++i) stack.maps.data()[i] = rng.uniform(-1.0, 1.0);
  return stack;
}

Eigen::VectorXd random_vector(Rng& rng, Index n, double scale) {
  Eigen::VectorXd v(n);
  for (Index i = 0; i < n; ++i) v[i] = scale * rng.normal();
  return v;
}

json shape_json(const FusionShapeArgs& s) {
  return {{"units", s.units}, {"channels", s.channels}, {"height", s.height}, {"width", s.width}};
}

void validate_shape(const FusionShapeArgs& s) {
  if (s.units < 1 || s.channels < 1 || s.height < 1 || s.width < 1)
    throw ValidationError("fusion shape dimensions must be positive");
}

/// max_k | ||grad_map_k|| / ||grad_out|| - w_k |
double modulation_error(const FusionGradients<double>& grads, const Eigen::VectorXd& weights,
                        const Eigen::VectorXd& grad_out) {
  double worst = 0.0;
  for (Index k = 0; k < weights.size(); ++k)
    worst = std::max(worst, std::abs(grads.grad_stack.maps.row(k).norm() / grad_out.norm() - weights[k]));
  return worst;
}

struct GradcheckArgs {
  Common common;
  FusionShapeArgs shape;
  int instances = 20;
  double step = 1e-5;
  double tolerance = 1e-4;
};

void setup_gradcheck(CLI::App& app, GradcheckArgs& a) {
  auto* cmd = app.add_subcommand("gradcheck", "Check the fusion backward pass against central differences");
  add_common(*cmd, a.common);
  add_shape(*cmd, a.shape);
  cmd->add_option("--instances", a.instances)->capture_default_str();
  cmd->add_option("--step", a.step)->capture_default_str();
  cmd->add_option("--tolerance", a.tolerance, "Maximum accepted relative error")->capture_default_str();
}

int run_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  validate_shape(a.shape);
  if (a.instances < 1 || !(a.step > 0.0)) throw ValidationError("gradcheck: instances and step must be positive");
  require_output_dir(a.common.out);
  Rng rng(a.common.seed);
  GradCheckReport worst;
  worst.step = a.step;
  worst.per_parameter_errors = {{"view_unit_maps", 0.0, 0}, {"view_logits", 0.0, 0}};
  double modulation = 0.0;
  json per_instance = json::array();
  for (int i = 0; i < a.instances; ++i) {
    const auto stack = random_stack(rng, a.shape);
    const auto logits = random_vector(rng, a.shape.units, 2.0);
    const auto grad_out = random_vector(rng, stack.shape.size(), 1.0);
    const auto report = gradient_check(stack, logits, grad_out, a.step);
    const auto grads = fuse_backward(grad_out, stack, logits);
    modulation = std::max(modulation, modulation_error(grads, softmax_view_weights(logits), grad_out));
    worst.max_rel_error = std::max(worst.max_rel_error, report.max_rel_error);
    for (std::size_t p = 0; p < report.per_parameter_errors.size(); ++p) {
      auto& acc = worst.per_parameter_errors[p];
      acc.max_rel_error = std::max(acc.max_rel_error, report.per_parameter_errors[p].max_rel_error);
      acc.count += report.per_parameter_errors[p].count;
    }
    per_instance.push_back(report.max_rel_error);
  }
  const bool pass = worst.max_rel_error < a.tolerance;
  json config = shape_json(a.shape);
  config["instances"] = a.instances;
  config["step"] = a.step;
  config["tolerance"] = a.tolerance;
  json doc = base_report("gradcheck", a.common, std::move(config));
  doc["gradcheck"] = to_json(worst);
  doc["per_instance_max_rel_error"] = per_instance;
  doc["modulation_max_abs_error"] = modulation;
  doc["pass"] = pass;
  write_json(a.common.out, doc);
  out << "max relative error " << worst.max_rel_error << " over " << a.instances << " instances"
      << (pass ? "" : " (FAILED)") << "\n";
  return pass ? kExitOk : kExitComputation;
}

struct FuseDemoArgs {
  Common common;
  FusionShapeArgs shape;
  std::string stack;
  std::vector<double> logits;
};

void setup_fuse_demo(CLI::App& app, FuseDemoArgs& a) {
  auto* cmd = app.add_subcommand("fuse-demo", "Fuse view-unit maps and print weights, norms and a gradient check");
  add_common(*cmd, a.common, false);
  add_shape(*cmd, a.shape);
  cmd->add_option("--stack", a.stack, "View-unit maps (RTEN, dims K x C [x H x W])");
  cmd->add_option("--logits", a.logits, "View logits (K values)")->delimiter(',');
}

int run_fuse_demo(const FuseDemoArgs& a, std::ostream& out) {
  Rng rng(a.common.seed);
  ViewUnitStack<double> stack;
  json inputs = json::object();
  if (!a.stack.empty()) {
    require_files({a.stack});
    const Tensor t = load_tensor(a.stack);
    if (t.dims.size() < 2 || t.dims.size() > 4)
      throw ValidationError("fuse-demo: stack tensor must have rank 2 to 4");
    stack.shape = {static_cast<Index>(t.dims[1]), t.dims.size() > 2 ? static_cast<Index>(t.dims[2]) : 1,
                   t.dims.size() > 3 ? static_cast<Index>(t.dims[3]) : 1};
    stack.maps = Eigen::Map<const PlaneMatrix<float>>(t.values.data(), t.dims[0], stack.shape.size())
                     .cast<double>();
    inputs = input_digests({{"stack", a.stack}});
  } else {
    validate_shape(a.shape);
    stack = random_stack(rng, a.shape);
  }
  if (!a.common.out.empty()) require_output_dir(a.common.out);
  Eigen::VectorXd logits = a.logits.empty()
                               ? random_vector(rng, stack.units(), 2.0)
                               : Eigen::Map<const Eigen::VectorXd>(a.logits.data(), static_cast<Index>(a.logits.size())).eval();
  if (logits.size() != stack.units())
    throw ValidationError("fuse-demo: " + std::to_string(logits.size()) + " logits for " +
                          std::to_string(stack.units()) + " view units");

  const Eigen::VectorXd weights = softmax_view_weights(logits);
  const Eigen::VectorXd fused = fuse_view_units(stack, weights);
  const Eigen::VectorXd grad_out = random_vector(rng, fused.size(), 1.0);
  const auto grads = fuse_backward(grad_out, stack, logits);
  const auto check = gradient_check(stack, logits, grad_out);

  std::vector<double> unit_norms, grad_norm_ratios;
  for (Index k = 0; k < stack.units(); ++k) {
    unit_norms.push_back(stack.maps.row(k).norm());
    grad_norm_ratios.push_back(grads.grad_stack.maps.row(k).norm() / grad_out.norm());
  }
  json config = {{"stack", a.stack}, {"logits", std::vector<double>(logits.data(), logits.data() + logits.size())},
                 {"map_shape", {stack.shape.channels, stack.shape.height, stack.shape.width}}};
  json doc = base_report("fuse-demo", a.common, std::move(config));
  doc["inputs"] = inputs;
  doc["weights"] = std::vector<double>(weights.data(), weights.data() + weights.size());
  doc["unit_norms"] = unit_norms;
  doc["fused_norm"] = fused.norm();
  doc["grad_norm_ratios"] = grad_norm_ratios;
  doc["grad_logits"] = std::vector<double>(grads.grad_logits.data(), grads.grad_logits.data() + grads.grad_logits.size());
  doc["gradcheck"] = to_json(check);
  if (!a.common.out.empty()) write_json(a.common.out, doc);
  out << doc.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Person re-identification retrieval and evaluation toolkit", "reid"};
  app.require_subcommand(1);

  EvalArgs eval;
  RerankArgs rerank;
  XmarsArgs xmars;
  OverlapArgs overlap;
  ScalabilityArgs scalability;
  SweepArgs sweep;
  GradcheckArgs gradcheck;
  FuseDemoArgs fuse_demo;
  setup_eval(app, eval);
  setup_rerank(app, rerank);
  setup_xmars(app, xmars);
  setup_scalability(app, scalability);
  setup_sweep(app, sweep);
  setup_gradcheck(app, gradcheck);
  setup_fuse_demo(app, fuse_demo);
  setup_overlap(app, overlap);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    if (name == "eval") return set_num_threads(eval.common.threads), run_eval(eval, out);
    if (name == "rerank") return set_num_threads(rerank.common.threads), run_rerank(rerank, out);
    if (name == "xmars-split") return run_xmars(xmars, out);
    if (name == "overlap") return run_overlap(overlap, out);
    if (name == "scalability")
      return set_num_threads(scalability.common.threads), run_scalability(scalability, out);
    if (name == "sweep") return run_sweep(sweep, out);
    if (name == "gradcheck") return run_gradcheck(gradcheck, out);
    if (name == "fuse-demo") return run_fuse_demo(fuse_demo, out);
  } catch (const ValidationError& e) {
    err << "reid " << name << ": " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "reid " << name << ": " << e.what() << "\n";
    return kExitComputation;
  }
  return kExitValidation;
}

}  // namespace reid::cli
