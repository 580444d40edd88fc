#include "cli/report.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <iomanip>
#include <sstream>

#include "reid/io.hpp"

namespace reid::cli {

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1)
    throw ComputationError("SHA-256 digest failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < length; ++i)
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return os.str();
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

json input_digests(const std::vector<std::pair<std::string, std::filesystem::path>>& inputs) {
  json out = json::object();
  for (const auto& [role, path] : inputs)
    out[role] = {{"path", path.string()}, {"sha256", sha256_file(path)}};
  return out;
}

json to_json(const EvalReport& report) {
  json cmc = json::object();
  for (const auto& [rank, value] : report.cmc) cmc[std::to_string(rank)] = value;
  return {
      {"map", report.map},
      {"cmc", cmc},
      {"num_valid_queries", report.num_valid_queries},
      {"excluded_queries", report.excluded_queries},
      {"per_query_ap", report.per_query_ap},
      {"evaluated_queries", report.evaluated_queries},
  };
}

json to_json(const SplitSpec& split) {
  return {
      {"train_ids", split.train_ids},
      {"test_ids", split.test_ids},
      {"train_tracklets", split.train_tracklets},
      {"test_tracklets", split.test_tracklets},
      {"query_tracklets", split.query_tracklets},
      {"junk_tracklets", split.junk_tracklets},
      {"seed", split.seed},
      {"query_rule", split.query_rule},
  };
}

json to_json(const SplitVerification& v) {
  return {
      {"ok", v.ok()},
      {"disjoint", v.disjoint},
      {"train_subset", v.train_subset},
      {"test_subset", v.test_subset},
      {"tracklet_partition", v.tracklet_partition},
      {"queries_in_test", v.queries_in_test},
      {"problems", v.problems},
  };
}

json to_json(const GradCheckReport& report) {
  json params = json::array();
  for (const auto& e : report.per_parameter_errors)
    params.push_back({{"parameter", e.parameter}, {"max_rel_error", e.max_rel_error}, {"count", e.count}});
  return {{"max_rel_error", report.max_rel_error}, {"per_parameter_errors", params}, {"step", report.step}};
}

std::string eval_csv(const EvalReport& report) {
  std::ostringstream os;
  os << "mAP";
  for (const auto& [rank, value] : report.cmc) os << ",R-" << rank;
  os << "\n" << std::fixed << std::setprecision(1) << round_half_away(100.0 * report.map, 1);
  for (const auto& [rank, value] : report.cmc) os << "," << round_half_away(100.0 * value, 1);
  os << "\n";
  return os.str();
}

void write_json(const std::filesystem::path& path, const json& doc) {
  write_file(path, doc.dump(2) + "\n");
}

}  // namespace reid::cli
