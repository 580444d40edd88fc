#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "reid/datasets.hpp"
#include "reid/fusion.hpp"
#include "reid/metrics.hpp"

namespace reid::cli {

using nlohmann::json;

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// ISO-8601 UTC wall-clock time. The only non-reproducible report field.
std::string timestamp_utc();

inline constexpr const char* kTimestampKey = "generated_at";

/// {"path": ..., "sha256": ...} for each input file.
json input_digests(const std::vector<std::pair<std::string, std::filesystem::path>>& inputs);

json to_json(const EvalReport& report);
json to_json(const SplitSpec& split);
json to_json(const SplitVerification& verification);
json to_json(const GradCheckReport& report);

/// One header row and one value row: mAP, R-1, R-5, R-10, R-50 in percent.
std::string eval_csv(const EvalReport& report);

/// Pretty-printed JSON followed by a newline.
void write_json(const std::filesystem::path& path, const json& doc);

}  // namespace reid::cli
