#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "reid/embedding.hpp"

namespace reid {

// Little-endian binary containers. All share one 12-byte header:
//   magic[4] | version u16 = 1 | reserved u16 = 0 | ...
//
//   "REID": N u32 | D u32 | N*D binary32, row-major.
//           Row metadata lives in a sidecar CSV `image_id,person_id,camera_id`.
//   "RTEN": rank u32 | dims u32[rank] | prod(dims) binary32, row-major.
//   "RDMX": Q u32 | G u32 | Q*G binary64, row-major |
//           Q+G labels, each u32 byte length + UTF-8 bytes (query ids first).

inline constexpr std::uint16_t kFormatVersion = 1;

/// Dense float tensor as stored in an RTEN container.
struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> values;

  std::size_t element_count() const;
};

/// Sidecar manifest path for an embedding file: same stem, ".csv" extension.
std::filesystem::path sidecar_path(const std::filesystem::path& embeddings);

std::string encode_embedding_payload(const RowMatrix<float>& vectors);
RowMatrix<float> decode_embedding_payload(std::string_view bytes);

EmbeddingSet load_embeddings(const std::filesystem::path& path);
void write_embeddings(const std::filesystem::path& path, const EmbeddingSet& set);

std::string encode_tensor(const Tensor& tensor);
Tensor decode_tensor(std::string_view bytes);
Tensor load_tensor(const std::filesystem::path& path);
void write_tensor(const std::filesystem::path& path, const Tensor& tensor);

std::string encode_distance_matrix(const DistanceMatrix& dist);
DistanceMatrix decode_distance_matrix(std::string_view bytes);
DistanceMatrix load_distance_matrix(const std::filesystem::path& path);
void write_distance_matrix(const std::filesystem::path& path, const DistanceMatrix& dist);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

/// Header-addressed CSV table. Fields are plain (no quoting).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::string source;

  /// Index of `name` in the header; throws FormatError(schema) naming it if absent.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;
};

CsvTable parse_csv(std::string_view text, std::string_view source);
CsvTable read_csv(const std::filesystem::path& path);
std::string format_csv(const CsvTable& table);

}  // namespace reid
