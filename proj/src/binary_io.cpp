#include "reid/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

namespace reid {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kHeaderSize = 8;

class ByteWriter {
 public:
  void bytes(std::string_view b) { out_.append(b); }
  void u16(std::uint16_t v) {
    for (int s = 0; s < 16; s += 8) out_.push_back(static_cast<char>((v >> s) & 0xFF));
  }
  void u32(std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) out_.push_back(static_cast<char>((v >> s) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int s = 0; s < 64; s += 8) out_.push_back(static_cast<char>((v >> s) & 0xFF));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class ByteReader {
 public:
  ByteReader(std::string_view data, std::string_view what) : data_(data), what_(what) {}

  std::size_t remaining() const { return data_.size() - pos_; }

  void need(std::size_t n, std::string_view part) const {
    if (remaining() < n) {
      std::ostringstream os;
      os << what_ << ": truncated " << part << ": expected " << n << " bytes, found "
         << remaining();
      throw FormatError(FormatErrc::truncated, os.str());
    }
  }

  std::string_view bytes(std::size_t n, std::string_view part) {
    need(n, part);
    auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint64_t uint(int width, std::string_view part) {
    auto b = bytes(static_cast<std::size_t>(width), part);
    std::uint64_t v = 0;
    for (int i = width - 1; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[static_cast<std::size_t>(i)]);
    return v;
  }
  std::uint16_t u16(std::string_view part) { return static_cast<std::uint16_t>(uint(2, part)); }
  std::uint32_t u32(std::string_view part) { return static_cast<std::uint32_t>(uint(4, part)); }
  float f32(std::string_view part) { return std::bit_cast<float>(u32(part)); }
  double f64(std::string_view part) { return std::bit_cast<double>(uint(8, part)); }

  void expect_end() const {
    if (remaining() != 0) {
      std::ostringstream os;
      os << what_ << ": " << remaining() << " trailing bytes after payload";
      throw FormatError(FormatErrc::trailing_bytes, os.str());
    }
  }

 private:
  std::string_view data_;
  std::string_view what_;
  std::size_t pos_ = 0;
};

void write_header(ByteWriter& w, std::string_view magic) {
  w.bytes(magic);
  w.u16(kFormatVersion);
  w.u16(0);
}

void read_header(ByteReader& r, std::string_view magic) {
  auto found = r.bytes(4, "header");
  if (found != magic) {
    std::ostringstream os;
    os << "bad magic: expected '" << magic << "'";
    throw FormatError(FormatErrc::bad_magic, os.str());
  }
  const auto version = r.u16("header");
  if (version != kFormatVersion) {
    std::ostringstream os;
    os << "version mismatch: file has version " << version << ", reader supports "
       << kFormatVersion;
    throw FormatError(FormatErrc::version_mismatch, os.str());
  }
  r.u16("header");  // reserved
}

std::uint32_t checked_u32(std::size_t v, std::string_view what) {
  if (v > UINT32_MAX) throw ValidationError(std::string(what) + " exceeds u32 range");
  return static_cast<std::uint32_t>(v);
}

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

std::size_t Tensor::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

fs::path sidecar_path(const fs::path& embeddings) {
  fs::path p = embeddings;
  p.replace_extension(".csv");
  return p;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatErrc::io, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file(const fs::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(FormatErrc::io, "cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(FormatErrc::io, "write failed for '" + path.string() + "'");
}

// -- REID --------------------------------------------------------------------

std::string encode_embedding_payload(const RowMatrix<float>& vectors) {
  ByteWriter w;
  write_header(w, "REID");
  w.u32(checked_u32(static_cast<std::size_t>(vectors.rows()), "N"));
  w.u32(checked_u32(static_cast<std::size_t>(vectors.cols()), "D"));
  for (Index r = 0; r < vectors.rows(); ++r)
    for (Index c = 0; c < vectors.cols(); ++c) w.f32(vectors(r, c));
  return w.take();
}

RowMatrix<float> decode_embedding_payload(std::string_view bytes) {
  ByteReader r(bytes, "embeddings");
  read_header(r, "REID");
  const std::uint32_t n = r.u32("header");
  const std::uint32_t d = r.u32("header");
  if (d < 1) throw ValidationError("embedding dimension must be at least 1");
  r.need(std::size_t{n} * d * 4, "payload");
  RowMatrix<float> out(n, d);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = 0; j < d; ++j) {
      const float v = r.f32("payload");
      if (!std::isfinite(v)) {
        std::ostringstream os;
        os << "non-finite value at row " << i << ", col " << j;
        throw FormatError(FormatErrc::non_finite, os.str());
      }
      out(i, j) = v;
    }
  }
  r.expect_end();
  return out;
}

EmbeddingSet load_embeddings(const fs::path& path) {
  EmbeddingSet set;
  set.vectors = decode_embedding_payload(read_file(path));
  const auto manifest_path = sidecar_path(path);
  const CsvTable table = read_csv(manifest_path);
  const auto id_col = table.column("image_id");
  const auto pid_col = table.column("person_id");
  const auto cam_col = table.column("camera_id");
  if (static_cast<Index>(table.rows.size()) != set.size()) {
    std::ostringstream os;
    os << "count mismatch: '" << manifest_path.string() << "' has " << table.rows.size()
       << " rows but '" << path.string() << "' declares " << set.size() << " vectors";
    throw FormatError(FormatErrc::count_mismatch, os.str());
  }
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    set.image_ids.push_back(row[id_col]);
    try {
      set.person_ids.push_back(std::stoi(row[pid_col]));
      set.camera_ids.push_back(std::stoi(row[cam_col]));
    } catch (const std::exception&) {
      std::ostringstream os;
      os << manifest_path.string() << ": row " << i + 1 << ": person_id/camera_id must be integers";
      throw FormatError(FormatErrc::schema, os.str());
    }
  }
  set.validate();
  return set;
}

void write_embeddings(const fs::path& path, const EmbeddingSet& set) {
  set.validate();
  write_file(path, encode_embedding_payload(set.vectors));
  CsvTable table{{"image_id", "person_id", "camera_id"}, {}, {}};
  for (std::size_t i = 0; i < set.image_ids.size(); ++i)
    table.rows.push_back({set.image_ids[i], std::to_string(set.person_ids[i]),
                          std::to_string(set.camera_ids[i])});
  write_file(sidecar_path(path), format_csv(table));
}

// -- RTEN --------------------------------------------------------------------

std::string encode_tensor(const Tensor& tensor) {
  if (tensor.values.size() != tensor.element_count())
    throw ValidationError("tensor value count does not match its dims");
  ByteWriter w;
  write_header(w, "RTEN");
  w.u32(checked_u32(tensor.dims.size(), "rank"));
  for (auto d : tensor.dims) w.u32(d);
  for (float v : tensor.values) w.f32(v);
  return w.take();
}

Tensor decode_tensor(std::string_view bytes) {
  ByteReader r(bytes, "tensor");
  read_header(r, "RTEN");
  Tensor t;
  const std::uint32_t rank = r.u32("header");
  for (std::uint32_t i = 0; i < rank; ++i) t.dims.push_back(r.u32("dims"));
  const std::size_t count = t.element_count();
  r.need(count * 4, "payload");
  t.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    t.values[i] = r.f32("payload");
    if (!std::isfinite(t.values[i]))
      throw FormatError(FormatErrc::non_finite, "non-finite value at flat index " + std::to_string(i));
  }
  r.expect_end();
  return t;
}

Tensor load_tensor(const fs::path& path) { return decode_tensor(read_file(path)); }
void write_tensor(const fs::path& path, const Tensor& tensor) { write_file(path, encode_tensor(tensor)); }

// -- RDMX --------------------------------------------------------------------

std::string encode_distance_matrix(const DistanceMatrix& dist) {
  dist.validate();
  ByteWriter w;
  write_header(w, "RDMX");
  w.u32(checked_u32(static_cast<std::size_t>(dist.rows()), "Q"));
  w.u32(checked_u32(static_cast<std::size_t>(dist.cols()), "G"));
  for (Index i = 0; i < dist.rows(); ++i)
    for (Index j = 0; j < dist.cols(); ++j) w.f64(dist.values(i, j));
  for (const auto* ids : {&dist.query_ids, &dist.gallery_ids}) {
    for (const auto& id : *ids) {
      w.u32(checked_u32(id.size(), "label length"));
      w.bytes(id);
    }
  }
  return w.take();
}

DistanceMatrix decode_distance_matrix(std::string_view bytes) {
  ByteReader r(bytes, "distance matrix");
  read_header(r, "RDMX");
  const std::uint32_t q = r.u32("header");
  const std::uint32_t g = r.u32("header");
  r.need(std::size_t{q} * g * 8, "payload");
  DistanceMatrix dist;
  dist.values.resize(q, g);
  for (std::uint32_t i = 0; i < q; ++i) {
    for (std::uint32_t j = 0; j < g; ++j) {
      const double v = r.f64("payload");
      if (!std::isfinite(v)) {
        std::ostringstream os;
        os << "non-finite value at row " << i << ", col " << j;
        throw FormatError(FormatErrc::non_finite, os.str());
      }
      dist.values(i, j) = v;
    }
  }
  auto read_labels = [&](std::uint32_t count, std::vector<std::string>& out) {
    for (std::uint32_t i = 0; i < count; ++i) {
      const auto len = r.u32("labels");
      out.emplace_back(r.bytes(len, "labels"));
    }
  };
  read_labels(q, dist.query_ids);
  read_labels(g, dist.gallery_ids);
  r.expect_end();
  dist.validate();
  return dist;
}

DistanceMatrix load_distance_matrix(const fs::path& path) {
  return decode_distance_matrix(read_file(path));
}

void write_distance_matrix(const fs::path& path, const DistanceMatrix& dist) {
  write_file(path, encode_distance_matrix(dist));
}

// -- CSV ---------------------------------------------------------------------

std::size_t CsvTable::column(std::string_view name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end())
    throw FormatError(FormatErrc::schema,
                      (source.empty() ? "" : source + ": ") + "missing column '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - header.begin());
}

bool CsvTable::has_column(std::string_view name) const {
  return std::find(header.begin(), header.end(), name) != header.end();
}

CsvTable parse_csv(std::string_view text, std::string_view source) {
  CsvTable table;
  table.source = std::string(source);
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    auto fields = split_line(line);
    if (table.header.empty()) {
      table.header = std::move(fields);
      continue;
    }
    if (fields.size() != table.header.size()) {
      std::ostringstream os;
      os << source << ": line " << line_no << " has " << fields.size() << " fields, header has "
         << table.header.size();
      throw FormatError(FormatErrc::schema, os.str());
    }
    table.rows.push_back(std::move(fields));
  }
  if (table.header.empty())
    throw FormatError(FormatErrc::schema, std::string(source) + ": missing CSV header");
  return table;
}

CsvTable read_csv(const fs::path& path) { return parse_csv(read_file(path), path.string()); }

std::string format_csv(const CsvTable& table) {
  std::string out;
  auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out.push_back(',');
      out += fields[i];
    }
    out.push_back('\n');
  };
  line(table.header);
  for (const auto& row : table.rows) line(row);
  return out;
}

}  // namespace reid
