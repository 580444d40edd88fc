#include "reid/embedding.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

namespace reid {

namespace {

void require_nonzero_rows(const EmbeddingSet& set) {
  for (Index i = 0; i < set.size(); ++i) {
    if (set.vectors.row(i).cast<double>().squaredNorm() == 0.0)
      throw ValidationError("zero vector for image_id '" + set.image_ids[static_cast<std::size_t>(i)] +
                            "'");
  }
}

void require_same_dim(const EmbeddingSet& query, const EmbeddingSet& gallery) {
  if (query.dim() != gallery.dim()) {
    std::ostringstream os;
    os << "dimension mismatch: query D=" << query.dim() << ", gallery D=" << gallery.dim();
    throw ValidationError(os.str());
  }
}

}  // namespace

void EmbeddingSet::validate() const {
  const auto n = static_cast<std::size_t>(size());
  if (image_ids.size() != n || person_ids.size() != n || camera_ids.size() != n) {
    std::ostringstream os;
    os << "embedding set has " << n << " vectors but " << image_ids.size() << " image ids, "
       << person_ids.size() << " person ids and " << camera_ids.size() << " camera ids";
    throw ValidationError(os.str());
  }
  if (dim() < 1) throw ValidationError("embedding dimension must be at least 1");
  for (Index r = 0; r < vectors.rows(); ++r) {
    for (Index c = 0; c < vectors.cols(); ++c) {
      if (!std::isfinite(vectors(r, c))) {
        std::ostringstream os;
        os << "non-finite value at row " << r << ", col " << c;
        throw FormatError(FormatErrc::non_finite, os.str());
      }
    }
  }
}

std::vector<ImageRecord> EmbeddingSet::records() const {
  std::vector<ImageRecord> out(image_ids.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].image_id = image_ids[i];
    out[i].person_id = person_ids[i];
    out[i].camera_id = camera_ids[i];
  }
  return out;
}

EmbeddingSet EmbeddingSet::select(const std::vector<Index>& rows) const {
  EmbeddingSet out;
  out.vectors.resize(static_cast<Index>(rows.size()), dim());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto r = static_cast<std::size_t>(rows[k]);
    out.vectors.row(static_cast<Index>(k)) = vectors.row(rows[k]);
    out.image_ids.push_back(image_ids[r]);
    out.person_ids.push_back(person_ids[r]);
    out.camera_ids.push_back(camera_ids[r]);
  }
  return out;
}

EmbeddingSet concat(const EmbeddingSet& a, const EmbeddingSet& b) {
  require_same_dim(a, b);
  EmbeddingSet out;
  out.vectors.resize(a.size() + b.size(), a.dim());
  out.vectors << a.vectors, b.vectors;
  auto append = [](auto& dst, const auto& x, const auto& y) {
    dst = x;
    dst.insert(dst.end(), y.begin(), y.end());
  };
  append(out.image_ids, a.image_ids, b.image_ids);
  append(out.person_ids, a.person_ids, b.person_ids);
  append(out.camera_ids, a.camera_ids, b.camera_ids);
  return out;
}

void DistanceMatrix::validate() const {
  if (static_cast<Index>(query_ids.size()) != rows() ||
      static_cast<Index>(gallery_ids.size()) != cols())
    throw ValidationError("distance matrix labels do not match its shape");
  if (!values.allFinite()) throw ValidationError("distance matrix holds non-finite values");
  if ((values.array() < 0.0).any()) throw ValidationError("distance matrix holds negative values");
}

EmbeddingSet l2_normalize(const EmbeddingSet& set) {
  require_nonzero_rows(set);
  EmbeddingSet out = set;
  for (Index i = 0; i < set.size(); ++i) {
    const Eigen::RowVectorXd row = set.vectors.row(i).cast<double>();
    out.vectors.row(i) = (row / row.norm()).cast<float>();
  }
  return out;
}

DistanceMatrix euclidean_distance_matrix(const EmbeddingSet& query, const EmbeddingSet& gallery) {
  require_same_dim(query, gallery);
  return {pairwise_euclidean(query.vectors, gallery.vectors), query.image_ids, gallery.image_ids};
}

DistanceMatrix cosine_distance_matrix(const EmbeddingSet& query, const EmbeddingSet& gallery) {
  require_same_dim(query, gallery);
  require_nonzero_rows(query);
  require_nonzero_rows(gallery);
  return {pairwise_cosine(query.vectors, gallery.vectors), query.image_ids, gallery.image_ids};
}

DistanceMatrix distance_matrix(const EmbeddingSet& query, const EmbeddingSet& gallery,
                               DistanceKind kind) {
  return kind == DistanceKind::cosine ? cosine_distance_matrix(query, gallery)
                                      : euclidean_distance_matrix(query, gallery);
}

}  // namespace reid
