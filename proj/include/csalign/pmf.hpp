#pragma once

// Similarity matrices, association PMFs, and ground-truth matching PMFs.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "csalign/error.hpp"

namespace csalign {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Labels = std::vector<std::int64_t>;

inline constexpr double kMinRowNorm = 1e-30;
inline constexpr double kPmfTolerance = 1e-6;

/// One modality's n x d embeddings with per-instance class labels.
class EmbeddingBatch {
 public:
  EmbeddingBatch(Matrix data, Labels labels, std::string modality_name = {})
      : data_(std::move(data)), labels_(std::move(labels)), name_(std::move(modality_name)) {
    detail::require(data_.rows() >= 1 && data_.cols() >= 1, ErrorCode::ShapeMismatch,
                    "embedding batch must have at least one row and one column");
    detail::require(static_cast<Eigen::Index>(labels_.size()) == data_.rows(),
                    ErrorCode::LengthMismatch, "labels length must equal number of rows");
    for (auto l : labels_) {
      detail::require(l >= 0, ErrorCode::InvalidConfig, "labels must be non-negative");
    }
  }

  Eigen::Index rows() const noexcept { return data_.rows(); }
  Eigen::Index dim() const noexcept { return data_.cols(); }
  const Matrix& data() const noexcept { return data_; }
  Matrix& mutable_data() noexcept { return data_; }
  const Labels& labels() const noexcept { return labels_; }
  const std::string& name() const noexcept { return name_; }

 private:
  Matrix data_;
  Labels labels_;
  std::string name_;
};

struct SimilarityMatrix {
  Matrix values;
  std::string row_modality;
  std::string col_modality;
};

/// Binary matrix with values(i, j) == 1 iff row label i equals column label j.
class MatchMatrix {
 public:
  MatchMatrix(const Labels& row_labels, const Labels& col_labels) {
    detail::require(row_labels.size() == col_labels.size(), ErrorCode::LengthMismatch,
                    "label vectors must have equal length");
    const auto n = static_cast<Eigen::Index>(row_labels.size());
    values_ = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      bool any = false;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (row_labels[i] == col_labels[j]) {
          values_(i, j) = 1.0;
          any = true;
        }
      }
      detail::require(any, ErrorCode::EmptyMatchRow,
                      "instance " + std::to_string(i) + " has no match in the batch");
    }
  }

  const Matrix& values() const noexcept { return values_; }
  Eigen::Index size() const noexcept { return values_.rows(); }

 private:
  Matrix values_;
};

enum class PmfKind { Association, TrueMatch };

/// Square matrix whose rows are probability mass functions.
class PmfMatrix {
 public:
  /// Validates non-negativity and unit row sums within `tol`.
  PmfMatrix(Matrix rows, PmfKind kind, double tol = kPmfTolerance)
      : rows_(std::move(rows)), kind_(kind) {
    detail::require(rows_.rows() == rows_.cols(), ErrorCode::ShapeMismatch,
                    "PMF matrix must be square");
    for (Eigen::Index i = 0; i < rows_.rows(); ++i) {
      double sum = 0.0;
      for (Eigen::Index j = 0; j < rows_.cols(); ++j) {
        const double v = rows_(i, j);
        detail::require(std::isfinite(v) && v >= 0.0, ErrorCode::NotAPmf,
                        "PMF entries must be finite and non-negative");
        sum += v;
      }
      detail::require(std::abs(sum - 1.0) <= tol, ErrorCode::NotAPmf,
                      "PMF row " + std::to_string(i) + " sums to " + std::to_string(sum));
    }
  }

  const Matrix& rows() const noexcept { return rows_; }
  PmfKind kind() const noexcept { return kind_; }
  Eigen::Index size() const noexcept { return rows_.rows(); }
  auto row(Eigen::Index i) const { return rows_.row(i); }

 private:
  Matrix rows_;
  PmfKind kind_;
};

struct AlignConfig {
  double temperature = 1.0;

  void validate() const {
    detail::require(std::isfinite(temperature) && temperature > 0.0, ErrorCode::InvalidConfig,
                    "temperature must be positive");
  }
};

namespace detail {

// Counts association PMF constructions on this thread (complexity instrumentation).
inline thread_local std::uint64_t association_builds = 0;

struct UnitRows {
  Matrix unit;
  Vector norms;
};

inline UnitRows unit_rows(const Matrix& m) {
  UnitRows out{m, m.rowwise().norm()};
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    require(out.norms(i) >= kMinRowNorm, ErrorCode::ZeroNormRow,
            "row " + std::to_string(i) + " has zero norm");
    out.unit.row(i) /= out.norms(i);
  }
  return out;
}

inline Matrix clamp_unit_interval(Matrix s) {
  return s.cwiseMax(-1.0).cwiseMin(1.0);
}

// Row-wise softmax of values / temperature with per-row max subtraction.
inline Matrix softmax_rows(const Matrix& values, double temperature) {
  Matrix out(values.rows(), values.cols());
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    const double mx = values.row(i).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      out(i, j) = std::exp((values(i, j) - mx) / temperature);
      sum += out(i, j);
    }
    out.row(i) /= sum;
  }
  return out;
}

}  // namespace detail

inline std::uint64_t association_pmf_count() noexcept { return detail::association_builds; }

/// Snapshot of the association PMF counter; `count()` reports builds since construction.
class PmfBuildCounter {
 public:
  PmfBuildCounter() : start_(detail::association_builds) {}
  std::uint64_t count() const noexcept { return detail::association_builds - start_; }

 private:
  std::uint64_t start_;
};

inline SimilarityMatrix cosine_similarity_matrix(const EmbeddingBatch& a, const EmbeddingBatch& b) {
  detail::require(a.rows() == b.rows() && a.dim() == b.dim(), ErrorCode::ShapeMismatch,
                  "cosine similarity needs batches of equal shape");
  const auto ua = detail::unit_rows(a.data());
  const auto ub = detail::unit_rows(b.data());
  return {detail::clamp_unit_interval(ua.unit * ub.unit.transpose()), a.name(), b.name()};
}

inline PmfMatrix association_pmf(const SimilarityMatrix& sim, const AlignConfig& cfg = {}) {
  cfg.validate();
  detail::require(sim.values.rows() == sim.values.cols(), ErrorCode::ShapeMismatch,
                  "similarity matrix must be square");
  detail::require(sim.values.allFinite(), ErrorCode::NonFiniteSimilarity,
                  "similarity matrix has non-finite entries");
  ++detail::association_builds;
  return PmfMatrix(detail::softmax_rows(sim.values, cfg.temperature), PmfKind::Association);
}

inline MatchMatrix build_match_matrix(const Labels& row_labels, const Labels& col_labels) {
  return MatchMatrix(row_labels, col_labels);
}

inline PmfMatrix true_match_pmf(const MatchMatrix& match) {
  Matrix q = match.values();
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    const double s = q.row(i).sum();
    detail::require(s > 0.0, ErrorCode::EmptyMatchRow, "match row " + std::to_string(i) + " is empty");
    q.row(i) /= s;
  }
  return PmfMatrix(std::move(q), PmfKind::TrueMatch);
}

inline PmfMatrix true_match_pmf(const Labels& row_labels, const Labels& col_labels) {
  return true_match_pmf(build_match_matrix(row_labels, col_labels));
}

}  // namespace csalign
