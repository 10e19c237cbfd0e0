#pragma once

// Closed-form divergences between discrete distributions (CS, GCS), the Hölder
// bound they rest on, and the KL / MMD / CORAL alignment baselines.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "csalign/error.hpp"
#include "csalign/pmf.hpp"

namespace csalign {

/// value = -log(numerator / denominator), +inf when numerator == 0.
struct DivergenceValue {
  double value = 0.0;
  double numerator = 0.0;
  double denominator = 0.0;

  bool finite() const noexcept { return std::isfinite(value); }
};

struct KlConfig {
  double epsilon = 1e-8;

  void validate() const {
    detail::require(std::isfinite(epsilon) && epsilon >= 0.0, ErrorCode::InvalidConfig,
                    "KL epsilon must be non-negative");
  }
};

/// Gaussian-kernel width; an empty bandwidth selects the median heuristic.
struct MmdConfig {
  std::optional<double> bandwidth;

  static MmdConfig median_heuristic() { return {}; }
  static MmdConfig fixed(double sigma) { return {sigma}; }

  void validate() const {
    if (bandwidth) {
      detail::require(std::isfinite(*bandwidth) && *bandwidth > 0.0, ErrorCode::InvalidConfig,
                      "MMD bandwidth must be positive");
    }
  }
};

struct HolderResult {
  bool holds = false;
  double lhs = 0.0;
  double rhs = 0.0;
};

namespace detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// x^k by repeated multiplication so that identical inputs produce bit-identical
// numerator and norm terms.
inline double ipow(double x, int k) {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= x;
  return r;
}

inline void check_nonnegative(const Eigen::Ref<const Vector>& v) {
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    require(std::isfinite(v(k)) && v(k) >= 0.0, ErrorCode::NegativeEntry,
            "entries must be finite and non-negative");
  }
}

inline void check_pmf(const Eigen::Ref<const Vector>& p) {
  double sum = 0.0;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    require(std::isfinite(p(k)) && p(k) >= 0.0, ErrorCode::NotAPmf,
            "PMF entries must be finite and non-negative");
    sum += p(k);
  }
  require(std::abs(sum - 1.0) <= kPmfTolerance, ErrorCode::NotAPmf,
          "PMF sums to " + std::to_string(sum));
}

inline DivergenceValue from_parts(double numerator, double log_denominator) {
  DivergenceValue out;
  out.numerator = numerator;
  out.denominator = std::exp(log_denominator);
  out.value = numerator > 0.0 ? log_denominator - std::log(numerator) : kInf;
  return out;
}

// Generalized CS on already-validated non-negative sequences of equal length.
// The norm exponent equals the number of sequences.
template <typename Rows>
DivergenceValue gcs_unchecked(const Rows& seqs) {
  const int order = static_cast<int>(seqs.size());
  const Eigen::Index len = seqs[0].size();
  double numerator = 0.0;
  for (Eigen::Index k = 0; k < len; ++k) {
    double prod = 1.0;
    for (const auto& s : seqs) prod *= s(k);
    numerator += prod;
  }
  double log_den = 0.0;
  for (const auto& s : seqs) {
    double norm = 0.0;
    for (Eigen::Index k = 0; k < len; ++k) norm += ipow(s(k), order);
    if (norm <= 0.0) return {kInf, numerator, 0.0};
    log_den += std::log(norm) / order;
  }
  return from_parts(numerator, log_den);
}

inline void check_lengths(std::span<const Vector> seqs) {
  require(seqs.size() >= 2, ErrorCode::TooFewDistributions, "need at least two distributions");
  for (const auto& s : seqs) {
    require(s.size() == seqs[0].size() && s.size() >= 1, ErrorCode::LengthMismatch,
            "all distributions must share one non-empty support");
  }
}

inline double squared_distance(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& v) {
  return (u - v).squaredNorm();
}

inline double gaussian_kernel_sum(const Matrix& a, const Matrix& b, double sigma) {
  const double inv = 1.0 / (2.0 * sigma * sigma);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      sum += std::exp(-(a.row(i) - b.row(j)).squaredNorm() * inv);
    }
  }
  return sum;
}

inline Matrix sample_covariance(const Matrix& x) {
  const Matrix centered = x.rowwise() - x.colwise().mean();
  return (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
}

}  // namespace detail

/// Cauchy-Schwarz divergence between two PMFs on a common support.
inline DivergenceValue cs_divergence(const Eigen::Ref<const Vector>& p, const Eigen::Ref<const Vector>& q) {
  detail::require(p.size() == q.size() && p.size() >= 1, ErrorCode::LengthMismatch,
                  "PMFs must share one non-empty support");
  detail::check_pmf(p);
  detail::check_pmf(q);
  const double numerator = p.dot(q);
  const double pp = p.squaredNorm();
  const double qq = q.squaredNorm();
  return detail::from_parts(numerator, 0.5 * std::log(pp) + 0.5 * std::log(qq));
}

/// Generalized (Hölder) CS divergence among M >= 2 PMFs; norms use exponent M.
inline DivergenceValue gcs_divergence(std::span<const Vector> pmfs) {
  detail::check_lengths(pmfs);
  for (const auto& p : pmfs) detail::check_pmf(p);
  return detail::gcs_unchecked(pmfs);
}

inline DivergenceValue gcs_divergence(const std::vector<Vector>& pmfs) {
  return gcs_divergence(std::span<const Vector>(pmfs));
}

/// GCS over arbitrary non-negative sequences. Invariant under positive
/// rescaling of any input; equals gcs_divergence on normalized inputs.
inline DivergenceValue gcs_divergence_unnormalized(std::span<const Vector> seqs) {
  detail::check_lengths(seqs);
  for (const auto& s : seqs) {
    detail::check_nonnegative(s);
    detail::require(s.sum() > 0.0, ErrorCode::NotAPmf, "sequence has no mass");
  }
  return detail::gcs_unchecked(seqs);
}

inline DivergenceValue gcs_divergence_unnormalized(const std::vector<Vector>& seqs) {
  return gcs_divergence_unnormalized(std::span<const Vector>(seqs));
}

/// Evaluates both sides of Hölder's inequality with exponent M for M sequences.
inline HolderResult holder_check(std::span<const Vector> seqs) {
  detail::check_lengths(seqs);
  for (const auto& s : seqs) detail::check_nonnegative(s);
  const int order = static_cast<int>(seqs.size());
  HolderResult r;
  for (Eigen::Index k = 0; k < seqs[0].size(); ++k) {
    double prod = 1.0;
    for (const auto& s : seqs) prod *= s(k);
    r.lhs += prod;
  }
  r.rhs = 1.0;
  for (const auto& s : seqs) {
    double norm = 0.0;
    for (Eigen::Index k = 0; k < s.size(); ++k) norm += detail::ipow(s(k), order);
    r.rhs *= std::pow(norm, 1.0 / order);
  }
  r.holds = r.lhs <= r.rhs + 1e-12;
  return r;
}

inline HolderResult holder_check(const std::vector<Vector>& seqs) {
  return holder_check(std::span<const Vector>(seqs));
}

/// KL-style projection-matching objective: sum_ij p log(p / (t + eps)).
/// Zero predicted entries contribute nothing; a positive prediction against a
/// zero target with eps == 0 yields +inf.
inline double kl_alignment(const PmfMatrix& s_pred, const PmfMatrix& s_true, const KlConfig& cfg = {}) {
  cfg.validate();
  detail::require(s_pred.size() == s_true.size(), ErrorCode::ShapeMismatch,
                  "prediction and target must have the same shape");
  double total = 0.0;
  for (Eigen::Index i = 0; i < s_pred.size(); ++i) {
    for (Eigen::Index j = 0; j < s_pred.size(); ++j) {
      const double p = s_pred.rows()(i, j);
      if (p == 0.0) continue;
      const double t = s_true.rows()(i, j) + cfg.epsilon;
      total += t > 0.0 ? p * std::log(p / t) : detail::kInf;
    }
  }
  return total;
}

/// Single-row form of kl_alignment on two validated PMF vectors.
inline double kl_divergence(const Eigen::Ref<const Vector>& p, const Eigen::Ref<const Vector>& t,
                            const KlConfig& cfg = {}) {
  cfg.validate();
  detail::require(p.size() == t.size() && p.size() >= 1, ErrorCode::LengthMismatch,
                  "prediction and target must share one non-empty support");
  detail::check_pmf(p);
  detail::check_pmf(t);
  double total = 0.0;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    if (p(k) == 0.0) continue;
    const double tk = t(k) + cfg.epsilon;
    total += tk > 0.0 ? p(k) * std::log(p(k) / tk) : detail::kInf;
  }
  return total;
}

/// Median of pairwise Euclidean distances over the pooled sample.
inline double median_heuristic_bandwidth(const Matrix& x, const Matrix& y) {
  detail::require(x.cols() == y.cols(), ErrorCode::ShapeMismatch, "samples must share dimension");
  Matrix pooled(x.rows() + y.rows(), x.cols());
  pooled << x, y;
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(pooled.rows() * (pooled.rows() - 1) / 2));
  for (Eigen::Index i = 0; i < pooled.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < pooled.rows(); ++j) {
      dists.push_back((pooled.row(i) - pooled.row(j)).norm());
    }
  }
  detail::require(!dists.empty(), ErrorCode::DegenerateBandwidth, "need at least two pooled points");
  std::sort(dists.begin(), dists.end());
  const std::size_t mid = dists.size() / 2;
  const double median = dists.size() % 2 == 1 ? dists[mid] : 0.5 * (dists[mid - 1] + dists[mid]);
  detail::require(median > 0.0, ErrorCode::DegenerateBandwidth, "median pairwise distance is zero");
  return median;
}

inline double resolve_bandwidth(const Matrix& x, const Matrix& y, const MmdConfig& cfg) {
  cfg.validate();
  return cfg.bandwidth ? *cfg.bandwidth : median_heuristic_bandwidth(x, y);
}

/// Biased empirical MMD^2 with a Gaussian kernel.
inline double mmd_squared(const Matrix& x, const Matrix& y, const MmdConfig& cfg = {}) {
  detail::require(x.cols() == y.cols() && x.rows() >= 1 && y.rows() >= 1, ErrorCode::ShapeMismatch,
                  "MMD samples must be non-empty and share dimension");
  const double sigma = resolve_bandwidth(x, y, cfg);
  const double nx = static_cast<double>(x.rows());
  const double ny = static_cast<double>(y.rows());
  return detail::gaussian_kernel_sum(x, x, sigma) / (nx * nx) +
         detail::gaussian_kernel_sum(y, y, sigma) / (ny * ny) -
         2.0 * detail::gaussian_kernel_sum(x, y, sigma) / (nx * ny);
}

inline double mmd_squared(const EmbeddingBatch& x, const EmbeddingBatch& y, const MmdConfig& cfg = {}) {
  return mmd_squared(x.data(), y.data(), cfg);
}

/// ||C_x - C_y||_F^2 / (4 d^2) with unbiased sample covariances.
inline double coral_loss(const Matrix& x, const Matrix& y) {
  detail::require(x.cols() == y.cols(), ErrorCode::ShapeMismatch, "CORAL samples must share dimension");
  detail::require(x.rows() >= 2 && y.rows() >= 2, ErrorCode::TooFewSamples,
                  "CORAL needs at least two samples per side");
  const double d = static_cast<double>(x.cols());
  return (detail::sample_covariance(x) - detail::sample_covariance(y)).squaredNorm() / (4.0 * d * d);
}

inline double coral_loss(const EmbeddingBatch& x, const EmbeddingBatch& y) {
  return coral_loss(x.data(), y.data());
}

}  // namespace csalign
