#pragma once

// Batch-level projection-matching losses: bi-modal CS, circular GCS over a
// ring of M modalities, and the all-pairs baseline.

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "csalign/divergence.hpp"
#include "csalign/error.hpp"
#include "csalign/pmf.hpp"

namespace csalign {

enum class Strategy { Clockwise, Counterclockwise, Mixed };
enum class RingDirection { Forward, Backward };
enum class PairMeasure { CS, KL };

inline std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::Clockwise: return "clockwise";
    case Strategy::Counterclockwise: return "counterclockwise";
    case Strategy::Mixed: return "mixed";
  }
  return "unknown";
}

inline Strategy parse_strategy(const std::string& s) {
  if (s == "clockwise" || s == "cw") return Strategy::Clockwise;
  if (s == "counterclockwise" || s == "ccw") return Strategy::Counterclockwise;
  if (s == "mixed") return Strategy::Mixed;
  detail::fail(ErrorCode::InvalidConfig, "unknown strategy '" + s + "'");
}

/// Ordered cycle of M >= 2 paired modality batches.
class ModalityRing {
 public:
  ModalityRing(std::vector<EmbeddingBatch> batches, Strategy strategy = Strategy::Mixed)
      : batches_(std::move(batches)), strategy_(strategy) {
    detail::require(batches_.size() >= 2, ErrorCode::TooFewDistributions,
                    "a modality ring needs at least two modalities");
    const auto& first = batches_.front();
    detail::require(first.rows() >= 2, ErrorCode::TooFewSamples, "batches need at least two instances");
    for (const auto& b : batches_) {
      detail::require(b.rows() == first.rows() && b.dim() == first.dim(), ErrorCode::ShapeMismatch,
                      "all modalities must share batch size and embedding dimension");
      detail::require(b.labels() == first.labels(), ErrorCode::LengthMismatch,
                      "labels must be identical position-wise across modalities");
    }
  }

  std::size_t size() const noexcept { return batches_.size(); }
  Eigen::Index batch_size() const noexcept { return batches_.front().rows(); }
  const std::vector<EmbeddingBatch>& batches() const noexcept { return batches_; }
  const EmbeddingBatch& operator[](std::size_t m) const { return batches_[m]; }
  Strategy strategy() const noexcept { return strategy_; }

  std::string modality_label(std::size_t m) const {
    const auto& name = batches_[m].name();
    return name.empty() ? "m" + std::to_string(m + 1) : name;
  }

  std::string direction_label(std::size_t src, std::size_t dst) const {
    return modality_label(src) + "2" + modality_label(dst);
  }

  std::size_t next(std::size_t m) const noexcept { return (m + 1) % size(); }
  std::size_t prev(std::size_t m) const noexcept { return (m + size() - 1) % size(); }

 private:
  std::vector<EmbeddingBatch> batches_;
  Strategy strategy_;
};

struct LossReport {
  double total = 0.0;
  std::map<std::string, double> per_direction;
  Vector per_sample;
  bool finite = true;
};

struct Projection {
  std::size_t source = 0;
  std::size_t target = 0;
  std::string direction;
  PmfMatrix pmf;
};

namespace detail {

inline void finalize(LossReport& r) {
  r.finite = std::isfinite(r.total) && r.per_sample.allFinite();
  for (const auto& [k, v] : r.per_direction) r.finite = r.finite && std::isfinite(v);
}

// Per-sample divergence of association rows against the true-match rows.
inline Vector directional_terms(const PmfMatrix& assoc, const PmfMatrix& truth, PairMeasure measure,
                                const KlConfig& kl) {
  const Eigen::Index n = assoc.size();
  Vector out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector p = assoc.row(i).transpose();
    const Vector q = truth.row(i).transpose();
    if (measure == PairMeasure::CS) {
      out(i) = cs_divergence(p, q).value;
    } else {
      double s = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (p(j) == 0.0) continue;
        const double t = q(j) + kl.epsilon;
        s += t > 0.0 ? p(j) * std::log(p(j) / t) : kInf;
      }
      out(i) = s;
    }
  }
  return out;
}

inline PmfMatrix project(const EmbeddingBatch& src, const EmbeddingBatch& dst, const AlignConfig& cfg) {
  return association_pmf(cosine_similarity_matrix(src, dst), cfg);
}

}  // namespace detail

/// Association PMFs along the ring edges m -> m+1 (forward) or m -> m-1 (backward).
inline std::vector<Projection> ring_projections(const ModalityRing& ring, const AlignConfig& cfg,
                                                RingDirection direction) {
  cfg.validate();
  std::vector<Projection> out;
  out.reserve(ring.size());
  for (std::size_t m = 0; m < ring.size(); ++m) {
    const std::size_t t = direction == RingDirection::Forward ? ring.next(m) : ring.prev(m);
    out.push_back({m, t, ring.direction_label(m, t), detail::project(ring[m], ring[t], cfg)});
  }
  return out;
}

/// Bidirectional CS projection-matching loss between two paired batches.
inline LossReport bimodal_cmpm_cs(const EmbeddingBatch& a, const EmbeddingBatch& b, const AlignConfig& cfg = {}) {
  const ModalityRing pair({a, b});
  cfg.validate();
  const Eigen::Index n = a.rows();
  const Vector ab = detail::directional_terms(detail::project(a, b, cfg), true_match_pmf(a.labels(), b.labels()),
                                              PairMeasure::CS, {});
  const Vector ba = detail::directional_terms(detail::project(b, a, cfg), true_match_pmf(b.labels(), a.labels()),
                                              PairMeasure::CS, {});
  LossReport r;
  r.per_direction[pair.direction_label(0, 1)] = ab.sum() / static_cast<double>(n);
  r.per_direction[pair.direction_label(1, 0)] = ba.sum() / static_cast<double>(n);
  r.per_sample = ab + ba;
  r.total = r.per_direction[pair.direction_label(0, 1)] + r.per_direction[pair.direction_label(1, 0)];
  detail::finalize(r);
  return r;
}

/// Bidirectional KL projection-matching loss (the KL-CMPM baseline), mean over anchors.
inline LossReport bimodal_cmpm_kl(const EmbeddingBatch& a, const EmbeddingBatch& b, const AlignConfig& cfg = {},
                                  const KlConfig& kl = {}) {
  const ModalityRing pair({a, b});
  cfg.validate();
  kl.validate();
  const Eigen::Index n = a.rows();
  const Vector ab = detail::directional_terms(detail::project(a, b, cfg), true_match_pmf(a.labels(), b.labels()),
                                              PairMeasure::KL, kl);
  const Vector ba = detail::directional_terms(detail::project(b, a, cfg), true_match_pmf(b.labels(), a.labels()),
                                              PairMeasure::KL, kl);
  LossReport r;
  r.per_direction[pair.direction_label(0, 1)] = ab.sum() / static_cast<double>(n);
  r.per_direction[pair.direction_label(1, 0)] = ba.sum() / static_cast<double>(n);
  r.per_sample = ab + ba;
  r.total = r.per_direction[pair.direction_label(0, 1)] + r.per_direction[pair.direction_label(1, 0)];
  detail::finalize(r);
  return r;
}

/// Circular GCS loss. Each per-sample term is a GCS over the M ring
/// projections of that anchor plus its true-match PMF (M + 1 distributions).
inline LossReport gcs_ring_loss(const ModalityRing& ring, const AlignConfig& cfg = {}) {
  cfg.validate();
  const Eigen::Index n = ring.batch_size();
  const PmfMatrix truth = true_match_pmf(ring[0].labels(), ring[0].labels());

  auto path_terms = [&](RingDirection dir) {
    const auto proj = ring_projections(ring, cfg, dir);
    Vector terms(n);
    std::vector<Vector> rows(proj.size() + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (std::size_t m = 0; m < proj.size(); ++m) rows[m] = proj[m].pmf.row(i).transpose();
      rows.back() = truth.row(i).transpose();
      terms(i) = detail::gcs_unchecked(rows).value;
    }
    return terms;
  };

  LossReport r;
  r.per_sample = Vector::Zero(n);
  const bool use_forward = ring.strategy() != Strategy::Counterclockwise;
  const bool use_backward = ring.strategy() != Strategy::Clockwise;
  double total = 0.0;
  if (use_forward) {
    const Vector f = path_terms(RingDirection::Forward);
    r.per_direction["forward"] = f.sum() / static_cast<double>(n);
    r.per_sample += f;
    total += r.per_direction["forward"];
  }
  if (use_backward) {
    const Vector b = path_terms(RingDirection::Backward);
    r.per_direction["backward"] = b.sum() / static_cast<double>(n);
    r.per_sample += b;
    total += r.per_direction["backward"];
  }
  r.total = total;
  detail::finalize(r);
  return r;
}

/// Sum of directional projection-matching losses over all M(M-1) ordered pairs.
inline LossReport pairwise_sum_loss(const ModalityRing& ring, const AlignConfig& cfg = {},
                                    PairMeasure measure = PairMeasure::CS, const KlConfig& kl = {}) {
  cfg.validate();
  kl.validate();
  const Eigen::Index n = ring.batch_size();
  const PmfMatrix truth = true_match_pmf(ring[0].labels(), ring[0].labels());
  LossReport r;
  r.per_sample = Vector::Zero(n);
  for (std::size_t s = 0; s < ring.size(); ++s) {
    for (std::size_t t = 0; t < ring.size(); ++t) {
      if (s == t) continue;
      const Vector terms = detail::directional_terms(detail::project(ring[s], ring[t], cfg), truth, measure, kl);
      const double dir = terms.sum() / static_cast<double>(n);
      r.per_direction[ring.direction_label(s, t)] = dir;
      r.per_sample += terms;
      r.total += dir;
    }
  }
  detail::finalize(r);
  return r;
}

}  // namespace csalign
