#pragma once

// Analytic gradients of every implemented loss with respect to the raw
// embedding matrices, plus a central finite-difference oracle.
//
// Chain for the projection-matching losses:
//   embeddings -> unit rows -> cosine -> softmax(./tau) -> divergence -> mean

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "csalign/divergence.hpp"
#include "csalign/error.hpp"
#include "csalign/losses.hpp"
#include "csalign/pmf.hpp"

namespace csalign {

enum class LossKind { BimodalCS, GcsRing, PairwiseCS, KL, MMD, CORAL };

inline std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::BimodalCS: return "bimodal_cs";
    case LossKind::GcsRing: return "gcs_ring";
    case LossKind::PairwiseCS: return "pairwise_cs";
    case LossKind::KL: return "kl";
    case LossKind::MMD: return "mmd";
    case LossKind::CORAL: return "coral";
  }
  return "unknown";
}

inline LossKind parse_loss_kind(const std::string& s) {
  for (auto k : {LossKind::BimodalCS, LossKind::GcsRing, LossKind::PairwiseCS, LossKind::KL, LossKind::MMD,
                 LossKind::CORAL}) {
    if (to_string(k) == s) return k;
  }
  detail::fail(ErrorCode::InvalidConfig, "unknown loss kind '" + s + "'");
}

/// Selects a loss and its knobs. Two-batch kinds (BimodalCS, KL, MMD, CORAL)
/// read the first two batches; ring kinds read all of them.
struct LossSpec {
  LossKind kind = LossKind::BimodalCS;
  AlignConfig align;
  Strategy strategy = Strategy::Mixed;
  KlConfig kl;
  MmdConfig mmd;
};

/// Per-modality partial derivatives, shaped like the source batches.
struct GradientBundle {
  std::vector<Matrix> grads;

  double squared_norm() const {
    double s = 0.0;
    for (const auto& g : grads) s += g.squaredNorm();
    return s;
  }
  double norm() const { return std::sqrt(squared_norm()); }
  bool all_finite() const {
    return std::all_of(grads.begin(), grads.end(), [](const Matrix& g) { return g.allFinite(); });
  }
};

namespace detail {

inline void require_batches(const LossSpec& spec, std::span<const EmbeddingBatch> batches) {
  const bool ring = spec.kind == LossKind::GcsRing || spec.kind == LossKind::PairwiseCS;
  require(ring ? batches.size() >= 2 : batches.size() == 2, ErrorCode::TooFewDistributions,
          ring ? "ring losses need at least two batches" : "this loss takes exactly two batches");
}

// One projection edge src -> dst with everything the backward pass needs.
struct Edge {
  UnitRows src;
  UnitRows dst;
  Matrix sim;
  Matrix pmf;
};

inline Edge edge_forward(const Matrix& src, const Matrix& dst, const AlignConfig& cfg) {
  require(src.rows() == dst.rows() && src.cols() == dst.cols(), ErrorCode::ShapeMismatch,
          "projection needs batches of equal shape");
  Edge e{unit_rows(src), unit_rows(dst), {}, {}};
  e.sim = clamp_unit_interval(e.src.unit * e.dst.unit.transpose());
  e.pmf = association_pmf(SimilarityMatrix{e.sim, {}, {}}, cfg).rows();
  return e;
}

// Pulls dL/dP back through softmax and cosine, accumulating into dsrc / ddst.
inline void edge_backward(const Edge& e, const Matrix& dpmf, double temperature, Matrix& dsrc, Matrix& ddst) {
  const Vector inner = (dpmf.cwiseProduct(e.pmf)).rowwise().sum();
  const Matrix dsim = (e.pmf.cwiseProduct(dpmf.colwise() - inner)) / temperature;

  const Matrix dsrc_unit = dsim * e.dst.unit;
  const Matrix ddst_unit = dsim.transpose() * e.src.unit;
  for (Eigen::Index i = 0; i < dsrc.rows(); ++i) {
    const double radial = dsrc_unit.row(i).dot(e.src.unit.row(i));
    dsrc.row(i) += (dsrc_unit.row(i) - radial * e.src.unit.row(i)) / e.src.norms(i);
  }
  for (Eigen::Index j = 0; j < ddst.rows(); ++j) {
    const double radial = ddst_unit.row(j).dot(e.dst.unit.row(j));
    ddst.row(j) += (ddst_unit.row(j) - radial * e.dst.unit.row(j)) / e.dst.norms(j);
  }
}

// Mean-over-anchors CS or KL loss for one direction; returns the value and
// writes dL/dP into dpmf.
inline double directional_with_grad(const Matrix& p, const Matrix& q, PairMeasure measure, const KlConfig& kl,
                                    Matrix& dpmf) {
  const Eigen::Index n = p.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  dpmf.resize(p.rows(), p.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (measure == PairMeasure::CS) {
      const double num = p.row(i).dot(q.row(i));
      const double pp = p.row(i).squaredNorm();
      const double qq = q.row(i).squaredNorm();
      total += num > 0.0 ? 0.5 * std::log(pp) + 0.5 * std::log(qq) - std::log(num) : kInf;
      dpmf.row(i) = (p.row(i) / pp - q.row(i) / num) * inv_n;
    } else {
      for (Eigen::Index j = 0; j < p.cols(); ++j) {
        const double t = q(i, j) + kl.epsilon;
        const double lr = std::log(p(i, j) / t);
        total += p(i, j) == 0.0 ? 0.0 : p(i, j) * lr;
        dpmf(i, j) = (lr + 1.0) * inv_n;
      }
    }
  }
  return total * inv_n;
}

inline double pairwise_with_grad(const LossSpec& spec, std::span<const EmbeddingBatch> batches,
                                 const std::vector<std::pair<std::size_t, std::size_t>>& edges, PairMeasure measure,
                                 GradientBundle& g) {
  double total = 0.0;
  Matrix dpmf;
  for (const auto& [s, t] : edges) {
    const Edge e = edge_forward(batches[s].data(), batches[t].data(), spec.align);
    const Matrix q = true_match_pmf(batches[s].labels(), batches[t].labels()).rows();
    total += directional_with_grad(e.pmf, q, measure, spec.kl, dpmf);
    edge_backward(e, dpmf, spec.align.temperature, g.grads[s], g.grads[t]);
  }
  return total;
}

// Circular GCS over one ring path; Q is the last (constant) distribution.
inline double ring_path_with_grad(const LossSpec& spec, std::span<const EmbeddingBatch> batches, bool forward,
                                  GradientBundle& g) {
  const std::size_t M = batches.size();
  const Eigen::Index n = batches[0].rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  const int order = static_cast<int>(M) + 1;
  const Matrix q = true_match_pmf(batches[0].labels(), batches[0].labels()).rows();

  std::vector<Edge> edges;
  std::vector<std::size_t> targets;
  edges.reserve(M);
  for (std::size_t m = 0; m < M; ++m) {
    const std::size_t t = forward ? (m + 1) % M : (m + M - 1) % M;
    targets.push_back(t);
    edges.push_back(edge_forward(batches[m].data(), batches[t].data(), spec.align));
  }

  std::vector<Matrix> dpmf(M, Matrix::Zero(n, n));
  std::vector<const Matrix*> dist(M + 1);
  for (std::size_t m = 0; m < M; ++m) dist[m] = &edges[m].pmf;
  dist[M] = &q;

  double total = 0.0;
  std::vector<double> norms(M + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    double num = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      double prod = 1.0;
      for (const Matrix* d : dist) prod *= (*d)(i, j);
      num += prod;
    }
    double log_den = 0.0;
    for (std::size_t m = 0; m <= M; ++m) {
      double s = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) s += ipow((*dist[m])(i, j), order);
      norms[m] = s;
      log_den += std::log(s) / order;
    }
    total += num > 0.0 ? log_den - std::log(num) : kInf;

    for (std::size_t m = 0; m < M; ++m) {
      for (Eigen::Index j = 0; j < n; ++j) {
        double others = 1.0;
        for (std::size_t k = 0; k <= M; ++k) {
          if (k != m) others *= (*dist[k])(i, j);
        }
        const double pm = (*dist[m])(i, j);
        dpmf[m](i, j) = (ipow(pm, order - 1) / norms[m] - others / num) * inv_n;
      }
    }
  }

  for (std::size_t m = 0; m < M; ++m) {
    edge_backward(edges[m], dpmf[m], spec.align.temperature, g.grads[m], g.grads[targets[m]]);
  }
  return total * inv_n;
}

inline double mmd_with_grad(const Matrix& x, const Matrix& y, double sigma, GradientBundle& g) {
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  const double nx = static_cast<double>(x.rows());
  const double ny = static_cast<double>(y.rows());

  // Accumulates w * sum_j k(a_i, b_j) and w * dk/da_i into ga (and dk/db_j into gb).
  auto block = [&](const Matrix& a, const Matrix& b, double w, Matrix& ga, Matrix& gb) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      for (Eigen::Index j = 0; j < b.rows(); ++j) {
        const Eigen::RowVectorXd diff = a.row(i) - b.row(j);
        const double k = std::exp(-diff.squaredNorm() * inv2s2);
        sum += k;
        const Eigen::RowVectorXd dk = (-2.0 * inv2s2 * k * w) * diff;
        ga.row(i) += dk;
        gb.row(j) -= dk;
      }
    }
    return sum * w;
  };

  double value = 0.0;
  value += block(x, x, 1.0 / (nx * nx), g.grads[0], g.grads[0]);
  value += block(y, y, 1.0 / (ny * ny), g.grads[1], g.grads[1]);
  value += block(x, y, -2.0 / (nx * ny), g.grads[0], g.grads[1]);
  return value;
}

inline double coral_with_grad(const Matrix& x, const Matrix& y, GradientBundle& g) {
  require(x.cols() == y.cols(), ErrorCode::ShapeMismatch, "CORAL samples must share dimension");
  require(x.rows() >= 2 && y.rows() >= 2, ErrorCode::TooFewSamples, "CORAL needs at least two samples per side");
  const double d = static_cast<double>(x.cols());
  const Matrix xc = x.rowwise() - x.colwise().mean();
  const Matrix yc = y.rowwise() - y.colwise().mean();
  const double nx1 = static_cast<double>(x.rows() - 1);
  const double ny1 = static_cast<double>(y.rows() - 1);
  const Matrix diff = xc.transpose() * xc / nx1 - yc.transpose() * yc / ny1;
  g.grads[0] += xc * diff / (d * d * nx1);
  g.grads[1] -= yc * diff / (d * d * ny1);
  return diff.squaredNorm() / (4.0 * d * d);
}

inline std::vector<std::pair<std::size_t, std::size_t>> all_ordered_pairs(std::size_t M) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t s = 0; s < M; ++s)
    for (std::size_t t = 0; t < M; ++t)
      if (s != t) out.emplace_back(s, t);
  return out;
}

// Independent from-scratch evaluation of every loss in scalar type T. The
// finite-difference oracle runs it in long double so that evaluation roundoff
// stays far below the O(h^2) truncation error.
template <typename T>
using MatrixT = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

template <typename T>
MatrixT<T> reference_pmf(const MatrixT<T>& src, const MatrixT<T>& dst, T temperature) {
  auto unit = [](MatrixT<T> m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      T norm = 0;
      for (Eigen::Index k = 0; k < m.cols(); ++k) norm += m(i, k) * m(i, k);
      norm = std::sqrt(norm);
      require(norm >= T(kMinRowNorm), ErrorCode::ZeroNormRow, "row has zero norm");
      m.row(i) /= norm;
    }
    return m;
  };
  const MatrixT<T> us = unit(src);
  const MatrixT<T> ud = unit(dst);
  MatrixT<T> p(src.rows(), dst.rows());
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      T c = 0;
      for (Eigen::Index k = 0; k < us.cols(); ++k) c += us(i, k) * ud(j, k);
      p(i, j) = std::min(T(1), std::max(T(-1), c)) / temperature;
    }
    const T mx = p.row(i).maxCoeff();
    T sum = 0;
    for (Eigen::Index j = 0; j < p.cols(); ++j) sum += (p(i, j) = std::exp(p(i, j) - mx));
    p.row(i) /= sum;
  }
  return p;
}

template <typename T>
MatrixT<T> reference_truth(const Labels& rows, const Labels& cols) {
  MatrixT<T> q = MatrixT<T>::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    T count = 0;
    for (std::size_t j = 0; j < cols.size(); ++j) count += rows[i] == cols[j] ? T(1) : T(0);
    require(count > 0, ErrorCode::EmptyMatchRow, "instance has no match in the batch");
    for (std::size_t j = 0; j < cols.size(); ++j)
      if (rows[i] == cols[j]) q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = T(1) / count;
  }
  return q;
}

template <typename T>
T reference_directional(const MatrixT<T>& p, const MatrixT<T>& q, PairMeasure measure, T eps) {
  T total = 0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    if (measure == PairMeasure::CS) {
      T pq = 0, pp = 0, qq = 0;
      for (Eigen::Index j = 0; j < p.cols(); ++j) {
        pq += p(i, j) * q(i, j);
        pp += p(i, j) * p(i, j);
        qq += q(i, j) * q(i, j);
      }
      total += -std::log(pq / (std::sqrt(pp) * std::sqrt(qq)));
    } else {
      for (Eigen::Index j = 0; j < p.cols(); ++j)
        if (p(i, j) != 0) total += p(i, j) * std::log(p(i, j) / (q(i, j) + eps));
    }
  }
  return total / T(p.rows());
}

template <typename T>
T reference_loss(const LossSpec& spec, std::span<const EmbeddingBatch> batches) {
  require_batches(spec, batches);
  std::vector<MatrixT<T>> x;
  for (const auto& b : batches) x.push_back(b.data().template cast<T>());
  const T tau = T(spec.align.temperature);

  auto pairs_sum = [&](const std::vector<std::pair<std::size_t, std::size_t>>& edges, PairMeasure measure) {
    T total = 0;
    for (const auto& [s, t] : edges) {
      total += reference_directional<T>(reference_pmf<T>(x[s], x[t], tau),
                                        reference_truth<T>(batches[s].labels(), batches[t].labels()), measure,
                                        T(spec.kl.epsilon));
    }
    return total;
  };

  switch (spec.kind) {
    case LossKind::BimodalCS: return pairs_sum({{0, 1}, {1, 0}}, PairMeasure::CS);
    case LossKind::KL: return pairs_sum({{0, 1}, {1, 0}}, PairMeasure::KL);
    case LossKind::PairwiseCS: return pairs_sum(all_ordered_pairs(x.size()), PairMeasure::CS);
    case LossKind::GcsRing: {
      const std::size_t M = x.size();
      const MatrixT<T> q = reference_truth<T>(batches[0].labels(), batches[0].labels());
      T total = 0;
      for (bool forward : {true, false}) {
        if (forward && spec.strategy == Strategy::Counterclockwise) continue;
        if (!forward && spec.strategy == Strategy::Clockwise) continue;
        std::vector<MatrixT<T>> dist;
        for (std::size_t m = 0; m < M; ++m)
          dist.push_back(reference_pmf<T>(x[m], x[forward ? (m + 1) % M : (m + M - 1) % M], tau));
        dist.push_back(q);
        const T order = T(dist.size());
        for (Eigen::Index i = 0; i < q.rows(); ++i) {
          T num = 0;
          for (Eigen::Index j = 0; j < q.cols(); ++j) {
            T prod = 1;
            for (const auto& d : dist) prod *= d(i, j);
            num += prod;
          }
          T log_den = 0;
          for (const auto& d : dist) {
            T s = 0;
            for (Eigen::Index j = 0; j < q.cols(); ++j) s += std::pow(d(i, j), order);
            log_den += std::log(s) / order;
          }
          total += (log_den - std::log(num)) / T(q.rows());
        }
      }
      return total;
    }
    case LossKind::MMD: {
      require(spec.mmd.bandwidth.has_value(), ErrorCode::InvalidConfig, "reference MMD needs a pinned bandwidth");
      const T sigma = T(*spec.mmd.bandwidth);
      auto ksum = [&](const MatrixT<T>& a, const MatrixT<T>& b) {
        T s = 0;
        for (Eigen::Index i = 0; i < a.rows(); ++i)
          for (Eigen::Index j = 0; j < b.rows(); ++j)
            s += std::exp(-(a.row(i) - b.row(j)).squaredNorm() / (2 * sigma * sigma));
        return s / (T(a.rows()) * T(b.rows()));
      };
      return ksum(x[0], x[0]) + ksum(x[1], x[1]) - 2 * ksum(x[0], x[1]);
    }
    case LossKind::CORAL: {
      auto cov = [](const MatrixT<T>& m) {
        const MatrixT<T> c = m.rowwise() - m.colwise().mean();
        return MatrixT<T>(c.transpose() * c / T(m.rows() - 1));
      };
      const T d = T(x[0].cols());
      return (cov(x[0]) - cov(x[1])).squaredNorm() / (4 * d * d);
    }
  }
  return 0;
}

}  // namespace detail

/// Replaces a median-heuristic MMD bandwidth with its value at `batches`, so
/// the gradient and the finite-difference oracle differentiate the same function.
inline LossSpec pin_bandwidth(LossSpec spec, std::span<const EmbeddingBatch> batches) {
  if (spec.kind == LossKind::MMD && !spec.mmd.bandwidth) {
    detail::require_batches(spec, batches);
    spec.mmd.bandwidth = median_heuristic_bandwidth(batches[0].data(), batches[1].data());
  }
  return spec;
}

/// Forward value of the selected loss through the public loss operations.
inline double loss_value(const LossSpec& spec, std::span<const EmbeddingBatch> batches) {
  detail::require_batches(spec, batches);
  switch (spec.kind) {
    case LossKind::BimodalCS: return bimodal_cmpm_cs(batches[0], batches[1], spec.align).total;
    case LossKind::KL: return bimodal_cmpm_kl(batches[0], batches[1], spec.align, spec.kl).total;
    case LossKind::GcsRing:
      return gcs_ring_loss(ModalityRing({batches.begin(), batches.end()}, spec.strategy), spec.align).total;
    case LossKind::PairwiseCS:
      return pairwise_sum_loss(ModalityRing({batches.begin(), batches.end()}), spec.align, PairMeasure::CS).total;
    case LossKind::MMD: return mmd_squared(batches[0], batches[1], spec.mmd);
    case LossKind::CORAL: return coral_loss(batches[0], batches[1]);
  }
  return 0.0;
}

inline double loss_value(const LossSpec& spec, const std::vector<EmbeddingBatch>& batches) {
  return loss_value(spec, std::span<const EmbeddingBatch>(batches));
}

/// Loss value and exact partial derivatives with respect to every embedding entry.
inline std::pair<double, GradientBundle> loss_gradient(const LossSpec& spec, std::span<const EmbeddingBatch> batches) {
  detail::require_batches(spec, batches);
  spec.align.validate();
  spec.kl.validate();
  spec.mmd.validate();
  GradientBundle g;
  for (const auto& b : batches) g.grads.push_back(Matrix::Zero(b.rows(), b.dim()));

  double value = 0.0;
  switch (spec.kind) {
    case LossKind::BimodalCS:
    case LossKind::KL: {
      const ModalityRing check({batches.begin(), batches.end()});
      const auto measure = spec.kind == LossKind::KL ? PairMeasure::KL : PairMeasure::CS;
      value = detail::pairwise_with_grad(spec, batches, {{0, 1}, {1, 0}}, measure, g);
      break;
    }
    case LossKind::PairwiseCS: {
      const ModalityRing check({batches.begin(), batches.end()});
      value = detail::pairwise_with_grad(spec, batches, detail::all_ordered_pairs(batches.size()), PairMeasure::CS, g);
      break;
    }
    case LossKind::GcsRing: {
      const ModalityRing check({batches.begin(), batches.end()});
      if (spec.strategy != Strategy::Counterclockwise) value += detail::ring_path_with_grad(spec, batches, true, g);
      if (spec.strategy != Strategy::Clockwise) value += detail::ring_path_with_grad(spec, batches, false, g);
      break;
    }
    case LossKind::MMD: {
      const auto& x = batches[0].data();
      const auto& y = batches[1].data();
      detail::require(x.cols() == y.cols(), ErrorCode::ShapeMismatch, "MMD samples must share dimension");
      value = detail::mmd_with_grad(x, y, resolve_bandwidth(x, y, spec.mmd), g);
      break;
    }
    case LossKind::CORAL: value = detail::coral_with_grad(batches[0].data(), batches[1].data(), g); break;
  }
  return {value, std::move(g)};
}

inline std::pair<double, GradientBundle> loss_gradient(const LossSpec& spec,
                                                       const std::vector<EmbeddingBatch>& batches) {
  return loss_gradient(spec, std::span<const EmbeddingBatch>(batches));
}

/// Central differences (f(x + h e) - f(x - h e)) / 2h of an arbitrary functional.
inline GradientBundle finite_diff_gradient(const std::function<double(const std::vector<Matrix>&)>& f,
                                           std::vector<Matrix> point, double step = 1e-5) {
  detail::require(std::isfinite(step) && step > 0.0, ErrorCode::InvalidConfig, "step must be positive");
  GradientBundle g;
  for (const auto& m : point) g.grads.push_back(Matrix::Zero(m.rows(), m.cols()));
  for (std::size_t b = 0; b < point.size(); ++b) {
    for (Eigen::Index k = 0; k < point[b].size(); ++k) {
      double& x = point[b].data()[k];
      const double saved = x;
      x = saved + step;
      const double up = f(point);
      x = saved - step;
      const double down = f(point);
      x = saved;
      detail::require(std::isfinite(up) && std::isfinite(down), ErrorCode::NonFinitePerturbation,
                      "loss is not finite at a perturbed point");
      g.grads[b].data()[k] = (up - down) / (2.0 * step);
    }
  }
  return g;
}

/// Central differences of the selected loss. The loss is re-evaluated from
/// scratch in extended precision at every perturbed point; a median-heuristic
/// MMD bandwidth is pinned at the evaluation point.
inline GradientBundle finite_diff_gradient(const LossSpec& spec, std::span<const EmbeddingBatch> batches,
                                           double step = 1e-5) {
  using Ext = long double;
  detail::require(std::isfinite(step) && step > 0.0, ErrorCode::InvalidConfig, "step must be positive");
  const LossSpec pinned = pin_bandwidth(spec, batches);
  std::vector<EmbeddingBatch> work(batches.begin(), batches.end());
  auto eval = [&] { return detail::reference_loss<Ext>(pinned, work); };
  detail::require(std::isfinite(static_cast<double>(eval())), ErrorCode::NonFinitePerturbation,
                  "loss is not finite at the evaluation point");
  GradientBundle g;
  for (auto& b : work) {
    g.grads.push_back(Matrix::Zero(b.rows(), b.dim()));
    Matrix& x = b.mutable_data();
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      const double saved = x.data()[k];
      x.data()[k] = saved + step;
      const Ext up = eval();
      x.data()[k] = saved - step;
      const Ext down = eval();
      // the realised step, since saved +/- step is rounded to double
      const Ext span = static_cast<Ext>(saved + step) - static_cast<Ext>(saved - step);
      x.data()[k] = saved;
      detail::require(std::isfinite(static_cast<double>(up)) && std::isfinite(static_cast<double>(down)),
                      ErrorCode::NonFinitePerturbation, "loss is not finite at a perturbed point");
      g.grads.back().data()[k] = static_cast<double>((up - down) / span);
    }
  }
  return g;
}

inline GradientBundle finite_diff_gradient(const LossSpec& spec, const std::vector<EmbeddingBatch>& batches,
                                           double step = 1e-5) {
  return finite_diff_gradient(spec, std::span<const EmbeddingBatch>(batches), step);
}

/// max_k |a_k - b_k| / max(floor, |a_k| + |b_k|) over every coordinate.
inline double max_relative_error(const GradientBundle& a, const GradientBundle& b, double floor = 1e-8) {
  detail::require(a.grads.size() == b.grads.size(), ErrorCode::ShapeMismatch, "bundles differ in modality count");
  double worst = 0.0;
  for (std::size_t m = 0; m < a.grads.size(); ++m) {
    detail::require(a.grads[m].rows() == b.grads[m].rows() && a.grads[m].cols() == b.grads[m].cols(),
                    ErrorCode::ShapeMismatch, "bundles differ in shape");
    for (Eigen::Index k = 0; k < a.grads[m].size(); ++k) {
      const double x = a.grads[m].data()[k];
      const double y = b.grads[m].data()[k];
      worst = std::max(worst, std::abs(x - y) / std::max(floor, std::abs(x) + std::abs(y)));
    }
  }
  return worst;
}

}  // namespace csalign
