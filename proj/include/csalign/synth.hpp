#pragma once

// Desk-scale end-to-end harness: class-conditioned Gaussian multimodal data,
// per-modality encoders, Adam with clipping and decoupled weight decay, and
// held-out retrieval evaluation.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "csalign/error.hpp"
#include "csalign/gradient.hpp"
#include "csalign/losses.hpp"
#include "csalign/pmf.hpp"
#include "csalign/retrieval.hpp"

namespace csalign {

struct SynthConfig {
  int num_classes = 8;
  int per_class = 200;
  std::vector<int> input_dims{64, 64, 64};
  int embed_dim = 16;
  double class_sep = 6.0;
  double noise_sigma = 1.0;
  std::uint64_t seed = 0;
  std::vector<std::string> modality_names;  // defaults to a, b, c, ...

  std::size_t modalities() const noexcept { return input_dims.size(); }

  std::string modality_name(std::size_t m) const {
    if (m < modality_names.size()) return modality_names[m];
    return m < 26 ? std::string(1, static_cast<char>('a' + m)) : "m" + std::to_string(m + 1);
  }

  void validate() const {
    detail::require(num_classes >= 2, ErrorCode::InvalidConfig, "num_classes must be >= 2");
    detail::require(per_class >= 2, ErrorCode::InvalidConfig, "per_class must be >= 2");
    detail::require(input_dims.size() >= 2, ErrorCode::InvalidConfig, "need at least two modalities");
    for (int d : input_dims) detail::require(d >= 1, ErrorCode::InvalidConfig, "input dims must be positive");
    detail::require(embed_dim >= 1, ErrorCode::InvalidConfig, "embed_dim must be positive");
    detail::require(class_sep > 0.0 && std::isfinite(class_sep), ErrorCode::InvalidConfig, "class_sep must be > 0");
    detail::require(noise_sigma > 0.0 && std::isfinite(noise_sigma), ErrorCode::InvalidConfig,
                    "noise_sigma must be > 0");
    detail::require(modality_names.empty() || modality_names.size() == input_dims.size(), ErrorCode::InvalidConfig,
                    "modality_names must name every modality");
  }
};

/// Raw features for every modality; row i of each batch is the same instance.
inline std::vector<EmbeddingBatch> generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t M = cfg.modalities();
  const Eigen::Index n = static_cast<Eigen::Index>(cfg.num_classes) * cfg.per_class;

  std::vector<Matrix> means;
  for (std::size_t m = 0; m < M; ++m) {
    Matrix mu(cfg.num_classes, cfg.input_dims[m]);
    for (int c = 0; c < cfg.num_classes; ++c) {
      Vector dir(cfg.input_dims[m]);
      do {
        for (Eigen::Index k = 0; k < dir.size(); ++k) dir(k) = normal(rng);
      } while (dir.norm() == 0.0);
      mu.row(c) = dir.normalized().transpose() * cfg.class_sep;
    }
    means.push_back(std::move(mu));
  }

  Labels labels(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = i / cfg.per_class;

  std::vector<EmbeddingBatch> out;
  for (std::size_t m = 0; m < M; ++m) {
    Matrix x(n, cfg.input_dims[m]);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index k = 0; k < x.cols(); ++k) {
        x(i, k) = means[m](labels[static_cast<std::size_t>(i)], k) + cfg.noise_sigma * normal(rng);
      }
    }
    out.emplace_back(std::move(x), labels, cfg.modality_name(m));
  }
  return out;
}

inline EmbeddingBatch select_rows(const EmbeddingBatch& b, const std::vector<std::size_t>& idx) {
  Matrix x(static_cast<Eigen::Index>(idx.size()), b.dim());
  Labels l(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    x.row(static_cast<Eigen::Index>(r)) = b.data().row(static_cast<Eigen::Index>(idx[r]));
    l[r] = b.labels()[idx[r]];
  }
  return EmbeddingBatch(std::move(x), std::move(l), b.name());
}

struct DataSplit {
  std::vector<EmbeddingBatch> train;
  std::vector<EmbeddingBatch> test;
};

/// Seeded permutation split; the same instances land in the same side for every modality.
inline DataSplit split_holdout(const std::vector<EmbeddingBatch>& data, double test_fraction, std::uint64_t seed) {
  detail::require(!data.empty(), ErrorCode::InvalidConfig, "no data to split");
  detail::require(test_fraction > 0.0 && test_fraction < 1.0, ErrorCode::InvalidConfig,
                  "test fraction must lie in (0, 1)");
  const auto n = static_cast<std::size_t>(data[0].rows());
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(seed ^ 0x5eed5a1177ULL);
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  detail::require(n_test >= 2 && n - n_test >= 2, ErrorCode::InvalidConfig, "split leaves a side too small");
  std::vector<std::size_t> test(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> train(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  DataSplit s;
  for (const auto& b : data) {
    s.train.push_back(select_rows(b, train));
    s.test.push_back(select_rows(b, test));
  }
  return s;
}

/// Affine map into the shared space, optionally preceded by one tanh hidden layer.
class Encoder {
 public:
  struct Cache {
    Matrix input;
    Matrix hidden;  // tanh activations, empty for linear encoders
  };

  Encoder(int input_dim, int embed_dim, int hidden_dim, std::mt19937_64& rng) {
    detail::require(input_dim >= 1 && embed_dim >= 1 && hidden_dim >= 0, ErrorCode::InvalidConfig,
                    "encoder dimensions must be positive");
    auto glorot = [&](int fan_in, int fan_out) {
      const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      std::uniform_real_distribution<double> u(-a, a);
      Matrix w(fan_in, fan_out);
      for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = u(rng);
      return w;
    };
    if (hidden_dim > 0) {
      params_.push_back(glorot(input_dim, hidden_dim));
      params_.push_back(Matrix::Zero(1, hidden_dim));
      params_.push_back(glorot(hidden_dim, embed_dim));
    } else {
      params_.push_back(glorot(input_dim, embed_dim));
    }
    params_.push_back(Matrix::Zero(1, embed_dim));
  }

  bool has_hidden() const noexcept { return params_.size() == 4; }
  Eigen::Index input_dim() const noexcept { return params_.front().rows(); }
  Eigen::Index embed_dim() const noexcept { return params_.back().cols(); }

  std::vector<Matrix>& parameters() noexcept { return params_; }
  const std::vector<Matrix>& parameters() const noexcept { return params_; }

  Matrix forward(const Matrix& x) const {
    Cache c;
    return forward(x, c);
  }

  Matrix forward(const Matrix& x, Cache& cache) const {
    detail::require(x.cols() == input_dim(), ErrorCode::ShapeMismatch, "encoder input dimension mismatch");
    cache.input = x;
    if (has_hidden()) {
      cache.hidden = ((x * params_[0]).rowwise() + params_[1].row(0)).array().tanh().matrix();
      return (cache.hidden * params_[2]).rowwise() + params_[3].row(0);
    }
    cache.hidden.resize(0, 0);
    return (x * params_[0]).rowwise() + params_[1].row(0);
  }

  /// Parameter gradients for dL/d(output) = dout, in parameters() order.
  std::vector<Matrix> backward(const Cache& cache, const Matrix& dout) const {
    std::vector<Matrix> g;
    if (has_hidden()) {
      const Matrix dh = (dout * params_[2].transpose()).cwiseProduct(
          (1.0 - cache.hidden.array().square()).matrix());
      g.push_back(cache.input.transpose() * dh);
      g.push_back(dh.colwise().sum());
      g.push_back(cache.hidden.transpose() * dout);
      g.push_back(dout.colwise().sum());
    } else {
      g.push_back(cache.input.transpose() * dout);
      g.push_back(dout.colwise().sum());
    }
    return g;
  }

 private:
  std::vector<Matrix> params_;
};

inline std::vector<Encoder> make_encoders(const std::vector<int>& input_dims, int embed_dim, int hidden_dim,
                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0xe11c0de5ULL);
  std::vector<Encoder> out;
  for (int d : input_dims) out.emplace_back(d, embed_dim, hidden_dim, rng);
  return out;
}

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-5;  // decoupled; 0 disables
};

/// Adam with bias correction and decoupled weight decay over a fixed parameter list.
class Adam {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  void step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads, double learning_rate) {
    detail::require(params.size() == grads.size(), ErrorCode::ShapeMismatch, "parameter/gradient count mismatch");
    if (m_.empty()) {
      for (const Matrix* p : params) {
        m_.push_back(Matrix::Zero(p->rows(), p->cols()));
        v_.push_back(Matrix::Zero(p->rows(), p->cols()));
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      m_[k] = cfg_.beta1 * m_[k] + (1.0 - cfg_.beta1) * grads[k];
      v_[k] = cfg_.beta2 * v_[k] + (1.0 - cfg_.beta2) * grads[k].cwiseAbs2();
      const Matrix update =
          (m_[k] / c1).array() / ((v_[k] / c2).array().sqrt() + cfg_.epsilon);
      *params[k] -= learning_rate * (update + cfg_.weight_decay * *params[k]);
    }
  }

  void step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads) {
    step(params, grads, cfg_.learning_rate);
  }

  long steps() const noexcept { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  long t_ = 0;
};

/// Scales `grads` so their global L2 norm is at most max_norm (<= 0 disables). Returns the pre-clip norm.
inline double clip_global_norm(std::vector<Matrix>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) sq += g.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& g : grads) g *= s;
  }
  return norm;
}

struct TrainConfig {
  double learning_rate = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double weight_decay = 1e-5;
  double grad_clip_norm = 1.0;
  int lr_decay_every = 100;
  double lr_decay_factor = 0.1;
  int max_epochs = 100;
  int batch_size = 128;
  int hidden_dim = 0;
  double holdout_fraction = 0.2;
  std::uint64_t seed = 0;
  LossKind loss_kind = LossKind::GcsRing;
  Strategy strategy = Strategy::Mixed;
  AlignConfig align;
  KlConfig kl;
  MmdConfig mmd;
  std::vector<std::size_t> ks{1, 10};

  void validate() const {
    detail::require(learning_rate >= 0.0, ErrorCode::InvalidConfig, "learning_rate must be >= 0");
    detail::require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0,
                    ErrorCode::InvalidConfig, "Adam betas must lie in [0, 1)");
    detail::require(adam_epsilon > 0.0, ErrorCode::InvalidConfig, "adam_epsilon must be > 0");
    detail::require(weight_decay >= 0.0 && grad_clip_norm >= 0.0, ErrorCode::InvalidConfig,
                    "weight_decay and grad_clip_norm must be >= 0");
    detail::require(lr_decay_every >= 1 && lr_decay_factor > 0.0, ErrorCode::InvalidConfig,
                    "learning-rate decay schedule must be positive");
    detail::require(max_epochs >= 1 && batch_size >= 2, ErrorCode::InvalidConfig,
                    "max_epochs >= 1 and batch_size >= 2 are required");
    detail::require(hidden_dim >= 0, ErrorCode::InvalidConfig, "hidden_dim must be >= 0");
    align.validate();
    kl.validate();
    mmd.validate();
  }

  LossSpec loss_spec() const { return {loss_kind, align, strategy, kl, mmd}; }

  AdamConfig adam() const { return {learning_rate, adam_beta1, adam_beta2, adam_epsilon, weight_decay}; }

  double learning_rate_at(int epoch) const {
    return learning_rate * std::pow(lr_decay_factor, static_cast<double>(epoch / lr_decay_every));
  }
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  bool finite = true;
  std::vector<RetrievalMetrics> metrics;
};

struct TrainTrace {
  std::vector<EpochRecord> epochs;
  bool aborted = false;
  std::string abort_reason;

  const EpochRecord& last() const { return epochs.back(); }
};

/// Query-modality x gallery-modality retrieval over every ordered pair.
inline std::vector<RetrievalMetrics> evaluate_all_directions(const std::vector<EmbeddingBatch>& embedded,
                                                             const std::vector<std::size_t>& ks) {
  std::vector<RetrievalMetrics> out;
  for (std::size_t s = 0; s < embedded.size(); ++s) {
    for (std::size_t t = 0; t < embedded.size(); ++t) {
      if (s == t) continue;
      out.push_back(evaluate_retrieval(embedded[s], embedded[t], ks, embedded[s].name() + "2" + embedded[t].name()));
    }
  }
  return out;
}

inline std::vector<EmbeddingBatch> encode_all(const std::vector<Encoder>& encoders,
                                              const std::vector<EmbeddingBatch>& raw) {
  std::vector<EmbeddingBatch> out;
  for (std::size_t m = 0; m < raw.size(); ++m) {
    out.emplace_back(encoders[m].forward(raw[m].data()), raw[m].labels(), raw[m].name());
  }
  return out;
}

/// Mini-batch training of `encoders` on `train`, evaluating retrieval on
/// `test` after every epoch. A non-finite batch loss aborts the run.
inline TrainTrace train_run(const std::vector<EmbeddingBatch>& train, const std::vector<EmbeddingBatch>& test,
                            std::vector<Encoder>& encoders, const TrainConfig& cfg) {
  cfg.validate();
  detail::require(train.size() == encoders.size() && test.size() == encoders.size() && train.size() >= 2,
                  ErrorCode::ShapeMismatch, "one encoder per modality is required");
  const LossSpec spec = cfg.loss_spec();
  const auto n = static_cast<std::size_t>(train[0].rows());

  std::vector<Matrix*> params;
  for (auto& e : encoders)
    for (auto& p : e.parameters()) params.push_back(&p);
  Adam adam(cfg.adam());
  std::mt19937_64 rng(cfg.seed);

  TrainTrace trace;
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(perm.begin(), perm.end(), rng);
    const double lr = cfg.learning_rate_at(epoch);
    double loss_sum = 0.0;
    int batches = 0;
    EpochRecord rec;
    rec.epoch = epoch + 1;
    for (std::size_t start = 0; start + 2 <= n; start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
      const std::vector<std::size_t> idx(perm.begin() + static_cast<std::ptrdiff_t>(start),
                                         perm.begin() + static_cast<std::ptrdiff_t>(stop));
      if (idx.size() < 2) break;

      std::vector<EmbeddingBatch> embedded;
      std::vector<Encoder::Cache> caches(encoders.size());
      for (std::size_t m = 0; m < encoders.size(); ++m) {
        const EmbeddingBatch raw = select_rows(train[m], idx);
        embedded.emplace_back(encoders[m].forward(raw.data(), caches[m]), raw.labels(), raw.name());
      }
      auto [loss, grad] = loss_gradient(spec, embedded);
      if (!std::isfinite(loss) || !grad.all_finite()) {
        rec.loss = loss;
        rec.finite = false;
        trace.epochs.push_back(std::move(rec));
        trace.aborted = true;
        trace.abort_reason = "non-finite loss at epoch " + std::to_string(epoch + 1);
        return trace;
      }
      std::vector<Matrix> pgrads;
      for (std::size_t m = 0; m < encoders.size(); ++m) {
        for (auto& g : encoders[m].backward(caches[m], grad.grads[m])) pgrads.push_back(std::move(g));
      }
      clip_global_norm(pgrads, cfg.grad_clip_norm);
      adam.step(params, pgrads, lr);
      loss_sum += loss;
      ++batches;
    }
    rec.loss = batches > 0 ? loss_sum / batches : 0.0;
    rec.finite = std::isfinite(rec.loss);
    rec.metrics = evaluate_all_directions(encode_all(encoders, test), cfg.ks);
    trace.epochs.push_back(std::move(rec));
  }
  return trace;
}

/// Ordered (query, gallery) modality pairs whose association PMFs enter the loss.
inline std::vector<std::pair<std::size_t, std::size_t>> supervised_directions(LossKind kind, Strategy strategy,
                                                                              std::size_t M) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (kind != LossKind::GcsRing) {
    for (std::size_t s = 0; s < M; ++s)
      for (std::size_t t = 0; t < M; ++t)
        if (s != t) out.emplace_back(s, t);
    return out;
  }
  for (std::size_t m = 0; m < M; ++m) {
    const std::pair<std::size_t, std::size_t> fwd{m, (m + 1) % M};
    const std::pair<std::size_t, std::size_t> bwd{m, (m + M - 1) % M};
    if (strategy != Strategy::Counterclockwise && std::find(out.begin(), out.end(), fwd) == out.end())
      out.push_back(fwd);
    if (strategy != Strategy::Clockwise && std::find(out.begin(), out.end(), bwd) == out.end())
      out.push_back(bwd);
  }
  return out;
}

struct DirectionResult {
  RetrievalMetrics metrics;
  bool supervised = true;
};

struct AblationRow {
  Strategy strategy = Strategy::Mixed;
  std::vector<DirectionResult> directions;
  double avg_p1 = 0.0;   // over supervised directions
  double avg_p10 = 0.0;  // over supervised directions
  double avg_map = 0.0;  // over supervised directions
  double final_loss = 0.0;
  bool aborted = false;
};

struct AblationTable {
  std::vector<AblationRow> rows;
};

/// Trains one GCS ring model per strategy from identical data, initial
/// encoders, and seeds, then reports final held-out retrieval per direction.
inline AblationTable ablation_run(const DataSplit& data, const TrainConfig& base, int embed_dim) {
  AblationTable table;
  const std::size_t M = data.train.size();
  std::vector<int> dims;
  for (const auto& b : data.train) dims.push_back(static_cast<int>(b.dim()));
  for (auto strategy : {Strategy::Clockwise, Strategy::Counterclockwise, Strategy::Mixed}) {
    TrainConfig cfg = base;
    cfg.loss_kind = LossKind::GcsRing;
    cfg.strategy = strategy;
    auto encoders = make_encoders(dims, embed_dim, cfg.hidden_dim, cfg.seed);
    const TrainTrace trace = train_run(data.train, data.test, encoders, cfg);

    AblationRow row;
    row.strategy = strategy;
    row.aborted = trace.aborted;
    row.final_loss = trace.last().loss;
    const auto sup = supervised_directions(cfg.loss_kind, strategy, M);
    std::size_t k = 0;
    int counted = 0;
    for (std::size_t s = 0; s < M; ++s) {
      for (std::size_t t = 0; t < M; ++t) {
        if (s == t) continue;
        DirectionResult d;
        if (!trace.last().metrics.empty()) d.metrics = trace.last().metrics[k];
        d.supervised = std::find(sup.begin(), sup.end(), std::make_pair(s, t)) != sup.end();
        if (d.supervised && !trace.last().metrics.empty()) {
          row.avg_p1 += d.metrics.p_at[1];
          row.avg_p10 += d.metrics.p_at[10];
          row.avg_map += d.metrics.map_score;
          ++counted;
        }
        row.directions.push_back(std::move(d));
        ++k;
      }
    }
    if (counted > 0) {
      row.avg_p1 /= counted;
      row.avg_p10 /= counted;
      row.avg_map /= counted;
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace csalign
