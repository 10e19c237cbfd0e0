#pragma once

#include <chrono>
#include <cstdint>
#include <random>
#include <vector>

#include "csalign/losses.hpp"
#include "csalign/pmf.hpp"

namespace csalign {

struct BenchConfig {
  std::size_t min_modalities = 2;
  std::size_t max_modalities = 8;
  Eigen::Index batch_size = 64;
  Eigen::Index embed_dim = 16;
  int num_classes = 8;
  int repeats = 20;
  std::uint64_t seed = 0;
};

struct BenchRow {
  std::size_t modalities = 0;
  std::size_t circular_builds = 0;
  std::size_t pairwise_builds = 0;
  double circular_seconds = 0.0;  // per loss evaluation
  double pairwise_seconds = 0.0;  // per loss evaluation
};

/// A random ring of `M` batches sharing one label vector.
inline ModalityRing random_ring(std::size_t M, Eigen::Index n, Eigen::Index d, int num_classes, std::uint64_t seed,
                                Strategy strategy = Strategy::Mixed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<std::int64_t> cls(0, num_classes - 1);
  Labels labels(static_cast<std::size_t>(n));
  for (auto& l : labels) l = cls(rng);
  std::vector<EmbeddingBatch> batches;
  for (std::size_t m = 0; m < M; ++m) {
    Matrix x(n, d);
    for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = normal(rng);
    batches.emplace_back(std::move(x), labels, "m" + std::to_string(m + 1));
  }
  return ModalityRing(std::move(batches), strategy);
}

/// Counts association-PMF builds for one evaluation of each loss on the
/// same ring, then times `repeats` evaluations of each.
inline std::vector<BenchRow> run_bench(const BenchConfig& cfg = {}) {
  detail::require(cfg.min_modalities >= 2 && cfg.max_modalities >= cfg.min_modalities && cfg.repeats >= 1 &&
                      cfg.batch_size >= 2 && cfg.embed_dim >= 1 && cfg.num_classes >= 1,
                  ErrorCode::InvalidConfig, "invalid benchmark configuration");
  using clock = std::chrono::steady_clock;
  std::vector<BenchRow> rows;
  const AlignConfig align;
  for (std::size_t M = cfg.min_modalities; M <= cfg.max_modalities; ++M) {
    const ModalityRing ring = random_ring(M, cfg.batch_size, cfg.embed_dim, cfg.num_classes, cfg.seed + M);
    BenchRow row;
    row.modalities = M;
    {
      PmfBuildCounter c;
      (void)gcs_ring_loss(ring, align);
      row.circular_builds = c.count();
    }
    {
      PmfBuildCounter c;
      (void)pairwise_sum_loss(ring, align, PairMeasure::CS);
      row.pairwise_builds = c.count();
    }
    double sink = 0.0;
    auto t0 = clock::now();
    for (int r = 0; r < cfg.repeats; ++r) sink += gcs_ring_loss(ring, align).total;
    auto t1 = clock::now();
    for (int r = 0; r < cfg.repeats; ++r) sink += pairwise_sum_loss(ring, align, PairMeasure::CS).total;
    auto t2 = clock::now();
    row.circular_seconds = std::chrono::duration<double>(t1 - t0).count() / cfg.repeats;
    row.pairwise_seconds = std::chrono::duration<double>(t2 - t1).count() / cfg.repeats;
    if (!std::isfinite(sink)) row.circular_seconds = row.pairwise_seconds = 0.0;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace csalign
