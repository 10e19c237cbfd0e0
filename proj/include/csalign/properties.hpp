#pragma once

// Seeded randomized property suite over the divergence and PMF layers.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "csalign/divergence.hpp"
#include "csalign/pmf.hpp"

namespace csalign {

struct PropertyOptions {
  std::uint64_t seed = 0;
  int trials = 1000;
  bool flip_gcs_sign = false;  // test hook: the suite must then fail
};

struct PropertyResult {
  std::string name;
  int trials = 0;
  int failures = 0;
  std::string first_failure;

  bool passed() const noexcept { return failures == 0; }
};

struct PropertySummary {
  std::vector<PropertyResult> results;

  int failed_properties() const {
    return static_cast<int>(std::count_if(results.begin(), results.end(), [](auto& r) { return !r.passed(); }));
  }
  bool passed() const { return failed_properties() == 0; }
};

namespace detail {

class PmfSampler {
 public:
  explicit PmfSampler(std::uint64_t seed) : rng_(seed) {}

  int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double log_uniform(double lo, double hi) { return std::exp(uniform(std::log(lo), std::log(hi))); }

  // Flat Dirichlet draw.
  Vector pmf(int k) {
    Vector v(k);
    std::exponential_distribution<double> e(1.0);
    for (int i = 0; i < k; ++i) v(i) = e(rng_) + 1e-12;
    return v / v.sum();
  }

  std::vector<Vector> tuple(int m, int k) {
    std::vector<Vector> out;
    for (int i = 0; i < m; ++i) out.push_back(pmf(k));
    return out;
  }

  Matrix gaussian(int rows, int cols) {
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix x(rows, cols);
    for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = n(rng_);
    return x;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

// GCS of normalized inputs in long double, used as the reference when the
// double-precision value is too small to resolve a perturbation.
inline long double gcs_extended(const std::vector<Vector>& seqs) {
  const int order = static_cast<int>(seqs.size());
  long double num = 0.0L;
  long double log_den = 0.0L;
  for (Eigen::Index k = 0; k < seqs[0].size(); ++k) {
    long double prod = 1.0L;
    for (const auto& s : seqs) prod *= static_cast<long double>(s(k)) / static_cast<long double>(s.sum());
    num += prod;
  }
  for (const auto& s : seqs) {
    long double norm = 0.0L;
    for (Eigen::Index k = 0; k < s.size(); ++k) {
      long double x = 1.0L;
      for (int i = 0; i < order; ++i) x *= static_cast<long double>(s(k)) / static_cast<long double>(s.sum());
      norm += x;
    }
    log_den += std::log(norm) / order;
  }
  return log_den - std::log(num);
}

}  // namespace detail

/// Runs every property for `opt.trials` seeded trials (a few costlier
/// properties use a fifth of that).
inline PropertySummary run_property_suite(const PropertyOptions& opt = {}) {
  detail::PmfSampler rs(opt.seed);
  auto gcs = [&](const std::vector<Vector>& t) {
    const double v = gcs_divergence(t).value;
    return opt.flip_gcs_sign ? -v : v;
  };
  auto gcs_raw = [&](const std::vector<Vector>& t) {
    const double v = gcs_divergence_unnormalized(t).value;
    return opt.flip_gcs_sign ? -v : v;
  };

  PropertySummary summary;
  auto run = [&](const std::string& name, int trials, const std::function<std::string()>& body) {
    PropertyResult r{name, trials, 0, {}};
    for (int t = 0; t < trials; ++t) {
      const std::string err = body();
      if (!err.empty()) {
        if (r.failures++ == 0) r.first_failure = err;
      }
    }
    summary.results.push_back(std::move(r));
  };
  const int many = std::max(1, opt.trials);
  const int few = std::max(1, opt.trials / 5);

  run("nonnegativity", many, [&]() -> std::string {
    const int m = rs.uniform_int(2, 5);
    const auto t = rs.tuple(m, rs.uniform_int(2, 64));
    const double g = gcs(t);
    const double c = cs_divergence(t[0], t[1]).value;
    if (g < -1e-12 || c < -1e-12) return "negative divergence " + std::to_string(std::min(g, c));
    return {};
  });

  run("identity_of_indiscernibles", many, [&]() -> std::string {
    const int m = rs.uniform_int(2, 5);
    const int k = rs.uniform_int(2, 64);
    const Vector p = rs.pmf(k);
    std::vector<Vector> same(static_cast<std::size_t>(m), p);
    const double v = gcs(same);
    if (std::abs(v) > 1e-12) return "identical inputs gave " + std::to_string(v);
    Vector pert = p;
    pert(rs.uniform_int(0, k - 1)) += 0.01;
    same[static_cast<std::size_t>(rs.uniform_int(0, m - 1))] = pert / pert.sum();
    // High-order GCS barely sees a bump on a small or already dominant
    // coordinate, so positivity is judged on the extended-precision value.
    const long double exact = detail::gcs_extended(same);
    const double w = gcs(same);
    if (!(exact > 0.0L)) return "perturbed input is not separated in extended precision";
    if (std::abs(static_cast<long double>(w) - exact) > 1e-12L) return "perturbed value off by more than 1e-12";
    return {};
  });

  run("symmetry", few, [&]() -> std::string {
    const int m = rs.uniform_int(3, 5);
    auto t = rs.tuple(m, rs.uniform_int(2, 64));
    const double base = gcs(t);
    std::vector<int> perm(static_cast<std::size_t>(m));
    std::iota(perm.begin(), perm.end(), 0);
    while (std::next_permutation(perm.begin(), perm.end())) {
      std::vector<Vector> p;
      for (int i : perm) p.push_back(t[static_cast<std::size_t>(i)]);
      if (std::abs(gcs(p) - base) > 1e-12) return "permutation changed the value";
    }
    return {};
  });

  run("scale_invariance", few, [&]() -> std::string {
    auto t = rs.tuple(rs.uniform_int(2, 5), rs.uniform_int(2, 64));
    const double base = gcs_raw(t);
    for (auto& v : t) v *= rs.log_uniform(1e-3, 1e3);
    const double scaled = gcs_raw(t);
    if (std::abs(scaled - base) > 1e-9 * std::abs(base)) return "scaling changed the value";
    return {};
  });

  run("two_distribution_reduction", few, [&]() -> std::string {
    const auto t = rs.tuple(2, rs.uniform_int(2, 64));
    if (std::abs(gcs(t) - cs_divergence(t[0], t[1]).value) > 1e-12) return "GCS(p, q) != CS(p, q)";
    return {};
  });

  run("norm_lower_bounds", many, [&]() -> std::string {
    const int k = rs.uniform_int(2, 64);
    const int m = rs.uniform_int(2, 5);
    const Vector p = rs.pmf(k);
    const double sq = p.squaredNorm();
    double pm = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) pm += detail::ipow(p(i), m);
    if (sq < 1.0 / k - 1e-12) return "sum p^2 below 1/K";
    if (pm < std::pow(static_cast<double>(k), 1 - m) - 1e-12) return "sum p^M below 1/K^(M-1)";
    const Vector u = Vector::Constant(k, 1.0 / k);
    double um = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) um += detail::ipow(u(i), m);
    if (std::abs(u.squaredNorm() - 1.0 / k) > 1e-12) return "uniform PMF misses the 1/K bound";
    if (std::abs(um - std::pow(static_cast<double>(k), 1 - m)) > 1e-12) return "uniform PMF misses the 1/K^(M-1) bound";
    return {};
  });

  run("holder_inequality", many, [&]() -> std::string {
    const int m = rs.uniform_int(2, 5);
    const int k = rs.uniform_int(1, 64);
    std::vector<Vector> seqs;
    for (int i = 0; i < m; ++i) seqs.push_back(rs.pmf(k) * rs.log_uniform(1e-2, 1e2));
    const auto r = holder_check(seqs);
    if (!r.holds) return "lhs exceeds rhs";
    return {};
  });

  run("softmax_shift_invariance", few, [&]() -> std::string {
    const int n = rs.uniform_int(2, 32);
    const Matrix s = rs.gaussian(n, n);
    Matrix shifted = s;
    for (Eigen::Index i = 0; i < n; ++i) shifted.row(i).array() += rs.uniform(-50.0, 50.0);
    const AlignConfig cfg{rs.log_uniform(0.05, 5.0)};
    const Matrix a = association_pmf({s, {}, {}}, cfg).rows();
    const Matrix b = association_pmf({shifted, {}, {}}, cfg).rows();
    if ((a - b).cwiseAbs().maxCoeff() > 1e-12) return "row shift changed the PMF";
    for (Eigen::Index i = 0; i < n; ++i)
      if (std::abs(a.row(i).sum() - 1.0) > 1e-9) return "row is not stochastic";
    return {};
  });

  run("baseline_symmetry", few, [&]() -> std::string {
    const int d = rs.uniform_int(1, 6);
    const Matrix x = rs.gaussian(rs.uniform_int(2, 12), d);
    const Matrix y = rs.gaussian(rs.uniform_int(2, 12), d) * 1.5;
    if (std::abs(mmd_squared(x, y) - mmd_squared(y, x)) > 1e-12) return "MMD asymmetric";
    if (std::abs(coral_loss(x, y) - coral_loss(y, x)) > 1e-12) return "CORAL asymmetric";
    return {};
  });

  return summary;
}

}  // namespace csalign
