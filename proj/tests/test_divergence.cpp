#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "csalign/divergence.hpp"

namespace {

using csalign::ErrorCode;
using csalign::Matrix;
using csalign::Vector;

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) out(k++) = x;
  return out;
}

Vector random_pmf(std::mt19937_64& rng, int k) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  Vector v(k);
  for (int i = 0; i < k; ++i) v(i) = u(rng);
  return v / v.sum();
}

// Straight transcription of the CS definition, no shared helpers.
double cs_oracle(const Vector& p, const Vector& q) {
  double pq = 0.0, pp = 0.0, qq = 0.0;
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    pq += p(j) * q(j);
    pp += p(j) * p(j);
    qq += q(j) * q(j);
  }
  return -std::log(pq / (std::sqrt(pp) * std::sqrt(qq)));
}

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const csalign::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no csalign::Error thrown";
  return ErrorCode::Parse;
}

const double kInf = std::numeric_limits<double>::infinity();

}  // namespace

TEST(CsDivergence, Examples) {
  EXPECT_NEAR(csalign::cs_divergence(vec({0.5, 0.5}), vec({0.5, 0.5})).value, 0.0, 1e-15);
  EXPECT_NEAR(csalign::cs_divergence(vec({1, 0}), vec({0.5, 0.5})).value, 0.5 * std::log(2.0), 1e-15);
  EXPECT_NEAR(csalign::cs_divergence(vec({1, 0}), vec({0.5, 0.5})).value, 0.3465736, 1e-7);
  const auto disjoint = csalign::cs_divergence(vec({1, 0}), vec({0, 1}));
  EXPECT_EQ(disjoint.value, kInf);
  EXPECT_FALSE(disjoint.finite());
  EXPECT_EQ(disjoint.numerator, 0.0);
}

TEST(CsDivergence, MatchesOracleAndDenominatorBound) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 200; ++t) {
    const int k = 2 + t % 40;
    const Vector p = random_pmf(rng, k), q = random_pmf(rng, k);
    const auto d = csalign::cs_divergence(p, q);
    EXPECT_NEAR(d.value, cs_oracle(p, q), 1e-12);
    EXPECT_NEAR(d.value, -std::log(d.numerator / d.denominator), 1e-12);
    EXPECT_GE(d.denominator, 1.0 / k - 1e-12);
  }
}

TEST(CsDivergence, Validation) {
  EXPECT_EQ(code_of([] { (void)csalign::cs_divergence(vec({0.5, 0.6}), vec({0.5, 0.5})); }), ErrorCode::NotAPmf);
  EXPECT_EQ(code_of([] { (void)csalign::cs_divergence(vec({1.5, -0.5}), vec({0.5, 0.5})); }), ErrorCode::NotAPmf);
  EXPECT_EQ(code_of([] { (void)csalign::cs_divergence(vec({1.0}), vec({0.5, 0.5})); }), ErrorCode::LengthMismatch);
}

TEST(GcsDivergence, IdenticalCopiesGiveZero) {
  const std::vector<Vector> three(3, vec({0.5, 0.5}));
  EXPECT_NEAR(csalign::gcs_divergence(three).value, 0.0, 1e-15);
}

TEST(GcsDivergence, TwoDistributionsReduceToCs) {
  std::mt19937_64 rng(3);
  for (int seed = 0; seed < 100; ++seed) {
    const int k = 2 + seed % 30;
    const Vector p = random_pmf(rng, k), q = random_pmf(rng, k);
    EXPECT_NEAR(csalign::gcs_divergence(std::vector<Vector>{p, q}).value, csalign::cs_divergence(p, q).value,
                1e-12);
  }
}

TEST(GcsDivergence, UniformAttainsNormBound) {
  // Each factor sum_k p^3 equals 1/K^(M-1) = 1/16 for K = 4, M = 3.
  const Vector u = Vector::Constant(4, 0.25);
  const auto d = csalign::gcs_divergence(std::vector<Vector>(3, u));
  EXPECT_NEAR(u.array().cube().sum(), 1.0 / 16.0, 1e-15);
  EXPECT_NEAR(d.denominator, 1.0 / 16.0, 1e-15);
  EXPECT_NEAR(d.numerator, 1.0 / 16.0, 1e-15);
}

TEST(GcsDivergence, HandValueWithOneHot) {
  // Three uniform PMFs over 4 items plus one one-hot PMF.
  const Vector u = Vector::Constant(4, 0.25);
  const Vector e = vec({1, 0, 0, 0});
  const auto d = csalign::gcs_divergence(std::vector<Vector>{u, u, u, e});
  EXPECT_NEAR(d.numerator, 1.0 / 64.0, 1e-15);
  EXPECT_NEAR(d.value, 0.75 * std::log(4.0), 1e-12);
}

TEST(GcsDivergence, Validation) {
  EXPECT_EQ(code_of([] { (void)csalign::gcs_divergence(std::vector<Vector>{vec({1.0})}); }),
            ErrorCode::TooFewDistributions);
  EXPECT_EQ(code_of([] { (void)csalign::gcs_divergence(std::vector<Vector>{vec({1.0}), vec({0.5, 0.5})}); }),
            ErrorCode::LengthMismatch);
  EXPECT_EQ(code_of([] {
              (void)csalign::gcs_divergence(std::vector<Vector>{vec({0.5, 0.5}), vec({0.5, 0.4})});
            }),
            ErrorCode::NotAPmf);
}

TEST(GcsDivergence, UnnormalizedScaleInvariance) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> logscale(std::log(1e-3), std::log(1e3));
  for (int t = 0; t < 100; ++t) {
    std::vector<Vector> seqs;
    for (int m = 0; m < 2 + t % 4; ++m) seqs.push_back(random_pmf(rng, 3 + t % 20));
    const double base = csalign::gcs_divergence(seqs).value;
    for (auto& s : seqs) s *= std::exp(logscale(rng));
    EXPECT_NEAR(csalign::gcs_divergence_unnormalized(seqs).value, base, 1e-9 * base);
  }
  EXPECT_EQ(code_of([] {
              (void)csalign::gcs_divergence_unnormalized(std::vector<Vector>{vec({1.0, -1.0}), vec({1, 1})});
            }),
            ErrorCode::NegativeEntry);
}

TEST(Holder, Examples) {
  const auto disjoint = csalign::holder_check(std::vector<Vector>{vec({1, 0}), vec({0, 1})});
  EXPECT_TRUE(disjoint.holds);
  EXPECT_EQ(disjoint.lhs, 0.0);
  EXPECT_DOUBLE_EQ(disjoint.rhs, 1.0);

  const auto equal = csalign::holder_check(std::vector<Vector>(4, vec({0.3, 2.0, 1.1})));
  EXPECT_TRUE(equal.holds);
  EXPECT_NEAR(equal.lhs, equal.rhs, 1e-12);

  EXPECT_EQ(code_of([] { (void)csalign::holder_check(std::vector<Vector>{vec({-1, 0}), vec({0, 1})}); }),
            ErrorCode::NegativeEntry);
}

TEST(Holder, RandomTuples) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int t = 0; t < 1000; ++t) {
    std::vector<Vector> seqs(static_cast<std::size_t>(2 + t % 4), Vector(1 + t % 16));
    for (auto& s : seqs)
      for (Eigen::Index k = 0; k < s.size(); ++k) s(k) = u(rng);
    const auto r = csalign::holder_check(seqs);
    EXPECT_TRUE(r.holds) << r.lhs << " > " << r.rhs;
  }
}

TEST(KlAlignment, Examples) {
  using csalign::PmfKind;
  using csalign::PmfMatrix;
  Matrix same(2, 2);
  same << 0.3, 0.7, 0.6, 0.4;
  EXPECT_NEAR(csalign::kl_alignment(PmfMatrix(same, PmfKind::Association), PmfMatrix(same, PmfKind::TrueMatch),
                                    {0.0}),
              0.0, 1e-15);

  Matrix pred(2, 2), truth(2, 2);
  pred << 0.5, 0.5, 0.5, 0.5;
  truth << 1.0, 0.0, 0.0, 1.0;
  const PmfMatrix p(pred, PmfKind::Association), t(truth, PmfKind::TrueMatch);
  EXPECT_EQ(csalign::kl_alignment(p, t, {0.0}), kInf);

  // Per row: 0.5 ln(0.5 / (1 + eps)) + 0.5 ln(0.5 / eps).
  const double eps = 1e-8;
  const double row = 0.5 * std::log(0.5 / (1.0 + eps)) + 0.5 * std::log(0.5 / eps);
  EXPECT_NEAR(csalign::kl_divergence(vec({0.5, 0.5}), vec({1, 0}), {eps}), row, 1e-12);
  EXPECT_NEAR(row, 8.5172, 1e-4);
  EXPECT_NEAR(csalign::kl_alignment(p, t, {eps}), 2.0 * row, 1e-12);
}

TEST(KlAlignment, ZeroPredictionContributesNothing) {
  EXPECT_NEAR(csalign::kl_divergence(vec({0, 1}), vec({0.5, 0.5}), {0.0}), std::log(2.0), 1e-15);
}

TEST(KlAlignment, ShapeMismatch) {
  using csalign::PmfKind;
  const csalign::PmfMatrix a(Matrix::Constant(2, 2, 0.5), PmfKind::Association);
  const csalign::PmfMatrix b(Matrix::Constant(3, 3, 1.0 / 3.0), PmfKind::TrueMatch);
  EXPECT_EQ(code_of([&] { (void)csalign::kl_alignment(a, b); }), ErrorCode::ShapeMismatch);
}

TEST(KlInstability, OneHotTargetBlowsUpWhileCsStaysFinite) {
  const Vector truth = vec({1, 0, 0});
  const Vector pred = vec({0.6, 0.3, 0.1});
  EXPECT_FALSE(std::isfinite(csalign::kl_divergence(pred, truth, {0.0})));
  EXPECT_TRUE(csalign::cs_divergence(pred, truth).finite());
}

TEST(Mmd, Examples) {
  Matrix x(5, 3);
  x.setRandom();
  EXPECT_NEAR(csalign::mmd_squared(x, x), 0.0, 1e-12);

  Matrix u(1, 2), v(1, 2);
  u << 0.0, 1.0;
  v << 2.0, -1.0;
  const double sigma = 1.3;
  const double expect = 2.0 - 2.0 * std::exp(-(u - v).squaredNorm() / (2 * sigma * sigma));
  EXPECT_NEAR(csalign::mmd_squared(u, v, csalign::MmdConfig::fixed(sigma)), expect, 1e-15);
  EXPECT_NEAR(csalign::mmd_squared(u, u, csalign::MmdConfig::fixed(sigma)), 0.0, 1e-15);
  // Median heuristic on two pooled points is their distance.
  EXPECT_NEAR(csalign::mmd_squared(u, v), 2.0 - 2.0 * std::exp(-0.5), 1e-15);
}

TEST(Mmd, MedianHeuristicOracle) {
  Matrix x(3, 1), y(2, 1);
  x << 0, 1, 3;
  y << 7, 10;
  // Pooled pairwise distances: 1 3 7 10 2 6 9 4 7 3; sorted median of 10 values.
  std::vector<double> d{1, 3, 7, 10, 2, 6, 9, 4, 7, 3};
  std::sort(d.begin(), d.end());
  const double expect = 0.5 * (d[4] + d[5]);
  EXPECT_NEAR(csalign::median_heuristic_bandwidth(x, y), expect, 1e-15);
}

TEST(Mmd, DegenerateAndShapeErrors) {
  const Matrix same = Matrix::Ones(3, 2);
  EXPECT_EQ(code_of([&] { (void)csalign::mmd_squared(same, same); }), ErrorCode::DegenerateBandwidth);
  EXPECT_EQ(code_of([] { (void)csalign::mmd_squared(Matrix::Ones(2, 2), Matrix::Ones(2, 3)); }),
            ErrorCode::ShapeMismatch);
  EXPECT_EQ(code_of([] { (void)csalign::MmdConfig::fixed(-1.0).validate(); }), ErrorCode::InvalidConfig);
}

TEST(Coral, Examples) {
  Matrix x(2, 1), y(2, 1);
  x << 0, 2;
  y << 0, 0;
  EXPECT_NEAR(csalign::coral_loss(x, y), 1.0, 1e-15);

  Matrix a(6, 3);
  a.setRandom();
  EXPECT_NEAR(csalign::coral_loss(a, a), 0.0, 1e-15);
  Matrix permuted = a;
  permuted.row(0).swap(permuted.row(5));
  permuted.row(1).swap(permuted.row(3));
  EXPECT_NEAR(csalign::coral_loss(a, permuted), 0.0, 1e-12);
}

TEST(Coral, OracleAndErrors) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix x(7, 3), y(5, 3);
  for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = n(rng);
  for (Eigen::Index k = 0; k < y.size(); ++k) y.data()[k] = 2.0 * n(rng);
  auto cov = [](const Matrix& m) {
    Matrix c = Matrix::Zero(m.cols(), m.cols());
    const Eigen::RowVectorXd mean = m.colwise().mean();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const Eigen::RowVectorXd r = m.row(i) - mean;
      c += r.transpose() * r;
    }
    return Matrix(c / static_cast<double>(m.rows() - 1));
  };
  const double expect = (cov(x) - cov(y)).squaredNorm() / (4.0 * 9.0);
  EXPECT_NEAR(csalign::coral_loss(x, y), expect, 1e-12);
  EXPECT_NEAR(csalign::coral_loss(x, y), csalign::coral_loss(y, x), 1e-12);
  EXPECT_EQ(code_of([] { (void)csalign::coral_loss(Matrix::Ones(1, 2), Matrix::Ones(3, 2)); }),
            ErrorCode::TooFewSamples);
  EXPECT_EQ(code_of([] { (void)csalign::coral_loss(Matrix::Ones(3, 2), Matrix::Ones(3, 3)); }),
            ErrorCode::ShapeMismatch);
}
