#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "tmvr/embedding.hpp"
#include "tmvr/metrics.hpp"

using namespace tmvr;

namespace {

Mat column(std::initializer_list<double> xs) {
  Mat m(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index i = 0;
  for (double x : xs) m(i++, 0) = x;
  return m;
}

Mat random_points(Rng& rng, Eigen::Index n, Eigen::Index d, double scale = 1.0) {
  Mat m(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < d; ++k) m(i, k) = uniform(rng, -scale, scale);
  return m;
}

std::vector<std::vector<double>> as_multiset(const Mat& m) {
  std::vector<std::vector<double>> rows;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> r;
    for (Eigen::Index k = 0; k < m.cols(); ++k) r.push_back(m(i, k));
    rows.push_back(r);
  }
  std::sort(rows.begin(), rows.end());
  return rows;
}

// A field with non-zero divergence and its analytic divergence.
struct SwirlField {
  Vec operator()(const Vec& p) const {
    return Eigen::Vector2d(std::sin(p(0) * p(1)) + p(0) * p(0), std::cos(p(0)) * p(1) * p(1) * p(1));
  }
  double divergence(const Vec& p) const {
    return p(1) * std::cos(p(0) * p(1)) + 2 * p(0) + 3 * std::cos(p(0)) * p(1) * p(1);
  }
};

struct ConstantField {
  Vec c;
  Vec operator()(const Vec&) const { return c; }
  double divergence(const Vec&) const { return 0.0; }
};

}  // namespace

TEST(EnergyMmd, HandExamples) {
  EXPECT_NEAR(energy_mmd(column({0.0}), column({1.0})).value, 2.0, 1e-12);
  EXPECT_NEAR(energy_mmd(column({0.0, 2.0}), column({1.0, 1.0})).value, 1.0, 1e-12);
  const auto v = energy_mmd(column({0.0, 2.0}), column({1.0, 1.0}));
  EXPECT_EQ(v.n_x, 2u);
  EXPECT_EQ(v.estimator, Estimator::ExactEmpirical);
}

TEST(EnergyMmd, IdenticalSamplesGiveExactZero) {
  Rng rng(1);
  const Mat X = random_points(rng, 40, 3, 5.0);
  EXPECT_EQ(energy_mmd(X, X).value, 0.0);
  Mat shuffled = X.colwise().reverse();
  EXPECT_EQ(energy_mmd(X, shuffled).value, 0.0);
}

TEST(EnergyMmd, DimensionMismatch) {
  EXPECT_THROW(energy_mmd(Mat::Zero(3, 2), Mat::Zero(3, 3)), std::invalid_argument);
}

TEST(EnergyMmd, SymmetryAndNonnegativity) {
  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    const Mat X = random_points(rng, 1 + t % 7, 2);
    const Mat Y = random_points(rng, 1 + (t * 3) % 5, 2);
    const double a = energy_mmd(X, Y).value;
    EXPECT_EQ(a, energy_mmd(Y, X).value);
    EXPECT_GE(a, 0.0);
  }
}

TEST(EnergyMmd, ZeroExactlyForEqualMultisets) {
  Rng rng(3);
  std::uniform_int_distribution<int> small(0, 2);
  int equal_cases = 0;
  for (int t = 0; t < 2000; ++t) {
    const Eigen::Index n = 1 + t % 6;
    Mat X(n, 2), Y(n, 2);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index k = 0; k < 2; ++k) {
        X(i, k) = small(rng);
        Y(i, k) = small(rng);
      }
    const bool same = as_multiset(X) == as_multiset(Y);
    equal_cases += same;
    const double v = energy_mmd(X, Y).value;
    if (same)
      EXPECT_EQ(v, 0.0);
    else
      EXPECT_GT(v, 1e-9);
  }
  EXPECT_GT(equal_cases, 20);
}

TEST(EnergyMmd, SquareRootSatisfiesTriangleInequality) {
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    const Mat X = random_points(rng, 1 + t % 8, 3);
    const Mat Y = random_points(rng, 1 + (t / 3) % 8, 3);
    const Mat Z = random_points(rng, 1 + (t / 7) % 8, 3);
    const double xy = std::sqrt(energy_mmd(X, Y).value);
    const double yz = std::sqrt(energy_mmd(Y, Z).value);
    const double xz = std::sqrt(energy_mmd(X, Z).value);
    EXPECT_LE(xz, xy + yz + 1e-12);
  }
}

TEST(PushforwardMetric, Cases) {
  Rng rng(5);
  const DensityFamily fam = sample_von_mises_family(5, VonMisesLaw{}, rng);
  auto smap = [](const Vec& x) {
    const double t = x(0);
    return Vec(Eigen::Vector3d(std::sin(t), (std::cos(3 * t) + std::sin(2 * t)) / 2, (std::sin(3 * t) + std::sin(5 * t)) / 2));
  };
  Rng a(9);
  EXPECT_EQ(pushforward_metric(smap, smap, fam, 200, a), 0.0);

  DensityFamily one({VonMisesDensity(4.0, 0.0)});
  auto id = [](const Vec& x) { return x; };
  auto half_turn = circle_map([](const Vec& x) { return Vec(x.array() + kPi); });
  Rng b(10);
  EXPECT_GT(pushforward_metric(id, half_turn, one, 200, b), 0.5);

  auto bent = [&](const Vec& x) { return Vec(smap(x) + Eigen::Vector3d(0.1 * std::cos(x(0)), 0.0, 0.0)); };
  Rng c1(11), c2(11);
  EXPECT_EQ(pushforward_metric(smap, bent, fam, 100, c1), pushforward_metric(bent, smap, fam, 100, c2));
}

TEST(WeightedDivergence, ConstantField) {
  DensityModel rho = IsotropicGaussianDensity(Eigen::Vector2d(0.2, -0.3), 0.8);
  const ConstantField c{Eigen::Vector2d(1.5, -0.5)};
  Rng rng(6);
  for (int t = 0; t < 20; ++t) {
    const Vec x = random_points(rng, 1, 2).transpose();
    EXPECT_NEAR(weighted_divergence(rho, c, x), pdf(x, rho) * grad_log_pdf(x, rho).dot(c.c), 1e-15);
  }
}

TEST(WeightedDivergence, PendulumClosedForm) {
  const Eigen::Vector2d gamma(0.3, -0.6);
  const double sigma = 0.9;
  DensityModel rho = IsotropicGaussianDensity(gamma, sigma);
  Rng rng(7);
  for (int t = 0; t < 50; ++t) {
    const Vec p = random_points(rng, 1, 2).transpose();
    const double x = p(0), y = p(1);
    const double oracle = pdf(p, rho) * (-(x - gamma(0)) * y + (y - gamma(1)) * std::sin(4 * kPi * x)) / (sigma * sigma);
    EXPECT_NEAR(weighted_divergence(rho, PendulumField{}, p), oracle, 1e-14);
    // finite-difference route for the field's own divergence
    auto plain = [](const Vec& q) { return PendulumField{}(q); };
    EXPECT_NEAR(weighted_divergence(rho, plain, p), oracle, 1e-8);
  }
}

TEST(WeightedDivergence, UniformCircleWithSineField) {
  DensityModel uniform_circle = VonMisesDensity(1e-12, 0.0);
  auto v = [](const Vec& x) { return Vec::Constant(1, std::sin(x(0))); };
  for (double x = -3.0; x < 3.0; x += 0.25)
    EXPECT_NEAR(weighted_divergence(uniform_circle, v, Vec::Constant(1, x)), std::cos(x) / kTwoPi, 1e-10);
}

TEST(WeightedDivergence, ProductRuleMatchesDivergenceOfProduct) {
  Rng rng(8);
  const SwirlField v;
  for (int t = 0; t < 100; ++t) {
    DensityModel rho = IsotropicGaussianDensity(random_points(rng, 1, 2).transpose(), uniform(rng, 0.75, 1.25));
    const Vec x = random_points(rng, 1, 2).transpose();
    auto product = [&](const Vec& q) { return Vec(pdf(q, rho) * v(q)); };
    const double fd = finite_difference_divergence(product, x);
    const double wd = weighted_divergence(rho, v, x);
    EXPECT_LE(std::fabs(fd - wd), 1e-4 * std::max(std::fabs(wd), 1e-3)) << t;
  }
}

TEST(WeightedDivergence, Linearity) {
  Rng rng(9);
  const SwirlField v;
  const PendulumField w;
  for (int t = 0; t < 100; ++t) {
    DensityModel rho = IsotropicGaussianDensity(random_points(rng, 1, 2).transpose(), uniform(rng, 0.75, 1.25));
    const Vec x = random_points(rng, 1, 2).transpose();
    const double a = uniform(rng, -2, 2), b = uniform(rng, -2, 2);
    struct Combo {
      double a, b;
      SwirlField v;
      PendulumField w;
      Vec operator()(const Vec& q) const { return Vec(a * v(q) + b * w(q)); }
      double divergence(const Vec& q) const { return a * v.divergence(q) + b * w.divergence(q); }
    } combo{a, b, v, w};
    const double lhs = weighted_divergence(rho, combo, x);
    const double rhs = a * weighted_divergence(rho, v, x) + b * weighted_divergence(rho, w, x);
    EXPECT_LE(std::fabs(lhs - rhs), 1e-8 * std::max(1.0, std::fabs(rhs)));
  }
}

TEST(WeightedDivergence, QuotientGradientIdentity) {
  Rng rng(10);
  const SwirlField v;
  const DensityFamily fam = sample_gaussian_family(3, divfield_law(), rng);
  for (int t = 0; t < 100; ++t) {
    const Vec x = random_points(rng, 1, 2).transpose();
    const auto& rj = fam[0];
    const auto& rm = fam[2];
    const double lhs = weighted_divergence(rj, v, x) / pdf(x, rj) - weighted_divergence(rm, v, x) / pdf(x, rm);
    // gradient of log(rho_j / rho_m) by central differences of the quotient map
    auto log_q = [&](const Vec& q) { return std::log(quotient_map(DensityFamily({rj, rm}), q)(0)); };
    Vec g(2);
    for (int k = 0; k < 2; ++k) {
      Vec xp = x, xm = x;
      xp(k) += 1e-6;
      xm(k) -= 1e-6;
      g(k) = (log_q(xp) - log_q(xm)) / 2e-6;
    }
    const double rhs = g.dot(v(x));
    EXPECT_LE(std::fabs(lhs - rhs), 1e-6 * std::max(1.0, std::fabs(rhs)));
  }
}

TEST(DivergenceMetric, Cases) {
  Rng rng(11);
  const DensityFamily fam = sample_gaussian_family(3, divfield_law(), rng);
  const auto grid = cube_grid(20, 2);
  EXPECT_EQ(divergence_metric(PendulumField{}, PendulumField{}, fam, grid), 0.0);
  EXPECT_GT(divergence_metric(ConstantField{Eigen::Vector2d(0.3, 0.1)}, ZeroField{}, fam, grid), 1e-3);
  EXPECT_THROW(divergence_metric(PendulumField{}, ZeroField{}, fam, {}), std::invalid_argument);
}

TEST(DivergenceMetric, MidpointGridMatchesDenseQuadrature) {
  Rng rng(12);
  const DensityFamily fam = sample_gaussian_family(3, divfield_law(), rng);
  auto midpoint_grid = [](int n) {
    std::vector<Vec> pts;
    const double h = 2.0 / n;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) pts.push_back(Eigen::Vector2d(-1 + (i + 0.5) * h, -1 + (j + 0.5) * h));
    return pts;
  };
  const double value = divergence_metric(PendulumField{}, ZeroField{}, fam, midpoint_grid(50));

  // Dense oracle with the closed-form weighted divergence of the pendulum field.
  double oracle = 0.0;
  const int n = 400;
  const double h = 2.0 / n;
  for (const auto& m : fam) {
    const auto& g = std::get<IsotropicGaussianDensity>(m);
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double x = -1 + (i + 0.5) * h, y = -1 + (j + 0.5) * h;
        const double s2 = g.sigma * g.sigma;
        const double r2 = (x - g.mean(0)) * (x - g.mean(0)) + (y - g.mean(1)) * (y - g.mean(1));
        const double rho = std::exp(-0.5 * r2 / s2) / (kTwoPi * s2);
        const double d = rho * (-(x - g.mean(0)) * y + (y - g.mean(1)) * std::sin(4 * kPi * x)) / s2;
        acc += d * d;
      }
    oracle += std::sqrt(acc / (n * n));
  }
  EXPECT_NEAR(value, oracle, 0.02 * oracle);
}
