#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "tmvr/densities.hpp"

using namespace tmvr;

namespace {

Vec v1(double x) { return Vec::Constant(1, x); }

// Periodic trapezoid rule on [-pi, pi); spectrally accurate for smooth
// periodic integrands.
template <class F>
double circle_quadrature(F&& f, int n = 4096) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += f(-kPi + kTwoPi * i / n);
  return s * kTwoPi / n;
}

}  // namespace

TEST(VonMises, LogBesselMatchesStandardLibrary) {
  for (double a : {1e-6, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 14.99, 15.0, 15.01, 20.0, 50.0, 200.0, 600.0}) {
    const double expected = std::log(std::cyl_bessel_i(0.0, a));
    EXPECT_NEAR(log_bessel_i0(a), expected, 1e-12 * std::max(1.0, std::fabs(expected))) << "alpha=" << a;
  }
}

TEST(VonMises, UniformLimit) {
  VonMisesDensity d(1e-12, 0.3);
  for (double x : {-3.0, -1.0, 0.0, 2.5})
    EXPECT_NEAR(vm_log_pdf(x, d), std::log(1.0 / kTwoPi), 1e-12);
}

TEST(VonMises, ModeIsGlobalMaximum) {
  VonMisesDensity d(2.5, -0.7);
  const double at_mode = vm_log_pdf(-0.7, d);
  EXPECT_NEAR(at_mode, 2.5 - std::log(kTwoPi * std::cyl_bessel_i(0.0, 2.5)), 1e-12);
  for (double x = -kPi; x < kPi; x += 0.01) EXPECT_LE(vm_log_pdf(x, d), at_mode + 1e-15);
}

TEST(VonMises, MatchesQuadratureNormalizedDensity) {
  const double Z = circle_quadrature([](double t) { return std::exp(2.0 * std::cos(t)); });
  const double oracle = 2.0 * std::cos(kPi / 2) - std::log(Z);
  EXPECT_NEAR(vm_log_pdf(kPi / 2, VonMisesDensity(2.0, 0.0)), oracle, 1e-8);
}

TEST(VonMises, IntegratesToOneAndIsPeriodic) {
  for (double a : {0.05, 1.0, 3.0, 14.0, 16.0, 40.0}) {
    VonMisesDensity d(a, 1.1);
    const double mass = circle_quadrature([&](double t) { return std::exp(vm_log_pdf(t, d)); }, 8192);
    EXPECT_NEAR(mass, 1.0, 1e-10) << "alpha=" << a;
    EXPECT_DOUBLE_EQ(vm_log_pdf(-kPi, d), vm_log_pdf(kPi, d));
  }
}

TEST(VonMises, RejectsNonPositiveConcentration) {
  EXPECT_THROW(VonMisesDensity(0.0, 0.0), std::invalid_argument);
  EXPECT_THROW(VonMisesDensity(-1.0, 0.0), std::invalid_argument);
}

TEST(VonMisesSample, UniformLimitHasZeroMeanCosine) {
  Rng rng(11);
  const std::size_t n = 100000;
  const auto xs = vm_sample(n, VonMisesDensity(1e-12, 0.0), rng);
  double c = 0.0;
  for (double x : xs) {
    EXPECT_GE(x, -kPi);
    EXPECT_LT(x, kPi);
    c += std::cos(x);
  }
  EXPECT_LT(std::fabs(c / n), 3.0 / std::sqrt(static_cast<double>(n)));
}

TEST(VonMisesSample, CircularMeanMatchesQuadrature) {
  VonMisesDensity d(5.0, 1.0);
  const double qs = circle_quadrature([&](double t) { return std::sin(t) * std::exp(vm_log_pdf(t, d)); });
  const double qc = circle_quadrature([&](double t) { return std::cos(t) * std::exp(vm_log_pdf(t, d)); });
  const double oracle = std::atan2(qs, qc);
  EXPECT_NEAR(oracle, 1.0, 1e-12);

  Rng rng(5);
  const auto xs = vm_sample(100000, d, rng);
  double s = 0.0, c = 0.0;
  for (double x : xs) {
    s += std::sin(x);
    c += std::cos(x);
  }
  EXPECT_NEAR(std::atan2(s, c), oracle, 0.05);
  // mean resultant length: E cos(x - beta) = I1(5)/I0(5)
  EXPECT_NEAR(std::hypot(s, c) / xs.size(), std::cyl_bessel_i(1.0, 5.0) / std::cyl_bessel_i(0.0, 5.0), 5e-3);
}

TEST(VonMisesSample, RejectsEmptyRequest) {
  Rng rng(1);
  EXPECT_THROW(vm_sample(0, VonMisesDensity(1.0, 0.0), rng), std::invalid_argument);
}

TEST(GaussianSample, DegenerateSigmaCollapsesToMean) {
  Rng rng(3);
  IsotropicGaussianDensity d(Eigen::Vector3d(1.0, -2.0, 30.0), 1e-12);
  const auto e = gaussian_sample(1000, d, rng);
  for (std::size_t i = 0; i < e.size(); ++i) EXPECT_LT((e.point(i) - d.mean).norm(), 1e-9);
}

TEST(GaussianSample, UnitVarianceWithinChiSquareBand) {
  Rng rng(17);
  const auto e = gaussian_sample(100000, IsotropicGaussianDensity(Vec::Zero(3), 1.0), rng);
  const Mat& p = e.points();
  for (Eigen::Index k = 0; k < 3; ++k) {
    const double mean = p.col(k).mean();
    const double var = (p.col(k).array() - mean).square().sum() / (p.rows() - 1);
    EXPECT_GE(var, 0.97);
    EXPECT_LE(var, 1.03);
  }
}

TEST(GaussianSample, SameSeedSameEnsemble) {
  IsotropicGaussianDensity d(Eigen::Vector2d(0.5, 0.5), 2.0);
  Rng a(99), b(99);
  EXPECT_EQ(gaussian_sample(500, d, a), gaussian_sample(500, d, b));
}

TEST(GaussianDensity, NormalizesInTwoAndThreeDimensions) {
  // 2-D: midpoint quadrature on a box holding essentially all the mass.
  IsotropicGaussianDensity g2(Eigen::Vector2d(0.3, -0.2), 0.8);
  const int n = 400;
  const double lo = -8.0, hi = 8.0, h = (hi - lo) / n;
  double mass = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      mass += std::exp(gaussian_log_pdf(Eigen::Vector2d(lo + (i + 0.5) * h, lo + (j + 0.5) * h), g2));
  EXPECT_NEAR(mass * h * h, 1.0, 1e-8);

  // 3-D: importance sampling from a wider Gaussian.
  IsotropicGaussianDensity g3(Eigen::Vector3d(1.0, 2.0, 25.0), 4.0);
  IsotropicGaussianDensity proposal(g3.mean, 6.0);
  Rng rng(23);
  const auto e = gaussian_sample(200000, proposal, rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i)
    acc += std::exp(gaussian_log_pdf(e.point(i), g3) - gaussian_log_pdf(e.point(i), proposal));
  EXPECT_NEAR(acc / e.size(), 1.0, 1e-2);
}

TEST(GradLogPdf, StationaryPointsAndHandValue) {
  DensityModel g = IsotropicGaussianDensity(Eigen::Vector2d(1.0, 2.0), 0.5);
  EXPECT_EQ(grad_log_pdf(Eigen::Vector2d(1.0, 2.0), g), Vec::Zero(2));
  const Vec got = grad_log_pdf(Eigen::Vector2d(2.0, 2.0), g);
  EXPECT_DOUBLE_EQ(got(0), -4.0);
  EXPECT_DOUBLE_EQ(got(1), 0.0);
  DensityModel vm = VonMisesDensity(2.0, 0.4);
  EXPECT_DOUBLE_EQ(grad_log_pdf(v1(0.4), vm)(0), 0.0);
}

TEST(GradLogPdf, AgreesWithCentralDifferences) {
  Rng rng(7);
  std::vector<DensityModel> models = {VonMisesDensity(2.3, -1.0),
                                      IsotropicGaussianDensity(Eigen::Vector2d(0.2, -0.4), 0.9),
                                      IsotropicGaussianDensity(Eigen::Vector3d(-3.0, 4.0, 30.0), 5.0)};
  for (const auto& m : models) {
    const auto dim = static_cast<Eigen::Index>(dimension(m));
    for (int trial = 0; trial < 100; ++trial) {
      Vec x(dim);
      for (Eigen::Index k = 0; k < dim; ++k) x(k) = uniform(rng, -3.0, 3.0);
      const Vec g = grad_log_pdf(x, m);
      const double h = 1e-6;
      for (Eigen::Index k = 0; k < dim; ++k) {
        Vec xp = x, xm = x;
        xp(k) += h;
        xm(k) -= h;
        const double fd = (log_pdf(xp, m) - log_pdf(xm, m)) / (2 * h);
        EXPECT_LE(std::fabs(fd - g(k)), 1e-6 * std::max(1.0, std::fabs(g(k))));
      }
    }
  }
}

TEST(QuotientMap, IdenticalMembersGiveOnes) {
  DensityFamily fam({VonMisesDensity(2.0, 0.5), VonMisesDensity(2.0, 0.5), VonMisesDensity(2.0, 0.5)});
  EXPECT_EQ(quotient_map(fam, v1(1.3)), Vec::Ones(2));
}

TEST(QuotientMap, SameConcentrationClosedForm) {
  const double a = 1.7, b1 = 0.4, b2 = -2.1;
  DensityFamily fam({VonMisesDensity(a, b1), VonMisesDensity(a, b2)});
  for (double x = -kPi; x < kPi; x += 0.1) {
    const double oracle = std::exp(a * (std::cos(x - b1) - std::cos(x - b2)));
    EXPECT_NEAR(quotient_map(fam, v1(x))(0), oracle, 1e-13 * oracle);
  }
}

TEST(QuotientMap, PreconditionsAndPositivity) {
  DensityFamily single({VonMisesDensity(1.0, 0.0)});
  EXPECT_THROW(quotient_map(single, v1(0.0)), std::invalid_argument);
  const std::vector<double> with_zero = {1.0, 0.0, 2.0};
  EXPECT_THROW(quotient_values(with_zero), std::domain_error);
}

TEST(QuotientMap, InvariantUnderCommonScaling) {
  Rng rng(31);
  DensityFamily fam = sample_von_mises_family(5, VonMisesLaw{}, rng);
  for (double c : {1e-3, 0.5, 7.0, 1e4}) {
    for (double x = -kPi; x < kPi; x += 0.37) {
      std::vector<double> values, scaled;
      for (const auto& m : fam) {
        values.push_back(pdf(v1(x), m));
        scaled.push_back(c * values.back());
      }
      const Vec q = quotient_values(values);
      const Vec qs = quotient_values(scaled);
      EXPECT_LT((q - qs).cwiseAbs().maxCoeff(), 1e-12 * q.cwiseAbs().maxCoeff());
      EXPECT_LT((q - quotient_map(fam, v1(x))).cwiseAbs().maxCoeff(), 1e-12 * q.cwiseAbs().maxCoeff());
    }
  }
}

TEST(DensityFamily, RejectsMixedDomains) {
  EXPECT_THROW(DensityFamily({}), std::invalid_argument);
  EXPECT_THROW(DensityFamily({VonMisesDensity(1.0, 0.0), IsotropicGaussianDensity(Vec::Zero(1), 1.0)}),
               std::invalid_argument);
  EXPECT_THROW(DensityFamily({IsotropicGaussianDensity(Vec::Zero(2), 1.0), IsotropicGaussianDensity(Vec::Zero(3), 1.0)}),
               std::invalid_argument);
}

TEST(DensityFamily, LogPdfFiniteOnCompactDomains) {
  Rng rng(2);
  const auto vm = sample_von_mises_family(5, VonMisesLaw{}, rng);
  for (double x = -kPi; x <= kPi; x += 0.01)
    for (const auto& m : vm) EXPECT_TRUE(std::isfinite(log_pdf(v1(x), m)));
  const auto g = sample_gaussian_family(4, divfield_law(), rng);
  for (double x = -1.0; x <= 1.0; x += 0.05)
    for (double y = -1.0; y <= 1.0; y += 0.05)
      for (const auto& m : g) EXPECT_GT(pdf(Eigen::Vector2d(x, y), m), 0.0);
}

TEST(Presets, ParameterLawsRespected) {
  Rng rng(4);
  for (int t = 0; t < 50; ++t) {
    const auto g = sample_gaussian(lorenz_initial_law(), rng);
    EXPECT_GE(g.mean(0), -15.0);
    EXPECT_LE(g.mean(1), 15.0);
    EXPECT_GE(g.mean(2), 20.0);
    EXPECT_LE(g.mean(2), 40.0);
    EXPECT_GE(g.sigma, 3.0);
    EXPECT_LE(g.sigma, 7.0);
    const auto d = sample_gaussian(divfield_law(), rng);
    EXPECT_LE(d.mean.cwiseAbs().maxCoeff(), 1.0);
    EXPECT_GE(d.sigma, 0.75);
    EXPECT_LE(d.sigma, 1.25);
  }
}
