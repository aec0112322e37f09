#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "tmvr/core.hpp"
#include "tmvr/densities.hpp"
#include "tmvr/transport.hpp"

namespace tmvr {

// Numerical evidence for the two conditions of an embedding on a finite test
// set: injectivity (separation ratio) and immersion (Jacobian singular values).
struct EmbeddingReport {
  double min_separation_ratio = 0.0;
  double min_singular_value = 0.0;
  bool injective_verdict = false;
  bool immersion_verdict = false;
  std::size_t n_test_points = 0;
};

struct EmbeddingThresholds {
  double separation = 1e-3;
  double singular_value = 1e-4;
};

inline constexpr double kJacobianStep = 1e-5;

struct EuclideanDistance {
  double operator()(const Vec& a, const Vec& b) const { return (a - b).norm(); }
};

struct CircleDistance {
  double operator()(const Vec& a, const Vec& b) const { return circle_distance(a(0), b(0)); }
};

// Uniform grid of n angles in [-pi, pi).
inline std::vector<Vec> circle_grid(std::size_t n) {
  std::vector<Vec> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) pts.push_back(Vec::Constant(1, -kPi + kTwoPi * static_cast<double>(i) / static_cast<double>(n)));
  return pts;
}

// Tensor grid with n points per axis on [lo, hi]^dim, endpoints included.
inline std::vector<Vec> cube_grid(std::size_t n, std::size_t dim, double lo = -1.0, double hi = 1.0) {
  if (n < 2 || dim < 1) throw std::invalid_argument("cube_grid: need n >= 2 and dim >= 1");
  std::size_t total = 1;
  for (std::size_t k = 0; k < dim; ++k) total *= n;
  std::vector<Vec> pts;
  pts.reserve(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    Vec p(static_cast<Eigen::Index>(dim));
    std::size_t rem = idx;
    for (std::size_t k = 0; k < dim; ++k) {
      p(static_cast<Eigen::Index>(k)) = lo + (hi - lo) * static_cast<double>(rem % n) / static_cast<double>(n - 1);
      rem /= n;
    }
    pts.push_back(std::move(p));
  }
  return pts;
}

// (y(x), y(h(x)), ..., y(h^{k-1}(x)))
template <class Observable, class Map>
Vec delay_map(Observable&& y, Map&& h, std::size_t k, Vec x) {
  if (k < 1) throw std::invalid_argument("delay_map: k must be >= 1");
  Vec out(static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < k; ++i) {
    if (i > 0) x = h(x);
    out(static_cast<Eigen::Index>(i)) = y(x);
  }
  return out;
}

// Central-difference Jacobian of Y at x.
template <class Map>
Mat finite_difference_jacobian(Map&& Y, const Vec& x, double step = kJacobianStep) {
  const Vec y0 = Y(x);
  Mat J(y0.size(), x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Vec xp = x, xm = x;
    xp(k) += step;
    xm(k) -= step;
    J.col(k) = (Y(xp) - Y(xm)) / (2.0 * step);
  }
  return J;
}

inline double smallest_singular_value(const Mat& J) {
  if (J.rows() < J.cols()) return 0.0;  // cannot be injective
  Eigen::JacobiSVD<Mat> svd(J);
  return svd.singularValues().minCoeff();
}

template <class Map, class Distance = EuclideanDistance>
EmbeddingReport check_embedding(Map&& Y, const std::vector<Vec>& test_points, double sep_threshold,
                                double sv_threshold, Distance dist = {}) {
  if (test_points.size() < 2) throw std::invalid_argument("check_embedding: need at least two test points");
  if (!(sep_threshold > 0.0) || !(sv_threshold > 0.0))
    throw std::invalid_argument("check_embedding: thresholds must be > 0");

  std::vector<Vec> images;
  images.reserve(test_points.size());
  for (const auto& x : test_points) images.push_back(Y(x));

  double min_ratio = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < test_points.size(); ++i) {
    for (std::size_t j = i + 1; j < test_points.size(); ++j) {
      const double d = dist(test_points[i], test_points[j]);
      if (!(d > 0.0)) continue;  // duplicate test point
      min_ratio = std::min(min_ratio, (images[i] - images[j]).norm() / d);
    }
  }
  if (!std::isfinite(min_ratio)) throw std::invalid_argument("check_embedding: test points are not distinct");

  double min_sv = std::numeric_limits<double>::infinity();
  for (const auto& x : test_points) min_sv = std::min(min_sv, smallest_singular_value(finite_difference_jacobian(Y, x)));

  EmbeddingReport r;
  r.min_separation_ratio = std::max(0.0, min_ratio);
  r.min_singular_value = std::max(0.0, min_sv);
  r.injective_verdict = r.min_separation_ratio >= sep_threshold;
  r.immersion_verdict = r.min_singular_value >= sv_threshold;
  r.n_test_points = test_points.size();
  return r;
}

template <class Distance = EuclideanDistance>
EmbeddingReport quotient_embedding_check(const DensityFamily& family, const std::vector<Vec>& test_points,
                                         const EmbeddingThresholds& th = {}, Distance dist = {}) {
  if (family.size() < 2) throw std::invalid_argument("quotient_embedding_check: need m >= 2");
  return check_embedding([&family](const Vec& x) { return quotient_map(family, x); }, test_points, th.separation,
                         th.singular_value, dist);
}

// max_x || reverse(Psi_{(y,h)}((h^{k-1})^{-1}(x))) - Psi_{(y,h^{-1})}(x) ||
template <class Observable, class Map, class Inverse, class Distance = EuclideanDistance>
double reversed_delay_identity(Observable&& y, Map&& h, Inverse&& h_inverse, std::size_t k,
                               const std::vector<Vec>& test_points, Distance dist = {}) {
  for (std::size_t i = 0; i < test_points.size(); ++i) {
    const Vec& x = test_points[i];
    if (dist(h_inverse(h(x)), x) > 1e-8)
      throw std::invalid_argument("reversed_delay_identity: h_inverse does not invert h at test point " +
                                  std::to_string(i));
  }
  double worst = 0.0;
  for (const auto& x : test_points) {
    Vec back = x;
    for (std::size_t i = 0; i + 1 < k; ++i) back = h_inverse(back);
    const Vec forward = delay_map(y, h, k, back).reverse();
    const Vec reversed = delay_map(y, h_inverse, k, x);
    worst = std::max(worst, (forward - reversed).cwiseAbs().maxCoeff());
  }
  return worst;
}

// For a volume-preserving h, rho_{j+1} = rho_j o h^{-1}. Checks
// rho_j / rho_{j+1} = psi o (h^{j-1})^{-1} with psi = rho_1 / h_# rho_1,
// returning the largest absolute deviation over j = 1..m-1 and test points.
template <class Map, class Inverse, class Distance = EuclideanDistance>
double quotient_cancellation_residual(const DensityModel& rho1, Map&& h, Inverse&& h_inverse, std::size_t m,
                                      const std::vector<Vec>& test_points, Distance dist = {}) {
  if (m < 2) throw std::invalid_argument("quotient_cancellation_residual: need m >= 2");
  for (std::size_t i = 0; i < test_points.size(); ++i)
    if (dist(h_inverse(h(test_points[i])), test_points[i]) > 1e-8)
      throw std::invalid_argument("quotient_cancellation_residual: h_inverse does not invert h at test point " +
                                  std::to_string(i));
  auto unit_jacobian = [](const Vec&) { return 1.0; };

  // rho_1, ..., rho_m by repeated change of variables.
  std::vector<std::function<double(const Vec&)>> rho;
  rho.emplace_back([rho1](const Vec& x) { return pdf(x, rho1); });
  for (std::size_t j = 1; j < m; ++j) rho.emplace_back(cov_density(rho.back(), h_inverse, unit_jacobian));
  const auto& pushed = rho[1];
  auto psi = [&](const Vec& x) { return rho[0](x) / pushed(x); };

  double worst = 0.0;
  for (const auto& x : test_points) {
    Vec back = x;  // (h^{j-1})^{-1}(x)
    for (std::size_t j = 0; j + 1 < m; ++j) {
      if (j > 0) back = h_inverse(back);
      const double lhs = rho[j](x) / rho[j + 1](x);
      worst = std::max(worst, std::fabs(lhs - psi(back)));
    }
  }
  return worst;
}

}  // namespace tmvr
