#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "tmvr/core.hpp"
#include "tmvr/densities.hpp"
#include "tmvr/transport.hpp"

namespace tmvr {

enum class Estimator { ExactEmpirical, Minibatch };

inline const char* to_string(Estimator e) {
  return e == Estimator::ExactEmpirical ? "exact-empirical" : "minibatch";
}

struct DiscrepancyValue {
  double value = 0.0;
  Estimator estimator = Estimator::ExactEmpirical;
  std::size_t n_x = 0;
  std::size_t n_y = 0;
};

namespace detail {

// Rows sorted lexicographically, so that sums do not depend on input order.
inline Mat canonical_rows(const Mat& m) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(m.rows()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index k = 0; k < m.cols(); ++k) {
      if (m(a, k) < m(b, k)) return true;
      if (m(b, k) < m(a, k)) return false;
    }
    return false;
  });
  Mat out(m.rows(), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
  return out;
}

inline bool lexicographically_less(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows()) return a.rows() < b.rows();
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index k = 0; k < a.cols(); ++k) {
      if (a(i, k) < b(i, k)) return true;
      if (b(i, k) < a(i, k)) return false;
    }
  return false;
}

// sum_i sum_j |a_i - b_j|, accumulated per row of `a` then across rows.
inline double pair_distance_sum(const Mat& a, const Mat& b) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < b.rows(); ++j) row += (a.row(i) - b.row(j)).norm();
    total += row;
  }
  return total;
}

}  // namespace detail

// Squared energy distance between the empirical measures of X and Y
// (biased V-statistic, self pairs included), clamped at zero.
inline DiscrepancyValue energy_mmd(const Mat& X, const Mat& Y) {
  if (X.cols() != Y.cols())
    throw std::invalid_argument("energy_mmd: dimension mismatch (" + std::to_string(X.cols()) + " vs " +
                                std::to_string(Y.cols()) + ")");
  if (X.rows() < 1 || Y.rows() < 1) throw std::invalid_argument("energy_mmd: empty point set");
  Mat a = detail::canonical_rows(X);
  Mat b = detail::canonical_rows(Y);
  if (detail::lexicographically_less(b, a)) std::swap(a, b);
  const double na = static_cast<double>(a.rows());
  const double nb = static_cast<double>(b.rows());
  const double cross = detail::pair_distance_sum(a, b) / (na * nb);
  const double self = detail::pair_distance_sum(a, a) / (na * na) + detail::pair_distance_sum(b, b) / (nb * nb);
  DiscrepancyValue out;
  out.value = std::max(0.0, 2.0 * cross - self);
  out.n_x = static_cast<std::size_t>(X.rows());
  out.n_y = static_cast<std::size_t>(Y.rows());
  return out;
}

inline DiscrepancyValue energy_mmd(const ParticleEnsemble& X, const ParticleEnsemble& Y) {
  return energy_mmd(X.points(), Y.points());
}

// sum_j D(f_# rho_j, g_# rho_j), with one shared base sample per density.
template <class F, class G>
double pushforward_metric(F&& f, G&& g, const DensityFamily& family, std::size_t n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("pushforward_metric: n must be >= 1");
  double total = 0.0;
  for (const auto& rho : family) {
    const ParticleEnsemble base = sample(rho, n, rng);
    total += energy_mmd(pushforward_samples(base, f), pushforward_samples(base, g)).value;
  }
  return total;
}

// ---- weighted divergence ----

template <class Field>
concept FieldWithDivergence = requires(const Field& v, const Vec& x) {
  { v.divergence(x) } -> std::convertible_to<double>;
};

inline constexpr double kDivergenceStep = 1e-5;

template <class Field>
double finite_difference_divergence(const Field& v, const Vec& x, double step = kDivergenceStep) {
  double div = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Vec xp = x, xm = x;
    xp(k) += step;
    xm(k) -= step;
    div += (v(xp)(k) - v(xm)(k)) / (2.0 * step);
  }
  return div;
}

template <class Field>
double field_divergence(const Field& v, const Vec& x) {
  if constexpr (FieldWithDivergence<Field>)
    return v.divergence(x);
  else
    return finite_difference_divergence(v, x);
}

// div(rho v)(x) = rho(x) * (<grad log rho(x), v(x)> + div v(x))
inline double weighted_divergence(const DensityModel& rho, const Vec& v_at_x, double div_v_at_x, const Vec& x) {
  return pdf(x, rho) * (grad_log_pdf(x, rho).dot(v_at_x) + div_v_at_x);
}

template <class Field>
double weighted_divergence(const DensityModel& rho, const Field& v, const Vec& x) {
  return weighted_divergence(rho, Vec(v(x)), field_divergence(v, x), x);
}

// sum_j sqrt(mean_c (div(rho_j v) - div(rho_j w))^2) over collocation points c.
template <class FieldV, class FieldW>
double divergence_metric(const FieldV& v, const FieldW& w, const DensityFamily& family,
                         const std::vector<Vec>& collocation) {
  if (collocation.empty()) throw std::invalid_argument("divergence_metric: empty collocation set");
  double total = 0.0;
  for (const auto& rho : family) {
    double acc = 0.0;
    for (const auto& x : collocation) {
      const double d = weighted_divergence(rho, v, x) - weighted_divergence(rho, w, x);
      acc += d * d;
    }
    total += std::sqrt(acc / static_cast<double>(collocation.size()));
  }
  return total;
}

// v(x, y) = (y, -sin(4 pi x)) on [-1,1]^2, divergence free.
struct PendulumField {
  Vec operator()(const Vec& p) const {
    Vec out(2);
    out(0) = p(1);
    out(1) = -std::sin(4.0 * kPi * p(0));
    return out;
  }
  double divergence(const Vec&) const { return 0.0; }
};

struct ZeroField {
  std::size_t dim = 2;
  Vec operator()(const Vec&) const { return Vec::Zero(static_cast<Eigen::Index>(dim)); }
  double divergence(const Vec&) const { return 0.0; }
};

}  // namespace tmvr
