#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "tmvr/core.hpp"
#include "tmvr/densities.hpp"

namespace tmvr {

// Samples of f_# rho from samples of rho: row i of the result is f(x_i).
template <class Map>
ParticleEnsemble pushforward_samples(const ParticleEnsemble& e, Map&& f) {
  const auto n = static_cast<Eigen::Index>(e.size());
  Mat out;
  for (Eigen::Index i = 0; i < n; ++i) {
    Vec y = f(Vec(e.points().row(i).transpose()));
    if (i == 0) out.resize(n, y.size());
    if (y.size() != out.cols())
      throw std::invalid_argument("pushforward_samples: map output dimension changed at row " + std::to_string(i));
    if (!y.allFinite()) throw NumericError("pushforward_samples: non-finite output at row " + std::to_string(i), i);
    out.row(i) = y.transpose();
  }
  return ParticleEnsemble(std::move(out));
}

// Lifts an angle-to-angle map so its outputs stay in [-pi, pi).
template <class Map>
auto circle_map(Map f) {
  return [f = std::move(f)](const Vec& x) -> Vec {
    Vec y = f(x);
    for (Eigen::Index k = 0; k < y.size(); ++k) y(k) = wrap_angle(y(k));
    return y;
  };
}

// x -> rho(f^{-1}(x)) |det D f^{-1}(x)|
template <class Pdf, class Inverse, class JacDet>
auto cov_density(Pdf rho, Inverse f_inverse, JacDet jac_det_inverse) {
  return [rho = std::move(rho), f_inverse = std::move(f_inverse),
          jac_det_inverse = std::move(jac_det_inverse)](const Vec& x) -> double {
    const double j = jac_det_inverse(x);
    if (!(j > 0.0) || !std::isfinite(j))
      throw std::domain_error("cov_density: Jacobian magnitude must be positive");
    return rho(f_inverse(x)) * j;
  };
}

template <class Inverse, class JacDet>
auto cov_density(const DensityModel& rho, Inverse f_inverse, JacDet jac_det_inverse) {
  return cov_density([rho](const Vec& y) { return pdf(y, rho); }, std::move(f_inverse),
                     std::move(jac_det_inverse));
}

struct FlowConfig {
  double horizon = 0.1;
  double substep = 0.01;

  FlowConfig() = default;
  FlowConfig(double h, double s) : horizon(h), substep(s) { validate(); }

  void validate() const {
    if (!(horizon > 0.0) || !(substep > 0.0))
      throw std::invalid_argument("FlowConfig: horizon and substep must be > 0");
    if (substep > horizon * (1.0 + 1e-12))
      throw std::invalid_argument("FlowConfig: substep must not exceed horizon");
    const double ratio = horizon / substep;
    if (std::fabs(ratio - std::round(ratio)) > 1e-9)
      throw std::invalid_argument("FlowConfig: horizon/substep must be an integer");
  }

  std::size_t steps() const { return static_cast<std::size_t>(std::llround(horizon / substep)); }
};

// Explicit Euler: x <- x + substep * v(x), horizon/substep times.
template <class Field>
Vec euler_flow(Field&& v, Vec x, const FlowConfig& cfg) {
  cfg.validate();
  const std::size_t steps = cfg.steps();
  for (std::size_t k = 0; k < steps; ++k) {
    x += cfg.substep * v(x);
    if (!x.allFinite())
      throw NumericError("euler_flow: non-finite state after step " + std::to_string(k), static_cast<long>(k));
  }
  return x;
}

// Element j is h applied j times to e0, j = 0..m.
template <class Map>
std::vector<ParticleEnsemble> iterate_pushforward(const ParticleEnsemble& e0, Map&& h, std::size_t m) {
  std::vector<ParticleEnsemble> out;
  out.reserve(m + 1);
  out.push_back(e0);
  for (std::size_t j = 0; j < m; ++j) out.push_back(pushforward_samples(out.back(), h));
  return out;
}

struct LorenzParams {
  double sigma = 10.0;
  double rho = 28.0;
  double beta = 8.0 / 3.0;
};

inline Vec lorenz_field(const Vec& s, const LorenzParams& p = {}) {
  Vec d(3);
  d(0) = p.sigma * (s(1) - s(0));
  d(1) = s(0) * (p.rho - s(2)) - s(1);
  d(2) = s(0) * s(1) - p.beta * s(2);
  return d;
}

// Row-wise Lorenz field on an n x 3 batch.
inline Mat lorenz_field_batch(const Mat& s, const LorenzParams& p = {}) {
  Mat d(s.rows(), 3);
  d.col(0) = p.sigma * (s.col(1) - s.col(0));
  d.col(1) = s.col(0).cwiseProduct((p.rho - s.col(2).array()).matrix()) - s.col(1);
  d.col(2) = s.col(0).cwiseProduct(s.col(1)) - p.beta * s.col(2);
  return d;
}

// Euler flow applied row-wise to a batch. Same arithmetic as euler_flow.
template <class BatchField>
Mat euler_flow_batch(BatchField&& v, Mat x, const FlowConfig& cfg) {
  cfg.validate();
  const std::size_t steps = cfg.steps();
  for (std::size_t k = 0; k < steps; ++k) {
    x += cfg.substep * v(x);
    if (!x.allFinite())
      throw NumericError("euler_flow: non-finite state after step " + std::to_string(k), static_cast<long>(k));
  }
  return x;
}

}  // namespace tmvr
