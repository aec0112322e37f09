#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "tmvr/core.hpp"
#include "tmvr/random.hpp"

namespace tmvr {

// log I0(x) for x >= 0. Ascending series up to 15, Hankel asymptotic
// expansion above.
inline double log_bessel_i0(double x) {
  x = std::fabs(x);
  if (x <= 15.0) {
    const double q = 0.25 * x * x;
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k < 200; ++k) {
      term *= q / (static_cast<double>(k) * static_cast<double>(k));
      sum += term;
      if (term < sum * 1e-17) break;
    }
    return std::log(sum);
  }
  // I0(x) ~ e^x / sqrt(2 pi x) * sum_k ((2k-1)!!)^2 / (k! (8x)^k)
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 60; ++k) {
    const double odd = 2.0 * k - 1.0;
    const double next = term * odd * odd / (static_cast<double>(k) * 8.0 * x);
    if (next >= term) break;  // series starts diverging
    term = next;
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return x - 0.5 * std::log(kTwoPi * x) + std::log(sum);
}

struct VonMisesDensity {
  double concentration;
  double center;

  VonMisesDensity(double alpha, double beta) : concentration(alpha), center(beta) {
    if (!(alpha > 0.0) || !std::isfinite(alpha))
      throw std::invalid_argument("VonMisesDensity: concentration must be > 0");
    if (!std::isfinite(beta)) throw std::invalid_argument("VonMisesDensity: center must be finite");
  }

  double log_normalizer() const { return std::log(kTwoPi) + log_bessel_i0(concentration); }
};

struct IsotropicGaussianDensity {
  Vec mean;
  double sigma;

  IsotropicGaussianDensity(Vec mu, double s) : mean(std::move(mu)), sigma(s) {
    if (mean.size() < 1) throw std::invalid_argument("IsotropicGaussianDensity: empty mean");
    if (!(sigma > 0.0) || !std::isfinite(sigma))
      throw std::invalid_argument("IsotropicGaussianDensity: sigma must be > 0");
    if (!mean.allFinite()) throw std::invalid_argument("IsotropicGaussianDensity: non-finite mean");
  }

  std::size_t dimension() const { return static_cast<std::size_t>(mean.size()); }
};

using DensityModel = std::variant<VonMisesDensity, IsotropicGaussianDensity>;

// ---- von Mises ----

inline double vm_log_pdf(double x, const VonMisesDensity& d) {
  return d.concentration * std::cos(x - d.center) - d.log_normalizer();
}

inline double vm_grad_log_pdf(double x, const VonMisesDensity& d) {
  return -d.concentration * std::sin(x - d.center);
}

// Best & Fisher (1979) rejection sampler, wrapped into [-pi, pi).
inline std::vector<double> vm_sample(std::size_t n, const VonMisesDensity& d, Rng& rng) {
  if (n == 0) throw std::invalid_argument("vm_sample: n must be >= 1");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> out;
  out.reserve(n);
  const double kappa = d.concentration;
  if (kappa < 1e-8) {
    for (std::size_t i = 0; i < n; ++i) out.push_back(wrap_angle(kTwoPi * unif(rng) - kPi));
    return out;
  }
  const double tau = 1.0 + std::sqrt(1.0 + 4.0 * kappa * kappa);
  const double rho = (tau - std::sqrt(2.0 * tau)) / (2.0 * kappa);
  const double r = (1.0 + rho * rho) / (2.0 * rho);
  while (out.size() < n) {
    const double u1 = unif(rng);
    const double u2 = unif(rng);
    const double u3 = unif(rng);
    const double z = std::cos(kPi * u1);
    const double f = (1.0 + r * z) / (r + z);
    const double c = kappa * (r - f);
    if (c * (2.0 - c) - u2 > 0.0 || std::log(c / u2) + 1.0 - c >= 0.0) {
      const double theta = std::acos(std::clamp(f, -1.0, 1.0));
      out.push_back(wrap_angle(d.center + (u3 > 0.5 ? theta : -theta)));
    }
  }
  return out;
}

// ---- isotropic Gaussian ----

inline double gaussian_log_pdf(const Vec& x, const IsotropicGaussianDensity& d) {
  const double s2 = d.sigma * d.sigma;
  const double dim = static_cast<double>(d.dimension());
  return -0.5 * (x - d.mean).squaredNorm() / s2 - 0.5 * dim * std::log(kTwoPi * s2);
}

inline ParticleEnsemble gaussian_sample(std::size_t n, const IsotropicGaussianDensity& d, Rng& rng) {
  if (n == 0) throw std::invalid_argument("gaussian_sample: n must be >= 1");
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto dim = static_cast<Eigen::Index>(d.dimension());
  Mat pts(static_cast<Eigen::Index>(n), dim);
  for (Eigen::Index i = 0; i < pts.rows(); ++i)
    for (Eigen::Index k = 0; k < dim; ++k) pts(i, k) = d.mean(k) + d.sigma * normal(rng);
  return ParticleEnsemble(std::move(pts));
}

// ---- DensityModel dispatch ----

inline std::size_t dimension(const DensityModel& d) {
  return std::visit(
      [](const auto& m) -> std::size_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, VonMisesDensity>)
          return 1;
        else
          return m.dimension();
      },
      d);
}

inline void check_point(const Vec& x, const DensityModel& d) {
  if (static_cast<std::size_t>(x.size()) != dimension(d))
    throw std::invalid_argument("density: point dimension " + std::to_string(x.size()) +
                                " does not match density dimension " + std::to_string(dimension(d)));
}

inline double log_pdf(const Vec& x, const DensityModel& d) {
  check_point(x, d);
  if (const auto* vm = std::get_if<VonMisesDensity>(&d)) return vm_log_pdf(x(0), *vm);
  return gaussian_log_pdf(x, std::get<IsotropicGaussianDensity>(d));
}

inline double pdf(const Vec& x, const DensityModel& d) { return std::exp(log_pdf(x, d)); }

inline Vec grad_log_pdf(const Vec& x, const DensityModel& d) {
  check_point(x, d);
  if (const auto* vm = std::get_if<VonMisesDensity>(&d)) {
    Vec g(1);
    g(0) = vm_grad_log_pdf(x(0), *vm);
    return g;
  }
  const auto& g = std::get<IsotropicGaussianDensity>(d);
  return -(x - g.mean) / (g.sigma * g.sigma);
}

inline ParticleEnsemble sample(const DensityModel& d, std::size_t n, Rng& rng) {
  if (const auto* vm = std::get_if<VonMisesDensity>(&d)) {
    auto xs = vm_sample(n, *vm, rng);
    return ParticleEnsemble(Eigen::Map<const Vec>(xs.data(), static_cast<Eigen::Index>(xs.size())));
  }
  return gaussian_sample(n, std::get<IsotropicGaussianDensity>(d), rng);
}

// Ordered list of densities on a common domain.
class DensityFamily {
 public:
  explicit DensityFamily(std::vector<DensityModel> members) : members_(std::move(members)) {
    if (members_.empty()) throw std::invalid_argument("DensityFamily: need at least one member");
    const bool circle = std::holds_alternative<VonMisesDensity>(members_.front());
    const std::size_t dim = tmvr::dimension(members_.front());
    for (const auto& m : members_) {
      if (std::holds_alternative<VonMisesDensity>(m) != circle || tmvr::dimension(m) != dim)
        throw std::invalid_argument("DensityFamily: members must share domain and dimension");
    }
  }

  std::size_t size() const { return members_.size(); }
  std::size_t dimension() const { return tmvr::dimension(members_.front()); }
  bool on_circle() const { return std::holds_alternative<VonMisesDensity>(members_.front()); }
  const DensityModel& operator[](std::size_t j) const { return members_[j]; }
  const std::vector<DensityModel>& members() const { return members_; }
  auto begin() const { return members_.begin(); }
  auto end() const { return members_.end(); }

 private:
  std::vector<DensityModel> members_;
};

// (Y_1/Y_m, ..., Y_{m-1}/Y_m) for strictly positive values Y.
inline Vec quotient_values(std::span<const double> values) {
  if (values.size() < 2) throw std::invalid_argument("quotient_values: need m >= 2");
  for (double y : values)
    if (!(y > 0.0) || !std::isfinite(y))
      throw std::domain_error("quotient_values: values must be strictly positive and finite");
  const double last = values.back();
  Vec out(static_cast<Eigen::Index>(values.size() - 1));
  for (std::size_t j = 0; j + 1 < values.size(); ++j) out(static_cast<Eigen::Index>(j)) = values[j] / last;
  return out;
}

// rho_j(x) / rho_m(x), j = 1..m-1, computed through log-density differences
// so that far tails do not underflow.
inline Vec quotient_map(const DensityFamily& family, const Vec& x) {
  const std::size_t m = family.size();
  if (m < 2) throw std::invalid_argument("quotient_map: need m >= 2 densities");
  std::vector<double> logs(m);
  for (std::size_t j = 0; j < m; ++j) {
    logs[j] = log_pdf(x, family[j]);
    if (!std::isfinite(logs[j]))
      throw std::domain_error("quotient_map: density " + std::to_string(j) + " is not positive at x");
  }
  Vec out(static_cast<Eigen::Index>(m - 1));
  for (std::size_t j = 0; j + 1 < m; ++j) out(static_cast<Eigen::Index>(j)) = std::exp(logs[j] - logs[m - 1]);
  return out;
}

// ---- random parameter laws used by the experiments ----

struct VonMisesLaw {
  double alpha_min = 1.0;
  double alpha_max = 3.0;
  double beta_min = -kPi;
  double beta_max = kPi;
};

struct GaussianLaw {
  Vec center_min;
  Vec center_max;
  double sigma_min;
  double sigma_max;
};

inline DensityFamily sample_von_mises_family(std::size_t m, const VonMisesLaw& law, Rng& rng) {
  std::vector<DensityModel> members;
  for (std::size_t j = 0; j < m; ++j) {
    const double a = uniform(rng, law.alpha_min, law.alpha_max);
    const double b = uniform(rng, law.beta_min, law.beta_max);
    members.emplace_back(VonMisesDensity(a, b));
  }
  return DensityFamily(std::move(members));
}

inline IsotropicGaussianDensity sample_gaussian(const GaussianLaw& law, Rng& rng) {
  Vec mu(law.center_min.size());
  for (Eigen::Index k = 0; k < mu.size(); ++k) mu(k) = uniform(rng, law.center_min(k), law.center_max(k));
  const double s = uniform(rng, law.sigma_min, law.sigma_max);
  return IsotropicGaussianDensity(std::move(mu), s);
}

inline DensityFamily sample_gaussian_family(std::size_t m, const GaussianLaw& law, Rng& rng) {
  std::vector<DensityModel> members;
  for (std::size_t j = 0; j < m; ++j) members.emplace_back(sample_gaussian(law, rng));
  return DensityFamily(std::move(members));
}

// Initial condition of the Lorenz snapshot experiment.
inline GaussianLaw lorenz_initial_law() {
  return {Eigen::Vector3d(-15.0, -15.0, 20.0), Eigen::Vector3d(15.0, 15.0, 40.0), 3.0, 7.0};
}

// Densities of the divergence experiment on [-1,1]^2.
inline GaussianLaw divfield_law() {
  return {Eigen::Vector2d(-1.0, -1.0), Eigen::Vector2d(1.0, 1.0), 0.75, 1.25};
}

}  // namespace tmvr
