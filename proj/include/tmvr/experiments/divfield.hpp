#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "tmvr/adam.hpp"
#include "tmvr/densities.hpp"
#include "tmvr/embedding.hpp"
#include "tmvr/experiments/trial.hpp"
#include "tmvr/metrics.hpp"
#include "tmvr/mlp.hpp"
#include "tmvr/mlp_divergence.hpp"
#include "tmvr/random.hpp"

namespace tmvr {

// Recover the pendulum field v(x, y) = (y, -sin 4 pi x) on [-1,1]^2 from the
// weighted divergences div(rho_j v) of m Gaussian densities.
struct DivfieldConfig {
  std::size_t densities = 3;
  std::size_t batch = 200;
  double learning_rate = 1e-3;
  std::size_t iterations = 20000;
  std::vector<std::size_t> hidden = {50, 50};
  GaussianLaw law = divfield_law();
  std::size_t eval_grid = 100;
  std::size_t m_max = 4;
  std::size_t repeats = 10;
  std::size_t log_every = 100;

  void validate() const {
    if (densities < 1) throw std::invalid_argument("divfield.densities must be >= 1");
    if (batch < 1) throw std::invalid_argument("divfield.batch must be >= 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("divfield.learning_rate must be > 0");
    if (iterations < 1) throw std::invalid_argument("divfield.iterations must be >= 1");
    if (hidden.empty()) throw std::invalid_argument("divfield.hidden must list at least one layer");
    if (!(law.sigma_min > 0.0) || !(law.sigma_max >= law.sigma_min))
      throw std::invalid_argument("divfield.sigma_min/sigma_max must satisfy 0 < min <= max");
    if (law.center_min.size() != 2 || law.center_max.size() != 2 ||
        !(law.center_max.array() >= law.center_min.array()).all())
      throw std::invalid_argument("divfield.center_min/center_max must be 2-vectors with min <= max");
    if (eval_grid < 2) throw std::invalid_argument("divfield.eval_grid must be >= 2");
    if (m_max < 1) throw std::invalid_argument("divfield.m_max must be >= 1");
    if (repeats < 1) throw std::invalid_argument("divfield.repeats must be >= 1");
  }
};

inline Mat pendulum_field_batch(const Mat& x) {
  Mat v(x.rows(), 2);
  v.col(0) = x.col(1);
  v.col(1) = -(4.0 * kPi * x.col(0).array()).sin().matrix();
  return v;
}

struct DivfieldEval {
  Mat x;  // grid points
  Mat v_true;
  Mat v_model;
  // sqrt(sum |v_model - v|^2 / sum |v|^2)
  double relative_error() const { return std::sqrt((v_model - v_true).squaredNorm() / v_true.squaredNorm()); }
};

inline Mat square_grid(std::size_t n) {
  const auto pts = cube_grid(n, 2);
  Mat x(static_cast<Eigen::Index>(pts.size()), 2);
  for (std::size_t i = 0; i < pts.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
  return x;
}

// Densities, log-density gradients and target divergences of each family
// member at the rows of x.
struct DivergenceTargets {
  std::vector<Vec> rho;
  std::vector<Mat> grad_log;
  std::vector<Vec> target;
};

inline DivergenceTargets divergence_targets(const DensityFamily& family, const Mat& x) {
  DivergenceTargets t;
  const PendulumField v;
  for (const auto& d : family) {
    Vec rho(x.rows()), target(x.rows());
    Mat g(x.rows(), 2);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const Vec p = x.row(i).transpose();
      rho(i) = pdf(p, d);
      g.row(i) = grad_log_pdf(p, d).transpose();
      target(i) = weighted_divergence(d, v, p);
    }
    t.rho.push_back(std::move(rho));
    t.grad_log.push_back(std::move(g));
    t.target.push_back(std::move(target));
  }
  return t;
}

// sum_j mean_i (div(rho_j v_model) - div(rho_j v))^2 at the rows of x.
inline double divfield_objective(const Mat& value, const Vec& divergence, const DivergenceTargets& t) {
  double loss = 0.0;
  const double inv_n = 1.0 / static_cast<double>(value.rows());
  for (std::size_t j = 0; j < t.rho.size(); ++j) {
    const Vec r = t.rho[j].cwiseProduct(t.grad_log[j].cwiseProduct(value).rowwise().sum() + divergence) - t.target[j];
    loss += inv_n * r.squaredNorm();
  }
  return loss;
}

struct LossAndGradient {
  double value = 0.0;
  Vec gradient;
};

// Objective at the rows of x and its gradient in the model parameters.
inline LossAndGradient divfield_loss_grad(const Mlp& model, const Mat& x, const DivergenceTargets& t,
                                          MlpTangentCache& cache) {
  const Eigen::Index n = x.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  const auto out = mlp_forward_tangent(model, x, cache);
  const Vec div = out.divergence();
  LossAndGradient lg;
  Mat g_value = Mat::Zero(n, 2);
  Vec g_div = Vec::Zero(n);
  for (std::size_t j = 0; j < t.rho.size(); ++j) {
    const Vec r = t.rho[j].cwiseProduct(t.grad_log[j].cwiseProduct(out.value).rowwise().sum() + div) - t.target[j];
    lg.value += inv_n * r.squaredNorm();
    const Vec w = 2.0 * inv_n * r.cwiseProduct(t.rho[j]);
    g_value.array() += t.grad_log[j].array().colwise() * w.array();
    g_div += w;
  }
  std::vector<Mat> g_jac(2, Mat::Zero(n, 2));
  g_jac[0].col(0) = g_div;
  g_jac[1].col(1) = g_div;
  lg.gradient = mlp_backward_tangent(model, cache, g_value, g_jac);
  return lg;
}

struct DivfieldResult {
  TrialSummary summary;
  std::vector<LossPoint> loss_curve;
  Mlp model;
  std::vector<DensityModel> densities;
  DivfieldEval eval;
};

struct DivfieldOptions {
  bool ground_truth = false;
  // Use these densities instead of drawing them from the seed.
  std::optional<std::vector<DensityModel>> densities;
};

inline DensityFamily draw_divfield_family(const DivfieldConfig& cfg, std::uint64_t seed) {
  Rng rng = make_rng(seed, "divfield/densities");
  return sample_gaussian_family(cfg.densities, cfg.law, rng);
}

// Repeats of one experiment share the density family drawn from the base
// seed; the trial seed then only changes initialization and collocation.
inline DivfieldOptions shared_family(const DivfieldConfig& cfg, std::uint64_t base_seed, bool ground_truth = false) {
  const auto family = draw_divfield_family(cfg, base_seed);
  DivfieldOptions opt;
  opt.ground_truth = ground_truth;
  opt.densities = std::vector<DensityModel>(family.begin(), family.end());
  return opt;
}

inline DivfieldResult recover_divfield(const DivfieldConfig& cfg, std::uint64_t seed, const DivfieldOptions& opt = {}) {
  cfg.validate();
  Stopwatch clock;
  DivfieldResult r;
  r.summary.experiment = ExperimentKind::Divfield;
  r.summary.seed = seed;
  const DensityFamily family = opt.densities ? DensityFamily(*opt.densities) : draw_divfield_family(cfg, seed);
  if (family.dimension() != 2) throw std::invalid_argument("recover_divfield: densities must live on R^2");
  r.densities.assign(family.begin(), family.end());

  Rng init_rng = make_rng(seed, "divfield/init");
  std::vector<std::size_t> sizes = {2};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(2);
  r.model = Mlp::glorot(sizes, InputFeatures::Identity, init_rng);
  Rng batch_rng = make_rng(seed, "divfield/collocation");
  LossRecorder recorder(cfg.log_every);
  const auto n = static_cast<Eigen::Index>(cfg.batch);
  auto draw_points = [&] {
    Mat x(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
      x(i, 0) = uniform(batch_rng, -1.0, 1.0);
      x(i, 1) = uniform(batch_rng, -1.0, 1.0);
    }
    return x;
  };

  r.eval.x = square_grid(cfg.eval_grid);
  r.eval.v_true = pendulum_field_batch(r.eval.x);

  if (opt.ground_truth) {
    const Mat x = draw_points();
    const auto t = divergence_targets(family, x);
    recorder.record(0, divfield_objective(pendulum_field_batch(x), Vec::Zero(n), t), 1);
    r.eval.v_model = r.eval.v_true;
  } else {
    AdamState adam(r.model.num_parameters(), cfg.learning_rate);
    MlpTangentCache cache;
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
      const Mat x = draw_points();
      const auto lg = divfield_loss_grad(r.model, x, divergence_targets(family, x), cache);
      recorder.record(it, lg.value, cfg.iterations);
      adam_step(adam, r.model.parameters(), lg.gradient);
    }
    r.eval.v_model = mlp_forward(r.model, r.eval.x);
  }

  r.loss_curve = recorder.points();
  r.summary.final_loss = recorder.final_loss();
  r.summary.mse_field = r.eval.relative_error();
  r.summary.iterations = opt.ground_truth ? 0 : cfg.iterations;
  r.summary.wall_time = clock.seconds();
  return r;
}

}  // namespace tmvr
