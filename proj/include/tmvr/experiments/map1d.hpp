#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "tmvr/adam.hpp"
#include "tmvr/densities.hpp"
#include "tmvr/experiments/trial.hpp"
#include "tmvr/mlp.hpp"
#include "tmvr/mmd_grad.hpp"
#include "tmvr/random.hpp"

namespace tmvr {

// Learn f: S^1 -> R^3 from pairs (rho_j, f_# rho_j) of von Mises densities.
struct Map1dConfig {
  std::size_t densities = 5;
  std::size_t batch = 100;
  double learning_rate = 1e-3;
  std::size_t iterations = 50000;
  std::vector<std::size_t> hidden = {100, 100};
  VonMisesLaw law{};
  std::size_t eval_points = 2048;
  std::size_t log_every = 100;

  void validate() const {
    if (densities < 1) throw std::invalid_argument("map1d.densities must be >= 1");
    if (batch < 1) throw std::invalid_argument("map1d.batch must be >= 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("map1d.learning_rate must be > 0");
    if (iterations < 1) throw std::invalid_argument("map1d.iterations must be >= 1");
    if (hidden.empty()) throw std::invalid_argument("map1d.hidden must list at least one layer");
    if (!(law.alpha_min > 0.0) || !(law.alpha_max >= law.alpha_min))
      throw std::invalid_argument("map1d.alpha_min/alpha_max must satisfy 0 < min <= max");
    if (!(law.beta_max >= law.beta_min)) throw std::invalid_argument("map1d.beta_min must be <= beta_max");
    if (eval_points < 2) throw std::invalid_argument("map1d.eval_points must be >= 2");
  }
};

// f(x) = (sin x, (cos 3x + sin 2x)/2, (sin 3x + sin 5x)/2), row-wise on an n x 1 batch.
inline Mat target_map_1d(const Mat& x) {
  Mat out(x.rows(), 3);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double t = x(i, 0);
    out(i, 0) = std::sin(t);
    out(i, 1) = 0.5 * (std::cos(3 * t) + std::sin(2 * t));
    out(i, 2) = 0.5 * (std::sin(3 * t) + std::sin(5 * t));
  }
  return out;
}

inline Mat circle_eval_grid(std::size_t n) {
  Mat x(static_cast<Eigen::Index>(n), 1);
  for (std::size_t i = 0; i < n; ++i) x(static_cast<Eigen::Index>(i), 0) = -kPi + kTwoPi * static_cast<double>(i) / static_cast<double>(n);
  return x;
}

// Riemann sum of int |f - g|^2 / int |f|^2 over an equispaced circle grid.
template <class Model>
double map1d_relative_mse(Model&& model, std::size_t n) {
  const Mat x = circle_eval_grid(n);
  const Mat f = target_map_1d(x);
  const Mat g = model(x);
  return (f - g).squaredNorm() / f.squaredNorm();
}

// (1/m) sum_j D(f_# rho_j, model_# rho_j), one shared base sample per density.
template <class Model>
double map1d_objective(Model&& model, const DensityFamily& family, std::size_t n, Rng& rng) {
  double total = 0.0;
  for (const auto& rho : family) {
    const Mat base = sample(rho, n, rng).points();
    total += mmd_loss_grad(model(base), target_map_1d(base)).value;
  }
  return total / static_cast<double>(family.size());
}

struct Map1dResult {
  TrialSummary summary;
  std::vector<LossPoint> loss_curve;
  Mlp model;
  std::vector<DensityModel> densities;
  Mat eval_x;      // grid points
  Mat eval_true;   // f on the grid
  Mat eval_model;  // f_theta on the grid
};

struct Map1dOptions {
  // Evaluate the exact map in place of the network (no training).
  bool ground_truth = false;
};

inline Map1dResult recover_map_1d(const Map1dConfig& cfg, std::uint64_t seed, const Map1dOptions& opt = {}) {
  cfg.validate();
  Stopwatch clock;
  Map1dResult r;
  r.summary.experiment = ExperimentKind::Map1d;
  r.summary.seed = seed;

  Rng density_rng = make_rng(seed, "map1d/densities");
  const DensityFamily family = sample_von_mises_family(cfg.densities, cfg.law, density_rng);
  r.densities.assign(family.begin(), family.end());
  Rng init_rng = make_rng(seed, "map1d/init");
  std::vector<std::size_t> sizes = {2};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(3);
  r.model = Mlp::glorot(sizes, InputFeatures::Circle, init_rng);
  Rng batch_rng = make_rng(seed, "map1d/batches");

  const auto m = static_cast<Eigen::Index>(cfg.densities);
  const auto n = static_cast<Eigen::Index>(cfg.batch);
  const double inv_m = 1.0 / static_cast<double>(m);
  LossRecorder recorder(cfg.log_every);

  if (opt.ground_truth) {
    const double loss = map1d_objective([](const Mat& x) { return target_map_1d(x); }, family, cfg.batch, batch_rng);
    recorder.record(0, loss, 1);
    r.eval_x = circle_eval_grid(cfg.eval_points);
    r.eval_true = target_map_1d(r.eval_x);
    r.eval_model = r.eval_true;
  } else {
    AdamState adam(r.model.num_parameters(), cfg.learning_rate);
    Mat base(m * n, 1);
    MlpCache cache;
    Mat upstream(m * n, 3);
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
      for (Eigen::Index j = 0; j < m; ++j)
        base.middleRows(j * n, n) = sample(family[static_cast<std::size_t>(j)], cfg.batch, batch_rng).points();
      const Mat target = target_map_1d(base);
      const Mat out = mlp_forward(r.model, base, cache);
      double loss = 0.0;
      for (Eigen::Index j = 0; j < m; ++j) {
        const auto g = mmd_loss_grad(out.middleRows(j * n, n), target.middleRows(j * n, n));
        loss += inv_m * g.value;
        upstream.middleRows(j * n, n) = inv_m * g.gradient;
      }
      recorder.record(it, loss, cfg.iterations);
      const auto grad = mlp_backward(r.model, cache, upstream);
      adam_step(adam, r.model.parameters(), grad.params);
    }
    r.eval_x = circle_eval_grid(cfg.eval_points);
    r.eval_true = target_map_1d(r.eval_x);
    r.eval_model = mlp_forward(r.model, r.eval_x);
  }

  r.loss_curve = recorder.points();
  r.summary.final_loss = recorder.final_loss();
  r.summary.mse_map = (r.eval_true - r.eval_model).squaredNorm() / r.eval_true.squaredNorm();
  r.summary.iterations = opt.ground_truth ? 0 : cfg.iterations;
  r.summary.wall_time = clock.seconds();
  return r;
}

}  // namespace tmvr
