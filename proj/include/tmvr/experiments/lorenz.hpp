#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "tmvr/adam.hpp"
#include "tmvr/densities.hpp"
#include "tmvr/experiments/trial.hpp"
#include "tmvr/mlp.hpp"
#include "tmvr/mmd_grad.hpp"
#include "tmvr/random.hpp"
#include "tmvr/transport.hpp"

namespace tmvr {

// Identify the Lorenz field from snapshots rho_j = f^j_# rho_0 of a random
// Gaussian initial condition.
struct LorenzConfig {
  std::size_t particles = 100000;
  std::size_t snapshots = 7;  // m: pairs (rho_j, rho_{j+1}), j = 0..m-1
  double dt = 0.1;
  double substep = 0.01;
  std::size_t batch = 200;
  double learning_rate = 1e-3;
  std::size_t iterations = 10000;
  std::vector<std::size_t> hidden = {100, 100};
  LorenzParams params{};
  GaussianLaw law = lorenz_initial_law();
  std::size_t eval_samples = 0;  // 0: every particle of rho_0..rho_{m-1}
  std::size_t marginal_samples = 1000;
  std::size_t log_every = 100;

  void validate() const {
    if (particles < 2) throw std::invalid_argument("lorenz.particles must be >= 2");
    if (snapshots < 1) throw std::invalid_argument("lorenz.snapshots must be >= 1");
    if (batch < 1) throw std::invalid_argument("lorenz.batch must be >= 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("lorenz.learning_rate must be > 0");
    if (iterations < 1) throw std::invalid_argument("lorenz.iterations must be >= 1");
    if (hidden.empty()) throw std::invalid_argument("lorenz.hidden must list at least one layer");
    if (!(params.sigma > 0.0)) throw std::invalid_argument("lorenz.sigma must be > 0");
    if (!(params.rho > 0.0)) throw std::invalid_argument("lorenz.rho must be > 0");
    if (!(params.beta > 0.0)) throw std::invalid_argument("lorenz.beta must be > 0");
    if (!(law.sigma_min > 0.0) || !(law.sigma_max >= law.sigma_min))
      throw std::invalid_argument("lorenz.init_sigma_min/init_sigma_max must satisfy 0 < min <= max");
    if (law.center_min.size() != 3 || law.center_max.size() != 3 ||
        !(law.center_max.array() >= law.center_min.array()).all())
      throw std::invalid_argument("lorenz.center_min/center_max must be 3-vectors with min <= max");
    try {
      FlowConfig(dt, substep);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(std::string("lorenz.dt/lorenz.substep: ") + e.what());
    }
  }
};

// Per-coordinate affine map x -> (x - lo) / scale onto the unit cube.
struct UnitCubeMap {
  Eigen::RowVectorXd lo;
  Eigen::RowVectorXd scale;

  static UnitCubeMap fit(const std::vector<Mat>& data) {
    UnitCubeMap a;
    a.lo = data.front().colwise().minCoeff();
    Eigen::RowVectorXd hi = data.front().colwise().maxCoeff();
    for (const auto& d : data) {
      a.lo = a.lo.cwiseMin(d.colwise().minCoeff());
      hi = hi.cwiseMax(d.colwise().maxCoeff());
    }
    a.scale = hi - a.lo;
    if (!(a.scale.array() > 0.0).all()) throw NumericError("UnitCubeMap: degenerate data range");
    return a;
  }
  Mat to_unit(const Mat& x) const { return ((x.rowwise() - lo).array().rowwise() / scale.array()).matrix(); }
  Mat from_unit(const Mat& u) const { return ((u.array().rowwise() * scale.array()).rowwise() + lo.array()).matrix(); }
  // Velocity in original coordinates from a velocity in unit coordinates.
  Mat velocity_from_unit(const Mat& du) const { return (du.array().rowwise() * scale.array()).matrix(); }
};

struct LorenzData {
  IsotropicGaussianDensity initial{Vec::Zero(3), 1.0};
  std::vector<Mat> snapshots;  // m + 1 ensembles, snapshots[j+1] = Euler flow of snapshots[j]
};

inline LorenzData make_lorenz_data(const LorenzConfig& cfg, std::uint64_t seed) {
  Rng rng = make_rng(seed, "lorenz/data");
  LorenzData d;
  d.initial = sample_gaussian(cfg.law, rng);
  d.snapshots.push_back(gaussian_sample(cfg.particles, d.initial, rng).points());
  const FlowConfig flow(cfg.dt, cfg.substep);
  const LorenzParams p = cfg.params;
  for (std::size_t j = 0; j < cfg.snapshots; ++j)
    d.snapshots.push_back(euler_flow_batch([&](const Mat& x) { return lorenz_field_batch(x, p); }, d.snapshots.back(), flow));
  return d;
}

struct LorenzEval {
  Mat x;           // evaluation points drawn from the mixture of rho_0..rho_{m-1}
  Mat v_true;
  Mat v_model;
  Mat f_true;
  Mat f_model;
  double mse_field() const { return (v_model - v_true).squaredNorm() / v_true.squaredNorm(); }
  double mse_map() const { return (f_model - f_true).squaredNorm() / f_true.squaredNorm(); }
};

// Points of the uniform mixture of rho_0..rho_{m-1} and their exact images.
inline void lorenz_eval_points(const LorenzData& data, std::size_t limit, std::uint64_t seed, Mat& x, Mat& fx) {
  const std::size_t m = data.snapshots.size() - 1;
  const auto n = data.snapshots.front().rows();
  std::vector<std::pair<std::size_t, Eigen::Index>> picks;
  for (std::size_t j = 0; j < m; ++j)
    for (Eigen::Index i = 0; i < n; ++i) picks.emplace_back(j, i);
  if (limit > 0 && limit < picks.size()) {
    Rng rng = make_rng(seed, "lorenz/eval");
    std::vector<std::pair<std::size_t, Eigen::Index>> chosen;
    std::sample(picks.begin(), picks.end(), std::back_inserter(chosen), limit, rng);
    picks = std::move(chosen);
  }
  x.resize(static_cast<Eigen::Index>(picks.size()), 3);
  fx.resize(x.rows(), 3);
  for (std::size_t r = 0; r < picks.size(); ++r) {
    const auto [j, i] = picks[r];
    x.row(static_cast<Eigen::Index>(r)) = data.snapshots[j].row(i);
    fx.row(static_cast<Eigen::Index>(r)) = data.snapshots[j + 1].row(i);
  }
}

// sum_j D(model_flow_# rho_j, rho_{j+1}) on independent minibatches.
template <class FlowMap>
double lorenz_objective(FlowMap&& flow, const std::vector<Mat>& snapshots, std::size_t batch, Rng& rng) {
  double total = 0.0;
  const auto n = snapshots.front().rows();
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  const auto b = static_cast<Eigen::Index>(batch);
  for (std::size_t j = 0; j + 1 < snapshots.size(); ++j) {
    Mat a(b, 3), t(b, 3);
    for (Eigen::Index i = 0; i < b; ++i) a.row(i) = snapshots[j].row(pick(rng));
    for (Eigen::Index i = 0; i < b; ++i) t.row(i) = snapshots[j + 1].row(pick(rng));
    total += mmd_loss_grad(flow(a), t).value;
  }
  return total;
}

struct LorenzResult {
  TrialSummary summary;
  std::vector<LossPoint> loss_curve;
  Mlp model;
  UnitCubeMap rescale;
  LorenzData data;
  LorenzEval eval;
};

struct LorenzOptions {
  bool ground_truth = false;
};

inline LorenzResult recover_lorenz(const LorenzConfig& cfg, std::uint64_t seed, const LorenzOptions& opt = {}) {
  cfg.validate();
  Stopwatch clock;
  LorenzResult r;
  r.summary.experiment = ExperimentKind::Lorenz;
  r.summary.seed = seed;
  r.data = make_lorenz_data(cfg, seed);
  r.rescale = UnitCubeMap::fit(r.data.snapshots);
  const FlowConfig flow(cfg.dt, cfg.substep);
  const LorenzParams p = cfg.params;
  auto true_field = [p](const Mat& x) { return lorenz_field_batch(x, p); };

  Rng init_rng = make_rng(seed, "lorenz/init");
  std::vector<std::size_t> sizes = {3};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(3);
  r.model = Mlp::glorot(sizes, InputFeatures::Identity, init_rng);
  Rng batch_rng = make_rng(seed, "lorenz/batches");
  LossRecorder recorder(cfg.log_every);

  lorenz_eval_points(r.data, cfg.eval_samples, seed, r.eval.x, r.eval.f_true);
  r.eval.v_true = true_field(r.eval.x);

  if (opt.ground_truth) {
    const double loss = lorenz_objective([&](const Mat& x) { return euler_flow_batch(true_field, x, flow); },
                                         r.data.snapshots, cfg.batch, batch_rng);
    recorder.record(0, loss, 1);
    r.eval.v_model = true_field(r.eval.x);
    r.eval.f_model = euler_flow_batch(true_field, r.eval.x, flow);
  } else {
    std::vector<Mat> unit;
    for (const auto& s : r.data.snapshots) unit.push_back(r.rescale.to_unit(s));
    const std::size_t m = cfg.snapshots;
    const auto b = static_cast<Eigen::Index>(cfg.batch);
    const auto n = unit.front().rows();
    const std::size_t steps = flow.steps();
    const double h = flow.substep;
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    AdamState adam(r.model.num_parameters(), cfg.learning_rate);
    std::vector<MlpCache> caches(steps);
    Mat U(static_cast<Eigen::Index>(m) * b, 3), T(U.rows(), 3), lambda(U.rows(), 3);
    Vec grad(static_cast<Eigen::Index>(r.model.num_parameters()));

    for (std::size_t it = 0; it < cfg.iterations; ++it) {
      for (std::size_t j = 0; j < m; ++j) {
        const auto off = static_cast<Eigen::Index>(j) * b;
        for (Eigen::Index i = 0; i < b; ++i) U.row(off + i) = unit[j].row(pick(batch_rng));
        for (Eigen::Index i = 0; i < b; ++i) T.row(off + i) = unit[j + 1].row(pick(batch_rng));
      }
      for (std::size_t k = 0; k < steps; ++k) U += h * mlp_forward(r.model, U, caches[k]);
      if (!U.allFinite()) throw NumericError("recover_lorenz: non-finite flow at iteration " + std::to_string(it), static_cast<long>(it));
      double loss = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        const auto off = static_cast<Eigen::Index>(j) * b;
        const auto g = mmd_loss_grad(U.middleRows(off, b), T.middleRows(off, b));
        loss += g.value;
        lambda.middleRows(off, b) = g.gradient;
      }
      recorder.record(it, loss, cfg.iterations);
      grad.setZero();
      for (std::size_t k = steps; k-- > 0;) {
        const auto g = mlp_backward(r.model, caches[k], h * lambda);
        grad += g.params;
        lambda += g.input;
      }
      adam_step(adam, r.model.parameters(), grad);
    }

    const Mat u = r.rescale.to_unit(r.eval.x);
    r.eval.v_model = r.rescale.velocity_from_unit(mlp_forward(r.model, u));
    r.eval.f_model = r.rescale.from_unit(euler_flow_batch([&](const Mat& y) { return mlp_forward(r.model, y); }, u, flow));
  }

  r.loss_curve = recorder.points();
  r.summary.final_loss = recorder.final_loss();
  r.summary.mse_map = r.eval.mse_map();
  r.summary.mse_field = r.eval.mse_field();
  r.summary.iterations = opt.ground_truth ? 0 : cfg.iterations;
  r.summary.wall_time = clock.seconds();
  return r;
}

}  // namespace tmvr
