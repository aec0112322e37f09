#pragma once

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "tmvr/experiments/divfield.hpp"
#include "tmvr/experiments/lorenz.hpp"
#include "tmvr/experiments/map1d.hpp"
#include "tmvr/experiments/trial.hpp"
#include "tmvr/io.hpp"

namespace tmvr {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

inline std::string trial_dir_name(std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "trial_%03zu", k);
  return buf;
}

// Runs trial k with seed base_seed + k on up to `workers` threads. A trial
// that throws is recorded with its error message; the others still run.
inline std::vector<TrialSummary> run_trials(ExperimentKind kind, std::size_t n_trials, std::uint64_t base_seed,
                                            std::size_t workers,
                                            const std::function<TrialSummary(std::size_t, std::uint64_t)>& trial) {
  if (n_trials < 1) throw std::invalid_argument("run_trials: n_trials must be >= 1");
  std::vector<TrialSummary> out(n_trials);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t k = next++; k < n_trials; k = next++) {
      const std::uint64_t seed = base_seed + k;
      Stopwatch clock;
      try {
        out[k] = trial(k, seed);
      } catch (const NumericError& e) {
        out[k] = TrialSummary{};
        out[k].error = std::string("numeric: ") + e.what();
      } catch (const std::exception& e) {
        out[k] = TrialSummary{};
        out[k].error = std::string("error: ") + e.what();
      }
      out[k].experiment = kind;
      out[k].seed = seed;
      if (!out[k].ok()) out[k].wall_time = clock.seconds();
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(workers, n_trials));
  if (n_threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  return out;
}

inline bool any_numeric_abort(const std::vector<TrialSummary>& trials) {
  for (const auto& t : trials)
    if (t.error.rfind("numeric:", 0) == 0) return true;
  return false;
}

// ---- serialization ----

inline Json optional_number(const std::optional<double>& x) { return x ? Json(*x) : Json(nullptr); }

inline Json to_json(const TrialSummary& t) {
  Json j;
  j["experiment"] = to_string(t.experiment);
  j["seed"] = t.seed;
  j["status"] = t.ok() ? "ok" : "failed";
  j["final_loss"] = t.ok() ? Json(t.final_loss) : Json(nullptr);
  j["mse_map"] = optional_number(t.mse_map);
  j["mse_field"] = optional_number(t.mse_field);
  j["iterations"] = t.iterations;
  j["config_digest"] = t.config_digest;
  if (!t.ok()) j["error"] = t.error;
  return j;
}

inline Json to_json(const std::optional<Aggregate>& a) {
  if (!a) return nullptr;
  Json j;
  j["count"] = a->count;
  j["min"] = a->min;
  j["max"] = a->max;
  j["median"] = a->median;
  j["mean"] = a->mean;
  j["std"] = a->stddev;
  return j;
}

// summary.json content. Wall-clock times are kept out so that reruns are
// byte-identical; they go to timing.csv.
inline Json summary_json(ExperimentKind kind, std::uint64_t base_seed, const std::string& digest,
                         const std::vector<TrialSummary>& trials) {
  Json j;
  j["experiment"] = to_string(kind);
  j["base_seed"] = base_seed;
  j["config_digest"] = digest;
  j["trials"] = Json::array();
  for (const auto& t : trials) j["trials"].push_back(to_json(t));
  j["aggregate"]["mse_map"] = to_json(aggregate_map(trials));
  j["aggregate"]["mse_field"] = to_json(aggregate_field(trials));
  return j;
}

inline std::string optional_cell(const std::optional<double>& x) { return x ? format_double(*x) : std::string{}; }

inline std::string summary_csv(const std::vector<TrialSummary>& trials) {
  std::string s = "experiment,seed,status,final_loss,mse_map,mse_field,iterations,config_digest\n";
  for (const auto& t : trials) {
    s += std::string(to_string(t.experiment)) + "," + std::to_string(t.seed) + "," + (t.ok() ? "ok" : "failed") + "," +
         (t.ok() ? format_double(t.final_loss) : std::string{}) + "," + optional_cell(t.mse_map) + "," +
         optional_cell(t.mse_field) + "," + std::to_string(t.iterations) + "," + t.config_digest + "\n";
  }
  return s;
}

inline std::string timing_csv(const std::vector<TrialSummary>& trials) {
  std::string s = "seed,wall_time\n";
  for (const auto& t : trials) s += std::to_string(t.seed) + "," + format_double(t.wall_time) + "\n";
  return s;
}

inline void write_batch_outputs(const fs::path& dir, ExperimentKind kind, std::uint64_t base_seed,
                                const std::string& digest, const std::vector<TrialSummary>& trials) {
  fs::create_directories(dir);
  write_text_file(dir / "summary.json", summary_json(kind, base_seed, digest, trials).dump(2) + "\n");
  write_text_file(dir / "summary.csv", summary_csv(trials));
  write_text_file(dir / "timing.csv", timing_csv(trials));
}

inline void write_loss_curve(const fs::path& path, const std::vector<LossPoint>& curve) {
  std::string s = "iteration,loss,best_loss\n";
  for (const auto& p : curve)
    s += std::to_string(p.iteration) + "," + format_double(p.loss) + "," + format_double(p.best_loss) + "\n";
  write_text_file(path, s);
}

inline std::string matrix_rows(std::initializer_list<const Mat*> blocks) {
  std::string s;
  const Eigen::Index n = (*blocks.begin())->rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    bool first = true;
    for (const Mat* b : blocks)
      for (Eigen::Index k = 0; k < b->cols(); ++k) {
        s += (first ? "" : ",") + format_double((*b)(i, k));
        first = false;
      }
    s += "\n";
  }
  return s;
}

inline void write_map1d_artifacts(const fs::path& dir, const Map1dResult& r) {
  fs::create_directories(dir);
  write_loss_curve(dir / "loss_curve.csv", r.loss_curve);
  write_text_file(dir / "eval_grid.csv", "x,f1,f2,f3,f1_model,f2_model,f3_model\n" +
                                             matrix_rows({&r.eval_x, &r.eval_true, &r.eval_model}));
  std::string d = "alpha,beta\n";
  for (const auto& m : r.densities) {
    const auto& v = std::get<VonMisesDensity>(m);
    d += format_double(v.concentration) + "," + format_double(v.center) + "\n";
  }
  write_text_file(dir / "densities.csv", d);
  save_checkpoint((dir / "model.timlp").string(), r.model);
}

inline void write_lorenz_artifacts(const fs::path& dir, const LorenzResult& r, const LorenzConfig& cfg) {
  fs::create_directories(dir);
  write_loss_curve(dir / "loss_curve.csv", r.loss_curve);
  // Pointwise field comparison on (at most) the first 5000 evaluation points.
  const Eigen::Index n = std::min<Eigen::Index>(r.eval.x.rows(), 5000);
  const Mat x = r.eval.x.topRows(n), vt = r.eval.v_true.topRows(n), vm = r.eval.v_model.topRows(n);
  Mat err(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double denom = vt.row(i).squaredNorm();
    err(i, 0) = denom > 0.0 ? (vm.row(i) - vt.row(i)).squaredNorm() / denom : 0.0;
  }
  write_text_file(dir / "eval_grid.csv", "x,y,z,vx,vy,vz,vx_model,vy_model,vz_model,rel_err\n" +
                                             matrix_rows({&x, &vt, &vm, &err}));
  std::string m = "snapshot,x,y,z\n";
  for (std::size_t j = 0; j < r.data.snapshots.size(); ++j) {
    const Mat& s = r.data.snapshots[j];
    const Eigen::Index take = std::min<Eigen::Index>(s.rows(), static_cast<Eigen::Index>(cfg.marginal_samples));
    for (Eigen::Index i = 0; i < take; ++i)
      m += std::to_string(j) + "," + format_double(s(i, 0)) + "," + format_double(s(i, 1)) + "," +
           format_double(s(i, 2)) + "\n";
  }
  write_text_file(dir / "marginals.csv", m);
  std::string a = "coordinate,lo,scale\n";
  for (Eigen::Index k = 0; k < r.rescale.lo.size(); ++k)
    a += std::to_string(k) + "," + format_double(r.rescale.lo(k)) + "," + format_double(r.rescale.scale(k)) + "\n";
  write_text_file(dir / "rescale.csv", a);
  save_checkpoint((dir / "model.timlp").string(), r.model);
}

inline void write_divfield_artifacts(const fs::path& dir, const DivfieldResult& r) {
  fs::create_directories(dir);
  write_loss_curve(dir / "loss_curve.csv", r.loss_curve);
  Mat err(r.eval.x.rows(), 1);
  for (Eigen::Index i = 0; i < err.rows(); ++i) err(i, 0) = (r.eval.v_model.row(i) - r.eval.v_true.row(i)).norm();
  write_text_file(dir / "eval_grid.csv", "x,y,u,v,u_model,v_model,abs_err\n" +
                                             matrix_rows({&r.eval.x, &r.eval.v_true, &r.eval.v_model, &err}));
  std::string d = "mean_x,mean_y,sigma\n";
  for (const auto& m : r.densities) {
    const auto& g = std::get<IsotropicGaussianDensity>(m);
    d += format_double(g.mean(0)) + "," + format_double(g.mean(1)) + "," + format_double(g.sigma) + "\n";
  }
  write_text_file(dir / "densities.csv", d);
  save_checkpoint((dir / "model.timlp").string(), r.model);
}

struct SweepRow {
  std::size_t m = 0;
  std::vector<TrialSummary> trials;
  std::optional<Aggregate> error;
};

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string s = "m,count,mean,std,median,min,max\n";
  for (const auto& r : rows) {
    s += std::to_string(r.m) + ",";
    if (r.error)
      s += std::to_string(r.error->count) + "," + format_double(r.error->mean) + "," + format_double(r.error->stddev) +
           "," + format_double(r.error->median) + "," + format_double(r.error->min) + "," + format_double(r.error->max);
    else
      s += "0,,,,,";
    s += "\n";
  }
  return s;
}

}  // namespace tmvr
