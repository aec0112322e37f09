#pragma once

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tmvr/config.hpp"
#include "tmvr/embedding.hpp"
#include "tmvr/experiments/runner.hpp"
#include "tmvr/io.hpp"
#include "tmvr/metrics.hpp"

namespace tmvr {

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitNumeric = 2 };

namespace cli_detail {

// Flags shared by the training subcommands.
struct CommonFlags {
  std::string config;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  std::string out;
  std::size_t trials = 1;
  std::size_t workers = 1;
  std::size_t iterations = 0;
  bool ground_truth = false;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* out_opt = nullptr;
  CLI::Option* trials_opt = nullptr;
  CLI::Option* workers_opt = nullptr;
  CLI::Option* iterations_opt = nullptr;
};

inline void add_config_flags(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--config", f.config, "Config file (sectioned key = value)");
  sub->add_option("--set", f.sets, "Override a config key, e.g. --set lorenz.batch=100 (repeatable)");
  f.seed_opt = sub->add_option("--seed", f.seed, "Root seed; trial k uses seed + k");
}

inline void add_training_flags(CLI::App* sub, CommonFlags& f) {
  add_config_flags(sub, f);
  f.out_opt = sub->add_option("--out", f.out, "Output directory");
  f.trials_opt = sub->add_option("--trials", f.trials, "Number of trials");
  f.workers_opt = sub->add_option("--workers", f.workers, "Trials run concurrently (1 keeps runs bit-reproducible)");
  f.iterations_opt = sub->add_option("--iterations", f.iterations, "Training iterations per trial");
  sub->add_flag("--ground-truth", f.ground_truth, "Evaluate the exact map/field instead of training a network");
}

// Defaults < config file < --set < dedicated flags.
inline RunConfig resolve(const CommonFlags& f) {
  RunConfig cfg;
  if (!f.config.empty()) cfg = parse_config_file(f.config);
  for (const auto& s : f.sets) apply_override(cfg, s);
  if (f.seed_opt && f.seed_opt->count()) cfg.seed = f.seed;
  if (f.out_opt && f.out_opt->count()) cfg.out = f.out;
  if (f.trials_opt && f.trials_opt->count()) cfg.trials = f.trials;
  if (f.workers_opt && f.workers_opt->count()) cfg.workers = f.workers;
  return cfg;
}

inline fs::path prepare_out_dir(const RunConfig& cfg) {
  const fs::path dir(cfg.out);
  fs::create_directories(dir);
  write_text_file(dir / "config.resolved", render_config(cfg));
  return dir;
}

inline int batch_exit_code(const std::vector<TrialSummary>& trials) {
  if (any_numeric_abort(trials)) return kExitNumeric;
  for (const auto& t : trials)
    if (!t.ok()) return kExitValidation;
  return kExitOk;
}

inline void report_trials(std::ostream& err, const std::vector<TrialSummary>& trials) {
  for (const auto& t : trials) {
    err << to_string(t.experiment) << " seed " << t.seed << ": ";
    if (!t.ok()) {
      err << "FAILED " << t.error << "\n";
      continue;
    }
    err << "loss " << format_double(t.final_loss);
    if (t.mse_map) err << ", mse_map " << format_double(*t.mse_map);
    if (t.mse_field) err << ", mse_field " << format_double(*t.mse_field);
    err << ", " << format_double(std::round(t.wall_time * 100) / 100) << " s\n";
  }
}

struct EmbeddingFlags {
  std::string fixture = "circle";
  std::size_t points = 0;
  double sep = 0.0;
  double sv = 0.0;
  std::size_t densities = 0;
  std::size_t delay = 3;
  double rotation = 1.0;
  std::string out;
  CLI::Option* points_opt = nullptr;
  CLI::Option* sep_opt = nullptr;
  CLI::Option* sv_opt = nullptr;
  CLI::Option* densities_opt = nullptr;
};

inline Json embedding_json(const std::string& fixture, const EmbeddingReport& r) {
  Json j;
  j["fixture"] = fixture;
  j["min_separation_ratio"] = r.min_separation_ratio;
  j["min_singular_value"] = r.min_singular_value;
  j["injective_verdict"] = r.injective_verdict;
  j["immersion_verdict"] = r.immersion_verdict;
  j["n_test_points"] = r.n_test_points;
  if (fixture == "quotient" || fixture == "delay") j["note"] = "evidence, not certificate";
  return j;
}

inline EmbeddingReport run_embedding_fixture(const EmbeddingFlags& e, const RunConfig& cfg) {
  const double sep = cfg.embedding.separation, sv = cfg.embedding.singular_value;
  const std::size_t n = cfg.embedding_points;
  auto one = [](double x) { return Vec::Constant(1, x); };
  if (e.fixture == "circle")
    return check_embedding([](const Vec& x) { return Vec(Eigen::Vector2d(std::sin(x(0)), std::cos(x(0)))); },
                           circle_grid(n), sep, sv, CircleDistance{});
  if (e.fixture == "sine")
    return check_embedding([&](const Vec& x) { return one(std::sin(x(0))); }, circle_grid(n), sep, sv, CircleDistance{});
  if (e.fixture == "cubic")
    return check_embedding([&](const Vec& x) { return one(x(0) * x(0) * x(0)); }, cube_grid(n, 1), sep, sv);
  if (e.fixture == "quotient") {
    Rng rng = make_rng(cfg.seed, "embedding/quotient");
    const auto family = sample_von_mises_family(cfg.embedding_densities, cfg.map1d.law, rng);
    return quotient_embedding_check(family, circle_grid(n), cfg.embedding, CircleDistance{});
  }
  if (e.fixture == "delay") {
    if (e.delay < 1) throw std::invalid_argument("--delay must be >= 1");
    const double c = e.rotation;
    auto y = [](const Vec& x) { return std::sin(x(0)); };
    auto h = [c](const Vec& x) { return Vec::Constant(1, wrap_angle(x(0) + c)); };
    return check_embedding([&](const Vec& x) { return delay_map(y, h, e.delay, x); }, circle_grid(n), sep, sv,
                           CircleDistance{});
  }
  throw std::invalid_argument("unknown fixture '" + e.fixture + "' (circle, sine, cubic, quotient, delay)");
}

struct MetricFlags {
  std::string a;
  std::string b;
  bool header = false;
  std::size_t minibatch = 0;
  std::uint64_t seed = 0;
};

inline Mat subsample_rows(const Mat& m, std::size_t n, Rng& rng) {
  if (n == 0 || n >= static_cast<std::size_t>(m.rows())) return m;
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(m.rows()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::vector<Eigen::Index> pick;
  std::sample(idx.begin(), idx.end(), std::back_inserter(pick), n, rng);
  Mat out(static_cast<Eigen::Index>(n), m.cols());
  for (std::size_t i = 0; i < n; ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(pick[i]);
  return out;
}

inline Json discrepancy_json(const DiscrepancyValue& v) {
  Json j;
  j["value"] = v.value;
  j["estimator"] = to_string(v.estimator);
  j["n_x"] = v.n_x;
  j["n_y"] = v.n_y;
  return j;
}

inline constexpr const char* kOverridesHelp = R"(Config keys (use --set section.key=value or a --config file):
  run:       seed, trials, workers, out
  map1d:     densities, batch, learning_rate, iterations, hidden, alpha_min, alpha_max,
             beta_min, beta_max, eval_points, log_every
  lorenz:    particles, snapshots, dt, substep, batch, learning_rate, iterations, hidden,
             sigma, rho, beta, center_min, center_max, init_sigma_min, init_sigma_max,
             eval_samples, marginal_samples, log_every
  divfield:  densities, batch, learning_rate, iterations, hidden, center_min, center_max,
             sigma_min, sigma_max, eval_grid, m_max, repeats, log_every
  embedding: sep_threshold, sv_threshold, points, densities
Exit codes: 0 success, 1 validation error, 2 numeric abort.)";

}  // namespace cli_detail

// Parses `args` (args[0] is the program name) and runs the subcommand.
inline int dispatch(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using namespace cli_detail;
  CLI::App app{"Recover transport maps and vector fields from families of densities"};
  app.footer(kOverridesHelp);
  app.require_subcommand(1);

  CommonFlags map_f, lorenz_f, div_f, sweep_f, emb_f;
  std::size_t map_densities = 0, map_batch = 0;
  std::size_t lz_particles = 0, lz_snapshots = 0, lz_batch = 0;
  std::size_t div_densities = 0, div_batch = 0;
  std::size_t sweep_m_max = 0, sweep_repeats = 0;

  auto* map_cmd = app.add_subcommand("recover-map", "Learn f: S^1 -> R^3 from von Mises pushforwards");
  add_training_flags(map_cmd, map_f);
  auto* map_dens = map_cmd->add_option("--densities", map_densities, "Number of densities m");
  auto* map_bat = map_cmd->add_option("--batch", map_batch, "Samples per density per step");

  auto* lz_cmd = app.add_subcommand("recover-lorenz", "Identify the Lorenz field from density snapshots");
  add_training_flags(lz_cmd, lorenz_f);
  auto* lz_part = lz_cmd->add_option("--particles", lz_particles, "Particles per snapshot N");
  auto* lz_snap = lz_cmd->add_option("--snapshots", lz_snapshots, "Snapshot pairs m");
  auto* lz_bat = lz_cmd->add_option("--batch", lz_batch, "Minibatch size per loss term");

  auto* div_cmd = app.add_subcommand("recover-divfield", "Recover a planar field from weighted divergences");
  add_training_flags(div_cmd, div_f);
  auto* div_dens = div_cmd->add_option("--densities", div_densities, "Number of densities m");
  auto* div_bat = div_cmd->add_option("--batch", div_batch, "Collocation points per step");

  auto* sweep_cmd = app.add_subcommand("sweep-divfield", "Divergence recovery error as a function of m");
  add_training_flags(sweep_cmd, sweep_f);
  auto* sw_mmax = sweep_cmd->add_option("--m-max", sweep_m_max, "Largest m (sweeps 1..m-max)");
  auto* sw_rep = sweep_cmd->add_option("--repeats", sweep_repeats, "Trials per m (same as --trials)");

  EmbeddingFlags emb;
  auto* emb_cmd = app.add_subcommand("check-embedding", "Numerical injectivity/immersion check on a fixture");
  add_config_flags(emb_cmd, emb_f);
  emb_cmd->add_option("--fixture", emb.fixture, "circle | sine | cubic | quotient | delay");
  emb.points_opt = emb_cmd->add_option("--points", emb.points, "Number of test points");
  emb.sep_opt = emb_cmd->add_option("--sep-threshold", emb.sep, "Injectivity threshold on the separation ratio");
  emb.sv_opt = emb_cmd->add_option("--sv-threshold", emb.sv, "Immersion threshold on the smallest singular value");
  emb.densities_opt = emb_cmd->add_option("--densities", emb.densities, "Family size for the quotient fixture");
  emb_cmd->add_option("--delay", emb.delay, "Delay length k for the delay fixture");
  emb_cmd->add_option("--rotation", emb.rotation, "Rotation angle of the delay fixture's map");
  emb_cmd->add_option("--out", emb.out, "Also write embedding.json into this directory");

  MetricFlags met;
  auto* met_cmd = app.add_subcommand("metric", "Energy MMD between two ensemble CSV files");
  met_cmd->add_option("a", met.a, "First ensemble CSV")->required();
  met_cmd->add_option("b", met.b, "Second ensemble CSV")->required();
  met_cmd->add_flag("--header", met.header, "Files start with a header line (x0,...,x{d-1})");
  met_cmd->add_option("--minibatch", met.minibatch, "Subsample this many rows from each file (0: use all)");
  met_cmd->add_option("--seed", met.seed, "Seed for --minibatch");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kExitOk;
    }
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitValidation;
  }

  try {
    if (map_cmd->parsed()) {
      RunConfig cfg = resolve(map_f);
      if (map_f.iterations_opt->count()) cfg.map1d.iterations = map_f.iterations;
      if (map_dens->count()) cfg.map1d.densities = map_densities;
      if (map_bat->count()) cfg.map1d.batch = map_batch;
      cfg.validate();
      const fs::path dir = prepare_out_dir(cfg);
      const std::string digest = config_digest(cfg);
      const Map1dOptions opt{map_f.ground_truth};
      const auto trials = run_trials(ExperimentKind::Map1d, cfg.trials, cfg.seed, cfg.workers,
                                     [&](std::size_t k, std::uint64_t seed) {
                                       auto r = recover_map_1d(cfg.map1d, seed, opt);
                                       r.summary.config_digest = digest;
                                       write_map1d_artifacts(dir / trial_dir_name(k), r);
                                       return r.summary;
                                     });
      write_batch_outputs(dir, ExperimentKind::Map1d, cfg.seed, digest, trials);
      report_trials(err, trials);
      out << summary_json(ExperimentKind::Map1d, cfg.seed, digest, trials)["aggregate"].dump(2) << "\n";
      return batch_exit_code(trials);
    }

    if (lz_cmd->parsed()) {
      RunConfig cfg = resolve(lorenz_f);
      if (lorenz_f.iterations_opt->count()) cfg.lorenz.iterations = lorenz_f.iterations;
      if (lz_part->count()) cfg.lorenz.particles = lz_particles;
      if (lz_snap->count()) cfg.lorenz.snapshots = lz_snapshots;
      if (lz_bat->count()) cfg.lorenz.batch = lz_batch;
      cfg.validate();
      const fs::path dir = prepare_out_dir(cfg);
      const std::string digest = config_digest(cfg);
      const LorenzOptions opt{lorenz_f.ground_truth};
      const auto trials = run_trials(ExperimentKind::Lorenz, cfg.trials, cfg.seed, cfg.workers,
                                     [&](std::size_t k, std::uint64_t seed) {
                                       auto r = recover_lorenz(cfg.lorenz, seed, opt);
                                       r.summary.config_digest = digest;
                                       write_lorenz_artifacts(dir / trial_dir_name(k), r, cfg.lorenz);
                                       return r.summary;
                                     });
      write_batch_outputs(dir, ExperimentKind::Lorenz, cfg.seed, digest, trials);
      report_trials(err, trials);
      out << summary_json(ExperimentKind::Lorenz, cfg.seed, digest, trials)["aggregate"].dump(2) << "\n";
      return batch_exit_code(trials);
    }

    if (div_cmd->parsed()) {
      RunConfig cfg = resolve(div_f);
      if (div_f.iterations_opt->count()) cfg.divfield.iterations = div_f.iterations;
      if (div_dens->count()) cfg.divfield.densities = div_densities;
      if (div_bat->count()) cfg.divfield.batch = div_batch;
      cfg.validate();
      const fs::path dir = prepare_out_dir(cfg);
      const std::string digest = config_digest(cfg);
      const DivfieldOptions opt = shared_family(cfg.divfield, cfg.seed, div_f.ground_truth);
      const auto trials = run_trials(ExperimentKind::Divfield, cfg.trials, cfg.seed, cfg.workers,
                                     [&](std::size_t k, std::uint64_t seed) {
                                       auto r = recover_divfield(cfg.divfield, seed, opt);
                                       r.summary.config_digest = digest;
                                       write_divfield_artifacts(dir / trial_dir_name(k), r);
                                       return r.summary;
                                     });
      write_batch_outputs(dir, ExperimentKind::Divfield, cfg.seed, digest, trials);
      report_trials(err, trials);
      out << summary_json(ExperimentKind::Divfield, cfg.seed, digest, trials)["aggregate"].dump(2) << "\n";
      return batch_exit_code(trials);
    }

    if (sweep_cmd->parsed()) {
      RunConfig cfg = resolve(sweep_f);
      if (sweep_f.iterations_opt->count()) cfg.divfield.iterations = sweep_f.iterations;
      if (sweep_f.trials_opt->count()) cfg.divfield.repeats = sweep_f.trials;
      if (sw_rep->count()) cfg.divfield.repeats = sweep_repeats;
      if (sw_mmax->count()) cfg.divfield.m_max = sweep_m_max;
      cfg.validate();
      const fs::path dir = prepare_out_dir(cfg);
      std::vector<SweepRow> rows;
      Json summary;
      summary["experiment"] = "divfield-sweep";
      summary["base_seed"] = cfg.seed;
      summary["config_digest"] = config_digest(cfg);
      summary["sweep"] = Json::array();
      int code = kExitOk;
      for (std::size_t m = 1; m <= cfg.divfield.m_max; ++m) {
        RunConfig cm = cfg;
        cm.divfield.densities = m;
        const std::string digest = config_digest(cm);
        const fs::path mdir = dir / ("m_" + std::to_string(m));
        const DivfieldOptions opt = shared_family(cm.divfield, cfg.seed, sweep_f.ground_truth);
        const auto trials = run_trials(ExperimentKind::Divfield, cfg.divfield.repeats, cfg.seed, cfg.workers,
                                       [&](std::size_t k, std::uint64_t seed) {
                                         auto r = recover_divfield(cm.divfield, seed, opt);
                                         r.summary.config_digest = digest;
                                         write_divfield_artifacts(mdir / trial_dir_name(k), r);
                                         return r.summary;
                                       });
        write_batch_outputs(mdir, ExperimentKind::Divfield, cfg.seed, digest, trials);
        report_trials(err, trials);
        rows.push_back({m, trials, aggregate_field(trials)});
        Json entry;
        entry["m"] = m;
        entry["config_digest"] = digest;
        entry["relative_error"] = to_json(rows.back().error);
        summary["sweep"].push_back(entry);
        code = std::max(code, batch_exit_code(trials));
      }
      write_text_file(dir / "sweep.csv", sweep_csv(rows));
      write_text_file(dir / "summary.json", summary.dump(2) + "\n");
      out << sweep_csv(rows);
      return code;
    }

    if (emb_cmd->parsed()) {
      RunConfig cfg = resolve(emb_f);
      if (emb.points_opt->count()) cfg.embedding_points = emb.points;
      if (emb.sep_opt->count()) cfg.embedding.separation = emb.sep;
      if (emb.sv_opt->count()) cfg.embedding.singular_value = emb.sv;
      if (emb.densities_opt->count()) cfg.embedding_densities = emb.densities;
      cfg.validate();
      const Json j = embedding_json(emb.fixture, run_embedding_fixture(emb, cfg));
      if (!emb.out.empty()) {
        fs::create_directories(emb.out);
        write_text_file(fs::path(emb.out) / "embedding.json", j.dump(2) + "\n");
      }
      out << j.dump(2) << "\n";
      return kExitOk;
    }

    if (met_cmd->parsed()) {
      const ParticleEnsemble a = read_ensemble_csv(met.a, met.header);
      const ParticleEnsemble b = read_ensemble_csv(met.b, met.header);
      if (a.dimension() != b.dimension())
        throw std::invalid_argument("ensembles have different dimensions (" + std::to_string(a.dimension()) + " vs " +
                                    std::to_string(b.dimension()) + ")");
      DiscrepancyValue v;
      if (met.minibatch > 0) {
        Rng rng = make_rng(met.seed, "metric/minibatch");
        const Mat sa = subsample_rows(a.points(), met.minibatch, rng);
        const Mat sb = subsample_rows(b.points(), met.minibatch, rng);
        v = energy_mmd(sa, sb);
        v.estimator = Estimator::Minibatch;
      } else {
        v = energy_mmd(a, b);
      }
      out << discrepancy_json(v).dump(2) << "\n";
      return kExitOk;
    }
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  err << app.help();
  return kExitValidation;
}

}  // namespace tmvr
