#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tmvr/core.hpp"

namespace tmvr {

enum class ExperimentKind { Map1d, Lorenz, Divfield };

inline const char* to_string(ExperimentKind e) {
  switch (e) {
    case ExperimentKind::Map1d: return "map1d";
    case ExperimentKind::Lorenz: return "lorenz";
    case ExperimentKind::Divfield: return "divfield";
  }
  return "unknown";
}

struct TrialSummary {
  ExperimentKind experiment = ExperimentKind::Map1d;
  std::uint64_t seed = 0;
  double final_loss = 0.0;
  std::optional<double> mse_map;
  std::optional<double> mse_field;
  std::size_t iterations = 0;
  double wall_time = 0.0;
  std::string config_digest;
  // Empty on success; otherwise the reason the trial was aborted.
  std::string error;
  bool ok() const { return error.empty(); }
};

struct LossPoint {
  std::size_t iteration = 0;
  double loss = 0.0;
  double best_loss = 0.0;
};

// Records the loss every `every` iterations (and at the last one) together
// with the best recorded value so far.
class LossRecorder {
 public:
  explicit LossRecorder(std::size_t every = 100) : every_(every == 0 ? 1 : every) {}

  void record(std::size_t iteration, double loss, std::size_t total) {
    if (!std::isfinite(loss))
      throw NumericError("non-finite loss at iteration " + std::to_string(iteration),
                         static_cast<long>(iteration));
    window_sum_ += loss;
    ++window_count_;
    if (iteration % every_ == 0 || iteration + 1 == total) {
      best_ = std::min(best_, loss);
      points_.push_back({iteration, loss, best_});
      last_window_mean_ = window_sum_ / static_cast<double>(window_count_);
      window_sum_ = 0.0;
      window_count_ = 0;
    }
  }

  const std::vector<LossPoint>& points() const { return points_; }
  // Mean loss over the last recording window.
  double final_loss() const { return last_window_mean_; }

 private:
  std::size_t every_;
  std::vector<LossPoint> points_;
  double best_ = std::numeric_limits<double>::infinity();
  double window_sum_ = 0.0;
  std::size_t window_count_ = 0;
  double last_window_mean_ = 0.0;
};

struct Aggregate {
  std::size_t count = 0;
  double min = 0.0;
  double max = 0.0;
  double median = 0.0;
  double mean = 0.0;
  double stddev = 0.0;
};

inline std::optional<Aggregate> aggregate(std::vector<double> xs) {
  if (xs.empty()) return std::nullopt;
  std::sort(xs.begin(), xs.end());
  Aggregate a;
  a.count = xs.size();
  a.min = xs.front();
  a.max = xs.back();
  const std::size_t n = xs.size();
  a.median = n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
  for (double x : xs) a.mean += x;
  a.mean /= static_cast<double>(n);
  if (n > 1) {
    for (double x : xs) a.stddev += (x - a.mean) * (x - a.mean);
    a.stddev = std::sqrt(a.stddev / static_cast<double>(n - 1));
  }
  return a;
}

inline std::optional<Aggregate> aggregate_map(const std::vector<TrialSummary>& trials) {
  std::vector<double> xs;
  for (const auto& t : trials)
    if (t.ok() && t.mse_map) xs.push_back(*t.mse_map);
  return aggregate(std::move(xs));
}

inline std::optional<Aggregate> aggregate_field(const std::vector<TrialSummary>& trials) {
  std::vector<double> xs;
  for (const auto& t : trials)
    if (t.ok() && t.mse_field) xs.push_back(*t.mse_field);
  return aggregate(std::move(xs));
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace tmvr
