#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "tmvr/core.hpp"

namespace tmvr {

// Silverman's rule of thumb: 0.9 * min(sd, IQR / 1.34) * n^(-1/5).
inline double silverman_bandwidth(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n < 2) throw std::invalid_argument("silverman_bandwidth: need at least two samples");
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / static_cast<double>(n - 1));

  std::vector<double> sorted(xs.begin(), xs.end());
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, n - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  };
  const double iqr = quantile(0.75) - quantile(0.25);
  double spread = sd;
  if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
  return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

// Gaussian KDE evaluated on `grid`. With `period` > 0 the kernel is wrapped
// (images at +-period are summed), for samples on a circle.
inline std::vector<double> kde_1d(std::span<const double> samples, std::span<const double> grid,
                                  double bandwidth, double period) {
  if (samples.empty()) throw std::invalid_argument("kde_1d: no samples");
  if (!(bandwidth > 0.0)) throw std::invalid_argument("kde_1d: bandwidth must be > 0");
  const double norm = 1.0 / (static_cast<double>(samples.size()) * bandwidth * std::sqrt(kTwoPi));
  const int images = period > 0.0 ? 1 : 0;
  std::vector<double> out(grid.size(), 0.0);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double acc = 0.0;
    for (double s : samples) {
      for (int k = -images; k <= images; ++k) {
        const double u = (grid[g] - s - k * period) / bandwidth;
        acc += std::exp(-0.5 * u * u);
      }
    }
    out[g] = acc * norm;
  }
  return out;
}

// Silverman bandwidth. On a circle the spread is measured about the circular
// mean so that a mode straddling the cut does not inflate it.
inline std::vector<double> kde_1d_silverman(std::span<const double> samples, std::span<const double> grid,
                                           double period = 0.0) {
  if (period <= 0.0) return kde_1d(samples, grid, silverman_bandwidth(samples), period);
  const double scale = kTwoPi / period;
  double s = 0.0, c = 0.0;
  for (double x : samples) {
    s += std::sin(scale * x);
    c += std::cos(scale * x);
  }
  const double center = std::atan2(s, c) / scale;
  std::vector<double> centered;
  centered.reserve(samples.size());
  for (double x : samples) {
    double d = std::fmod(x - center + 0.5 * period, period);
    if (d < 0.0) d += period;
    centered.push_back(d - 0.5 * period);
  }
  return kde_1d(samples, grid, silverman_bandwidth(centered), period);
}

}  // namespace tmvr
