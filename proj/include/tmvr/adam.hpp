#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>

#include "tmvr/core.hpp"

namespace tmvr {

struct AdamState {
  std::size_t step = 0;
  Vec first_moment;
  Vec second_moment;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  AdamState(std::size_t n_params, double learning_rate)
      : first_moment(Vec::Zero(static_cast<Eigen::Index>(n_params))),
        second_moment(Vec::Zero(static_cast<Eigen::Index>(n_params))),
        lr(learning_rate) {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("AdamState: learning rate must be > 0");
  }
};

// Bias-corrected Adam update of `params` in place.
inline void adam_step(AdamState& s, Vec& params, const Vec& grads) {
  if (params.size() != grads.size() || params.size() != s.first_moment.size())
    throw std::invalid_argument("adam_step: parameter, gradient and state shapes differ");
  ++s.step;
  s.first_moment = s.beta1 * s.first_moment + (1.0 - s.beta1) * grads;
  s.second_moment = s.beta2 * s.second_moment + (1.0 - s.beta2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  params.array() -= s.lr * (s.first_moment.array() / c1) / ((s.second_moment.array() / c2).sqrt() + s.epsilon);
}

}  // namespace tmvr
