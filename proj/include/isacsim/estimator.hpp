#pragma once

#include <Eigen/Dense>

#include "isacsim/channel.hpp"

namespace isacsim::estimator {

using Eigen::Matrix2d;
using Eigen::Vector2d;

// Gaussian position belief tracked by the base station. last_vel is the
// commanded velocity assumed for the next prediction; it changes only when a
// command is actually delivered.
struct Estimate {
  Vector2d mean{0.0, 0.0};
  Matrix2d cov = Matrix2d::Zero();
  Vector2d last_vel{0.0, 0.0};
};

// Constant-velocity prediction over one slot; adds process noise to the
// covariance and keeps it symmetric.
Estimate predict(const Estimate& e, double dt, double process_noise_var);

// Covariance-weighted fusion of belief and measurement. Throws
// std::runtime_error when the innovation covariance is singular (both
// covariances zero).
Estimate fuse(const Estimate& prior, const channel::Measurement& m);

// Differential entropy up to the Gaussian constant: 0.5 ln det(cov).
// Returns -inf for det <= 0.
double entropy(const Matrix2d& cov);

}  // namespace isacsim::estimator
