#include "isacsim/estimator.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace isacsim::estimator {

Estimate predict(const Estimate& e, double dt, double process_noise_var) {
  Estimate out = e;
  out.mean += e.last_vel * dt;
  out.cov += process_noise_var * Matrix2d::Identity();
  out.cov = (0.5 * (out.cov + out.cov.transpose())).eval();
  return out;
}

Estimate fuse(const Estimate& prior, const channel::Measurement& m) {
  const Matrix2d innovation = prior.cov + m.cov;
  if (std::abs(innovation.determinant()) < 1e-300)
    throw std::runtime_error("fuse: singular innovation covariance");
  const Matrix2d gain = prior.cov * innovation.inverse();
  Estimate out = prior;
  out.mean = prior.mean + gain * (m.pos - prior.mean);
  out.cov = (Matrix2d::Identity() - gain) * prior.cov;
  out.cov = (0.5 * (out.cov + out.cov.transpose())).eval();
  return out;
}

double entropy(const Matrix2d& cov) {
  const double det = cov.determinant();
  if (det <= 0.0) return -std::numeric_limits<double>::infinity();
  return 0.5 * std::log(det);
}

}  // namespace isacsim::estimator
