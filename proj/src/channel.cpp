#include "isacsim/channel.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace isacsim::channel {

namespace {
constexpr double kPi = 3.14159265358979323846;

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}
}  // namespace

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

void RadioConfig::validate() const {
  require(antennas > 0, "radio.antennas must be > 0");
  require(subcarriers > 0, "radio.subcarriers must be > 0");
  require(subcarrier_spacing_hz > 0, "radio.subcarrier_spacing_hz must be > 0");
  require(carrier_freq_hz > 0, "radio.carrier_freq_hz must be > 0");
  require(rcs_m2 > 0, "radio.rcs_m2 must be > 0");
  require(cc_repetitions > 0, "radio.cc_repetitions must be > 0");
  require(cc_symbols > 0, "radio.cc_symbols must be > 0");
  require(beam_grid > 1, "radio.beam_grid must be > 1");
  require(confidence_factor > 0, "confidence_factor must be > 0");
  require(altitude_m >= 0, "radio.altitude_m must be >= 0");
}

VectorXcd steering_vector(double theta, const RadioConfig& cfg) {
  const int k = cfg.antennas;
  const double phase_step = -2.0 * kPi * cfg.element_spacing() * std::sin(theta) / cfg.wavelength();
  VectorXcd a(k);
  for (int i = 0; i < k; ++i) a(i) = std::polar(1.0, phase_step * i);
  return a;
}

BeamSynthesizer::BeamSynthesizer(const RadioConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int n = cfg_.beam_grid;
  grid_ = Eigen::VectorXd::LinSpaced(n, -kPi / 2.0, kPi / 2.0);
  steering_grid_.resize(cfg_.antennas, n);
  for (int u = 0; u < n; ++u) steering_grid_.col(u) = steering_vector(grid_(u), cfg_);
  // The fit minimizes |b - A^T f|^2 over f. Column-pivoted QR of A^T handles
  // rank-deficient grids (pivots below threshold are dropped) while keeping
  // the residual at the least-squares optimum.
  lsq_.compute(steering_grid_.transpose());
}

Eigen::VectorXd BeamSynthesizer::desired_pattern(double theta_hat, double sigma_theta) const {
  const int n = cfg_.beam_grid;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  const double half = cfg_.confidence_factor * sigma_theta;
  const double lo = std::max(theta_hat - half, -kPi / 2.0);
  const double hi = std::min(theta_hat + half, kPi / 2.0);
  if (lo > hi) return b;  // window entirely outside the field of view
  bool any = false;
  for (int u = 0; u < n; ++u) {
    if (grid_(u) >= lo && grid_(u) <= hi) {
      b(u) = cfg_.antennas;
      any = true;
    }
  }
  if (!any) {
    // Narrow window between grid points: snap to the nearest one.
    const double center = std::clamp(theta_hat, -kPi / 2.0, kPi / 2.0);
    int nearest = 0;
    double best = std::abs(grid_(0) - center);
    for (int u = 1; u < n; ++u) {
      const double d = std::abs(grid_(u) - center);
      if (d < best) {
        best = d;
        nearest = u;
      }
    }
    b(nearest) = cfg_.antennas;
  }
  return b;
}

Beamformer BeamSynthesizer::synthesize(double theta_hat, double sigma_theta) const {
  Beamformer out;
  const double half = cfg_.confidence_factor * sigma_theta;
  out.window_lo = std::max(theta_hat - half, -kPi / 2.0);
  out.window_hi = std::min(theta_hat + half, kPi / 2.0);
  const Eigen::VectorXd b = desired_pattern(theta_hat, sigma_theta);
  if (b.isZero(0.0)) {
    out.weights = VectorXcd::Zero(cfg_.antennas);
    return out;
  }
  out.weights = lsq_.solve(b.cast<std::complex<double>>().eval());
  return out;
}

Beamformer synthesize_beamformer(double theta_hat, double sigma_theta, const RadioConfig& cfg) {
  return BeamSynthesizer(cfg).synthesize(theta_hat, sigma_theta);
}

double tx_gain(double theta, const VectorXcd& f, const RadioConfig& cfg) {
  const std::complex<double> r = steering_vector(theta, cfg).transpose() * f;
  return std::norm(r);
}

double sensing_snr(double r3d, double theta, const VectorXcd& f, const RadioConfig& cfg) {
  if (r3d <= 0) throw std::domain_error("sensing_snr: range must be > 0");
  const double lambda = cfg.wavelength();
  const double xi2 = cfg.rcs_m2 * lambda * lambda /
                     (std::pow(4.0 * kPi, 3.0) * std::pow(r3d, 4.0));
  return cfg.antennas * cfg.tx_power_w() * xi2 * tx_gain(theta, f, cfg) / cfg.noise_power_w();
}

DetectionVariances detection_variances(double snr, double theta, const RadioConfig& cfg) {
  if (snr <= 0) throw std::domain_error("detection_variances: snr must be > 0");
  const double cos2 = std::cos(theta) * std::cos(theta);
  if (cos2 < 1e-12) throw std::domain_error("detection_variances: endfire geometry, cos^2(theta) ~ 0");
  const double k3 = std::pow(static_cast<double>(cfg.antennas), 3.0);
  DetectionVariances v;
  v.angle_var = 6.0 / (snr * kPi * kPi * cos2 * k3);
  const double range_res = kSpeedOfLight / (2.0 * cfg.subcarriers * cfg.subcarrier_spacing_hz);
  v.range_var = range_res * range_res / (16.0 * kPi * kPi * snr);
  return v;
}

Measurement measurement_from_polar(double r_hat, double theta_hat, double range_var,
                                   double angle_var) {
  Measurement m;
  m.range = r_hat;
  m.angle = theta_hat;
  m.range_var = range_var;
  m.angle_var = angle_var;
  const double c = std::cos(theta_hat);
  const double s = std::sin(theta_hat);
  m.pos = Vector2d(r_hat * c, r_hat * s);
  Matrix2d j;
  j << c, -r_hat * s, s, r_hat * c;
  m.cov = j * Eigen::DiagonalMatrix<double, 2>(range_var, angle_var) * j.transpose();
  return m;
}

Measurement sample_measurement(const Vector2d& p_true, const RadioConfig& cfg,
                               const VectorXcd& f, std::mt19937_64& rng) {
  const double r_h = p_true.norm();
  const double theta = std::atan2(p_true.y(), p_true.x());
  const double r3d = std::sqrt(r_h * r_h + cfg.altitude_m * cfg.altitude_m);
  const double snr = sensing_snr(r3d, theta, f, cfg);
  const DetectionVariances v = detection_variances(snr, theta, cfg);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double r_hat = r_h + std::sqrt(v.range_var) * gauss(rng);
  const double theta_hat = theta + std::sqrt(v.angle_var) * gauss(rng);
  return measurement_from_polar(r_hat, theta_hat, v.range_var, v.angle_var);
}

double latency_from_snr(double snr, const RadioConfig& cfg) {
  if (snr <= 0) return std::numeric_limits<double>::infinity();
  const double rate = cfg.subcarriers * cfg.subcarrier_spacing_hz * std::log2(1.0 + snr);
  return 2.0 * cfg.cc_repetitions * cfg.cc_symbols / rate;
}

CommLink comm_snr_latency(double r3d, double theta, const VectorXcd& f, const RadioConfig& cfg,
                          std::mt19937_64& rng) {
  if (r3d <= 0) throw std::domain_error("comm_snr_latency: range must be > 0");
  const double lambda = cfg.wavelength();
  const double beta = std::pow(lambda / (4.0 * kPi * r3d), 2.0);
  const double k = cfg.rician_k_linear();
  const double los_scale = std::sqrt(k / (k + 1.0));
  const double nlos_scale = std::sqrt(1.0 / (k + 1.0));
  const double entry_std = std::sqrt(0.5 / cfg.antennas);  // CN(0, 1/K) entries
  const VectorXcd a = steering_vector(theta, cfg);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double sum_gain = 0.0;
  for (int l = 0; l < cfg.cc_repetitions; ++l) {
    std::complex<double> proj = 0.0;
    for (int i = 0; i < cfg.antennas; ++i) {
      const std::complex<double> z(entry_std * gauss(rng), entry_std * gauss(rng));
      proj += (los_scale * a(i) + nlos_scale * z) * f(i);
    }
    sum_gain += std::norm(proj);
  }
  CommLink link;
  link.snr = cfg.tx_power_w() * beta / cfg.noise_power_w() * sum_gain;
  link.latency_s = latency_from_snr(link.snr, cfg);
  return link;
}

}  // namespace isacsim::channel
