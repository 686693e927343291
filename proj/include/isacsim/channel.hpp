#pragma once

#include <Eigen/Dense>
#include <complex>
#include <random>

namespace isacsim::channel {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s

double db_to_linear(double db);
double dbm_to_watt(double dbm);

// Mono-static ISAC base-station front end: half-wavelength ULA, OFDM resource
// grid and link-budget constants. Power-like fields keep their human units
// and are converted on access.
struct RadioConfig {
  int antennas = 128;                    // ULA elements K
  int subcarriers = 2500;                // M
  double subcarrier_spacing_hz = 120e3;  // subcarrier spacing
  double carrier_freq_hz = 60e9;         // f_c
  double tx_power_dbm = 20.0;            // P
  double noise_psd_dbm_hz = -174.0;      // noise power spectral density
  double rcs_m2 = 0.1;                   // target radar cross-section
  double rician_k_db = 8.0;              // Rician K-factor
  int cc_repetitions = 50;               // L retransmissions per command
  int cc_symbols = 500;                  // QPSK symbols per command (1 kbit)
  int beam_grid = 500;                   // synthesis grid points over [-pi/2, pi/2]
  double confidence_factor = 2.576;      // B (99% two-sided Gaussian)
  double altitude_m = 10.0;              // UAV flight altitude H

  double wavelength() const { return kSpeedOfLight / carrier_freq_hz; }
  double element_spacing() const { return 0.5 * wavelength(); }
  double tx_power_w() const { return dbm_to_watt(tx_power_dbm); }
  double noise_psd_w_hz() const { return dbm_to_watt(noise_psd_dbm_hz); }
  double rician_k_linear() const { return db_to_linear(rician_k_db); }
  double noise_power_w() const { return subcarriers * subcarrier_spacing_hz * noise_psd_w_hz(); }

  void validate() const;  // throws std::invalid_argument naming the offending field
};

using Eigen::Matrix2d;
using Eigen::Vector2d;
using Eigen::VectorXcd;

// a(theta)_k = exp(-j 2 pi k D sin(theta) / lambda), k = 0..K-1.
VectorXcd steering_vector(double theta, const RadioConfig& cfg);

struct Beamformer {
  VectorXcd weights;       // zero vector when the synthesis window is empty
  double window_lo = 0.0;  // clamped window actually used (rad)
  double window_hi = 0.0;
};

// Least-squares synthesis of a boxcar amplitude pattern on a fixed angular
// grid. The fit matrix depends only on the config, so a column-pivoted QR
// factorization is computed once and reused by every synthesis call; pivoting
// guards grid-induced rank deficiency without biasing the fit.
class BeamSynthesizer {
 public:
  explicit BeamSynthesizer(const RadioConfig& cfg);

  // Window is [theta_hat - B sigma_theta, theta_hat + B sigma_theta] clamped
  // to [-pi/2, pi/2]. A non-empty window that straddles no grid point snaps
  // to the nearest grid point; an empty window yields zero weights.
  Beamformer synthesize(double theta_hat, double sigma_theta) const;

  Eigen::VectorXd desired_pattern(double theta_hat, double sigma_theta) const;
  const Eigen::VectorXd& grid() const { return grid_; }

 private:
  RadioConfig cfg_;
  Eigen::VectorXd grid_;
  Eigen::MatrixXcd steering_grid_;  // K x N_theta
  Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> lsq_;  // QR of A^T
};

// One-shot wrapper around BeamSynthesizer.
Beamformer synthesize_beamformer(double theta_hat, double sigma_theta, const RadioConfig& cfg);

// |a(theta)^T f|^2
double tx_gain(double theta, const VectorXcd& f, const RadioConfig& cfg);

// Echo SNR of the sensing return. r3d is the 3-D BS-UAV distance including
// altitude; theta is the true azimuth.
double sensing_snr(double r3d, double theta, const VectorXcd& f, const RadioConfig& cfg);

struct DetectionVariances {
  double angle_var;  // rad^2
  double range_var;  // m^2
};

// Estimation-error model for the echo. Throws std::domain_error for
// snr <= 0 or near endfire (cos^2 theta < 1e-12).
DetectionVariances detection_variances(double snr, double theta, const RadioConfig& cfg);

struct Measurement {
  double range;      // r_hat, horizontal (m)
  double angle;      // theta_hat (rad)
  double range_var;  // m^2
  double angle_var;  // rad^2
  Vector2d pos;      // [r_hat cos(theta_hat), r_hat sin(theta_hat)]
  Matrix2d cov;      // J diag(range_var, angle_var) J^T at the detected values
};

// Polar-to-Cartesian conversion with first-order error propagation.
Measurement measurement_from_polar(double r_hat, double theta_hat, double range_var,
                                   double angle_var);

// Noisy detection of the true horizontal position; error scales follow the
// echo SNR at the true geometry under beamformer f.
Measurement sample_measurement(const Vector2d& p_true, const RadioConfig& cfg,
                               const VectorXcd& f, std::mt19937_64& rng);

struct CommLink {
  double snr;        // linear
  double latency_s;  // +inf when snr == 0
};

// Rician downlink carrying one command; L independent fading draws.
CommLink comm_snr_latency(double r3d, double theta, const VectorXcd& f, const RadioConfig& cfg,
                          std::mt19937_64& rng);

double latency_from_snr(double snr, const RadioConfig& cfg);

}  // namespace isacsim::channel
