#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <random>

#include "isacsim/channel.hpp"

using namespace isacsim;
using Eigen::MatrixXcd;
using Eigen::Vector2d;
using Eigen::VectorXcd;
using Eigen::VectorXd;

namespace {

channel::RadioConfig default_radio() { return channel::RadioConfig{}; }

// Residual of the boxcar fit used by the synthesizer, for an arbitrary weight
// vector: ||b - A^T f||^2 over the synthesis grid.
double fit_residual(const channel::BeamSynthesizer& synth, const channel::RadioConfig& cfg,
                    const VectorXd& pattern, const VectorXcd& f) {
  const VectorXd& grid = synth.grid();
  double acc = 0.0;
  for (int i = 0; i < grid.size(); ++i) {
    const VectorXcd a = channel::steering_vector(grid[i], cfg);
    acc += std::norm(pattern[i] - (a.transpose() * f)(0));
  }
  return acc;
}

// Independent dense least-squares solve of the same fit (complex QR).
VectorXcd qr_oracle(const channel::BeamSynthesizer& synth, const channel::RadioConfig& cfg,
                    const VectorXd& pattern) {
  const VectorXd& grid = synth.grid();
  MatrixXcd at(grid.size(), cfg.antennas);
  for (int i = 0; i < grid.size(); ++i)
    at.row(i) = channel::steering_vector(grid[i], cfg).transpose();
  return at.colPivHouseholderQr().solve(pattern.cast<std::complex<double>>());
}

}  // namespace

TEST_CASE("steering vector closed-form values") {
  channel::RadioConfig cfg = default_radio();

  SUBCASE("zero angle gives the all-ones vector") {
    cfg.antennas = 8;
    const VectorXcd a = channel::steering_vector(0.0, cfg);
    REQUIRE(a.size() == 8);
    for (int k = 0; k < 8; ++k) {
      CHECK(a[k].real() == doctest::Approx(1.0).epsilon(1e-15));
      CHECK(a[k].imag() == doctest::Approx(0.0).epsilon(1e-15));
    }
  }

  SUBCASE("two elements at +90 degrees alternate sign") {
    cfg.antennas = 2;
    const VectorXcd a = channel::steering_vector(M_PI / 2, cfg);
    CHECK(std::abs(a[0] - std::complex<double>(1, 0)) < 1e-12);
    CHECK(std::abs(a[1] - std::complex<double>(-1, 0)) < 1e-12);
  }

  SUBCASE("four elements at 30 degrees step phase by -pi/2") {
    cfg.antennas = 4;
    const VectorXcd a = channel::steering_vector(M_PI / 6, cfg);
    for (int k = 0; k < 4; ++k) {
      const std::complex<double> expect = std::exp(std::complex<double>(0, -M_PI_2 * k));
      CHECK(std::abs(a[k] - expect) < 1e-12);
    }
  }

  SUBCASE("entries are unit modulus") {
    const VectorXcd a = channel::steering_vector(0.7, cfg);
    for (int k = 0; k < cfg.antennas; ++k) CHECK(std::abs(std::abs(a[k]) - 1.0) < 1e-12);
  }
}

TEST_CASE("beam synthesis window handling") {
  const channel::RadioConfig cfg = default_radio();
  const channel::BeamSynthesizer synth(cfg);

  SUBCASE("window entirely outside the array span yields zero weights") {
    for (const double aim : {2.0, -2.0, 3.1}) {
      const channel::Beamformer bf = synth.synthesize(aim, 1e-3);
      REQUIRE(bf.weights.size() == cfg.antennas);
      CHECK(bf.weights.norm() == 0.0);
    }
  }

  SUBCASE("point window peaks at the nearest grid point to the aim") {
    const channel::Beamformer bf = synth.synthesize(0.0, 0.0);
    const VectorXd& grid = synth.grid();
    int best_gain = 0, best_near = 0;
    double gain_max = -1.0, near_min = 1e300;
    for (int i = 0; i < grid.size(); ++i) {
      const double g = channel::tx_gain(grid[i], bf.weights, cfg);
      if (g > gain_max) gain_max = g, best_gain = i;
      if (std::abs(grid[i]) < near_min) near_min = std::abs(grid[i]), best_near = i;
    }
    CHECK(best_gain == best_near);
    CHECK(gain_max > 0.0);
  }
}

TEST_CASE("beam synthesis matches a dense least-squares oracle") {
  SUBCASE("default configuration example") {
    channel::RadioConfig cfg = default_radio();
    const channel::BeamSynthesizer synth(cfg);
    const channel::Beamformer bf = synth.synthesize(0.3, 0.01);
    const VectorXd pattern = synth.desired_pattern(0.3, 0.01);
    const double mine = fit_residual(synth, cfg, pattern, bf.weights);
    const double oracle = fit_residual(synth, cfg, pattern, qr_oracle(synth, cfg, pattern));
    CHECK(mine <= oracle + 1e-6 * std::max(1.0, oracle));
    CHECK(std::abs(mine - oracle) <= 1e-6 * std::max(1.0, oracle));
  }

  SUBCASE("100 random small instances stay within 1e-9 of the oracle residual") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> pick_k(2, 32), pick_n(8, 101);
    std::uniform_real_distribution<double> pick_aim(-1.5, 1.5), pick_width(0.0, 0.4);
    for (int trial = 0; trial < 100; ++trial) {
      channel::RadioConfig cfg = default_radio();
      cfg.antennas = pick_k(rng);
      cfg.beam_grid = pick_n(rng);
      const channel::BeamSynthesizer synth(cfg);
      const double aim = pick_aim(rng), width = pick_width(rng);
      const channel::Beamformer bf = synth.synthesize(aim, width);
      const VectorXd pattern = synth.desired_pattern(aim, width);
      const double mine = fit_residual(synth, cfg, pattern, bf.weights);
      const double oracle = fit_residual(synth, cfg, pattern, qr_oracle(synth, cfg, pattern));
      CHECK(mine <= oracle + 1e-9);
    }
  }
}

TEST_CASE("sensing snr closed form") {
  const channel::RadioConfig cfg = default_radio();

  SUBCASE("zero beam gives zero snr") {
    const VectorXcd f = VectorXcd::Zero(cfg.antennas);
    CHECK(channel::sensing_snr(10.0, 0.2, f, cfg) == 0.0);
  }

  SUBCASE("doubling range divides snr by sixteen") {
    const VectorXcd f = channel::steering_vector(0.2, cfg).conjugate();
    const double s1 = channel::sensing_snr(7.0, 0.2, f, cfg);
    const double s2 = channel::sensing_snr(14.0, 0.2, f, cfg);
    CHECK(s2 == doctest::Approx(s1 / 16.0).epsilon(1e-12));
  }

  SUBCASE("matched beam at 14.15 m matches the step-by-step evaluation") {
    const double theta = 0.0;
    const VectorXcd f = channel::steering_vector(theta, cfg).conjugate();
    const double snr = channel::sensing_snr(14.15, theta, f, cfg);

    // Independent evaluation of K * P * xi^2 * |a^T f|^2 / (M df sigma0^2)
    // with |a^T f| = K for the matched beam.
    const long double lambda = 299792458.0L / 60e9L;
    const long double four_pi = 4.0L * 3.141592653589793238462643383279503L;
    const long double xi2 = 0.1L * lambda * lambda / (powl(four_pi, 3) * powl(14.15L, 4));
    const long double p_w = powl(10.0L, (20.0L - 30.0L) / 10.0L);
    const long double noise = 2500.0L * 120e3L * powl(10.0L, (-174.0L - 30.0L) / 10.0L);
    const long double expect = 128.0L * p_w * xi2 * (128.0L * 128.0L) / noise;
    CHECK(snr == doctest::Approx(static_cast<double>(expect)).epsilon(1e-9));
    // Frozen reference value of the same expression.
    CHECK(snr == doctest::Approx(5510.515239780772).epsilon(1e-9));
  }
}

TEST_CASE("detection variance closed form") {
  channel::RadioConfig cfg = default_radio();

  SUBCASE("two-antenna angle variance at unit snr") {
    cfg.antennas = 2;
    const auto v = channel::detection_variances(1.0, 0.0, cfg);
    CHECK(v.angle_var == doctest::Approx(6.0 / (8.0 * M_PI * M_PI)).epsilon(1e-12));
    CHECK(v.angle_var == doctest::Approx(0.07599088773175333).epsilon(1e-12));
  }

  SUBCASE("range variance at unit snr uses the true propagation speed") {
    const auto v = channel::detection_variances(1.0, 0.0, cfg);
    const double half_res = channel::kSpeedOfLight / (2.0 * 2500.0 * 120e3);
    CHECK(half_res == doctest::Approx(0.49965409666666667).epsilon(1e-15));
    CHECK(v.range_var ==
          doctest::Approx(half_res * half_res / (16.0 * M_PI * M_PI)).epsilon(1e-12));
    CHECK(v.range_var == doctest::Approx(0.0015809537936509585).epsilon(1e-12));
  }

  SUBCASE("quadrupling snr quarters both variances") {
    const auto lo = channel::detection_variances(2.0, 0.3, cfg);
    const auto hi = channel::detection_variances(8.0, 0.3, cfg);
    CHECK(hi.angle_var == doctest::Approx(lo.angle_var / 4.0).epsilon(1e-14));
    CHECK(hi.range_var == doctest::Approx(lo.range_var / 4.0).epsilon(1e-14));
  }

  SUBCASE("strictly decreasing in snr and antenna count") {
    double prev_a = 1e300, prev_r = 1e300;
    for (double snr : {0.5, 1.0, 2.0, 5.0, 20.0}) {
      const auto v = channel::detection_variances(snr, 0.1, cfg);
      CHECK(v.angle_var < prev_a);
      CHECK(v.range_var < prev_r);
      prev_a = v.angle_var;
      prev_r = v.range_var;
    }
    prev_a = 1e300;
    for (int k : {2, 4, 16, 64, 128}) {
      cfg.antennas = k;
      const auto v = channel::detection_variances(3.0, 0.1, cfg);
      CHECK(v.angle_var < prev_a);
      prev_a = v.angle_var;
    }
  }

  SUBCASE("error cases") {
    CHECK_THROWS_AS(channel::detection_variances(0.0, 0.1, cfg), std::domain_error);
    CHECK_THROWS_AS(channel::detection_variances(-1.0, 0.1, cfg), std::domain_error);
    CHECK_THROWS_AS(channel::detection_variances(1.0, M_PI / 2, cfg), std::domain_error);
  }
}

TEST_CASE("polar-to-cartesian conversion") {
  SUBCASE("zero variances reproduce the point exactly") {
    const Vector2d p(3.0, 4.0);
    const auto m = channel::measurement_from_polar(p.norm(), std::atan2(p.y(), p.x()), 0.0, 0.0);
    CHECK((m.pos - p).norm() < 1e-12);
    CHECK(m.cov.norm() == 0.0);
  }

  SUBCASE("identity Jacobian at zero angle") {
    const auto m = channel::measurement_from_polar(1.0, 0.0, 0.04, 0.09);
    CHECK(m.cov(0, 0) == doctest::Approx(0.04).epsilon(1e-14));
    CHECK(m.cov(1, 1) == doctest::Approx(0.09).epsilon(1e-14));
    CHECK(std::abs(m.cov(0, 1)) < 1e-15);
  }

  SUBCASE("right-angle geometry swaps and scales the variances") {
    const auto m = channel::measurement_from_polar(2.0, M_PI / 2, 0.04, 0.09);
    CHECK(m.cov(0, 0) == doctest::Approx(4.0 * 0.09).epsilon(1e-12));
    CHECK(m.cov(1, 1) == doctest::Approx(0.04).epsilon(1e-12));
    CHECK(std::abs(m.cov(0, 1)) < 1e-12);
  }
}

TEST_CASE("measurement sampling statistics match the reported covariance") {
  const channel::RadioConfig cfg = default_radio();
  const double theta = 0.5, r_h = 5.0;
  const Vector2d p_true(r_h * std::cos(theta), r_h * std::sin(theta));
  const VectorXcd f = channel::steering_vector(theta, cfg).conjugate();

  // Reference first-order covariance at the true geometry.
  const double r3d = std::sqrt(r_h * r_h + cfg.altitude_m * cfg.altitude_m);
  const double snr = channel::sensing_snr(r3d, theta, f, cfg);
  const auto v = channel::detection_variances(snr, theta, cfg);
  Eigen::Matrix2d jac;
  jac << std::cos(theta), -r_h * std::sin(theta), std::sin(theta), r_h * std::cos(theta);
  const Eigen::Matrix2d ref =
      jac * Eigen::Vector2d(v.range_var, v.angle_var).asDiagonal() * jac.transpose();

  std::mt19937_64 rng(7);
  const int n = 100000;
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d second = Eigen::Matrix2d::Zero();
  for (int i = 0; i < n; ++i) {
    const auto m = channel::sample_measurement(p_true, cfg, f, rng);
    mean += m.pos;
    second += m.pos * m.pos.transpose();
  }
  mean /= n;
  const Eigen::Matrix2d emp = second / n - mean * mean.transpose();

  CHECK((mean - p_true).norm() < 5e-3);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      CHECK(std::abs(emp(a, b) - ref(a, b)) <= 0.05 * std::abs(ref(a, b)));
}

TEST_CASE("communication link latency") {
  const channel::RadioConfig cfg = default_radio();

  SUBCASE("latency at a spectral efficiency of ten bits") {
    CHECK(channel::latency_from_snr(1023.0, cfg) ==
          doctest::Approx(1.6666666666666667e-5).epsilon(1e-12));
  }

  SUBCASE("zero beam carries nothing") {
    std::mt19937_64 rng(3);
    const VectorXcd f = VectorXcd::Zero(cfg.antennas);
    const auto link = channel::comm_snr_latency(12.0, 0.4, f, cfg, rng);
    CHECK(link.snr == 0.0);
    CHECK(std::isinf(link.latency_s));
  }

  SUBCASE("pure line-of-sight limit is deterministic and closed-form") {
    channel::RadioConfig los = cfg;
    los.rician_k_db = 300.0;  // essentially no scattered component
    const double theta = 0.25, r3d = 11.0;
    const VectorXcd f = channel::steering_vector(theta, los).conjugate();
    std::mt19937_64 rng_a(1), rng_b(999);
    const auto la = channel::comm_snr_latency(r3d, theta, f, los, rng_a);
    const auto lb = channel::comm_snr_latency(r3d, theta, f, los, rng_b);
    CHECK(la.snr == doctest::Approx(lb.snr).epsilon(1e-9));

    const double lambda = los.wavelength();
    const double beta = std::pow(lambda / (4.0 * M_PI * r3d), 2);
    const double gain = channel::tx_gain(theta, f, los);  // |a^T f|^2 = K^2
    const double expect =
        los.tx_power_w() * beta / los.noise_power_w() * los.cc_repetitions * gain;
    CHECK(la.snr == doctest::Approx(expect).epsilon(1e-6));
    CHECK(la.latency_s == doctest::Approx(channel::latency_from_snr(expect, los)).epsilon(1e-6));
  }

  SUBCASE("fading is reproducible per seed") {
    std::mt19937_64 rng_a(42), rng_b(42);
    const VectorXcd f = channel::steering_vector(0.1, cfg).conjugate();
    const auto la = channel::comm_snr_latency(9.0, 0.1, f, cfg, rng_a);
    const auto lb = channel::comm_snr_latency(9.0, 0.1, f, cfg, rng_b);
    CHECK(la.snr == lb.snr);
    CHECK(la.latency_s == lb.latency_s);
  }
}

TEST_CASE("radio configuration validation") {
  channel::RadioConfig cfg = default_radio();
  CHECK_NOTHROW(cfg.validate());
  cfg.antennas = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
