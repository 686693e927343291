#include "isacsim/planner.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace isacsim::planner {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// Candidate order is speed-major, heading ascending after wrapping, so the
// tie-break below matches plain iteration order only by accident; ranking
// compares (value, speed, heading) lexicographically instead.
bool tie_better(const Command& a, const Command& b) {
  if (a.speed != b.speed) return a.speed < b.speed;
  return a.heading < b.heading;
}

}  // namespace

void PlannerParams::validate() const {
  require(horizon > 0, "planner.horizon must be > 0");
  require(speed_samples > 1, "planner.speed_samples must be > 1");
  require(heading_samples > 1, "planner.heading_samples must be > 1");
  require(chi2_thresh > 0, "planner.chi2_thresh must be > 0");
  require(confidence_factor > 0, "confidence_factor must be > 0");
}

double eig_min(const Matrix2d& m) {
  const double tr = m(0, 0) + m(1, 1);
  const double gap = std::sqrt(std::max(0.0, (m(0, 0) - m(1, 1)) * (m(0, 0) - m(1, 1)) +
                                                 4.0 * m(0, 1) * m(1, 0)));
  return 0.5 * (tr - gap);
}

double eig_max(const Matrix2d& m) {
  const double tr = m(0, 0) + m(1, 1);
  const double gap = std::sqrt(std::max(0.0, (m(0, 0) - m(1, 1)) * (m(0, 0) - m(1, 1)) +
                                                 4.0 * m(0, 1) * m(1, 0)));
  return 0.5 * (tr + gap);
}

double chi_squared_quantile_2dof(double p) {
  require(p > 0.0 && p < 1.0, "chi_squared_quantile_2dof: p must be in (0, 1)");
  // CDF(x) = 1 - exp(-x/2); bisect on [0, hi].
  auto cdf = [](double x) { return 1.0 - std::exp(-0.5 * x); };
  double lo = 0.0, hi = 1.0;
  while (cdf(hi) < p) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double mahalanobis(const Vector2d& a, const Vector2d& b, const Matrix2d& sigma) {
  if (sigma.determinant() <= 0.0)
    throw std::runtime_error("mahalanobis: covariance not positive definite");
  const Vector2d d = a - b;
  return std::sqrt(d.dot(sigma.inverse() * d));
}

std::vector<Command> feasible_set(const Command& prev, const TaskConfig& cfg,
                                  const PlannerParams& params) {
  const double v_lo = std::max(0.0, prev.speed - cfg.dv_max);
  const double v_hi = std::min(cfg.v_max, prev.speed + cfg.dv_max);
  std::vector<Command> out;
  out.reserve(params.speed_samples * params.heading_samples);
  for (int i = 0; i < params.speed_samples; ++i) {
    const double v = params.speed_samples == 1
                         ? v_lo
                         : v_lo + (v_hi - v_lo) * i / (params.speed_samples - 1);
    for (int j = 0; j < params.heading_samples; ++j) {
      const double phi = prev.heading - cfg.dphi_max +
                         2.0 * cfg.dphi_max * j / (params.heading_samples - 1);
      out.push_back({v, world::wrap_angle(phi)});
    }
  }
  return out;
}

std::vector<RolloutPoint> rollout(const estimator::Estimate& est, const Command& cmd,
                                  const TaskConfig& cfg, const PlannerParams& params) {
  std::vector<RolloutPoint> traj(params.horizon);
  const Vector2d vel = cmd.velocity();
  for (int b = 1; b <= params.horizon; ++b) {
    traj[b - 1].pos = est.mean + vel * (b * cfg.slot_s);
    traj[b - 1].cov = est.cov + b * cfg.process_noise_var * Matrix2d::Identity();
  }
  return traj;
}

MinObstacleDistance min_mahalanobis(const std::vector<RolloutPoint>& traj,
                                    const std::vector<DetectedObstacle>& detected,
                                    const TaskConfig& cfg) {
  MinObstacleDistance best;
  for (int b = 1; b <= static_cast<int>(traj.size()); ++b) {
    const RolloutPoint& pt = traj[b - 1];
    const double growth = b * cfg.slot_s;  // obstacle motion uncertainty per elapsed slot
    for (int o = 0; o < static_cast<int>(detected.size()); ++o) {
      const Matrix2d sigma =
          pt.cov + (detected[o].noise_var + growth) * Matrix2d::Identity();
      const double d = mahalanobis(pt.pos, detected[o].pos, sigma);
      if (d < best.dist) {
        best.dist = d;
        best.step = b;
        best.obstacle = o;
      }
    }
  }
  return best;
}

double collision_threshold(const Matrix2d& sigma, double d_safe, double chi2) {
  const double lmin = eig_min(sigma);
  if (lmin <= 0.0) throw std::runtime_error("collision_threshold: covariance not positive definite");
  return std::sqrt(chi2) + d_safe / std::sqrt(lmin);
}

int rank_candidates(const std::vector<Command>& cands, const std::vector<double>& d_dst,
                    const std::vector<double>& d_min) {
  require(!cands.empty() && cands.size() == d_dst.size(), "rank_candidates: size mismatch");
  const bool use_min = !d_min.empty();
  require(!use_min || d_min.size() == cands.size(), "rank_candidates: size mismatch");
  double dst_max = 0.0;
  double min_min = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < cands.size(); ++i) {
    dst_max = std::max(dst_max, d_dst[i]);
    if (use_min) min_min = std::min(min_min, d_min[i]);
  }
  int best = -1;
  double best_e = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < cands.size(); ++i) {
    double e = dst_max > 0.0 ? d_dst[i] / dst_max : 0.0;
    // A zero clearance can only occur when the minimum itself is zero, and the
    // ratio of the minimum to itself is 1 (the worst value of this term).
    if (use_min) e += d_min[i] > 0.0 ? min_min / d_min[i] : 1.0;
    if (best < 0 || e < best_e || (e == best_e && tie_better(cands[i], cands[best]))) {
      best = static_cast<int>(i);
      best_e = e;
    }
  }
  return best;
}

namespace {

// Shared search skeleton: evaluate every feasible candidate, restrict to the
// safe subset, rank, and fall back to max clearance when nothing is safe.
struct Scored {
  std::vector<Command> cands;
  std::vector<double> d_dst;
  std::vector<double> d_min;
  std::vector<char> safe;
};

Command pick(const Scored& s) {
  std::vector<Command> safe_cands;
  std::vector<double> safe_dst, safe_min;
  for (size_t i = 0; i < s.cands.size(); ++i) {
    if (s.safe[i]) {
      safe_cands.push_back(s.cands[i]);
      safe_dst.push_back(s.d_dst[i]);
      safe_min.push_back(s.d_min[i]);
    }
  }
  if (!safe_cands.empty())
    return safe_cands[rank_candidates(safe_cands, safe_dst, safe_min)];
  // Nothing clears the safety bound: best effort by maximum clearance.
  int best = 0;
  for (size_t i = 1; i < s.cands.size(); ++i) {
    if (s.d_min[i] > s.d_min[best] ||
        (s.d_min[i] == s.d_min[best] && tie_better(s.cands[i], s.cands[best])))
      best = static_cast<int>(i);
  }
  return s.cands[best];
}

}  // namespace

Command select_command(const estimator::Estimate& est,
                       const std::vector<DetectedObstacle>& detected, const Command& prev,
                       const TaskConfig& cfg, const PlannerParams& params) {
  params.validate();
  const std::vector<Command> cands = feasible_set(prev, cfg, params);
  const Vector2d dest = cfg.dest();

  std::vector<double> d_dst(cands.size());
  if (detected.empty()) {
    for (size_t i = 0; i < cands.size(); ++i) {
      const auto traj = rollout(est, cands[i], cfg, params);
      const RolloutPoint& end = traj.back();
      d_dst[i] = mahalanobis(end.pos, dest, end.cov);
    }
    return cands[rank_candidates(cands, d_dst, {})];
  }

  Scored s;
  s.cands = cands;
  s.d_dst.resize(cands.size());
  s.d_min.resize(cands.size());
  s.safe.resize(cands.size());
  for (size_t i = 0; i < cands.size(); ++i) {
    const auto traj = rollout(est, cands[i], cfg, params);
    const RolloutPoint& end = traj.back();
    s.d_dst[i] = mahalanobis(end.pos, dest, end.cov);
    const MinObstacleDistance md = min_mahalanobis(traj, detected, cfg);
    s.d_min[i] = md.dist;
    // Safety bound at the critical pair: detection covariance plus the
    // belief covariance grown to the critical step.
    const Matrix2d sigma =
        detected[md.obstacle].noise_var * Matrix2d::Identity() + traj[md.step - 1].cov;
    s.safe[i] = md.dist >= collision_threshold(sigma, cfg.d_safe, params.chi2_thresh);
  }
  return pick(s);
}

Command select_command_inflated(const estimator::Estimate& est,
                                const std::vector<DetectedObstacle>& detected,
                                const Command& prev, const TaskConfig& cfg,
                                const PlannerParams& params) {
  params.validate();
  const std::vector<Command> cands = feasible_set(prev, cfg, params);
  const Vector2d dest = cfg.dest();

  std::vector<double> d_dst(cands.size());
  if (detected.empty()) {
    for (size_t i = 0; i < cands.size(); ++i) {
      const auto traj = rollout(est, cands[i], cfg, params);
      d_dst[i] = (traj.back().pos - dest).norm();
    }
    return cands[rank_candidates(cands, d_dst, {})];
  }

  std::vector<double> radius(detected.size());
  for (size_t o = 0; o < detected.size(); ++o) {
    const Matrix2d unc = est.cov + detected[o].noise_var * Matrix2d::Identity();
    radius[o] = params.confidence_factor * std::sqrt(std::max(0.0, eig_max(unc))) + cfg.d_safe;
  }

  Scored s;
  s.cands = cands;
  s.d_dst.resize(cands.size());
  s.d_min.resize(cands.size());
  s.safe.resize(cands.size());
  for (size_t i = 0; i < cands.size(); ++i) {
    const auto traj = rollout(est, cands[i], cfg, params);
    s.d_dst[i] = (traj.back().pos - dest).norm();
    double clearance = std::numeric_limits<double>::infinity();
    for (const auto& pt : traj)
      for (size_t o = 0; o < detected.size(); ++o)
        clearance = std::min(clearance, (pt.pos - detected[o].pos).norm() - radius[o]);
    s.d_min[i] = clearance;
    s.safe[i] = clearance > 0.0;  // touching the inflated surface counts as penetration
  }
  return pick(s);
}

}  // namespace isacsim::planner
