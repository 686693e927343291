#pragma once

#include <Eigen/Dense>
#include <limits>
#include <vector>

#include "isacsim/estimator.hpp"
#include "isacsim/world.hpp"

namespace isacsim::planner {

using Eigen::Matrix2d;
using Eigen::Vector2d;
using world::Command;
using world::DetectedObstacle;
using world::TaskConfig;

struct PlannerParams {
  int horizon = 20;                          // rollout length (slots)
  int speed_samples = 5;                     // candidate speeds per window
  int heading_samples = 11;                  // candidate headings per window
  double chi2_thresh = 9.210340371976183;    // chi^2 quantile, 2 dof at 99%
  double confidence_factor = 2.576;          // inflation confidence scale

  void validate() const;
};

// Smallest/largest eigenvalue of a symmetric 2x2 matrix (closed form).
double eig_min(const Matrix2d& m);
double eig_max(const Matrix2d& m);

// Quantile of the chi-squared distribution with 2 dof by numeric inversion
// of the CDF. p in (0, 1).
double chi_squared_quantile_2dof(double p);

double mahalanobis(const Vector2d& a, const Vector2d& b, const Matrix2d& sigma);

// Dynamic window around the previous command: speeds clipped to [0, v_max],
// headings wrapped on the circle (never clipped). Endpoints included.
std::vector<Command> feasible_set(const Command& prev, const TaskConfig& cfg,
                                  const PlannerParams& params);

struct RolloutPoint {
  Vector2d pos;
  Matrix2d cov;  // belief covariance grown by b slots of process noise
};

// Constant-command forward simulation of the belief, points b = 1..horizon.
std::vector<RolloutPoint> rollout(const estimator::Estimate& est, const Command& cmd,
                                  const TaskConfig& cfg, const PlannerParams& params);

struct MinObstacleDistance {
  double dist = std::numeric_limits<double>::infinity();  // Mahalanobis
  int step = -1;      // rollout step of the minimum (1-based)
  int obstacle = -1;  // index into the detected set
};

// Minimum Mahalanobis distance between rollout points and detected
// obstacles. The metric at step b combines the rolled-out belief covariance,
// the detection covariance and b slots of obstacle motion uncertainty.
MinObstacleDistance min_mahalanobis(const std::vector<RolloutPoint>& traj,
                                    const std::vector<DetectedObstacle>& detected,
                                    const TaskConfig& cfg);

// Safety bound on the Mahalanobis clearance: sqrt(chi2) + d_safe / sqrt(lambda_min(sigma)).
double collision_threshold(const Matrix2d& sigma, double d_safe, double chi2);

// argmin of d_dst/max(d_dst) + min(d_min)/d_min over candidates; ties prefer
// lower speed, then lower heading. An empty d_min ranks by destination only.
int rank_candidates(const std::vector<Command>& cands, const std::vector<double>& d_dst,
                    const std::vector<double>& d_min);

// Mahalanobis-distance dynamic window search. Candidates whose clearance
// falls below the safety bound are discarded; if none survive, the
// max-clearance candidate is returned as a best effort.
Command select_command(const estimator::Estimate& est,
                       const std::vector<DetectedObstacle>& detected, const Command& prev,
                       const TaskConfig& cfg, const PlannerParams& params);

// Euclidean baseline: obstacles become disks inflated by detection and
// belief uncertainty plus d_safe; penetrating candidates are infeasible and
// clearance is measured to the inflated surface.
Command select_command_inflated(const estimator::Estimate& est,
                                const std::vector<DetectedObstacle>& detected,
                                const Command& prev, const TaskConfig& cfg,
                                const PlannerParams& params);

}  // namespace isacsim::planner
