#pragma once

#include <Eigen/Dense>
#include <optional>
#include <random>
#include <vector>

namespace isacsim::world {

using Eigen::Vector2d;

// Command-and-control payload; the UAV holds it until replaced.
struct Command {
  double speed = 0.0;    // m/s
  double heading = 0.0;  // rad, kept in [0, 2pi)

  Vector2d velocity() const { return {speed * std::cos(heading), speed * std::sin(heading)}; }
};

struct UavState {
  Vector2d pos{0.0, 0.0};  // true horizontal position (m)
  Command cmd;             // command in effect for the upcoming slot
  Command prev_cmd;        // command in effect one slot earlier
};

struct Obstacle {
  Vector2d pos;
  Vector2d vel;  // constant per episode except for sign flips at box walls
};

struct DetectedObstacle {
  Vector2d pos;      // noisy position estimate
  double noise_var;  // per-axis variance (covariance = noise_var * I)
};

struct TaskConfig {
  double slot_s = 0.005;
  double v_max = 4.0;
  double dv_max = 0.5;                       // per-slot speed change bound
  double dphi_max = 0.5235987755982988;      // per-slot heading change bound (pi/6)
  double process_noise_var = 0.005;          // m^2 per slot per axis
  double d_safe = 0.5;                       // collision distance
  double d_thr = 0.3;                        // arrival distance
  double scan_radius = 4.0;                  // obstacle detection radius around the UAV estimate
  double start_x = 0.1, start_y = 0.1;
  double dest_x = 10.0, dest_y = 10.0;
  int n_obstacles = 10;
  double box_min = 2.0, box_max = 8.0;       // obstacle spawn/containment box
  double obstacle_noise_var = 0.001;         // detection variance per axis
  int max_slots = 2000;
  double initial_heading = 0.7853981633974483;  // pi/4

  Vector2d start() const { return {start_x, start_y}; }
  Vector2d dest() const { return {dest_x, dest_y}; }
  void validate() const;
};

double wrap_angle(double phi);               // into [0, 2pi)
double heading_gap(double a, double b);      // circular distance, in [0, pi]
bool command_feasible(const Command& cmd, const Command& prev, const TaskConfig& cfg);

// One slot of kinematics: the previous command acts for tau_c seconds, the
// new command (when present) for the remainder, plus independent
// N(0, process_noise_var) per axis. Throws std::invalid_argument for
// commands outside the per-slot feasibility window.
UavState step_uav(const UavState& s, const std::optional<Command>& cmd, double tau_c,
                  const TaskConfig& cfg, const Vector2d& noise);
UavState step_uav(const UavState& s, const std::optional<Command>& cmd, double tau_c,
                  const TaskConfig& cfg, std::mt19937_64& rng);

std::vector<Obstacle> spawn_obstacles(const TaskConfig& cfg, std::mt19937_64& rng);

// Constant-velocity motion with reflection off the containment box.
void step_obstacles(std::vector<Obstacle>& obs, const TaskConfig& cfg);

// Obstacles within scan_radius of `center` (boundary included), each with an
// independent Gaussian position perturbation.
std::vector<DetectedObstacle> detect_obstacles(const Vector2d& center,
                                               const std::vector<Obstacle>& obs,
                                               const TaskConfig& cfg, std::mt19937_64& rng);

enum class Outcome { running, success, collision, timeout, aborted };

const char* outcome_name(Outcome o);

// Checked on true positions; collision takes precedence over success, and a
// slot-count timeout is reported last.
Outcome check_termination(const UavState& uav, const std::vector<Obstacle>& obs,
                          const TaskConfig& cfg, int slot);

}  // namespace isacsim::world
