#include "isacsim/world.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace isacsim::world {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}
}  // namespace

void TaskConfig::validate() const {
  require(slot_s > 0, "task.slot_s must be > 0");
  require(v_max > 0, "task.v_max must be > 0");
  require(dv_max > 0, "task.dv_max must be > 0");
  require(dphi_max > 0 && dphi_max <= 3.141592653589793, "task.dphi_max must be in (0, pi]");
  require(process_noise_var >= 0, "task.process_noise_var must be >= 0");
  require(d_safe > 0, "task.d_safe must be > 0");
  require(d_thr > 0, "task.d_thr must be > 0");
  require(scan_radius > 0, "task.scan_radius must be > 0");
  require(n_obstacles >= 0, "task.n_obstacles must be >= 0");
  require(box_max >= box_min, "task.box_max must be >= task.box_min");
  require(obstacle_noise_var >= 0, "task.obstacle_noise_var must be >= 0");
  require(max_slots > 0, "task.max_slots must be > 0");
}

double wrap_angle(double phi) {
  double w = std::fmod(phi, kTwoPi);
  if (w < 0) w += kTwoPi;
  return w;
}

double heading_gap(double a, double b) {
  double d = std::abs(wrap_angle(a) - wrap_angle(b));
  return d > kTwoPi / 2.0 ? kTwoPi - d : d;
}

bool command_feasible(const Command& cmd, const Command& prev, const TaskConfig& cfg) {
  constexpr double eps = 1e-9;
  if (cmd.speed < -eps || cmd.speed > cfg.v_max + eps) return false;
  if (std::abs(cmd.speed - prev.speed) > cfg.dv_max + eps) return false;
  if (heading_gap(cmd.heading, prev.heading) > cfg.dphi_max + eps) return false;
  return true;
}

UavState step_uav(const UavState& s, const std::optional<Command>& cmd, double tau_c,
                  const TaskConfig& cfg, const Vector2d& noise) {
  require(tau_c >= 0 && tau_c <= cfg.slot_s, "step_uav: tau_c must lie in [0, slot]");
  UavState next = s;
  next.prev_cmd = s.cmd;
  if (cmd.has_value()) {
    if (!command_feasible(*cmd, s.cmd, cfg))
      throw std::invalid_argument("step_uav: command outside the per-slot feasibility window");
    next.cmd = *cmd;
    next.cmd.heading = wrap_angle(next.cmd.heading);
    next.pos += s.cmd.velocity() * tau_c + next.cmd.velocity() * (cfg.slot_s - tau_c);
  } else {
    next.pos += s.cmd.velocity() * cfg.slot_s;
  }
  next.pos += noise;
  return next;
}

UavState step_uav(const UavState& s, const std::optional<Command>& cmd, double tau_c,
                  const TaskConfig& cfg, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, std::sqrt(cfg.process_noise_var));
  const double nx = gauss(rng);
  const double ny = gauss(rng);
  return step_uav(s, cmd, tau_c, cfg, Vector2d(nx, ny));
}

std::vector<Obstacle> spawn_obstacles(const TaskConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> in_box(cfg.box_min, cfg.box_max);
  std::uniform_real_distribution<double> speed(-1.0, 1.0);
  std::vector<Obstacle> obs(cfg.n_obstacles);
  for (auto& o : obs) {
    const double px = in_box(rng);
    const double py = in_box(rng);
    const double vx = speed(rng);
    const double vy = speed(rng);
    o.pos = {px, py};
    o.vel = {vx, vy};
  }
  return obs;
}

void step_obstacles(std::vector<Obstacle>& obs, const TaskConfig& cfg) {
  for (auto& o : obs) {
    o.pos += o.vel * cfg.slot_s;
    for (int axis = 0; axis < 2; ++axis) {
      if (o.pos(axis) < cfg.box_min) {
        o.pos(axis) = 2.0 * cfg.box_min - o.pos(axis);
        o.vel(axis) = -o.vel(axis);
      } else if (o.pos(axis) > cfg.box_max) {
        o.pos(axis) = 2.0 * cfg.box_max - o.pos(axis);
        o.vel(axis) = -o.vel(axis);
      }
    }
  }
}

std::vector<DetectedObstacle> detect_obstacles(const Vector2d& center,
                                               const std::vector<Obstacle>& obs,
                                               const TaskConfig& cfg, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, std::sqrt(cfg.obstacle_noise_var));
  std::vector<DetectedObstacle> out;
  for (const auto& o : obs) {
    if ((o.pos - center).norm() <= cfg.scan_radius) {
      const double nx = gauss(rng);
      const double ny = gauss(rng);
      out.push_back({o.pos + Vector2d(nx, ny), cfg.obstacle_noise_var});
    }
  }
  return out;
}

const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::running: return "running";
    case Outcome::success: return "success";
    case Outcome::collision: return "collision";
    case Outcome::timeout: return "timeout";
    case Outcome::aborted: return "aborted";
  }
  return "unknown";
}

Outcome check_termination(const UavState& uav, const std::vector<Obstacle>& obs,
                          const TaskConfig& cfg, int slot) {
  for (const auto& o : obs)
    if ((uav.pos - o.pos).norm() <= cfg.d_safe) return Outcome::collision;
  if ((uav.pos - cfg.dest()).norm() <= cfg.d_thr) return Outcome::success;
  if (slot >= cfg.max_slots) return Outcome::timeout;
  return Outcome::running;
}

}  // namespace isacsim::world
