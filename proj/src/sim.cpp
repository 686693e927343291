#include "isacsim/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace isacsim::sim {

namespace {

constexpr double kHalfPi = 1.5707963267948966;

// --- formatting / parsing helpers -----------------------------------------

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& v, const std::string& where) {
  try {
    size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw std::runtime_error(where + "expected a number, got '" + v + "'");
  }
}

int parse_int(const std::string& v, const std::string& where) {
  try {
    size_t pos = 0;
    const long long d = std::stoll(v, &pos);
    if (pos != v.size() || d < std::numeric_limits<int>::min() ||
        d > std::numeric_limits<int>::max())
      throw std::invalid_argument(v);
    return static_cast<int>(d);
  } catch (const std::exception&) {
    throw std::runtime_error(where + "expected an integer, got '" + v + "'");
  }
}

std::uint64_t parse_u64(const std::string& v, const std::string& where) {
  try {
    size_t pos = 0;
    const unsigned long long d = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return static_cast<std::uint64_t>(d);
  } catch (const std::exception&) {
    throw std::runtime_error(where + "expected an unsigned integer, got '" + v + "'");
  }
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// --- config key table -------------------------------------------------------

struct KeyHandler {
  std::string key;
  std::function<std::string(const SimConfig&)> get;
  std::function<void(SimConfig&, const std::string&, const std::string&)> set;
};

std::vector<KeyHandler> build_config_keys() {
  std::vector<KeyHandler> ks;
  auto dbl = [&ks](const char* key, auto ref) {
    ks.push_back({key,
                  [ref](const SimConfig& c) { return fmt_double(ref(const_cast<SimConfig&>(c))); },
                  [ref](SimConfig& c, const std::string& v, const std::string& w) {
                    ref(c) = parse_double(v, w);
                  }});
  };
  auto num = [&ks](const char* key, auto ref) {
    ks.push_back({key,
                  [ref](const SimConfig& c) {
                    return std::to_string(ref(const_cast<SimConfig&>(c)));
                  },
                  [ref](SimConfig& c, const std::string& v, const std::string& w) {
                    ref(c) = parse_int(v, w);
                  }});
  };

  ks.push_back({"seed", [](const SimConfig& c) { return std::to_string(c.seed); },
                [](SimConfig& c, const std::string& v, const std::string& w) {
                  c.seed = parse_u64(v, w);
                }});
  num("eval_seeds", [](SimConfig& c) -> int& { return c.eval_seeds; });
  ks.push_back({"policy", [](const SimConfig& c) { return c.policy; },
                [](SimConfig& c, const std::string& v, const std::string&) { c.policy = v; }});
  ks.push_back({"out_dir", [](const SimConfig& c) { return c.out_dir; },
                [](SimConfig& c, const std::string& v, const std::string&) { c.out_dir = v; }});
  // One confidence scale feeds both the beam-window width and the obstacle
  // inflation radius.
  ks.push_back({"confidence_factor",
                [](const SimConfig& c) { return fmt_double(c.radio.confidence_factor); },
                [](SimConfig& c, const std::string& v, const std::string& w) {
                  const double d = parse_double(v, w);
                  c.radio.confidence_factor = d;
                  c.plan.confidence_factor = d;
                }});

  num("radio.antennas", [](SimConfig& c) -> int& { return c.radio.antennas; });
  num("radio.subcarriers", [](SimConfig& c) -> int& { return c.radio.subcarriers; });
  dbl("radio.subcarrier_spacing_hz",
      [](SimConfig& c) -> double& { return c.radio.subcarrier_spacing_hz; });
  dbl("radio.carrier_freq_hz", [](SimConfig& c) -> double& { return c.radio.carrier_freq_hz; });
  dbl("radio.tx_power_dbm", [](SimConfig& c) -> double& { return c.radio.tx_power_dbm; });
  dbl("radio.noise_psd_dbm_hz", [](SimConfig& c) -> double& { return c.radio.noise_psd_dbm_hz; });
  dbl("radio.rcs_m2", [](SimConfig& c) -> double& { return c.radio.rcs_m2; });
  dbl("radio.rician_k_db", [](SimConfig& c) -> double& { return c.radio.rician_k_db; });
  num("radio.cc_repetitions", [](SimConfig& c) -> int& { return c.radio.cc_repetitions; });
  num("radio.cc_symbols", [](SimConfig& c) -> int& { return c.radio.cc_symbols; });
  num("radio.beam_grid", [](SimConfig& c) -> int& { return c.radio.beam_grid; });
  dbl("radio.altitude_m", [](SimConfig& c) -> double& { return c.radio.altitude_m; });

  dbl("task.slot_s", [](SimConfig& c) -> double& { return c.task.slot_s; });
  dbl("task.v_max", [](SimConfig& c) -> double& { return c.task.v_max; });
  dbl("task.dv_max", [](SimConfig& c) -> double& { return c.task.dv_max; });
  dbl("task.dphi_max", [](SimConfig& c) -> double& { return c.task.dphi_max; });
  dbl("task.process_noise_var", [](SimConfig& c) -> double& { return c.task.process_noise_var; });
  dbl("task.d_safe", [](SimConfig& c) -> double& { return c.task.d_safe; });
  dbl("task.d_thr", [](SimConfig& c) -> double& { return c.task.d_thr; });
  dbl("task.scan_radius", [](SimConfig& c) -> double& { return c.task.scan_radius; });
  dbl("task.start_x", [](SimConfig& c) -> double& { return c.task.start_x; });
  dbl("task.start_y", [](SimConfig& c) -> double& { return c.task.start_y; });
  dbl("task.dest_x", [](SimConfig& c) -> double& { return c.task.dest_x; });
  dbl("task.dest_y", [](SimConfig& c) -> double& { return c.task.dest_y; });
  num("task.n_obstacles", [](SimConfig& c) -> int& { return c.task.n_obstacles; });
  dbl("task.box_min", [](SimConfig& c) -> double& { return c.task.box_min; });
  dbl("task.box_max", [](SimConfig& c) -> double& { return c.task.box_max; });
  dbl("task.obstacle_noise_var",
      [](SimConfig& c) -> double& { return c.task.obstacle_noise_var; });
  num("task.max_slots", [](SimConfig& c) -> int& { return c.task.max_slots; });
  dbl("task.initial_heading", [](SimConfig& c) -> double& { return c.task.initial_heading; });

  num("planner.horizon", [](SimConfig& c) -> int& { return c.plan.horizon; });
  num("planner.speed_samples", [](SimConfig& c) -> int& { return c.plan.speed_samples; });
  num("planner.heading_samples", [](SimConfig& c) -> int& { return c.plan.heading_samples; });
  dbl("planner.chi2_thresh", [](SimConfig& c) -> double& { return c.plan.chi2_thresh; });

  dbl("train.gamma", [](SimConfig& c) -> double& { return c.train.gamma; });
  dbl("train.eps0", [](SimConfig& c) -> double& { return c.train.eps0; });
  num("train.capacity", [](SimConfig& c) -> int& { return c.train.capacity; });
  num("train.batch", [](SimConfig& c) -> int& { return c.train.batch; });
  dbl("train.lr", [](SimConfig& c) -> double& { return c.train.lr; });
  num("train.target_every", [](SimConfig& c) -> int& { return c.train.target_every; });
  dbl("train.collision_penalty",
      [](SimConfig& c) -> double& { return c.train.collision_penalty; });
  num("train.episodes", [](SimConfig& c) -> int& { return c.train.episodes; });
  return ks;
}

const std::vector<KeyHandler>& config_keys() {
  static const std::vector<KeyHandler> ks = build_config_keys();
  return ks;
}

double true_min_obstacle_dist(const Eigen::Vector2d& pos,
                              const std::vector<world::Obstacle>& obs) {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& o : obs) d = std::min(d, (pos - o.pos).norm());
  return d;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

void SimConfig::validate() const {
  radio.validate();
  task.validate();
  plan.validate();
  train.validate();
  if (eval_seeds < 1) throw std::invalid_argument("eval_seeds must be >= 1");
  scheduler::parse_policy(policy);
  if (out_dir.empty()) throw std::invalid_argument("out_dir must not be empty");
}

SimConfig default_config() { return SimConfig{}; }

SimConfig parse_config(std::istream& in, const std::string& name) {
  std::map<std::string, const KeyHandler*> index;
  for (const auto& k : config_keys()) index[k.key] = &k;

  SimConfig cfg = default_config();
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = name + ":" + std::to_string(lineno) + ": ";
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(where + "expected 'key = value', got '" + stripped + "'");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    const auto it = index.find(key);
    if (it == index.end()) throw std::runtime_error(where + "unknown key '" + key + "'");
    it->second->set(cfg, value, where);
  }
  cfg.validate();
  return cfg;
}

SimConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  return parse_config(in, path);
}

std::string serialize_config(const SimConfig& cfg) {
  std::ostringstream out;
  out << "# simulator configuration; omitted keys fall back to these defaults\n";
  for (const auto& k : config_keys()) out << k.key << " = " << k.get(cfg) << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Seeded streams
// ---------------------------------------------------------------------------

std::mt19937_64 make_stream(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffULL),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(static_cast<int>(stream))};
  return std::mt19937_64(seq);
}

// ---------------------------------------------------------------------------
// Episode runner
// ---------------------------------------------------------------------------

EpisodeResult run_episode(const SimConfig& cfg, const channel::BeamSynthesizer& synth,
                          const ActionFn& policy, std::uint64_t seed,
                          const EpisodeOptions& opts, const TransitionFn& on_transition) {
  const world::TaskConfig& task = cfg.task;

  auto layout_rng = make_stream(seed, Stream::layout);
  auto process_rng = make_stream(seed, Stream::process);
  auto meas_rng = make_stream(seed, Stream::measurement);
  auto fading_rng = make_stream(seed, Stream::fading);
  auto detect_rng = make_stream(seed, Stream::detection);
  std::normal_distribution<double> process_gauss(0.0, std::sqrt(task.process_noise_var));

  world::UavState uav;
  uav.pos = task.start();
  uav.cmd = {0.0, world::wrap_angle(task.initial_heading)};
  uav.prev_cmd = uav.cmd;

  std::vector<world::Obstacle> obstacles = world::spawn_obstacles(task, layout_rng);

  estimator::Estimate est;
  est.mean = task.start();
  est.cov = Eigen::Matrix2d::Zero();
  est.last_vel = uav.cmd.velocity();

  const scheduler::StateNorm default_norm{100.0, task.max_slots};
  const scheduler::StateNorm& norm = opts.norm ? *opts.norm : default_norm;

  EpisodeResult res;
  res.min_obstacle_dist = true_min_obstacle_dist(uav.pos, obstacles);

  // An obstacle parked on the start position (or a degenerate task) ends the
  // episode before any slot runs.
  {
    const world::Outcome initial = world::check_termination(uav, obstacles, task, 0);
    if (initial != world::Outcome::running) {
      res.outcome = initial;
      res.slots = 0;
      return res;
    }
  }

  double det_max = 0.0;
  int n_signals = 0;
  bool pending_cmd_valid = false;
  world::Command pending_cmd;

  bool have_prev = false;
  Eigen::VectorXd prev_state;
  int prev_action = 0;
  double prev_reward = 0.0;

  for (int i = 0; i < task.max_slots; ++i) {
    if (i > 0) est = estimator::predict(est, task.slot_s, task.process_noise_var);

    const std::vector<world::DetectedObstacle> detected =
        world::detect_obstacles(est.mean, obstacles, task, detect_rng);

    // --- observation ---
    scheduler::SchedState ss;
    const Eigen::Matrix2d dst_cov =
        est.cov + task.process_noise_var * Eigen::Matrix2d::Identity();
    ss.d_dst_m = planner::mahalanobis(est.mean, task.dest(), dst_cov);
    ss.obstacles_detected = !detected.empty();
    if (ss.obstacles_detected) {
      double dmin = std::numeric_limits<double>::infinity();
      for (const auto& d : detected) {
        const Eigen::Matrix2d s = est.cov + d.noise_var * Eigen::Matrix2d::Identity();
        dmin = std::min(dmin, planner::mahalanobis(est.mean, d.pos, s));
      }
      ss.d_obs_m = dmin;
    }
    ss.det_cov = est.cov.determinant();
    det_max = std::max(det_max, ss.det_cov);
    ss.det_max = det_max;
    ss.slot = i;
    ss.n_signals = n_signals;
    const Eigen::VectorXd state = scheduler::normalize_state(ss, norm);

    // The transition for slot i-1 completes once the slot-i observation is
    // known.
    if (have_prev && on_transition) {
      on_transition({prev_state, prev_action, prev_reward, state, false});
      have_prev = false;
    }

    // --- action ---
    PolicyContext ctx;
    ctx.slot = i;
    ctx.state = state;
    ctx.belief = &est;
    ctx.obstacles_detected = ss.obstacles_detected;
    const int action = policy(ctx);
    if (action < 0 || action >= scheduler::kNumActions)
      throw std::runtime_error("policy returned an invalid action");

    const bool sense_now = action != scheduler::kActionSilent;
    const bool deliver_now = pending_cmd_valid;
    if (sense_now || deliver_now) ++res.n_tx_slots;

    // One beamformer per transmitting slot, aimed from the pre-fusion belief.
    // The array resolves angles in [-pi/2, pi/2] only, so the aim is clamped
    // to that span and the width guarded against near-origin blow-up.
    channel::Beamformer beam;
    if (sense_now || deliver_now) {
      const double r_h = std::max(est.mean.norm(), 1e-9);
      const double theta_hat = std::clamp(std::atan2(est.mean.y(), est.mean.x()),
                                          -kHalfPi, kHalfPi);
      double sigma_theta = std::sqrt(std::max(0.0, planner::eig_max(est.cov))) / r_h;
      if (!std::isfinite(sigma_theta)) sigma_theta = kHalfPi;
      beam = synth.synthesize(theta_hat, std::min(sigma_theta, kHalfPi));
    }

    // --- sensing ---
    double voi_s = 0.0;
    if (sense_now) {
      ++res.n_sense;
      ++n_signals;
      try {
        const channel::Measurement meas =
            channel::sample_measurement(uav.pos, cfg.radio, beam.weights, meas_rng);
        const Eigen::Matrix2d cov_prev = est.cov;
        est = estimator::fuse(est, meas);
        if (cov_prev.determinant() > 0.0 && est.cov.determinant() > 0.0)
          voi_s = scheduler::compute_voi_s(cov_prev, est.cov);
      } catch (const std::domain_error&) {
        // Unusable echo (no beam energy on target or endfire geometry): the
        // signal was spent but the belief is unchanged.
      } catch (const std::runtime_error&) {
        // Singular innovation: skip the update.
      }
    }

    // --- command delivery (planned at slot i-1) ---
    double voi_c = 0.0;
    double tau_c = 0.0;
    bool delivered = false;
    std::optional<world::Command> new_cmd;
    if (deliver_now) {
      ++res.n_cc;
      ++n_signals;
      const double r3d =
          std::sqrt(uav.pos.squaredNorm() + cfg.radio.altitude_m * cfg.radio.altitude_m);
      const double theta_true = std::atan2(uav.pos.y(), uav.pos.x());
      const channel::CommLink link =
          channel::comm_snr_latency(r3d, theta_true, beam.weights, cfg.radio, fading_rng);
      tau_c = link.latency_s;
      if (!(tau_c < task.slot_s)) {
        // The command cannot be decoded within the slot; the modeling
        // assumption is violated and the episode ends distinctly.
        scheduler::RewardInputs ri;
        ri.slot = i;
        ri.action = action;
        ri.voi_s = voi_s;
        ri.collision_penalty = cfg.train.collision_penalty;
        const double reward = scheduler::compute_reward(ri);
        res.reward_sum += reward;
        if (opts.record_trajectory) {
          SlotRecord rec;
          rec.slot = i;
          rec.true_x = uav.pos.x();
          rec.true_y = uav.pos.y();
          rec.belief_x = est.mean.x();
          rec.belief_y = est.mean.y();
          rec.det_cov = est.cov.determinant();
          rec.action = action;
          rec.cmd_speed = uav.cmd.speed;  // the undeliverable command never applies
          rec.cmd_heading = uav.cmd.heading;
          rec.dist_dest = (uav.pos - task.dest()).norm();
          rec.min_obstacle_dist = true_min_obstacle_dist(uav.pos, obstacles);
          res.trajectory.push_back(rec);
        }
        if (on_transition)
          on_transition({state, action, reward, Eigen::VectorXd::Zero(5), true});
        res.outcome = world::Outcome::aborted;
        res.slots = i + 1;
        return res;
      }
      new_cmd = pending_cmd;
      pending_cmd_valid = false;
      delivered = true;
    }

    // --- plan the next command (takes effect at slot i+1) ---
    if (action == scheduler::kActionSenseCommand) {
      const world::Command effective = delivered ? *new_cmd : uav.cmd;
      pending_cmd = opts.inflated_planner
                        ? planner::select_command_inflated(est, detected, effective, task,
                                                           cfg.plan)
                        : planner::select_command(est, detected, effective, task, cfg.plan);
      pending_cmd_valid = true;
    }

    // --- step the true world ---
    const Eigen::Vector2d noise(process_gauss(process_rng), process_gauss(process_rng));
    if (delivered) {
      scheduler::EnvSnapshot snap;
      snap.uav = uav;
      snap.obstacles = obstacles;
      snap.process_noise = noise;
      snap.tau_c = tau_c;
      snap.cfg = task;
      voi_c = scheduler::compute_voi_c(snap, *new_cmd);
    }
    const Eigen::Vector2d pos_before = uav.pos;
    const double obs_dist_before = true_min_obstacle_dist(pos_before, obstacles);
    world::step_obstacles(obstacles, task);
    uav = world::step_uav(uav, new_cmd, delivered ? tau_c : 0.0, task, noise);
    res.path_length += (uav.pos - pos_before).norm();
    if (delivered) est.last_vel = new_cmd->velocity();
    res.min_obstacle_dist =
        std::min(res.min_obstacle_dist, true_min_obstacle_dist(uav.pos, obstacles));

    // --- termination and reward ---
    const world::Outcome outcome = world::check_termination(uav, obstacles, task, i + 1);
    scheduler::RewardInputs ri;
    ri.slot = i;
    ri.action = action;
    ri.voi_s = voi_s;
    ri.voi_c = voi_c;
    ri.collided = outcome == world::Outcome::collision;
    ri.collision_penalty = cfg.train.collision_penalty;
    const double reward = scheduler::compute_reward(ri);
    res.reward_sum += reward;

    if (opts.record_trajectory) {
      SlotRecord rec;
      rec.slot = i;
      rec.true_x = pos_before.x();
      rec.true_y = pos_before.y();
      rec.belief_x = est.mean.x();
      rec.belief_y = est.mean.y();
      rec.det_cov = est.cov.determinant();
      rec.action = action;
      rec.cmd_speed = uav.cmd.speed;  // command in effect during the slot
      rec.cmd_heading = uav.cmd.heading;
      rec.dist_dest = (pos_before - task.dest()).norm();
      rec.min_obstacle_dist = obs_dist_before;
      res.trajectory.push_back(rec);
    }

    if (outcome != world::Outcome::running) {
      if (on_transition)
        on_transition({state, action, reward, Eigen::VectorXd::Zero(5), true});
      res.outcome = outcome;
      res.slots = i + 1;
      return res;
    }
    prev_state = state;
    prev_action = action;
    prev_reward = reward;
    have_prev = true;
  }
  // Unreachable: the slot-count check fires inside the loop.
  res.outcome = world::Outcome::timeout;
  res.slots = task.max_slots;
  return res;
}

ActionFn make_policy(scheduler::PolicyKind kind, const scheduler::QNet* net) {
  if (kind == scheduler::PolicyKind::gosc) {
    if (!net)
      throw std::runtime_error("the learned policy requires trained weights (see --weights)");
    return [net](const PolicyContext& ctx) {
      return scheduler::greedy_action(net->forward(ctx.state));
    };
  }
  return [kind](const PolicyContext& ctx) {
    return scheduler::baseline_policy(kind, ctx.slot, *ctx.belief, ctx.obstacles_detected);
  };
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

AggregateMetrics aggregate(const std::vector<EpisodeResult>& episodes) {
  AggregateMetrics m;
  m.episodes = static_cast<int>(episodes.size());
  double signals = 0, slots = 0, path = 0, min_dist = 0, tx = 0;
  for (const auto& e : episodes) {
    if (e.outcome != world::Outcome::success) continue;
    ++m.successes;
    signals += e.n_sense + e.n_cc;
    slots += e.slots;
    path += e.path_length;
    min_dist += e.min_obstacle_dist;
    tx += e.n_tx_slots;
  }
  m.success_rate = m.episodes > 0 ? static_cast<double>(m.successes) / m.episodes : 0.0;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  m.mean_signals = m.successes ? signals / m.successes : nan;
  m.mean_slots = m.successes ? slots / m.successes : nan;
  m.mean_path_length = m.successes ? path / m.successes : nan;
  m.mean_min_dist = m.successes ? min_dist / m.successes : nan;
  m.mean_tx_slots = m.successes ? tx / m.successes : nan;
  return m;
}

std::vector<EvalRow> evaluate(const SimConfig& cfg,
                              const std::vector<scheduler::PolicyKind>& kinds,
                              const scheduler::QNet* net, const scheduler::StateNorm* norm,
                              std::ostream* progress) {
  cfg.validate();
  const channel::BeamSynthesizer synth(cfg.radio);
  std::vector<EvalRow> rows;
  for (const scheduler::PolicyKind kind : kinds) {
    if (kind == scheduler::PolicyKind::gosc && (!net || !norm))
      throw std::runtime_error("evaluating the learned policy requires trained weights");
    EvalRow row;
    row.kind = kind;
    EpisodeOptions opts;
    opts.inflated_planner = kind == scheduler::PolicyKind::trad;
    opts.norm = norm;
    const ActionFn policy = make_policy(kind, net);
    for (int s = 1; s <= cfg.eval_seeds; ++s) {
      row.seeds.push_back(static_cast<std::uint64_t>(s));
      row.episodes.push_back(run_episode(cfg, synth, policy, static_cast<std::uint64_t>(s), opts));
    }
    row.metrics = aggregate(row.episodes);
    if (progress) {
      *progress << scheduler::policy_name(kind) << ": success "
                << row.metrics.successes << "/" << row.metrics.episodes << "\n";
      progress->flush();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

TrainResult train_gosc(const SimConfig& cfg, std::ostream* progress) {
  cfg.validate();
  TrainResult tr;
  tr.norm = scheduler::StateNorm{100.0, cfg.task.max_slots};
  tr.net = scheduler::QNet(5, {128, 128}, scheduler::kNumActions);
  {
    auto init_rng = make_stream(cfg.seed, Stream::net_init);
    tr.net.init_uniform(init_rng);
  }
  if (cfg.train.episodes == 0) return tr;  // untouched initialization

  scheduler::QNet target = tr.net;
  scheduler::ReplayBuffer buffer(cfg.train.capacity);
  auto explore_rng = make_stream(cfg.seed, Stream::exploration);
  const channel::BeamSynthesizer synth(cfg.radio);

  // Training worlds use a seed space disjoint from the evaluation seed list.
  std::uint64_t episode_counter = 0;
  auto next_seed = [&]() { return 1000000ULL + episode_counter++; };

  EpisodeOptions opts;
  opts.norm = &tr.norm;

  // Warm-up: uniform-random actions until the replay buffer is full.
  std::uniform_int_distribution<int> random_action(0, scheduler::kNumActions - 1);
  const ActionFn warmup_policy = [&](const PolicyContext&) { return random_action(explore_rng); };
  while (!buffer.full()) {
    run_episode(cfg, synth, warmup_policy, next_seed(), opts,
                [&](const scheduler::Experience& e) { buffer.push(e); });
    ++tr.warmup_episodes;
  }
  if (progress) {
    *progress << "warm-up: " << tr.warmup_episodes << " episodes, buffer " << buffer.size()
              << "/" << buffer.capacity() << "\n";
    progress->flush();
  }

  std::int64_t step_counter = 0;
  const ActionFn policy = [&](const PolicyContext& ctx) {
    return scheduler::act(tr.net, ctx.state, cfg.train.eps0, explore_rng);
  };
  for (int e = 0; e < cfg.train.episodes; ++e) {
    double loss_sum = 0.0;
    long loss_count = 0;
    const std::uint64_t ep_seed = next_seed();
    const EpisodeResult r =
        run_episode(cfg, synth, policy, ep_seed, opts, [&](const scheduler::Experience& ex) {
          buffer.push(ex);
          ++step_counter;
          loss_sum += scheduler::train_step(tr.net, target, buffer, cfg.train, explore_rng);
          ++loss_count;
          scheduler::sync_target(tr.net, target, step_counter, cfg.train.target_every);
        });
    TrainLogRow row;
    row.episode = e;
    row.seed = ep_seed;
    row.reward = r.reward_sum;
    row.outcome = r.outcome;
    row.slots = r.slots;
    row.signals = r.n_sense + r.n_cc;
    row.mean_loss = loss_count ? loss_sum / loss_count : 0.0;
    tr.log.push_back(row);

    if (progress && (e + 1) % 25 == 0) {
      const int window = std::min<int>(25, static_cast<int>(tr.log.size()));
      double rew = 0.0;
      int succ = 0;
      for (int k = static_cast<int>(tr.log.size()) - window; k < static_cast<int>(tr.log.size());
           ++k) {
        rew += tr.log[k].reward;
        succ += tr.log[k].outcome == world::Outcome::success ? 1 : 0;
      }
      *progress << "episode " << (e + 1) << "/" << cfg.train.episodes << ": last-" << window
                << " mean reward " << rew / window << ", successes " << succ << "/" << window
                << ", steps " << step_counter << "\n";
      progress->flush();
    }
  }
  return tr;
}

// ---------------------------------------------------------------------------
// Safety-bound Monte-Carlo validation
// ---------------------------------------------------------------------------

Lemma2Result validate_lemma2(int instances, long long draws_per_instance, double d_safe,
                             std::uint64_t seed) {
  if (instances <= 0 || draws_per_instance <= 0)
    throw std::invalid_argument("validate_lemma2: instances and draws must be positive");
  Lemma2Result res;
  res.instances = instances;
  res.draws_per_instance = draws_per_instance;

  auto rng = make_stream(seed, Stream::lemma);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double chi2 = planner::PlannerParams{}.chi2_thresh;

  long long hits = 0;
  for (int k = 0; k < instances; ++k) {
    // Random anisotropic belief covariance and isotropic detection noise.
    const double ang = u01(rng) * M_PI;
    const double l1 = 0.005 + 0.495 * u01(rng);
    const double l2 = 0.005 + 0.495 * u01(rng);
    const double phi = 1e-4 + (0.05 - 1e-4) * u01(rng);
    Eigen::Matrix2d rot;
    rot << std::cos(ang), -std::sin(ang), std::sin(ang), std::cos(ang);
    const Eigen::Matrix2d cov_uav =
        rot * Eigen::Vector2d(l1, l2).asDiagonal() * rot.transpose();
    const Eigen::Matrix2d sigma = cov_uav + phi * Eigen::Matrix2d::Identity();

    const double threshold = planner::collision_threshold(sigma, d_safe, chi2);

    // Mean separation placed just past the threshold along a random direction.
    const double beta = u01(rng) * 2.0 * M_PI;
    const Eigen::Vector2d u(std::cos(beta), std::sin(beta));
    const double unit_mahal = std::sqrt(u.dot(sigma.inverse() * u));
    const Eigen::Vector2d mu = (threshold * (1.0 + 1e-9) / unit_mahal) * u;

    const Eigen::Matrix2d chol_uav = Eigen::LLT<Eigen::Matrix2d>(cov_uav).matrixL();
    const double obs_std = std::sqrt(phi);

    long long inst_hits = 0;
    for (long long d = 0; d < draws_per_instance; ++d) {
      const Eigen::Vector2d z1(gauss(rng), gauss(rng));
      const Eigen::Vector2d z2(gauss(rng), gauss(rng));
      const Eigen::Vector2d separation = mu + chol_uav * z1 - obs_std * z2;
      if (separation.norm() > d_safe) ++inst_hits;
    }
    hits += inst_hits;
    Lemma2Instance inst;
    inst.mahal = planner::mahalanobis(mu, Eigen::Vector2d::Zero(), sigma);
    inst.threshold = threshold;
    inst.freq = static_cast<double>(inst_hits) / draws_per_instance;
    res.min_instance_freq = std::min(res.min_instance_freq, inst.freq);
    res.detail.push_back(inst);
  }
  res.aggregate_freq =
      static_cast<double>(hits) / (static_cast<double>(instances) * draws_per_instance);
  res.pass = res.aggregate_freq >= 0.99;
  return res;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  return out;
}

}  // namespace

void write_metrics_csv(const std::string& path, const std::vector<EvalRow>& rows) {
  const EvalRow* trad = nullptr;
  for (const auto& r : rows)
    if (r.kind == scheduler::PolicyKind::trad) trad = &r;
  auto out = open_out(path);
  out << "policy,episodes,successes,success_rate,mean_signals,mean_slots,mean_path_length,"
         "mean_min_obstacle_dist,mean_tx_slots,signal_reduction_vs_trad,tx_slot_reduction_vs_"
         "trad\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& r : rows) {
    const AggregateMetrics& m = r.metrics;
    double sig_red = nan, tx_red = nan;
    if (trad && std::isfinite(trad->metrics.mean_signals) && trad->metrics.mean_signals > 0 &&
        std::isfinite(m.mean_signals))
      sig_red = 1.0 - m.mean_signals / trad->metrics.mean_signals;
    if (trad && std::isfinite(trad->metrics.mean_tx_slots) && trad->metrics.mean_tx_slots > 0 &&
        std::isfinite(m.mean_tx_slots))
      tx_red = 1.0 - m.mean_tx_slots / trad->metrics.mean_tx_slots;
    out << scheduler::policy_name(r.kind) << ',' << m.episodes << ',' << m.successes << ','
        << fmt_double(m.success_rate) << ',' << fmt_double(m.mean_signals) << ','
        << fmt_double(m.mean_slots) << ',' << fmt_double(m.mean_path_length) << ','
        << fmt_double(m.mean_min_dist) << ',' << fmt_double(m.mean_tx_slots) << ','
        << fmt_double(sig_red) << ',' << fmt_double(tx_red) << '\n';
  }
  if (!out) throw std::runtime_error("short write to '" + path + "'");
}

void write_episodes_jsonl(const std::string& path, const std::vector<EvalRow>& rows) {
  auto out = open_out(path);
  for (const auto& r : rows) {
    for (size_t i = 0; i < r.episodes.size(); ++i) {
      const EpisodeResult& e = r.episodes[i];
      nlohmann::json j;
      j["policy"] = scheduler::policy_name(r.kind);
      j["seed"] = r.seeds[i];
      j["outcome"] = world::outcome_name(e.outcome);
      j["slots"] = e.slots;
      j["n_sense"] = e.n_sense;
      j["n_cc"] = e.n_cc;
      j["n_tx_slots"] = e.n_tx_slots;
      j["path_length"] = e.path_length;
      j["min_obstacle_dist"] = e.min_obstacle_dist;  // serialized as null when infinite
      j["reward_sum"] = e.reward_sum;
      out << j.dump() << '\n';
    }
  }
  if (!out) throw std::runtime_error("short write to '" + path + "'");
}

void write_trajectory_csv(const std::string& path, const EpisodeResult& result) {
  auto out = open_out(path);
  out << "slot,true_x,true_y,belief_x,belief_y,det_cov,action,cmd_speed,cmd_heading,dist_dest,"
         "min_obstacle_dist\n";
  for (const auto& r : result.trajectory) {
    out << r.slot << ',' << fmt_double(r.true_x) << ',' << fmt_double(r.true_y) << ','
        << fmt_double(r.belief_x) << ',' << fmt_double(r.belief_y) << ','
        << fmt_double(r.det_cov) << ',' << r.action << ',' << fmt_double(r.cmd_speed) << ','
        << fmt_double(r.cmd_heading) << ',' << fmt_double(r.dist_dest) << ','
        << fmt_double(r.min_obstacle_dist) << '\n';
  }
  if (!out) throw std::runtime_error("short write to '" + path + "'");
}

void write_reward_log_csv(const std::string& path, const TrainResult& result) {
  auto out = open_out(path);
  out << "episode,seed,reward,outcome,slots,signals,mean_loss\n";
  for (const auto& r : result.log) {
    out << r.episode << ',' << r.seed << ',' << fmt_double(r.reward) << ','
        << world::outcome_name(r.outcome) << ',' << r.slots << ',' << r.signals << ','
        << fmt_double(r.mean_loss) << '\n';
  }
  if (!out) throw std::runtime_error("short write to '" + path + "'");
}

}  // namespace isacsim::sim
