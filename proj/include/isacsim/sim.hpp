// Episode runner, training/evaluation drivers, configuration ingestion, and
// result persistence: the executable surface of the simulator.
#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "isacsim/channel.hpp"
#include "isacsim/estimator.hpp"
#include "isacsim/planner.hpp"
#include "isacsim/scheduler.hpp"
#include "isacsim/world.hpp"

namespace isacsim::sim {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct SimConfig {
  channel::RadioConfig radio;
  world::TaskConfig task;
  planner::PlannerParams plan;
  scheduler::TrainConfig train;
  std::uint64_t seed = 1;      // master seed (training / single runs)
  int eval_seeds = 20;         // evaluation uses seeds 1..eval_seeds
  std::string policy = "gosc";
  std::string out_dir = "out";

  void validate() const;  // throws std::invalid_argument naming the field
};

SimConfig default_config();

// Human-readable `key = value` text with `#` comments; unknown keys and
// malformed numbers raise std::runtime_error carrying "<name>:<line>:".
SimConfig parse_config(std::istream& in, const std::string& name);
SimConfig load_config(const std::string& path);

// Fixed key order, full double precision; parse(serialize(c)) == c.
std::string serialize_config(const SimConfig& cfg);

// ---------------------------------------------------------------------------
// Seeded stream derivation
// ---------------------------------------------------------------------------

// Independent per-concern generators derived from one master seed so every
// policy faces the identical world realization.
enum class Stream : int {
  layout = 1,       // obstacle spawn
  process = 2,      // UAV process noise
  measurement = 3,  // sensing-echo noise
  fading = 4,       // communication fading
  detection = 5,    // obstacle detection noise
  exploration = 6,  // action sampling + minibatch indices (training)
  net_init = 7,     // Q-network initialization
  lemma = 8,        // Monte-Carlo bound validation
};

std::mt19937_64 make_stream(std::uint64_t seed, Stream stream);

// ---------------------------------------------------------------------------
// Episodes
// ---------------------------------------------------------------------------

struct PolicyContext {
  int slot = 0;
  Eigen::VectorXd state;                        // normalized observation
  const estimator::Estimate* belief = nullptr;  // current position belief
  bool obstacles_detected = false;
};

using ActionFn = std::function<int(const PolicyContext&)>;
using TransitionFn = std::function<void(const scheduler::Experience&)>;

struct SlotRecord {
  int slot = 0;
  double true_x = 0, true_y = 0;      // position at the start of the slot
  double belief_x = 0, belief_y = 0;  // post-fusion belief mean
  double det_cov = 0;                 // post-fusion belief covariance determinant
  int action = 0;
  double cmd_speed = 0, cmd_heading = 0;  // command in effect during the slot
  double dist_dest = 0;                   // true distance to destination
  double min_obstacle_dist = 0;           // true distance to nearest obstacle
};

struct EpisodeResult {
  world::Outcome outcome = world::Outcome::running;
  int slots = 0;       // completed slots
  int n_sense = 0;     // slots carrying a sensing signal
  int n_cc = 0;        // slots carrying a command delivery
  int n_tx_slots = 0;  // slots carrying any transmission
  double path_length = 0.0;
  double min_obstacle_dist = std::numeric_limits<double>::infinity();
  double reward_sum = 0.0;
  std::vector<SlotRecord> trajectory;  // populated on request
};

struct EpisodeOptions {
  bool record_trajectory = false;
  bool inflated_planner = false;  // the always-transmit baseline plans this way
  const scheduler::StateNorm* norm = nullptr;  // default: {100, task.max_slots}
};

// One full episode: per-slot predict, detect, act, transmit/sense/fuse,
// deliver pending commands with channel latency, plan on action 2, step the
// true world, and score the transition. A delivery latency reaching the slot
// length aborts the episode as a distinct outcome.
EpisodeResult run_episode(const SimConfig& cfg, const channel::BeamSynthesizer& synth,
                          const ActionFn& policy, std::uint64_t seed,
                          const EpisodeOptions& opts = {},
                          const TransitionFn& on_transition = {});

// Action function for a policy kind; the learned policy requires weights and
// acts greedily. Baselines ignore `net`.
ActionFn make_policy(scheduler::PolicyKind kind, const scheduler::QNet* net);

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct AggregateMetrics {
  int episodes = 0;
  int successes = 0;
  double success_rate = 0.0;
  // Means over successful episodes only (NaN when there are none).
  double mean_signals = 0.0;
  double mean_slots = 0.0;
  double mean_path_length = 0.0;
  double mean_min_dist = 0.0;
  double mean_tx_slots = 0.0;
};

AggregateMetrics aggregate(const std::vector<EpisodeResult>& episodes);

struct EvalRow {
  scheduler::PolicyKind kind;
  AggregateMetrics metrics;
  std::vector<std::uint64_t> seeds;
  std::vector<EpisodeResult> episodes;
};

// Every policy runs the identical seed list 1..cfg.eval_seeds. The learned
// policy requires `net` and `norm` (std::runtime_error otherwise).
std::vector<EvalRow> evaluate(const SimConfig& cfg,
                              const std::vector<scheduler::PolicyKind>& kinds,
                              const scheduler::QNet* net, const scheduler::StateNorm* norm,
                              std::ostream* progress = nullptr);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainLogRow {
  int episode = 0;
  std::uint64_t seed = 0;
  double reward = 0.0;
  world::Outcome outcome = world::Outcome::running;
  int slots = 0;
  int signals = 0;
  double mean_loss = 0.0;
};

struct TrainResult {
  scheduler::QNet net;
  scheduler::StateNorm norm;
  std::vector<TrainLogRow> log;  // one row per training episode
  int warmup_episodes = 0;
};

// Random-action warm-up until the replay buffer is full, then epsilon-greedy
// episodes with one minibatch update per environment step and periodic target
// sync. Training episode seeds are disjoint from the evaluation seed list.
TrainResult train_gosc(const SimConfig& cfg, std::ostream* progress = nullptr);

// ---------------------------------------------------------------------------
// Safety-bound Monte-Carlo validation
// ---------------------------------------------------------------------------

struct Lemma2Instance {
  double mahal = 0.0;      // separation of the means (just above the threshold)
  double threshold = 0.0;  // collision_threshold for the instance covariance
  double freq = 0.0;       // empirical P(true separation > d_safe)
};

struct Lemma2Result {
  int instances = 0;
  long long draws_per_instance = 0;
  double aggregate_freq = 0.0;     // over all paired draws
  double min_instance_freq = 1.0;
  bool pass = false;               // aggregate_freq >= 0.99
  std::vector<Lemma2Instance> detail;
};

// Random covariance/offset instances with mean separation placed just past
// the collision threshold; counts how often the true (sampled) separation
// still exceeds d_safe.
Lemma2Result validate_lemma2(int instances, long long draws_per_instance, double d_safe,
                             std::uint64_t seed);

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

void write_metrics_csv(const std::string& path, const std::vector<EvalRow>& rows);
void write_episodes_jsonl(const std::string& path, const std::vector<EvalRow>& rows);
void write_trajectory_csv(const std::string& path, const EpisodeResult& result);
void write_reward_log_csv(const std::string& path, const TrainResult& result);

}  // namespace isacsim::sim
