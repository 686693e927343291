// Transmission scheduling: per-slot choice among {silent, sense-only,
// sense + command}, implemented by a small trainable Q-network plus three
// fixed baseline policies (always-transmit, periodic, event-triggered).
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "isacsim/estimator.hpp"
#include "isacsim/world.hpp"

namespace isacsim::scheduler {

using Eigen::Matrix2d;
using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;

// Actions: 0 = stay silent, 1 = transmit a sensing signal, 2 = transmit a
// sensing signal now and a command at the next slot (one-slot processing
// delay before the command takes effect).
inline constexpr int kActionSilent = 0;
inline constexpr int kActionSense = 1;
inline constexpr int kActionSenseCommand = 2;
inline constexpr int kNumActions = 3;

// ---------------------------------------------------------------------------
// Observation state and normalization
// ---------------------------------------------------------------------------

// Raw per-slot observation before normalization.
struct SchedState {
  double d_dst_m = 0.0;            // Mahalanobis distance to the destination
  double d_obs_m = 0.0;            // min Mahalanobis distance to detected obstacles
  bool obstacles_detected = false; // when false, the obstacle slot uses a sentinel
  double det_cov = 0.0;            // determinant of the belief covariance
  double det_max = 0.0;            // running episode max of det_cov (normalizer)
  int slot = 0;                    // slot index within the episode
  int n_signals = 0;               // transmitted-signal count so far
};

// Fixed normalization constants persisted alongside network weights so that
// training and evaluation always agree on the input scaling.
struct StateNorm {
  double dist_scale = 100.0;
  int max_slots = 2000;
};

// 5-vector: distances / dist_scale (sentinel 1.0 when no obstacle is
// detected), determinant / running episode max (0 while the max is zero),
// slot / max_slots, signal count / max_slots. Always finite.
VectorXd normalize_state(const SchedState& s, const StateNorm& norm);

// ---------------------------------------------------------------------------
// Q-network (fully-connected, rectified-linear hidden layers, linear head)
// ---------------------------------------------------------------------------

struct QNet {
  std::vector<MatrixXd> w;  // w[l]: rows = layer l output width, cols = input width
  std::vector<VectorXd> b;

  QNet() = default;
  QNet(int input, const std::vector<int>& hidden, int output);

  int input_dim() const { return w.empty() ? 0 : static_cast<int>(w.front().cols()); }
  int output_dim() const { return w.empty() ? 0 : static_cast<int>(w.back().rows()); }
  int layers() const { return static_cast<int>(w.size()); }

  // Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per layer, weights
  // first (row-major order) then biases.
  void init_uniform(std::mt19937_64& rng);

  VectorXd forward(const VectorXd& x) const;

  // Batched forward pass; columns are inputs.
  MatrixXd forward_batch(const MatrixXd& x) const;

  // Mean squared error over the batch between Q(x_k)[a_k] and y_k.
  // Accumulates analytic parameter gradients into `grad` (same shapes,
  // zeroed here). Returns the pre-update loss.
  double loss_and_grad(const std::vector<VectorXd>& x, const std::vector<int>& a,
                       const std::vector<double>& y, QNet& grad) const;

  // Gradient-descent step: params -= lr * grad.
  void apply_descent(const QNet& grad, double lr);

  // Zeroed clone used as a gradient container.
  QNet zeros_like() const;
};

// Argmax over Q-values; ties break toward the lowest action index.
int greedy_action(const VectorXd& q);

// Epsilon-greedy with an exploitation-probability convention: when the
// uniform draw is <= eps0 the greedy action is returned, otherwise a
// uniformly random action.
int act(const QNet& net, const VectorXd& state, double eps0, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Reward machinery
// ---------------------------------------------------------------------------

// Sensing value: entropy reduction from the previous belief covariance to the
// current one. Throws std::domain_error when either determinant is <= 0.
double compute_voi_s(const Matrix2d& cov_prev, const Matrix2d& cov_now);

// True-environment snapshot taken just before stepping a slot in which a
// freshly delivered command takes effect. Both branches of the counterfactual
// reuse the same process-noise realization.
struct EnvSnapshot {
  world::UavState uav;                    // true state before the step
  std::vector<world::Obstacle> obstacles; // true obstacles before the step
  Vector2d process_noise = Vector2d::Zero();
  double tau_c = 0.0;                     // delivery latency consumed this slot
  world::TaskConfig cfg;
};

// Command value: (distance-to-destination without the new command - distance
// with it) plus the collision-indicator difference between the two branches.
double compute_voi_c(const EnvSnapshot& snap, const world::Command& cmd);

// Sigmoid time pressure: 1 / (1 + exp(-0.1 * slot)).
double step_penalty(int slot);

// Per-slot transition summary feeding the reward.
struct RewardInputs {
  int slot = 0;
  int action = kActionSilent;
  double voi_s = 0.0;         // nonzero only on sensing slots
  double voi_c = 0.0;         // nonzero only on command-delivery slots
  bool collided = false;       // true position entered the safety radius
  double collision_penalty = 10.0;
};

// voi_s + voi_c - cost(action) - step_penalty(slot) - collision penalty,
// with cost 0 / 0.5 / 1 for actions 0 / 1 / 2.
double compute_reward(const RewardInputs& in);

// ---------------------------------------------------------------------------
// Replay buffer and training step
// ---------------------------------------------------------------------------

struct Experience {
  VectorXd state;       // normalized observation
  int action = 0;
  double reward = 0.0;
  VectorXd next_state;  // normalized observation at the next slot
  bool terminal = false;
};

// Fixed-capacity ring: insertion k lands at index k mod capacity.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity);

  void push(const Experience& e);
  int size() const { return static_cast<int>(data_.size()); }
  int capacity() const { return capacity_; }
  bool full() const { return size() == capacity_; }
  std::int64_t total_pushed() const { return count_; }
  const Experience& at(int i) const { return data_.at(static_cast<size_t>(i)); }

  // Uniform independent draws over the stored experiences.
  std::vector<int> sample_indices(int batch, std::mt19937_64& rng) const;

 private:
  int capacity_;
  std::int64_t count_ = 0;
  std::vector<Experience> data_;
};

struct TrainConfig {
  double gamma = 0.9;              // discount factor
  double eps0 = 0.8;               // exploitation probability
  int capacity = 8000;             // replay capacity
  int batch = 32;                  // minibatch size
  double lr = 0.001;               // learning rate
  int target_every = 100;          // target-network sync period (env steps)
  double collision_penalty = 10.0;
  int episodes = 1500;             // training episodes
  void validate() const;
};

// One minibatch update: samples `cfg.batch` experiences, builds targets
// r + gamma * max_a' Q_target(s', a') (bootstrap dropped on terminal
// transitions), applies a descent step, and returns the pre-update loss.
// Throws std::runtime_error when the buffer holds fewer than `cfg.batch`.
double train_step(QNet& net, const QNet& target, const ReplayBuffer& buffer,
                  const TrainConfig& cfg, std::mt19937_64& rng);

// Hard parameter copy whenever counter mod period == 0.
void sync_target(const QNet& net, QNet& target, std::int64_t counter, int period);

// ---------------------------------------------------------------------------
// Policies
// ---------------------------------------------------------------------------

enum class PolicyKind { gosc, trad, periodic, event };

PolicyKind parse_policy(const std::string& name);   // throws std::invalid_argument
std::string policy_name(PolicyKind kind);

// Fixed baselines. trad: transmit sense+command every slot. periodic: every
// 10th slot. event: when the belief entropy reaches 0.01 (no obstacles in
// view) or 0.001 (obstacles detected). The learned policy is not handled
// here; passing it throws std::invalid_argument.
int baseline_policy(PolicyKind kind, int slot, const estimator::Estimate& belief,
                    bool obstacles_detected);

// ---------------------------------------------------------------------------
// Weight persistence
// ---------------------------------------------------------------------------

// Small text header (magic line, layer shapes, normalization constants)
// followed by the flat parameter array as little-endian IEEE-754 doubles;
// round-trips bit-exactly.
void save_qnet(const std::string& path, const QNet& net, const StateNorm& norm);
void load_qnet(const std::string& path, QNet& net, StateNorm& norm);

}  // namespace isacsim::scheduler
