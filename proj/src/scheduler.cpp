#include "isacsim/scheduler.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace isacsim::scheduler {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

// ---------------------------------------------------------------------------
// State normalization
// ---------------------------------------------------------------------------

VectorXd normalize_state(const SchedState& s, const StateNorm& norm) {
  VectorXd v(5);
  v(0) = s.d_dst_m / norm.dist_scale;
  v(1) = s.obstacles_detected ? s.d_obs_m / norm.dist_scale : 1.0;
  v(2) = s.det_max > 0.0 ? s.det_cov / s.det_max : 0.0;
  v(3) = static_cast<double>(s.slot) / norm.max_slots;
  v(4) = static_cast<double>(s.n_signals) / norm.max_slots;
  return v;
}

// ---------------------------------------------------------------------------
// Q-network
// ---------------------------------------------------------------------------

QNet::QNet(int input, const std::vector<int>& hidden, int output) {
  require(input > 0 && output > 0, "QNet: layer widths must be positive");
  int prev = input;
  for (int width : hidden) {
    require(width > 0, "QNet: layer widths must be positive");
    w.emplace_back(MatrixXd::Zero(width, prev));
    b.emplace_back(VectorXd::Zero(width));
    prev = width;
  }
  w.emplace_back(MatrixXd::Zero(output, prev));
  b.emplace_back(VectorXd::Zero(output));
}

void QNet::init_uniform(std::mt19937_64& rng) {
  for (size_t l = 0; l < w.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(w[l].cols()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index i = 0; i < w[l].rows(); ++i)
      for (Eigen::Index j = 0; j < w[l].cols(); ++j) w[l](i, j) = dist(rng);
    for (Eigen::Index i = 0; i < b[l].size(); ++i) b[l](i) = dist(rng);
  }
}

VectorXd QNet::forward(const VectorXd& x) const {
  require(!w.empty(), "QNet: uninitialized network");
  require(x.size() == input_dim(), "QNet: input dimension mismatch");
  VectorXd h = x;
  for (size_t l = 0; l < w.size(); ++l) {
    VectorXd z = w[l] * h + b[l];
    h = (l + 1 == w.size()) ? z : z.cwiseMax(0.0).eval();
  }
  return h;
}

QNet QNet::zeros_like() const {
  QNet g;
  g.w.reserve(w.size());
  g.b.reserve(b.size());
  for (const auto& m : w) g.w.emplace_back(MatrixXd::Zero(m.rows(), m.cols()));
  for (const auto& v : b) g.b.emplace_back(VectorXd::Zero(v.size()));
  return g;
}

MatrixXd QNet::forward_batch(const MatrixXd& x) const {
  require(!w.empty(), "QNet: uninitialized network");
  require(x.rows() == input_dim(), "QNet: input dimension mismatch");
  MatrixXd h = x;
  for (size_t l = 0; l < w.size(); ++l) {
    MatrixXd z = (w[l] * h).colwise() + b[l];
    h = (l + 1 == w.size()) ? z : z.cwiseMax(0.0).eval();
  }
  return h;
}

double QNet::loss_and_grad(const std::vector<VectorXd>& x, const std::vector<int>& a,
                           const std::vector<double>& y, QNet& grad) const {
  require(!x.empty() && x.size() == a.size() && x.size() == y.size(),
          "loss_and_grad: batch arrays must be non-empty and equal-sized");
  grad = zeros_like();
  const int n = static_cast<int>(x.size());
  const int depth = layers();

  // Whole-batch forward/backward as matrix products (columns are samples).
  MatrixXd input(input_dim(), n);
  for (int k = 0; k < n; ++k) {
    require(x[k].size() == input_dim(), "loss_and_grad: input dimension mismatch");
    input.col(k) = x[k];
  }
  std::vector<MatrixXd> h(depth + 1);  // h[0] = inputs, h[l] = output of layer l-1
  std::vector<MatrixXd> z(depth);      // pre-activations
  h[0] = std::move(input);
  for (int l = 0; l < depth; ++l) {
    z[l] = (w[l] * h[l]).colwise() + b[l];
    h[l + 1] = (l + 1 == depth) ? z[l] : z[l].cwiseMax(0.0).eval();
  }

  double loss = 0.0;
  MatrixXd dz = MatrixXd::Zero(output_dim(), n);
  for (int k = 0; k < n; ++k) {
    require(a[k] >= 0 && a[k] < output_dim(), "loss_and_grad: action index out of range");
    const double err = h[depth](a[k], k) - y[k];
    loss += err * err;
    dz(a[k], k) = 2.0 * err / n;
  }
  for (int l = depth - 1; l >= 0; --l) {
    grad.w[l] = dz * h[l].transpose();
    grad.b[l] = dz.rowwise().sum();
    if (l > 0) {
      const MatrixXd dh = w[l].transpose() * dz;
      dz = ((z[l - 1].array() > 0.0).cast<double>() * dh.array()).matrix();
    }
  }
  return loss / n;
}

void QNet::apply_descent(const QNet& grad, double lr) {
  require(grad.w.size() == w.size(), "apply_descent: shape mismatch");
  for (size_t l = 0; l < w.size(); ++l) {
    w[l] -= lr * grad.w[l];
    b[l] -= lr * grad.b[l];
  }
}

int greedy_action(const VectorXd& q) {
  int best = 0;
  for (int i = 1; i < q.size(); ++i)
    if (q(i) > q(best)) best = i;
  return best;
}

int act(const QNet& net, const VectorXd& state, double eps0, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  if (u01(rng) <= eps0) return greedy_action(net.forward(state));
  return std::uniform_int_distribution<int>(0, kNumActions - 1)(rng);
}

// ---------------------------------------------------------------------------
// Reward machinery
// ---------------------------------------------------------------------------

double compute_voi_s(const Matrix2d& cov_prev, const Matrix2d& cov_now) {
  if (cov_prev.determinant() <= 0.0 || cov_now.determinant() <= 0.0)
    throw std::domain_error("compute_voi_s: covariance determinants must be positive");
  return estimator::entropy(cov_prev) - estimator::entropy(cov_now);
}

double compute_voi_c(const EnvSnapshot& snap, const world::Command& cmd) {
  std::vector<world::Obstacle> obs_next = snap.obstacles;
  world::step_obstacles(obs_next, snap.cfg);
  const world::UavState with =
      world::step_uav(snap.uav, cmd, snap.tau_c, snap.cfg, snap.process_noise);
  const world::UavState without =
      world::step_uav(snap.uav, std::nullopt, 0.0, snap.cfg, snap.process_noise);
  const auto collides = [&](const Vector2d& p) {
    for (const auto& o : obs_next)
      if ((p - o.pos).norm() <= snap.cfg.d_safe) return true;
    return false;
  };
  const Vector2d dest = snap.cfg.dest();
  const double gain = (without.pos - dest).norm() - (with.pos - dest).norm();
  return gain + (collides(without.pos) ? 1.0 : 0.0) - (collides(with.pos) ? 1.0 : 0.0);
}

double step_penalty(int slot) { return 1.0 / (1.0 + std::exp(-0.1 * slot)); }

double compute_reward(const RewardInputs& in) {
  double cost = 0.0;
  if (in.action == kActionSense) cost = 0.5;
  if (in.action == kActionSenseCommand) cost = 1.0;
  double r = in.voi_s + in.voi_c - cost - step_penalty(in.slot);
  if (in.collided) r -= in.collision_penalty;
  return r;
}

// ---------------------------------------------------------------------------
// Replay buffer and training
// ---------------------------------------------------------------------------

ReplayBuffer::ReplayBuffer(int capacity) : capacity_(capacity) {
  require(capacity > 0, "ReplayBuffer: capacity must be positive");
  data_.reserve(static_cast<size_t>(capacity));
}

void ReplayBuffer::push(const Experience& e) {
  const auto slot = static_cast<size_t>(count_ % capacity_);
  if (slot < data_.size())
    data_[slot] = e;
  else
    data_.push_back(e);
  ++count_;
}

std::vector<int> ReplayBuffer::sample_indices(int batch, std::mt19937_64& rng) const {
  require(batch > 0, "sample_indices: batch must be positive");
  if (size() == 0) throw std::runtime_error("sample_indices: buffer is empty");
  std::uniform_int_distribution<int> pick(0, size() - 1);
  std::vector<int> idx(batch);
  for (int& i : idx) i = pick(rng);
  return idx;
}

void TrainConfig::validate() const {
  require(gamma > 0.0 && gamma < 1.0, "train.gamma must be in (0, 1)");
  require(eps0 >= 0.0 && eps0 <= 1.0, "train.eps0 must be in [0, 1]");
  require(capacity > 0, "train.capacity must be positive");
  require(batch > 0 && batch <= capacity, "train.batch must be in [1, capacity]");
  require(lr > 0.0, "train.lr must be positive");
  require(target_every > 0, "train.target_every must be positive");
  require(collision_penalty >= 0.0, "train.collision_penalty must be non-negative");
  require(episodes >= 0, "train.episodes must be non-negative");
}

double train_step(QNet& net, const QNet& target, const ReplayBuffer& buffer,
                  const TrainConfig& cfg, std::mt19937_64& rng) {
  if (buffer.size() < cfg.batch)
    throw std::runtime_error("train_step: replay buffer holds fewer experiences than the batch");
  const std::vector<int> idx = buffer.sample_indices(cfg.batch, rng);
  std::vector<VectorXd> x(idx.size());
  std::vector<int> a(idx.size());
  std::vector<double> y(idx.size());
  MatrixXd next_states(target.input_dim(), static_cast<int>(idx.size()));
  for (size_t k = 0; k < idx.size(); ++k) {
    const Experience& e = buffer.at(idx[k]);
    x[k] = e.state;
    a[k] = e.action;
    y[k] = e.reward;
    next_states.col(static_cast<int>(k)) =
        e.terminal ? VectorXd::Zero(target.input_dim()) : e.next_state;
  }
  const MatrixXd next_q = target.forward_batch(next_states);
  for (size_t k = 0; k < idx.size(); ++k)
    if (!buffer.at(idx[k]).terminal)
      y[k] += cfg.gamma * next_q.col(static_cast<int>(k)).maxCoeff();
  QNet grad;
  const double loss = net.loss_and_grad(x, a, y, grad);
  net.apply_descent(grad, cfg.lr);
  return loss;
}

void sync_target(const QNet& net, QNet& target, std::int64_t counter, int period) {
  require(period > 0, "sync_target: period must be positive");
  if (counter % period == 0) target = net;
}

// ---------------------------------------------------------------------------
// Policies
// ---------------------------------------------------------------------------

PolicyKind parse_policy(const std::string& name) {
  if (name == "gosc") return PolicyKind::gosc;
  if (name == "trad") return PolicyKind::trad;
  if (name == "periodic") return PolicyKind::periodic;
  if (name == "event") return PolicyKind::event;
  throw std::invalid_argument("unknown policy '" + name +
                              "' (expected gosc, trad, periodic, or event)");
}

std::string policy_name(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::gosc: return "gosc";
    case PolicyKind::trad: return "trad";
    case PolicyKind::periodic: return "periodic";
    case PolicyKind::event: return "event";
  }
  throw std::invalid_argument("policy_name: invalid kind");
}

int baseline_policy(PolicyKind kind, int slot, const estimator::Estimate& belief,
                    bool obstacles_detected) {
  switch (kind) {
    case PolicyKind::trad:
      return kActionSenseCommand;
    case PolicyKind::periodic:
      return slot % 10 == 0 ? kActionSenseCommand : kActionSilent;
    case PolicyKind::event: {
      const double thresh = obstacles_detected ? 0.001 : 0.01;
      return estimator::entropy(belief.cov) >= thresh ? kActionSenseCommand : kActionSilent;
    }
    case PolicyKind::gosc:
      break;
  }
  throw std::invalid_argument("baseline_policy: the learned policy needs a network");
}

// ---------------------------------------------------------------------------
// Weight persistence
// ---------------------------------------------------------------------------

void save_qnet(const std::string& path, const QNet& net, const StateNorm& norm) {
  require(net.layers() > 0, "save_qnet: uninitialized network");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_qnet: cannot open '" + path + "' for writing");
  out << "isacsim-qnet v1\n";
  out << "layers " << net.layers() << "\n";
  for (int l = 0; l < net.layers(); ++l)
    out << "shape " << net.w[l].rows() << " " << net.w[l].cols() << "\n";
  char ds[64];
  std::snprintf(ds, sizeof ds, "%.17g", norm.dist_scale);
  out << "norm " << ds << " " << norm.max_slots << "\n";
  out << "data\n";
  std::vector<double> flat;
  for (int l = 0; l < net.layers(); ++l) {
    for (Eigen::Index i = 0; i < net.w[l].rows(); ++i)
      for (Eigen::Index j = 0; j < net.w[l].cols(); ++j) flat.push_back(net.w[l](i, j));
    for (Eigen::Index i = 0; i < net.b[l].size(); ++i) flat.push_back(net.b[l](i));
  }
  out.write(reinterpret_cast<const char*>(flat.data()),
            static_cast<std::streamsize>(flat.size() * sizeof(double)));
  if (!out) throw std::runtime_error("save_qnet: short write to '" + path + "'");
}

void load_qnet(const std::string& path, QNet& net, StateNorm& norm) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_qnet: cannot open '" + path + "'");
  std::string line;
  auto next_line = [&]() {
    if (!std::getline(in, line))
      throw std::runtime_error("load_qnet: truncated header in '" + path + "'");
    return line;
  };
  if (next_line() != "isacsim-qnet v1")
    throw std::runtime_error("load_qnet: '" + path + "' is not a weights file");
  int layers = 0;
  {
    std::istringstream ls(next_line());
    std::string tag;
    if (!(ls >> tag >> layers) || tag != "layers" || layers <= 0)
      throw std::runtime_error("load_qnet: bad layer count in '" + path + "'");
  }
  QNet loaded;
  for (int l = 0; l < layers; ++l) {
    std::istringstream ls(next_line());
    std::string tag;
    long rows = 0, cols = 0;
    if (!(ls >> tag >> rows >> cols) || tag != "shape" || rows <= 0 || cols <= 0)
      throw std::runtime_error("load_qnet: bad shape line in '" + path + "'");
    loaded.w.emplace_back(MatrixXd::Zero(rows, cols));
    loaded.b.emplace_back(VectorXd::Zero(rows));
  }
  StateNorm loaded_norm;
  {
    std::istringstream ls(next_line());
    std::string tag;
    if (!(ls >> tag >> loaded_norm.dist_scale >> loaded_norm.max_slots) || tag != "norm")
      throw std::runtime_error("load_qnet: bad normalization line in '" + path + "'");
  }
  if (next_line() != "data")
    throw std::runtime_error("load_qnet: missing data marker in '" + path + "'");
  size_t total = 0;
  for (const auto& m : loaded.w) total += static_cast<size_t>(m.rows()) * (m.cols() + 1);
  std::vector<double> flat(total);
  in.read(reinterpret_cast<char*>(flat.data()),
          static_cast<std::streamsize>(total * sizeof(double)));
  if (static_cast<size_t>(in.gcount()) != total * sizeof(double))
    throw std::runtime_error("load_qnet: truncated parameter block in '" + path + "'");
  size_t k = 0;
  for (auto l = 0u; l < loaded.w.size(); ++l) {
    for (Eigen::Index i = 0; i < loaded.w[l].rows(); ++i)
      for (Eigen::Index j = 0; j < loaded.w[l].cols(); ++j) loaded.w[l](i, j) = flat[k++];
    for (Eigen::Index i = 0; i < loaded.b[l].size(); ++i) loaded.b[l](i) = flat[k++];
  }
  net = std::move(loaded);
  norm = loaded_norm;
}

}  // namespace isacsim::scheduler
