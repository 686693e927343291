// Command-line driver: train / eval / run / validate-lemma2.
#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "isacsim/sim.hpp"

namespace {

namespace fs = std::filesystem;
using isacsim::scheduler::PolicyKind;

std::string join(const std::string& dir, const std::string& file) {
  return (fs::path(dir) / file).string();
}

isacsim::sim::SimConfig load_or_default(const std::string& config_path) {
  if (config_path.empty()) {
    isacsim::sim::SimConfig cfg = isacsim::sim::default_config();
    cfg.validate();
    return cfg;
  }
  return isacsim::sim::load_config(config_path);
}

void print_metrics(const std::vector<isacsim::sim::EvalRow>& rows) {
  std::printf("%-9s %9s %9s %12s %10s %12s %10s %9s\n", "policy", "success", "signals",
              "tx_slots", "slots", "path_len", "min_dist", "reduction");
  const isacsim::sim::EvalRow* trad = nullptr;
  for (const auto& r : rows)
    if (r.kind == PolicyKind::trad) trad = &r;
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    double red = std::numeric_limits<double>::quiet_NaN();
    if (trad && trad->metrics.mean_signals > 0)
      red = 1.0 - m.mean_signals / trad->metrics.mean_signals;
    std::printf("%-9s %4d/%-4d %9.1f %12.1f %10.1f %12.3f %10.3f %8.1f%%\n",
                isacsim::scheduler::policy_name(r.kind).c_str(), m.successes, m.episodes,
                m.mean_signals, m.mean_tx_slots, m.mean_slots, m.mean_path_length,
                m.mean_min_dist, 100.0 * red);
  }
}

int cmd_train(const std::string& config_path, const CLI::Option* seed_opt, std::uint64_t seed,
              const CLI::Option* episodes_opt, int episodes, const CLI::Option* out_opt,
              const std::string& out, std::string weights) {
  isacsim::sim::SimConfig cfg = load_or_default(config_path);
  if (seed_opt->count()) cfg.seed = seed;
  if (episodes_opt->count()) cfg.train.episodes = episodes;
  if (out_opt->count()) cfg.out_dir = out;
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  if (weights.empty()) weights = join(cfg.out_dir, "gosc_weights.bin");

  const isacsim::sim::TrainResult tr = isacsim::sim::train_gosc(cfg, &std::cout);
  isacsim::scheduler::save_qnet(weights, tr.net, tr.norm);
  isacsim::sim::write_reward_log_csv(join(cfg.out_dir, "reward_log.csv"), tr);

  int successes = 0;
  for (const auto& row : tr.log)
    successes += row.outcome == isacsim::world::Outcome::success ? 1 : 0;
  std::cout << "trained " << tr.log.size() << " episodes (" << successes
            << " successes, warm-up " << tr.warmup_episodes << ")\n"
            << "weights: " << weights << "\n"
            << "reward log: " << join(cfg.out_dir, "reward_log.csv") << "\n";
  return 0;
}

int cmd_eval(const std::string& config_path, const std::string& policy,
             const CLI::Option* seeds_opt, int seeds, std::string weights,
             const CLI::Option* out_opt, const std::string& out) {
  isacsim::sim::SimConfig cfg = load_or_default(config_path);
  if (seeds_opt->count()) cfg.eval_seeds = seeds;
  if (out_opt->count()) cfg.out_dir = out;
  cfg.validate();
  fs::create_directories(cfg.out_dir);

  std::vector<PolicyKind> kinds;
  if (policy == "all") {
    kinds = {PolicyKind::trad, PolicyKind::periodic, PolicyKind::event, PolicyKind::gosc};
  } else {
    std::stringstream ss(policy);
    for (std::string tok; std::getline(ss, tok, ',');)
      if (!tok.empty()) kinds.push_back(isacsim::scheduler::parse_policy(tok));
    if (kinds.empty()) throw std::runtime_error("--policy lists no policies");
  }

  isacsim::scheduler::QNet net;
  isacsim::scheduler::StateNorm norm;
  bool have_net = false;
  if (std::find(kinds.begin(), kinds.end(), PolicyKind::gosc) != kinds.end()) {
    if (weights.empty()) weights = join(cfg.out_dir, "gosc_weights.bin");
    if (!fs::exists(weights))
      throw std::runtime_error("weights file '" + weights +
                               "' not found; train first or pass --weights");
    isacsim::scheduler::load_qnet(weights, net, norm);
    have_net = true;
  }

  const std::vector<isacsim::sim::EvalRow> rows = isacsim::sim::evaluate(
      cfg, kinds, have_net ? &net : nullptr, have_net ? &norm : nullptr, &std::cout);
  isacsim::sim::write_metrics_csv(join(cfg.out_dir, "metrics.csv"), rows);
  isacsim::sim::write_episodes_jsonl(join(cfg.out_dir, "episodes.jsonl"), rows);
  print_metrics(rows);
  std::cout << "wrote " << join(cfg.out_dir, "metrics.csv") << " and "
            << join(cfg.out_dir, "episodes.jsonl") << "\n";
  return 0;
}

int cmd_run(const std::string& config_path, const CLI::Option* seed_opt, std::uint64_t seed,
            const std::string& policy, std::string weights, const CLI::Option* out_opt,
            const std::string& out) {
  isacsim::sim::SimConfig cfg = load_or_default(config_path);
  if (out_opt->count()) cfg.out_dir = out;
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  const std::uint64_t episode_seed = seed_opt->count() ? seed : cfg.seed;
  const PolicyKind kind = isacsim::scheduler::parse_policy(policy);

  isacsim::scheduler::QNet net;
  isacsim::scheduler::StateNorm norm;
  isacsim::sim::EpisodeOptions opts;
  opts.record_trajectory = true;
  opts.inflated_planner = kind == PolicyKind::trad;
  if (kind == PolicyKind::gosc) {
    if (weights.empty()) weights = join(cfg.out_dir, "gosc_weights.bin");
    if (!fs::exists(weights))
      throw std::runtime_error("weights file '" + weights +
                               "' not found; train first or pass --weights");
    isacsim::scheduler::load_qnet(weights, net, norm);
    opts.norm = &norm;
  }

  const isacsim::channel::BeamSynthesizer synth(cfg.radio);
  const isacsim::sim::ActionFn action = isacsim::sim::make_policy(
      kind, kind == PolicyKind::gosc ? &net : nullptr);
  const isacsim::sim::EpisodeResult res =
      isacsim::sim::run_episode(cfg, synth, action, episode_seed, opts);

  const std::string traj_path = join(cfg.out_dir, "trajectory.csv");
  isacsim::sim::write_trajectory_csv(traj_path, res);
  std::cout << "policy " << isacsim::scheduler::policy_name(kind) << ", seed " << episode_seed
            << ": " << isacsim::world::outcome_name(res.outcome) << " after " << res.slots
            << " slots, " << res.n_sense + res.n_cc << " signals ("
            << res.n_tx_slots << " transmission slots), path "
            << res.path_length << " m, min obstacle distance " << res.min_obstacle_dist
            << " m\n"
            << "trajectory: " << traj_path << "\n";
  return 0;
}

int cmd_lemma2(const std::string& config_path, int instances, long long draws,
               std::uint64_t seed, const CLI::Option* out_opt, const std::string& out) {
  isacsim::sim::SimConfig cfg = load_or_default(config_path);
  if (out_opt->count()) cfg.out_dir = out;
  cfg.validate();
  fs::create_directories(cfg.out_dir);

  const isacsim::sim::Lemma2Result res =
      isacsim::sim::validate_lemma2(instances, draws, cfg.task.d_safe, seed);

  const std::string detail_path = join(cfg.out_dir, "lemma2.csv");
  std::ofstream detail(detail_path);
  if (!detail) throw std::runtime_error("cannot open '" + detail_path + "' for writing");
  detail << "instance,mahal,threshold,freq\n";
  for (size_t k = 0; k < res.detail.size(); ++k)
    detail << k << ',' << res.detail[k].mahal << ',' << res.detail[k].threshold << ','
           << res.detail[k].freq << '\n';

  std::cout << "safety-bound Monte-Carlo: " << res.instances << " instances x "
            << res.draws_per_instance << " paired draws\n"
            << "aggregate P(separation > d_safe) = " << res.aggregate_freq
            << " (min instance " << res.min_instance_freq << ", required >= 0.99)\n"
            << "detail: " << detail_path << "\n"
            << (res.pass ? "PASS" : "FAIL") << "\n";
  return res.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ISAC base-station + UAV navigation simulator"};
  app.require_subcommand(1);

  std::string config_path, weights, out, policy;
  std::uint64_t seed = 0;
  int episodes = 0, seeds = 0, instances = 50;
  long long draws = 2000;

  auto* train = app.add_subcommand("train", "train the learned transmission policy");
  train->add_option("--config", config_path, "config file (key = value)");
  auto* train_seed = train->add_option("--seed", seed, "master training seed");
  auto* train_eps = train->add_option("--episodes", episodes, "training episode count");
  auto* train_out = train->add_option("--out", out, "output directory");
  train->add_option("--weights", weights, "weights output path");

  auto* eval = app.add_subcommand("eval", "evaluate policies on the shared seed list");
  eval->add_option("--config", config_path, "config file (key = value)");
  eval->add_option("--policy", policy, "comma-separated list of gosc|trad|periodic|event, or all")
      ->default_val("all");
  auto* eval_seeds = eval->add_option("--seeds", seeds, "number of evaluation seeds");
  eval->add_option("--weights", weights, "trained weights for the learned policy");
  auto* eval_out = eval->add_option("--out", out, "output directory");

  auto* run = app.add_subcommand("run", "run one episode and dump its trajectory");
  run->add_option("--config", config_path, "config file (key = value)");
  auto* run_seed = run->add_option("--seed", seed, "episode seed");
  run->add_option("--policy", policy, "gosc|trad|periodic|event")->default_val("trad");
  run->add_option("--weights", weights, "trained weights for the learned policy");
  auto* run_out = run->add_option("--out", out, "output directory");

  auto* lemma = app.add_subcommand("validate-lemma2", "Monte-Carlo safety-bound check");
  lemma->add_option("--config", config_path, "config file (key = value)");
  lemma->add_option("--instances", instances, "covariance/offset instances")->default_val(50);
  lemma->add_option("--draws", draws, "paired draws per instance")->default_val(2000);
  auto* lemma_seed = lemma->add_option("--seed", seed, "Monte-Carlo seed");
  auto* lemma_out = lemma->add_option("--out", out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed())
      return cmd_train(config_path, train_seed, seed, train_eps, episodes, train_out, out,
                       weights);
    if (eval->parsed())
      return cmd_eval(config_path, policy, eval_seeds, seeds, weights, eval_out, out);
    if (run->parsed())
      return cmd_run(config_path, run_seed, seed, policy, weights, run_out, out);
    if (lemma->parsed())
      return cmd_lemma2(config_path, instances, draws, lemma_seed->count() ? seed : 1, lemma_out,
                        out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
