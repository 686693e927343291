// Python bindings for the simulator's main operations.
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <iostream>
#include <sstream>

#include "isacsim/sim.hpp"

namespace py = pybind11;
using namespace isacsim;

namespace {

std::pair<scheduler::QNet, scheduler::StateNorm> load_weights(const std::string& path) {
  scheduler::QNet net;
  scheduler::StateNorm norm;
  scheduler::load_qnet(path, net, norm);
  return {std::move(net), norm};
}

sim::EpisodeResult run_episode_by_name(const sim::SimConfig& cfg, const std::string& policy,
                                       std::uint64_t seed, bool record_trajectory,
                                       const std::string& weights) {
  const scheduler::PolicyKind kind = scheduler::parse_policy(policy);
  sim::EpisodeOptions opts;
  opts.record_trajectory = record_trajectory;
  opts.inflated_planner = kind == scheduler::PolicyKind::trad;
  scheduler::QNet net;
  scheduler::StateNorm norm;
  const scheduler::QNet* net_ptr = nullptr;
  if (kind == scheduler::PolicyKind::gosc) {
    std::tie(net, norm) = load_weights(weights);
    net_ptr = &net;
    opts.norm = &norm;
  }
  const channel::BeamSynthesizer synth(cfg.radio);
  return sim::run_episode(cfg, synth, sim::make_policy(kind, net_ptr), seed, opts);
}

std::vector<sim::EvalRow> evaluate_by_name(const sim::SimConfig& cfg,
                                           const std::vector<std::string>& policies,
                                           const std::string& weights, bool verbose) {
  std::vector<scheduler::PolicyKind> kinds;
  kinds.reserve(policies.size());
  for (const auto& p : policies) kinds.push_back(scheduler::parse_policy(p));
  scheduler::QNet net;
  scheduler::StateNorm norm;
  const scheduler::QNet* net_ptr = nullptr;
  const scheduler::StateNorm* norm_ptr = nullptr;
  for (const auto k : kinds)
    if (k == scheduler::PolicyKind::gosc) {
      std::tie(net, norm) = load_weights(weights);
      net_ptr = &net;
      norm_ptr = &norm;
      break;
    }
  return sim::evaluate(cfg, kinds, net_ptr, norm_ptr, verbose ? &std::cout : nullptr);
}

std::vector<double> train_by_config(const sim::SimConfig& cfg, const std::string& weights_out,
                                    bool verbose) {
  const sim::TrainResult tr = sim::train_gosc(cfg, verbose ? &std::cout : nullptr);
  if (!weights_out.empty()) scheduler::save_qnet(weights_out, tr.net, tr.norm);
  std::vector<double> rewards;
  rewards.reserve(tr.log.size());
  for (const auto& row : tr.log) rewards.push_back(row.reward);
  return rewards;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "UAV navigation simulator with an ISAC base station";

  // --- configuration ---------------------------------------------------------
  py::class_<channel::RadioConfig>(m, "RadioConfig")
      .def(py::init<>())
      .def_readwrite("antennas", &channel::RadioConfig::antennas)
      .def_readwrite("subcarriers", &channel::RadioConfig::subcarriers)
      .def_readwrite("subcarrier_spacing_hz", &channel::RadioConfig::subcarrier_spacing_hz)
      .def_readwrite("carrier_freq_hz", &channel::RadioConfig::carrier_freq_hz)
      .def_readwrite("tx_power_dbm", &channel::RadioConfig::tx_power_dbm)
      .def_readwrite("noise_psd_dbm_hz", &channel::RadioConfig::noise_psd_dbm_hz)
      .def_readwrite("rcs_m2", &channel::RadioConfig::rcs_m2)
      .def_readwrite("rician_k_db", &channel::RadioConfig::rician_k_db)
      .def_readwrite("cc_repetitions", &channel::RadioConfig::cc_repetitions)
      .def_readwrite("cc_symbols", &channel::RadioConfig::cc_symbols)
      .def_readwrite("beam_grid", &channel::RadioConfig::beam_grid)
      .def_readwrite("confidence_factor", &channel::RadioConfig::confidence_factor)
      .def_readwrite("altitude_m", &channel::RadioConfig::altitude_m)
      .def("wavelength", &channel::RadioConfig::wavelength)
      .def("validate", &channel::RadioConfig::validate);

  py::class_<world::TaskConfig>(m, "TaskConfig")
      .def(py::init<>())
      .def_readwrite("slot_s", &world::TaskConfig::slot_s)
      .def_readwrite("v_max", &world::TaskConfig::v_max)
      .def_readwrite("dv_max", &world::TaskConfig::dv_max)
      .def_readwrite("dphi_max", &world::TaskConfig::dphi_max)
      .def_readwrite("process_noise_var", &world::TaskConfig::process_noise_var)
      .def_readwrite("d_safe", &world::TaskConfig::d_safe)
      .def_readwrite("d_thr", &world::TaskConfig::d_thr)
      .def_readwrite("scan_radius", &world::TaskConfig::scan_radius)
      .def_readwrite("start_x", &world::TaskConfig::start_x)
      .def_readwrite("start_y", &world::TaskConfig::start_y)
      .def_readwrite("dest_x", &world::TaskConfig::dest_x)
      .def_readwrite("dest_y", &world::TaskConfig::dest_y)
      .def_readwrite("n_obstacles", &world::TaskConfig::n_obstacles)
      .def_readwrite("box_min", &world::TaskConfig::box_min)
      .def_readwrite("box_max", &world::TaskConfig::box_max)
      .def_readwrite("obstacle_noise_var", &world::TaskConfig::obstacle_noise_var)
      .def_readwrite("max_slots", &world::TaskConfig::max_slots)
      .def_readwrite("initial_heading", &world::TaskConfig::initial_heading)
      .def("validate", &world::TaskConfig::validate);

  py::class_<planner::PlannerParams>(m, "PlannerParams")
      .def(py::init<>())
      .def_readwrite("horizon", &planner::PlannerParams::horizon)
      .def_readwrite("speed_samples", &planner::PlannerParams::speed_samples)
      .def_readwrite("heading_samples", &planner::PlannerParams::heading_samples)
      .def_readwrite("chi2_thresh", &planner::PlannerParams::chi2_thresh)
      .def_readwrite("confidence_factor", &planner::PlannerParams::confidence_factor);

  py::class_<scheduler::TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("gamma", &scheduler::TrainConfig::gamma)
      .def_readwrite("eps0", &scheduler::TrainConfig::eps0)
      .def_readwrite("capacity", &scheduler::TrainConfig::capacity)
      .def_readwrite("batch", &scheduler::TrainConfig::batch)
      .def_readwrite("lr", &scheduler::TrainConfig::lr)
      .def_readwrite("target_every", &scheduler::TrainConfig::target_every)
      .def_readwrite("collision_penalty", &scheduler::TrainConfig::collision_penalty)
      .def_readwrite("episodes", &scheduler::TrainConfig::episodes);

  py::class_<sim::SimConfig>(m, "SimConfig")
      .def(py::init<>())
      .def_readwrite("radio", &sim::SimConfig::radio)
      .def_readwrite("task", &sim::SimConfig::task)
      .def_readwrite("plan", &sim::SimConfig::plan)
      .def_readwrite("train", &sim::SimConfig::train)
      .def_readwrite("seed", &sim::SimConfig::seed)
      .def_readwrite("eval_seeds", &sim::SimConfig::eval_seeds)
      .def_readwrite("policy", &sim::SimConfig::policy)
      .def_readwrite("out_dir", &sim::SimConfig::out_dir)
      .def("validate", &sim::SimConfig::validate);

  m.def("default_config", &sim::default_config);
  m.def("load_config", &sim::load_config, py::arg("path"));
  m.def(
      "parse_config",
      [](const std::string& text, const std::string& name) {
        std::istringstream in(text);
        return sim::parse_config(in, name);
      },
      py::arg("text"), py::arg("name") = "<string>");
  m.def("serialize_config", &sim::serialize_config, py::arg("config"));

  // --- episode results ---------------------------------------------------------
  py::class_<sim::SlotRecord>(m, "SlotRecord")
      .def_readonly("slot", &sim::SlotRecord::slot)
      .def_readonly("true_x", &sim::SlotRecord::true_x)
      .def_readonly("true_y", &sim::SlotRecord::true_y)
      .def_readonly("belief_x", &sim::SlotRecord::belief_x)
      .def_readonly("belief_y", &sim::SlotRecord::belief_y)
      .def_readonly("det_cov", &sim::SlotRecord::det_cov)
      .def_readonly("action", &sim::SlotRecord::action)
      .def_readonly("cmd_speed", &sim::SlotRecord::cmd_speed)
      .def_readonly("cmd_heading", &sim::SlotRecord::cmd_heading)
      .def_readonly("dist_dest", &sim::SlotRecord::dist_dest)
      .def_readonly("min_obstacle_dist", &sim::SlotRecord::min_obstacle_dist);

  py::class_<sim::EpisodeResult>(m, "EpisodeResult")
      .def_property_readonly(
          "outcome", [](const sim::EpisodeResult& r) { return world::outcome_name(r.outcome); })
      .def_readonly("slots", &sim::EpisodeResult::slots)
      .def_readonly("n_sense", &sim::EpisodeResult::n_sense)
      .def_readonly("n_cc", &sim::EpisodeResult::n_cc)
      .def_readonly("n_tx_slots", &sim::EpisodeResult::n_tx_slots)
      .def_readonly("path_length", &sim::EpisodeResult::path_length)
      .def_readonly("min_obstacle_dist", &sim::EpisodeResult::min_obstacle_dist)
      .def_readonly("reward_sum", &sim::EpisodeResult::reward_sum)
      .def_readonly("trajectory", &sim::EpisodeResult::trajectory);

  py::class_<sim::AggregateMetrics>(m, "AggregateMetrics")
      .def_readonly("episodes", &sim::AggregateMetrics::episodes)
      .def_readonly("successes", &sim::AggregateMetrics::successes)
      .def_readonly("success_rate", &sim::AggregateMetrics::success_rate)
      .def_readonly("mean_signals", &sim::AggregateMetrics::mean_signals)
      .def_readonly("mean_slots", &sim::AggregateMetrics::mean_slots)
      .def_readonly("mean_path_length", &sim::AggregateMetrics::mean_path_length)
      .def_readonly("mean_min_dist", &sim::AggregateMetrics::mean_min_dist)
      .def_readonly("mean_tx_slots", &sim::AggregateMetrics::mean_tx_slots);

  py::class_<sim::EvalRow>(m, "EvalRow")
      .def_property_readonly(
          "policy", [](const sim::EvalRow& r) { return scheduler::policy_name(r.kind); })
      .def_readonly("metrics", &sim::EvalRow::metrics)
      .def_readonly("seeds", &sim::EvalRow::seeds)
      .def_readonly("episodes", &sim::EvalRow::episodes);

  py::class_<sim::Lemma2Result>(m, "Lemma2Result")
      .def_readonly("instances", &sim::Lemma2Result::instances)
      .def_readonly("draws_per_instance", &sim::Lemma2Result::draws_per_instance)
      .def_readonly("aggregate_freq", &sim::Lemma2Result::aggregate_freq)
      .def_readonly("min_instance_freq", &sim::Lemma2Result::min_instance_freq)
      .def_readonly("passed", &sim::Lemma2Result::pass);

  // --- main operations -----------------------------------------------------------
  m.def("run_episode", &run_episode_by_name, py::arg("config"), py::arg("policy"),
        py::arg("seed"), py::arg("record_trajectory") = false, py::arg("weights") = "",
        "Run one episode under the named policy ('gosc' needs a weights path).");
  m.def("evaluate", &evaluate_by_name, py::arg("config"), py::arg("policies"),
        py::arg("weights") = "", py::arg("verbose") = false,
        "Evaluate the named policies on the shared seed list 1..config.eval_seeds.");
  m.def("train", &train_by_config, py::arg("config"), py::arg("weights_out") = "",
        py::arg("verbose") = false,
        "Train the learned transmission policy; returns per-episode rewards.");
  m.def("validate_lemma2", &sim::validate_lemma2, py::arg("instances"),
        py::arg("draws_per_instance"), py::arg("d_safe"), py::arg("seed"),
        "Monte-Carlo check of the collision-threshold safety bound.");

  // --- channel/planner helpers for notebooks and smoke tests ----------------------
  m.def(
      "steering_vector",
      [](double theta, const channel::RadioConfig& cfg) {
        return channel::steering_vector(theta, cfg);
      },
      py::arg("theta"), py::arg("config"));
  m.def(
      "synthesize_beamformer",
      [](double theta_hat, double sigma_theta, const channel::RadioConfig& cfg) {
        return channel::synthesize_beamformer(theta_hat, sigma_theta, cfg).weights;
      },
      py::arg("theta_hat"), py::arg("sigma_theta"), py::arg("config"));
  m.def(
      "sensing_snr",
      [](double r3d, double theta, const Eigen::VectorXcd& f, const channel::RadioConfig& cfg) {
        return channel::sensing_snr(r3d, theta, f, cfg);
      },
      py::arg("r3d"), py::arg("theta"), py::arg("beam"), py::arg("config"));
  m.def("chi_squared_quantile_2dof", &planner::chi_squared_quantile_2dof, py::arg("p"));
  m.def(
      "mahalanobis",
      [](const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Matrix2d& sigma) {
        return planner::mahalanobis(a, b, sigma);
      },
      py::arg("a"), py::arg("b"), py::arg("sigma"));
}
