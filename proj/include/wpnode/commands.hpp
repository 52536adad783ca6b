#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "wpnode/errors.hpp"
#include "wpnode/evaluate.hpp"
#include "wpnode/presets.hpp"
#include "wpnode/train.hpp"
#include "wpnode/trajectory.hpp"

namespace wpnode {

inline constexpr const char* kToolkitVersion = "0.1.0";

namespace detail {

inline std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + dir + ": " + ec.message());
}

inline void write_manifest(const std::string& out_dir, const std::string& command,
                           nlohmann::json config, std::vector<std::string> inputs,
                           std::vector<std::string> outputs, double wall_s) {
  nlohmann::json j{{"command", command},
                   {"config", std::move(config)},
                   {"inputs", std::move(inputs)},
                   {"outputs", std::move(outputs)},
                   {"toolkit_version", kToolkitVersion},
                   {"wall_time_s", wall_s}};
  std::ofstream out(join(out_dir, "manifest.json"));
  if (!out) throw std::runtime_error("cannot write manifest in " + out_dir);
  out << j.dump(1) << "\n";
}

inline double default_duration(SystemKind kind) {
  switch (kind) {
    case SystemKind::l63: return 100.0;
    case SystemKind::l96: return 1000.0;
    case SystemKind::ks: return 25000.0;
  }
  return 100.0;
}

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

}  // namespace detail

// ---- generate ---------------------------------------------------------------

struct GenerateOptions {
  std::string system = "l63";
  double duration = -1.0;  // default: canonical run length per system
  double noise = 0.0;
  uint64_t seed = 0;
  int burn_in = -1;
  std::string out_dir = ".";
};

inline void cmd_generate(const GenerateOptions& opt) {
  detail::Timer timer;
  SystemSpec spec;
  const SystemKind kind = system_kind_from_string(opt.system);
  switch (kind) {
    case SystemKind::l63: spec = SystemSpec::lorenz63(); break;
    case SystemKind::l96: spec = SystemSpec::lorenz96(); break;
    case SystemKind::ks: spec = SystemSpec::kuramoto_sivashinsky(); break;
  }
  const double duration = opt.duration > 0 ? opt.duration : detail::default_duration(kind);
  detail::ensure_dir(opt.out_dir);

  const Trajectory clean = generate_dataset(spec, duration, opt.burn_in, opt.seed);
  const Trajectory noisy = add_noise(clean, opt.noise, opt.seed);
  const std::string clean_path = detail::join(opt.out_dir, opt.system + "_clean.f64");
  const std::string noisy_path = detail::join(opt.out_dir, opt.system + "_noisy.f64");
  save_trajectory(clean_path, clean);
  save_trajectory(noisy_path, noisy);

  detail::write_manifest(opt.out_dir, "generate",
                         nlohmann::json{{"system", opt.system},
                                        {"duration", duration},
                                        {"noise", opt.noise},
                                        {"seed", opt.seed},
                                        {"burn_in", clean.burn_in},
                                        {"spec", to_json(spec)}},
                         {}, {clean_path, noisy_path}, timer.seconds());
  std::cout << "generate: wrote " << clean.n() << " x " << clean.d() << " samples to "
            << opt.out_dir << "\n";
}

// ---- train ------------------------------------------------------------------

struct TrainCliOptions {
  std::string preset_name;  // either a registry preset ...
  std::string config_file;  // ... or a JSON experiment file
  std::string data_dir = ".";
  std::string out_dir = ".";
  // overrides; sentinel values keep the preset's setting
  std::string loss_mode;
  int rollout_steps = -1;
  double lambda = -1.0;
  int max_epochs = -1;
  int batch_size = -1;
  int subdomain_size = -1;
  long subdomain_count = 0;
  int test_function_order = -1;
  double lr = -1.0;
  double duration = -1.0;  // truncate the training signal, seconds
  std::vector<int> hidden;
  std::optional<uint64_t> seed;
  bool desk_scale = false;  // reduced-scale run lengths and epoch budget
};

inline ExperimentPreset resolve_experiment(const TrainCliOptions& opt) {
  ExperimentPreset exp;
  if (!opt.config_file.empty()) {
    std::ifstream in(opt.config_file);
    if (!in) throw config_error("cannot open config file: " + opt.config_file);
    nlohmann::json j;
    in >> j;
    exp = preset_from_json(j);
  } else if (!opt.preset_name.empty()) {
    exp = preset(opt.preset_name);
  } else {
    throw config_error("train: need --preset or --config");
  }

  if (!opt.loss_mode.empty()) {
    exp.train.loss_mode = loss_mode_from_string(opt.loss_mode);
    // switching mode implies the matching schedule defaults
    if (exp.train.loss_mode == LossMode::strong) {
      if (exp.train.rollout_steps < 2) exp.train.rollout_steps = 25;
      exp.train.scheduler_patience = 10;
      exp.train.early_stop_patience = 30;
    }
  }
  if (opt.rollout_steps > 0) exp.train.rollout_steps = opt.rollout_steps;
  if (opt.lambda >= 0) exp.train.lambda = opt.lambda;
  if (opt.max_epochs > 0) exp.train.max_epochs = opt.max_epochs;
  if (opt.batch_size > 0) exp.train.batch_size = opt.batch_size;
  if (opt.subdomain_size > 0) exp.train.subdomain_size = opt.subdomain_size;
  if (opt.subdomain_count != 0) exp.train.subdomain_count = int(opt.subdomain_count);
  if (opt.test_function_order > 0) exp.train.test_function_order = opt.test_function_order;
  if (opt.lr >= 0) exp.train.lr_init = opt.lr;
  if (!opt.hidden.empty()) exp.train.hidden = opt.hidden;
  if (opt.seed) exp.train.seed = *opt.seed;
  if (opt.duration > 0) exp.duration = opt.duration;

  if (opt.desk_scale) {
    // reduced-scale defaults: 2e4 samples for the big systems, shorter budget
    if (exp.system.kind == SystemKind::l96) exp.duration = std::min(exp.duration, 200.0);
    if (exp.system.kind == SystemKind::ks) exp.duration = std::min(exp.duration, 5000.0);
    if (exp.train.loss_mode != LossMode::strong)
      exp.train.max_epochs = std::min(exp.train.max_epochs, 2000);
    if (opt.max_epochs > 0) exp.train.max_epochs = opt.max_epochs;
  }
  exp.train.validate();
  return exp;
}

inline Trajectory load_training_series(const ExperimentPreset& exp, const std::string& data_dir,
                                       std::string* path_out = nullptr) {
  const std::string path =
      detail::join(data_dir, to_string(exp.system.kind) + "_noisy.f64");
  if (!std::filesystem::exists(path))
    throw config_error("training data not found: " + path + " (run the generate command first)");
  Trajectory series = load_trajectory(path);
  if (std::abs(series.sigma_nr - exp.sigma_nr) > 1e-12)
    throw config_error("data noise " + std::to_string(series.sigma_nr) +
                       " does not match the experiment's " + std::to_string(exp.sigma_nr));
  const int want = int(std::llround(exp.duration / series.dt));
  if (want > series.n())
    throw config_error("training data too short: have " + std::to_string(series.n()) +
                       " samples, experiment wants " + std::to_string(want));
  if (want < series.n()) {
    Mat truncated(want, series.d());
    std::copy(series.states.data(), series.states.data() + size_t(want) * series.d(),
              truncated.data());
    series.states = std::move(truncated);
  }
  if (path_out) *path_out = path;
  return series;
}

inline nlohmann::json checkpoint_meta(const ExperimentPreset& exp, const MinMaxScaler& scaler,
                                      const std::string& data_path, const TrainReport& report) {
  return nlohmann::json{{"system", to_json(exp.system)},
                        {"scaler", scaler.to_json()},
                        {"train_config", to_json(exp.train)},
                        {"preset", exp.name},
                        {"sigma_nr", exp.sigma_nr},
                        {"duration", exp.duration},
                        {"kl_duration", exp.kl_duration},
                        {"horizon_lyap", exp.horizon_lyap},
                        {"n_starts", exp.n_starts},
                        {"data_file", data_path},
                        {"stopped_epoch", report.stopped_epoch},
                        {"best_epoch", report.best_epoch},
                        {"best_val", report.best_val},
                        {"toolkit_version", kToolkitVersion}};
}

inline void cmd_train(const TrainCliOptions& opt) {
  detail::Timer timer;
  const ExperimentPreset exp = resolve_experiment(opt);
  std::string data_path;
  const Trajectory series = load_training_series(exp, opt.data_dir, &data_path);
  detail::ensure_dir(opt.out_dir);

  const TrainResult result = train(exp.train, series);

  const std::string ckpt_path = detail::join(opt.out_dir, "checkpoint.json");
  const std::string hist_path = detail::join(opt.out_dir, "history.csv");
  save_checkpoint(ckpt_path, result.params,
                  checkpoint_meta(exp, result.scaler, data_path, result.report));
  write_history_csv(hist_path, result.report);
  detail::write_manifest(opt.out_dir, "train", to_json(exp), {data_path},
                         {ckpt_path, hist_path}, timer.seconds());
  std::cout << "train: " << exp.name << " stopped at epoch " << result.report.stopped_epoch
            << " (best " << result.report.best_epoch << ", val " << result.report.best_val
            << ", " << timer.seconds() << " s)\n";
}

// ---- evaluate ---------------------------------------------------------------

struct EvaluateCliOptions {
  std::string checkpoint;
  std::string data_dir = ".";
  std::string out_dir = ".";
  std::string solver = "dopri5";
  int n_starts = -1;          // default: the checkpoint's experiment setting
  double horizon_lyap = -1.0;
  double kl_duration = -1.0;
  int bins = 50;
  uint64_t seed = 0;
  bool run_solver_sweep = false;
  double sweep_duration = -1.0;
};

inline void cmd_evaluate(const EvaluateCliOptions& opt) {
  detail::Timer timer;
  nlohmann::json meta;
  const ParamSet params = load_checkpoint(opt.checkpoint, &meta);
  if (!meta.contains("system") || !meta.contains("scaler"))
    throw config_error("checkpoint lacks system/scaler metadata: " + opt.checkpoint);
  const SystemSpec sys = system_from_json(meta.at("system"));
  const MinMaxScaler scaler = MinMaxScaler::from_json(meta.at("scaler"));
  const ScaledMlpField field(params, scaler);

  const std::string clean_path =
      detail::join(opt.data_dir, to_string(sys.kind) + "_clean.f64");
  if (!std::filesystem::exists(clean_path))
    throw config_error("clean reference not found: " + clean_path);
  const Trajectory clean = load_trajectory(clean_path);

  EvalOptions eopt;
  eopt.n_starts = opt.n_starts > 0 ? opt.n_starts : meta.value("n_starts", 30);
  eopt.horizon_lyap = opt.horizon_lyap > 0 ? opt.horizon_lyap : meta.value("horizon_lyap", 10.0);
  eopt.kl_duration = opt.kl_duration > 0 ? opt.kl_duration : meta.value("kl_duration", 100.0);
  eopt.bins = opt.bins;
  eopt.solver = solver_from_string(opt.solver);
  eopt.seed = opt.seed;

  const int horizon_steps = int(std::floor(eopt.horizon_lyap / (sys.lyapunov * sys.dt)));
  const int kl_steps = int(std::llround(eopt.kl_duration / sys.dt));
  const Trajectory reference = continue_trajectory(clean, kl_steps + horizon_steps + 2);

  detail::ensure_dir(opt.out_dir);
  Mat kl_run;
  const EvalReport report = evaluate_model(field, sys, reference.states, eopt, &kl_run);

  const std::string report_path = detail::join(opt.out_dir, "eval_report.json");
  save_eval_report(report_path, report);
  std::vector<std::string> outputs = {report_path};

  const auto ranges = union_ranges(column_ranges(reference.states), column_ranges(kl_run));
  const auto h_ref = histogram_per_dim(reference.states, eopt.bins, ranges);
  const auto h_pred = histogram_per_dim(kl_run, eopt.bins, ranges);
  const std::string ref_csv = detail::join(opt.out_dir, "hist_reference.csv");
  const std::string pred_csv = detail::join(opt.out_dir, "hist_prediction.csv");
  export_histograms_csv(ref_csv, h_ref, "reference");
  export_histograms_csv(pred_csv, h_pred, "prediction");
  outputs.push_back(ref_csv);
  outputs.push_back(pred_csv);

  if (sys.kind == SystemKind::ks) {
    const double dx = sys.domain_length / sys.nx;
    const std::string jr = detail::join(opt.out_dir, "joint_reference.csv");
    const std::string jp = detail::join(opt.out_dir, "joint_prediction.csv");
    export_joint_histogram_csv(jr, joint_gradient_histogram(reference.states, dx, opt.bins),
                               "reference");
    export_joint_histogram_csv(jp, joint_gradient_histogram(kl_run, dx, opt.bins), "prediction");
    outputs.push_back(jr);
    outputs.push_back(jp);
  }

  if (opt.run_solver_sweep) {
    const std::vector<SolverKind> solvers = {SolverKind::euler, SolverKind::midpoint,
                                             SolverKind::rk4, SolverKind::bosh3,
                                             SolverKind::dopri5};
    const double duration = opt.sweep_duration > 0 ? opt.sweep_duration : eopt.kl_duration;
    const std::vector<double> u0(reference.states.row(0),
                                 reference.states.row(0) + reference.d());
    const auto densities = solver_sweep(field, sys, u0, duration, solvers, eopt.bins);
    nlohmann::json kl_table = nlohmann::json::array();
    for (size_t a = 0; a < densities.size(); ++a) {
      const std::string csv =
          detail::join(opt.out_dir, "hist_solver_" + to_string(densities[a].solver) + ".csv");
      if (!densities[a].per_dim.empty())
        export_histograms_csv(csv, densities[a].per_dim, to_string(densities[a].solver));
      outputs.push_back(csv);
      if (densities[a].blew_up)
        std::cerr << "warning: solver " << to_string(densities[a].solver)
                  << " blew up during the sweep\n";
      for (size_t b = 0; b < densities.size(); ++b) {
        if (a == b || densities[a].per_dim.empty() || densities[b].per_dim.empty()) continue;
        double kl_acc = 0.0;
        for (size_t j = 0; j < densities[a].per_dim.size(); ++j)
          kl_acc += kl_divergence(densities[a].per_dim[j], densities[b].per_dim[j]);
        kl_table.push_back(nlohmann::json{{"a", to_string(densities[a].solver)},
                                          {"b", to_string(densities[b].solver)},
                                          {"kl_mean", kl_acc / densities[a].per_dim.size()}});
      }
    }
    std::ofstream kl_out(detail::join(opt.out_dir, "solver_pairwise_kl.json"));
    kl_out << kl_table.dump(1) << "\n";
    outputs.push_back(detail::join(opt.out_dir, "solver_pairwise_kl.json"));
  }

  detail::write_manifest(opt.out_dir, "evaluate",
                         nlohmann::json{{"checkpoint", opt.checkpoint},
                                        {"solver", opt.solver},
                                        {"n_starts", eopt.n_starts},
                                        {"horizon_lyap", eopt.horizon_lyap},
                                        {"kl_duration", eopt.kl_duration},
                                        {"bins", eopt.bins},
                                        {"seed", eopt.seed},
                                        {"solver_sweep", opt.run_solver_sweep}},
                         {opt.checkpoint, clean_path}, outputs, timer.seconds());
  std::cout << "evaluate: VPT " << report.vpt_mean << " +- " << report.vpt_std << " (Lyapunov times), KL "
            << report.kl_mean << (report.kl_valid ? "" : " [invalid: blowup]") << ", "
            << report.blowups << " blowups\n";
}

// ---- compare ----------------------------------------------------------------

struct CompareOptions {
  std::vector<std::string> checkpoints;
  std::string out_csv = "comparison.csv";
};

inline void cmd_compare(const CompareOptions& opt) {
  if (opt.checkpoints.size() < 2)
    throw config_error("compare: need at least two checkpoints");
  struct Row {
    std::string method;
    double noise;
    double vpt_mean, vpt_std, kl_mean;
  };
  std::vector<Row> rows;
  for (const std::string& ckpt : opt.checkpoints) {
    nlohmann::json meta;
    load_checkpoint(ckpt, &meta);
    const std::string report_path =
        detail::join(std::filesystem::path(ckpt).parent_path().string(), "eval_report.json");
    if (!std::filesystem::exists(report_path))
      throw config_error("compare: missing evaluation report " + report_path +
                         " (run the evaluate command first)");
    std::ifstream in(report_path);
    nlohmann::json rep;
    in >> rep;
    Row row;
    row.method = meta.contains("train_config")
                     ? meta.at("train_config").value("loss_mode", std::string("?"))
                     : "?";
    row.noise = meta.value("sigma_nr", 0.0);
    row.vpt_mean = rep.at("vpt_mean").get<double>();
    row.vpt_std = rep.at("vpt_std").get<double>();
    row.kl_mean = rep.at("kl_mean").get<double>();
    rows.push_back(std::move(row));
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return a.method != b.method ? a.method < b.method : a.noise < b.noise;
  });
  std::ofstream out(opt.out_csv);
  if (!out) throw std::runtime_error("cannot open for writing: " + opt.out_csv);
  out << "method,noise,vpt_mean,vpt_std,kl_mean\n";
  out.precision(12);
  for (const Row& r : rows)
    out << r.method << "," << r.noise << "," << r.vpt_mean << "," << r.vpt_std << ","
        << r.kl_mean << "\n";
  std::cout << "compare: wrote " << rows.size() << " rows to " << opt.out_csv << "\n";
}

// ---- sweep ------------------------------------------------------------------

struct SweepOptions {
  std::string axis;  // layers | M | signal_length | batch | K | p | rollouts | lambda
  std::vector<double> values;
  std::string preset_name;
  std::string config_file;
  std::string data_dir = ".";
  std::string out_dir = ".";
  int jobs = 1;
  int n_starts = 10;
  int max_epochs = -1;
  double duration = -1.0;
  uint64_t seed = 0;
};

inline void apply_sweep_axis(ExperimentPreset& exp, const std::string& axis, double value) {
  if (axis == "layers") {
    const int n = int(value);
    if (n < 1) throw config_error("sweep: layer count must be >= 1");
    exp.train.hidden.assign(n, exp.train.hidden.front());
  } else if (axis == "M") {
    exp.train.subdomain_size = int(value);
  } else if (axis == "signal_length") {
    exp.duration = value;
  } else if (axis == "batch") {
    exp.train.batch_size = int(value);
  } else if (axis == "K") {
    exp.train.subdomain_count = int(value);
  } else if (axis == "p") {
    exp.train.test_function_order = int(value);
  } else if (axis == "rollouts") {
    exp.train.rollout_steps = int(value);
  } else if (axis == "lambda") {
    exp.train.lambda = value;
  } else {
    throw config_error("sweep: unknown axis " + axis +
                       " (expected layers, M, signal_length, batch, K, p, rollouts or lambda)");
  }
}

inline void cmd_sweep(const SweepOptions& opt) {
  detail::Timer timer;
  if (opt.values.empty()) throw config_error("sweep: no values given");
  detail::ensure_dir(opt.out_dir);

  struct PointResult {
    double value = 0.0;
    std::string status = "failed";
    std::string message;
    double vpt_mean = std::numeric_limits<double>::quiet_NaN();
    double vpt_std = std::numeric_limits<double>::quiet_NaN();
    double kl_mean = std::numeric_limits<double>::quiet_NaN();
  };
  std::vector<PointResult> results(opt.values.size());

  auto run_point = [&](size_t i) {
    PointResult& res = results[i];
    res.value = opt.values[i];
    std::ostringstream dir_name;
    dir_name << "point_" << i << "_" << opt.axis << "_" << opt.values[i];
    const std::string point_dir = detail::join(opt.out_dir, dir_name.str());
    try {
      TrainCliOptions topt;
      topt.preset_name = opt.preset_name;
      topt.config_file = opt.config_file;
      topt.data_dir = opt.data_dir;
      topt.out_dir = point_dir;
      topt.max_epochs = opt.max_epochs;
      topt.duration = opt.duration;
      topt.seed = opt.seed;

      ExperimentPreset exp = resolve_experiment(topt);
      apply_sweep_axis(exp, opt.axis, opt.values[i]);
      exp.train.validate();
      std::string data_path;
      const Trajectory series = load_training_series(exp, opt.data_dir, &data_path);
      detail::ensure_dir(point_dir);
      const TrainResult trained = train(exp.train, series);
      save_checkpoint(detail::join(point_dir, "checkpoint.json"), trained.params,
                      checkpoint_meta(exp, trained.scaler, data_path, trained.report));
      write_history_csv(detail::join(point_dir, "history.csv"), trained.report);

      EvaluateCliOptions eopt;
      eopt.checkpoint = detail::join(point_dir, "checkpoint.json");
      eopt.data_dir = opt.data_dir;
      eopt.out_dir = point_dir;
      eopt.n_starts = opt.n_starts;
      cmd_evaluate(eopt);

      std::ifstream in(detail::join(point_dir, "eval_report.json"));
      nlohmann::json rep;
      in >> rep;
      res.vpt_mean = rep.at("vpt_mean").get<double>();
      res.vpt_std = rep.at("vpt_std").get<double>();
      res.kl_mean = rep.at("kl_mean").get<double>();
      res.status = "ok";
    } catch (const std::exception& e) {
      res.status = "failed";
      res.message = e.what();
      std::cerr << "sweep point " << opt.axis << " = " << opt.values[i]
                << " failed: " << e.what() << "\n";
    }
  };

  const int jobs = std::max(1, opt.jobs);
  if (jobs == 1) {
    for (size_t i = 0; i < opt.values.size(); ++i) run_point(i);
  } else {
    std::vector<std::thread> pool;
    std::mutex next_mutex;
    size_t next = 0;
    for (int t = 0; t < std::min<size_t>(jobs, opt.values.size()); ++t)
      pool.emplace_back([&] {
        while (true) {
          size_t i;
          {
            std::lock_guard<std::mutex> lock(next_mutex);
            if (next >= opt.values.size()) return;
            i = next++;
          }
          run_point(i);
        }
      });
    for (auto& th : pool) th.join();
  }

  const std::string csv_path = detail::join(opt.out_dir, "sweep_" + opt.axis + ".csv");
  std::ofstream out(csv_path);
  if (!out) throw std::runtime_error("cannot open for writing: " + csv_path);
  out << "axis,value,status,vpt_mean,vpt_std,kl_mean\n";
  out.precision(12);
  for (const PointResult& r : results)
    out << opt.axis << "," << r.value << "," << r.status << "," << r.vpt_mean << ","
        << r.vpt_std << "," << r.kl_mean << "\n";

  detail::write_manifest(opt.out_dir, "sweep",
                         nlohmann::json{{"axis", opt.axis},
                                        {"values", opt.values},
                                        {"preset", opt.preset_name},
                                        {"config_file", opt.config_file},
                                        {"jobs", opt.jobs},
                                        {"n_starts", opt.n_starts},
                                        {"max_epochs", opt.max_epochs},
                                        {"duration", opt.duration},
                                        {"seed", opt.seed}},
                         {}, {csv_path}, timer.seconds());
  std::cout << "sweep: " << opt.values.size() << " points -> " << csv_path << "\n";
}

}  // namespace wpnode
