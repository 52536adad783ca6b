#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "wpnode/adam.hpp"
#include "wpnode/errors.hpp"
#include "wpnode/losses.hpp"
#include "wpnode/scaling.hpp"
#include "wpnode/trajectory.hpp"
#include "wpnode/windows.hpp"

namespace wpnode {

enum class LossMode { strong, weak, wp };

inline std::string to_string(LossMode m) {
  switch (m) {
    case LossMode::strong: return "strong";
    case LossMode::weak: return "weak";
    case LossMode::wp: return "wp";
  }
  return "?";
}

inline LossMode loss_mode_from_string(const std::string& s) {
  if (s == "strong") return LossMode::strong;
  if (s == "weak") return LossMode::weak;
  if (s == "wp") return LossMode::wp;
  throw config_error("unknown loss mode: " + s + " (expected strong, weak or wp)");
}

// Every knob of data prep, loss composition, optimizer and schedule.
struct TrainConfig {
  LossMode loss_mode = LossMode::wp;
  int rollout_steps = 1;  // forward transitions per rollout window
  double lambda = 0.5;
  int subdomain_size = 60;   // M
  int subdomain_count = -1;  // K; -1 derives floor(N/2)
  int test_function_order = 16;  // p
  int batch_size = 1024;
  double lr_init = 0.02;
  double scheduler_factor = 0.5;
  int scheduler_patience = 200;
  int max_epochs = 20000;
  int early_stop_patience = 1000;
  uint64_t seed = 0;
  SolverKind rollout_solver = SolverKind::rk4;
  std::vector<int> hidden = {64};
  double val_fraction = 0.1;
  double min_lr = 1e-5;
  double blowup_epoch_fraction = 0.01;  // tolerated fraction of skipped batches

  void validate() const {
    if (loss_mode == LossMode::strong && rollout_steps < 2)
      throw config_error("TrainConfig: strong mode needs rollout_steps >= 2");
    if (loss_mode == LossMode::wp && (rollout_steps < 1 || rollout_steps > 25))
      throw config_error("TrainConfig: wp mode needs 1 <= rollout_steps <= 25");
    if (loss_mode != LossMode::weak && lambda < 0)
      throw config_error("TrainConfig: lambda must be >= 0");
    if (subdomain_size < 2) throw config_error("TrainConfig: subdomain size must be >= 2");
    if (batch_size < 1) throw config_error("TrainConfig: batch size must be >= 1");
    if (lr_init < 0) throw config_error("TrainConfig: initial learning rate must be >= 0");
    if (max_epochs < 1) throw config_error("TrainConfig: max_epochs must be >= 1");
    if (val_fraction <= 0 || val_fraction >= 0.5)
      throw config_error("TrainConfig: val_fraction must be in (0, 0.5)");
    if (hidden.empty()) throw config_error("TrainConfig: need at least one hidden layer width");
    for (int h : hidden)
      if (h < 1) throw config_error("TrainConfig: hidden widths must be positive");
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return nlohmann::json{{"loss_mode", to_string(c.loss_mode)},
                        {"rollout_steps", c.rollout_steps},
                        {"lambda", c.lambda},
                        {"subdomain_size", c.subdomain_size},
                        {"subdomain_count", c.subdomain_count},
                        {"test_function_order", c.test_function_order},
                        {"batch_size", c.batch_size},
                        {"lr_init", c.lr_init},
                        {"scheduler_factor", c.scheduler_factor},
                        {"scheduler_patience", c.scheduler_patience},
                        {"max_epochs", c.max_epochs},
                        {"early_stop_patience", c.early_stop_patience},
                        {"seed", c.seed},
                        {"rollout_solver", to_string(c.rollout_solver)},
                        {"hidden", c.hidden},
                        {"val_fraction", c.val_fraction},
                        {"min_lr", c.min_lr},
                        {"blowup_epoch_fraction", c.blowup_epoch_fraction}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.loss_mode = loss_mode_from_string(j.value("loss_mode", to_string(c.loss_mode)));
  c.rollout_steps = j.value("rollout_steps", c.rollout_steps);
  c.lambda = j.value("lambda", c.lambda);
  c.subdomain_size = j.value("subdomain_size", c.subdomain_size);
  c.subdomain_count = j.value("subdomain_count", c.subdomain_count);
  c.test_function_order = j.value("test_function_order", c.test_function_order);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr_init = j.value("lr_init", c.lr_init);
  c.scheduler_factor = j.value("scheduler_factor", c.scheduler_factor);
  c.scheduler_patience = j.value("scheduler_patience", c.scheduler_patience);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
  c.seed = j.value("seed", c.seed);
  c.rollout_solver = solver_from_string(j.value("rollout_solver", to_string(c.rollout_solver)));
  c.hidden = j.value("hidden", c.hidden);
  c.val_fraction = j.value("val_fraction", c.val_fraction);
  c.min_lr = j.value("min_lr", c.min_lr);
  c.blowup_epoch_fraction = j.value("blowup_epoch_fraction", c.blowup_epoch_fraction);
  return c;
}

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::vector<double> lr;
  int stopped_epoch = 0;
  int best_epoch = 0;
  double best_val = 0.0;
  double wall_time_s = 0.0;
  int skipped_batches = 0;
};

struct train_divergence_error : training_error {
  TrainReport partial;
  explicit train_divergence_error(const std::string& msg, TrainReport r)
      : training_error(msg), partial(std::move(r)) {}
};

struct TrainResult {
  ParamSet params;
  MinMaxScaler scaler;
  TrainReport report;
};

inline void write_history_csv(const std::string& path, const TrainReport& r) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "epoch,train_loss,val_loss,lr\n";
  out.precision(12);
  for (size_t e = 0; e < r.val_loss.size(); ++e)
    out << e + 1 << "," << r.train_loss[e] << "," << r.val_loss[e] << "," << r.lr[e] << "\n";
}

namespace detail {

// Cycling shuffled index stream: every pass over the pool is a fresh
// seeded permutation.
class BatchStream {
 public:
  BatchStream(int pool, uint64_t seed) : rng_(seed), order_(pool) {
    std::iota(order_.begin(), order_.end(), 0);
    rng_.shuffle(order_);
  }

  std::vector<int> draw(int count) {
    std::vector<int> out;
    out.reserve(count);
    for (int k = 0; k < count; ++k) {
      if (pos_ == order_.size()) {
        rng_.shuffle(order_);
        pos_ = 0;
      }
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  Rng rng_;
  std::vector<int> order_;
  size_t pos_ = 0;
};

}  // namespace detail

// Minibatch Adam over the configured loss with plateau-driven learning-rate
// decay and early stopping on a held-out tail split. Fully deterministic for
// a fixed (config, data, seed). Returns the parameters of the best
// validation epoch.
inline TrainResult train(const TrainConfig& cfg, const Trajectory& series) {
  cfg.validate();
  series.validate();
  const auto t_start = std::chrono::steady_clock::now();

  const MinMaxScaler scaler = MinMaxScaler::fit(series.states);
  const Mat u_scaled = scaler.apply(series.states);
  const int n = u_scaled.rows(), d = u_scaled.cols();
  const double dt = series.dt;

  const bool use_weak = cfg.loss_mode != LossMode::strong;
  const bool use_strong = cfg.loss_mode != LossMode::weak;
  const double lambda = cfg.loss_mode == LossMode::wp ? cfg.lambda : 1.0;
  const bool strong_active = use_strong && (cfg.loss_mode == LossMode::strong || lambda > 0.0);

  // -- data prep: subdomains and windows with tail validation splits
  SubdomainLayout layout;
  SubdomainWeights weights;
  Mat lhs_all;
  int k_train = 0;
  std::vector<int> val_subdomains;
  if (use_weak) {
    const int k_total = cfg.subdomain_count > 0 ? cfg.subdomain_count : n / 2;
    layout = make_subdomains(n, cfg.subdomain_size, k_total, dt);
    weights = weak_weights(layout.nodes, cfg.test_function_order, layout.length);
    lhs_all = precompute_lhs_contractions(u_scaled, layout, weights);
    k_train = std::max(1, int(std::floor(layout.count() * (1.0 - cfg.val_fraction))));
    if (k_train == layout.count()) k_train = layout.count() - 1;
    for (int k = k_train; k < layout.count(); ++k) val_subdomains.push_back(k);
  }

  WindowSet windows;
  int w_train = 0;
  std::vector<int> val_window_starts;
  if (strong_active) {
    windows = sliding_windows(n, cfg.rollout_steps + 1, 1);
    w_train = std::max(1, int(std::floor(windows.count() * (1.0 - cfg.val_fraction))));
    if (w_train == windows.count()) w_train = windows.count() - 1;
    for (int k = w_train; k < windows.count(); ++k)
      val_window_starts.push_back(windows.starts[k]);
  }

  // validation batches are fixed; assemble them once
  WeakBatch val_weak;
  if (use_weak) val_weak = assemble_weak_batch(u_scaled, layout, val_subdomains, lhs_all);
  StrongBatch val_strong;
  if (strong_active) val_strong = assemble_strong_batch(u_scaled, val_window_starts,
                                                        cfg.rollout_steps);

  auto validation_loss = [&](const ParamSet& p) {
    double v = 0.0;
    if (use_weak) v += weak_loss_value(p, val_weak, weights);
    if (strong_active) {
      const double s = strong_loss_value(p, val_strong, dt, cfg.rollout_solver);
      v = use_weak ? v + lambda * s : s;
    }
    return v;
  };

  // -- model and optimizer
  std::vector<int> dims;
  dims.push_back(d);
  for (int h : cfg.hidden) dims.push_back(h);
  dims.push_back(d);
  ParamSet params = mlp_init(dims, derive_seed(cfg.seed, 0x6d6c70u));  // "mlp"
  OptimizerState opt = adam_init(params, cfg.lr_init);

  detail::BatchStream weak_stream(std::max(1, k_train), derive_seed(cfg.seed, 0x7765616bu));
  detail::BatchStream strong_stream(std::max(1, w_train), derive_seed(cfg.seed, 0x7374726fu));

  const int steps_per_epoch = [&] {
    const int pool = use_weak ? k_train : w_train;
    return std::max(1, (pool + cfg.batch_size - 1) / cfg.batch_size);
  }();

  TrainReport report;
  ParamSet best_params = params;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int epochs_since_best = 0, epochs_since_lr_drop = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    double train_acc = 0.0;
    int train_terms = 0;
    int skipped = 0;
    for (int step = 0; step < steps_per_epoch; ++step) {
      Tape tape;
      const MlpTapeIds ids = mlp_params_on_tape(tape, params);
      int loss_node = -1;
      if (cfg.loss_mode == LossMode::strong) {
        const std::vector<int> batch_ids = strong_stream.draw(std::min(cfg.batch_size, w_train));
        std::vector<int> starts(batch_ids.size());
        for (size_t i = 0; i < batch_ids.size(); ++i) starts[i] = windows.starts[batch_ids[i]];
        const StrongBatch sb = assemble_strong_batch(u_scaled, starts, cfg.rollout_steps);
        loss_node = strong_loss_node(tape, ids, sb, dt, cfg.rollout_solver);
      } else {
        const std::vector<int> batch = weak_stream.draw(std::min(cfg.batch_size, k_train));
        const WeakBatch wb = assemble_weak_batch(u_scaled, layout, batch, lhs_all);
        if (cfg.loss_mode == LossMode::weak || lambda == 0.0) {
          loss_node = weak_loss_node(tape, ids, wb, weights);
        } else {
          const std::vector<int> wb_ids = strong_stream.draw(std::min(cfg.batch_size, w_train));
          std::vector<int> starts(wb_ids.size());
          for (size_t i = 0; i < wb_ids.size(); ++i) starts[i] = windows.starts[wb_ids[i]];
          const StrongBatch sb = assemble_strong_batch(u_scaled, starts, cfg.rollout_steps);
          loss_node = combined_loss_node(tape, ids, wb, sb, weights, lambda, dt,
                                         cfg.rollout_solver);
        }
      }
      const double loss = tape.value(loss_node);
      if (!std::isfinite(loss)) {
        ++skipped;
        continue;
      }
      tape.backward(loss_node);
      const GradSet g = grad(tape, ids);
      if (!g.all_finite()) {
        ++skipped;
        continue;
      }
      adam_step(params, g, opt);
      train_acc += loss;
      ++train_terms;
    }
    report.skipped_batches += skipped;
    if (skipped > 0 && double(skipped) / steps_per_epoch > cfg.blowup_epoch_fraction)
      throw train_divergence_error("training diverged: " + std::to_string(skipped) + " of " +
                                       std::to_string(steps_per_epoch) +
                                       " batches blew up in epoch " + std::to_string(epoch),
                                   report);

    const double val = validation_loss(params);
    report.train_loss.push_back(train_terms > 0 ? train_acc / train_terms
                                                : std::numeric_limits<double>::quiet_NaN());
    report.val_loss.push_back(val);
    report.lr.push_back(opt.lr);
    report.stopped_epoch = epoch;

    if (!std::isfinite(val))
      throw train_divergence_error("training diverged: non-finite validation loss at epoch " +
                                       std::to_string(epoch),
                                   report);

    if (val < best_val) {
      best_val = val;
      best_params = params;
      best_epoch = epoch;
      epochs_since_best = 0;
      epochs_since_lr_drop = 0;
    } else {
      ++epochs_since_best;
      ++epochs_since_lr_drop;
    }
    if (epochs_since_best >= cfg.early_stop_patience) break;
    if (epochs_since_lr_drop >= cfg.scheduler_patience && opt.lr > cfg.min_lr) {
      opt.lr = std::max(cfg.min_lr, opt.lr * cfg.scheduler_factor);
      epochs_since_lr_drop = 0;
    }
  }

  report.best_epoch = best_epoch;
  report.best_val = best_val;
  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return TrainResult{std::move(best_params), scaler, std::move(report)};
}

}  // namespace wpnode
