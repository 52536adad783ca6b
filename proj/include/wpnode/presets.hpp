#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "wpnode/errors.hpp"
#include "wpnode/systems.hpp"
#include "wpnode/train.hpp"

namespace wpnode {

// A named experiment: system, noise level, training configuration and
// evaluation settings, fully populated.
struct ExperimentPreset {
  std::string name;
  SystemSpec system;
  double sigma_nr = 0.0;
  double duration = 0.0;  // training signal length, seconds
  TrainConfig train;
  // evaluation settings
  int n_starts = 30;
  double horizon_lyap = 10.0;
  double kl_duration = 100.0;
};

inline nlohmann::json to_json(const ExperimentPreset& p) {
  return nlohmann::json{{"name", p.name},
                        {"system", to_json(p.system)},
                        {"sigma_nr", p.sigma_nr},
                        {"duration", p.duration},
                        {"train", to_json(p.train)},
                        {"n_starts", p.n_starts},
                        {"horizon_lyap", p.horizon_lyap},
                        {"kl_duration", p.kl_duration}};
}

inline ExperimentPreset preset_from_json(const nlohmann::json& j) {
  ExperimentPreset p;
  p.name = j.at("name").get<std::string>();
  p.system = system_from_json(j.at("system"));
  p.sigma_nr = j.at("sigma_nr").get<double>();
  p.duration = j.at("duration").get<double>();
  p.train = train_config_from_json(j.at("train"));
  p.n_starts = j.value("n_starts", 30);
  p.horizon_lyap = j.value("horizon_lyap", 10.0);
  p.kl_duration = j.value("kl_duration", 100.0);
  return p;
}

namespace detail {

inline int rollouts_for(SystemKind kind, int noise_pct) {
  // rollout transitions per noise level used by the combined objective
  switch (kind) {
    case SystemKind::l63:
      switch (noise_pct) {
        case 0: return 1;
        case 1: return 2;
        case 5: return 2;
        case 10: return 1;
        case 20: return 2;
      }
      break;
    case SystemKind::l96:
      switch (noise_pct) {
        case 0: return 1;
        case 1: return 1;
        case 5: return 2;
        case 10: return 2;
        case 20: return 1;
      }
      break;
    case SystemKind::ks:
      switch (noise_pct) {
        case 0: return 1;
        case 1: return 1;
        case 5: return 1;
        case 10: return 1;
        case 20: return 5;
      }
      break;
  }
  throw config_error("no rollout count for noise level " + std::to_string(noise_pct));
}

}  // namespace detail

inline std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const char* sys : {"l63", "l96", "ks"})
    for (int noise : {0, 1, 5, 10, 20})
      for (const char* mode : {"wp", "weak", "strong"})
        names.push_back(std::string(sys) + "-noise" + std::to_string(noise) + "-" + mode);
  return names;
}

// Builds the canonical preset "{l63|l96|ks}-noise{0|1|5|10|20}-{wp|weak|strong}".
inline ExperimentPreset preset(const std::string& name) {
  const auto fail = [&]() -> ExperimentPreset {
    std::string msg = "unknown preset: " + name + "\navailable presets:";
    for (const auto& n : preset_names()) msg += "\n  " + n;
    throw config_error(msg);
  };
  const auto dash1 = name.find('-');
  const auto dash2 = name.rfind('-');
  if (dash1 == std::string::npos || dash2 == dash1) return fail();
  const std::string sys = name.substr(0, dash1);
  const std::string noise_part = name.substr(dash1 + 1, dash2 - dash1 - 1);
  const std::string mode = name.substr(dash2 + 1);
  if (noise_part.rfind("noise", 0) != 0) return fail();
  int noise_pct = -1;
  try {
    noise_pct = std::stoi(noise_part.substr(5));
  } catch (...) {
    return fail();
  }
  if (noise_pct != 0 && noise_pct != 1 && noise_pct != 5 && noise_pct != 10 && noise_pct != 20)
    return fail();
  if (mode != "wp" && mode != "weak" && mode != "strong") return fail();
  if (sys != "l63" && sys != "l96" && sys != "ks") return fail();

  ExperimentPreset p;
  p.name = name;
  p.sigma_nr = noise_pct / 100.0;
  p.train.loss_mode = loss_mode_from_string(mode);
  p.train.lambda = 0.5;
  p.train.test_function_order = 16;
  p.train.lr_init = 0.02;
  p.train.subdomain_count = -1;  // floor(N / 2)
  p.train.rollout_solver = SolverKind::rk4;

  if (sys == "l63") {
    p.system = SystemSpec::lorenz63();
    p.duration = 100.0;  // N = 1e4 at dt = 0.01
    p.train.subdomain_size = 60;
    p.train.batch_size = 1024;
    p.train.hidden = {64};
    p.kl_duration = 100.0;
  } else if (sys == "l96") {
    p.system = SystemSpec::lorenz96();
    p.duration = 1000.0;  // N = 1e5 at dt = 0.01
    p.train.subdomain_size = 80;
    p.train.batch_size = 1024;
    p.train.hidden = {128};
    p.kl_duration = 100.0;
  } else {
    p.system = SystemSpec::kuramoto_sivashinsky();
    p.duration = 25000.0;  // N = 1e5 at dt = 0.25
    p.train.subdomain_size = 60;
    p.train.batch_size = 2048;
    p.train.hidden = {128};
    p.kl_duration = 600.0;
  }

  if (p.train.loss_mode == LossMode::strong) {
    p.train.rollout_steps = 25;
    p.train.max_epochs = sys == "l63" ? 150 : (sys == "l96" ? 200 : 300);
    p.train.scheduler_patience = 10;
    p.train.early_stop_patience = 30;
  } else {
    p.train.rollout_steps = detail::rollouts_for(p.system.kind, noise_pct);
    p.train.max_epochs = 20000;
    p.train.scheduler_patience = 200;
    p.train.early_stop_patience = 1000;
  }
  p.train.validate();
  return p;
}

}  // namespace wpnode
