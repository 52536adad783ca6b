// Command-line driver: generate | train | evaluate | compare | sweep.
// Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure.

#include <iostream>

#include <CLI11.hpp>

#include "wpnode/commands.hpp"

using namespace wpnode;

int main(int argc, char** argv) {
  CLI::App app{"Weak-penalty neural ODE toolkit for chaotic time series"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolkitVersion);

  GenerateOptions gen;
  CLI::App* cgen = app.add_subcommand("generate", "Generate clean + noisy benchmark trajectories");
  cgen->add_option("--system", gen.system, "System: l63, l96 or ks")->required();
  cgen->add_option("--duration", gen.duration, "Signal length in seconds (default: canonical)");
  cgen->add_option("--noise", gen.noise, "Noise ratio sigma_NR (e.g. 0.05)");
  cgen->add_option("--seed", gen.seed, "Random seed");
  cgen->add_option("--burn-in", gen.burn_in, "Burn-in steps to discard (default per system)");
  cgen->add_option("--out", gen.out_dir, "Output directory");

  TrainCliOptions tr;
  CLI::App* ctrain = app.add_subcommand("train", "Train a model on generated data");
  ctrain->add_option("--preset", tr.preset_name, "Named preset, e.g. l63-noise5-wp");
  ctrain->add_option("--config", tr.config_file, "Experiment JSON file (overrides --preset)");
  ctrain->add_option("--data", tr.data_dir, "Directory holding the generated trajectories");
  ctrain->add_option("--out", tr.out_dir, "Output directory");
  ctrain->add_option("--loss", tr.loss_mode, "Override loss mode: strong, weak or wp");
  ctrain->add_option("--rollout", tr.rollout_steps, "Override rollout transitions");
  ctrain->add_option("--lambda", tr.lambda, "Override the weak/strong balance");
  ctrain->add_option("--max-epochs", tr.max_epochs, "Override the epoch budget");
  ctrain->add_option("--batch", tr.batch_size, "Override the batch size");
  ctrain->add_option("--subdomain-size", tr.subdomain_size, "Override M");
  ctrain->add_option("--subdomains", tr.subdomain_count, "Override K (-1 derives N/2)");
  ctrain->add_option("--test-order", tr.test_function_order, "Override p");
  ctrain->add_option("--lr", tr.lr, "Override the initial learning rate");
  ctrain->add_option("--duration", tr.duration, "Truncate the training signal (seconds)");
  ctrain->add_option("--hidden", tr.hidden, "Override hidden layer widths");
  uint64_t train_seed = 0;
  CLI::Option* seed_opt = ctrain->add_option("--seed", train_seed, "Training seed");
  ctrain->add_flag("--desk-scale", tr.desk_scale,
                   "Reduced-scale run (shorter signals and epoch budget)");

  EvaluateCliOptions ev;
  CLI::App* ceval = app.add_subcommand("evaluate", "Evaluate a checkpoint: VPT and KL");
  ceval->add_option("--checkpoint", ev.checkpoint, "checkpoint.json path")->required();
  ceval->add_option("--data", ev.data_dir, "Directory holding the clean reference");
  ceval->add_option("--out", ev.out_dir, "Output directory");
  ceval->add_option("--solver", ev.solver, "Inference solver (euler|midpoint|rk4|bosh3|dopri5)");
  ceval->add_option("--n-starts", ev.n_starts, "Number of evaluation start points");
  ceval->add_option("--horizon", ev.horizon_lyap, "Forecast horizon in Lyapunov times");
  ceval->add_option("--kl-duration", ev.kl_duration, "Free-run length for the KL (seconds)");
  ceval->add_option("--bins", ev.bins, "Histogram bins per dimension");
  ceval->add_option("--seed", ev.seed, "Start-point seed");
  ceval->add_flag("--solver-sweep", ev.run_solver_sweep,
                  "Also compare free-run densities across solvers");
  ceval->add_option("--sweep-duration", ev.sweep_duration, "Solver-sweep run length (seconds)");

  CompareOptions cmp;
  CLI::App* ccomp = app.add_subcommand("compare", "Tabulate evaluated checkpoints");
  ccomp->add_option("checkpoints", cmp.checkpoints, "checkpoint.json paths")->required();
  ccomp->add_option("--out", cmp.out_csv, "Output CSV path");

  SweepOptions sw;
  CLI::App* csweep = app.add_subcommand("sweep", "Hyperparameter sweep around a base config");
  csweep->add_option("--axis", sw.axis,
                     "Axis: layers, M, signal_length, batch, K, p, rollouts, lambda")
      ->required();
  csweep->add_option("--values", sw.values, "Values along the axis")->required();
  csweep->add_option("--preset", sw.preset_name, "Base preset");
  csweep->add_option("--config", sw.config_file, "Base experiment JSON file");
  csweep->add_option("--data", sw.data_dir, "Directory holding the generated trajectories");
  csweep->add_option("--out", sw.out_dir, "Output directory");
  csweep->add_option("--jobs", sw.jobs, "Concurrent sweep points");
  csweep->add_option("--n-starts", sw.n_starts, "Evaluation starts per point");
  csweep->add_option("--max-epochs", sw.max_epochs, "Epoch budget per point");
  csweep->add_option("--duration", sw.duration, "Training signal length per point (seconds)");
  csweep->add_option("--seed", sw.seed, "Seed shared by the sweep points");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*cgen) cmd_generate(gen);
    if (*ctrain) {
      if (seed_opt->count() > 0) tr.seed = train_seed;
      cmd_train(tr);
    }
    if (*ceval) cmd_evaluate(ev);
    if (*ccomp) cmd_compare(cmp);
    if (*csweep) cmd_sweep(sw);
  } catch (const config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const numerical_error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
