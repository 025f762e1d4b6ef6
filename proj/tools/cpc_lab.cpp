// Copyright 2026 The cpclab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cpc/harness.hpp"
#include "cpc/kernels.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out_dir;
  bool print_config = false;
};

cpc::ExperimentConfig resolve_config(const CommonArgs& args,
                                     const std::string& fallback_kind) {
  cpc::ExperimentConfig config;
  if (!args.config_path.empty()) {
    config = cpc::load_config_file(args.config_path);
  } else if (fallback_kind == "markov") {
    config = cpc::default_markov_config();
  } else if (fallback_kind == "gaussian") {
    config = cpc::default_gaussian_config();
  } else {
    throw cpc::ConfigError("--config is required for this command");
  }
  if (args.seed_set) config.training.seed = args.seed;
  if (!args.out_dir.empty()) config.out_dir = args.out_dir;
  return config;
}

void add_common(CLI::App* cmd, CommonArgs* args, bool config_required) {
  auto* opt = cmd->add_option("--config", args->config_path,
                              "experiment config JSON path");
  if (config_required) opt->check(CLI::ExistingFile);
  cmd->add_option("--seed", args->seed, "override training.seed")
      ->each([args](const std::string&) { args->seed_set = true; });
  cmd->add_option("--out", args->out_dir, "override outputs.dir");
  cmd->add_flag("--print-config", args->print_config,
                "print the effective config and exit");
}

int print_config_and_exit(const cpc::ExperimentConfig& config) {
  std::cout << cpc::config_to_json(config) << "\n";
  return cpc::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CPC lab: contrastive predictive coding on synthetic tasks"};
  app.require_subcommand(1);

  CommonArgs train_args, eval_args, ablate_args, probe_args, gen_args;
  std::string eval_checkpoint, probe_checkpoint, ablate_axis = "steps";
  bool eval_oracle = false, probe_hidden = false;
  std::size_t eval_batches = 200;
  cpc::GenDataCounts gen_counts;

  CLI::App* train = app.add_subcommand("train", "train a model per config");
  add_common(train, &train_args, /*config_required=*/false);

  CLI::App* eval_mi = app.add_subcommand(
      "eval-mi", "estimate the InfoNCE MI bound and MINE on an oracle task");
  add_common(eval_mi, &eval_args, false);
  eval_mi->add_option("--checkpoint", eval_checkpoint,
                      "trained pair-scorer checkpoint");
  eval_mi->add_flag("--oracle", eval_oracle,
                    "score with the true density ratio");
  eval_mi->add_option("--batches", eval_batches,
                      "evaluation batches (gaussian tasks)");

  CLI::App* ablate =
      app.add_subcommand("ablate", "train+probe sweep along one axis");
  add_common(ablate, &ablate_args, false);
  ablate->add_option("--axis", ablate_axis, "steps | negatives")
      ->check(CLI::IsMember({"steps", "negatives"}));

  CLI::App* probe = app.add_subcommand(
      "probe", "linear-probe evaluation of a stored checkpoint");
  add_common(probe, &probe_args, false);
  probe->add_option("--checkpoint", probe_checkpoint, "cpc checkpoint path");
  probe->add_flag("--hidden-probe", probe_hidden,
                  "also fit the one-hidden-layer (256) probe");

  CLI::App* gradcheck = app.add_subcommand(
      "gradcheck", "finite-difference check of every op and composed loss");

  CLI::App* gen_data =
      app.add_subcommand("gen-data", "write train/val/test dataset dumps");
  add_common(gen_data, &gen_args, false);
  gen_data->add_option("--train-count", gen_counts.train,
                       "sequences (or pairs) in the train split");
  gen_data->add_option("--val-count", gen_counts.val, "validation split size");
  gen_data->add_option("--test-count", gen_counts.test, "test split size");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      const cpc::ExperimentConfig config = resolve_config(train_args, "markov");
      if (train_args.print_config) return print_config_and_exit(config);
      const cpc::TrainArtifacts art =
          cpc::run_train_command(config, config.out_dir);
      std::cout << "wrote " << art.checkpoint_path << "\n"
                << "wrote " << art.metrics_csv_path << "\n"
                << "wrote " << art.summary_path << "\n";
      if (!art.metrics.empty()) {
        const cpc::MetricRow& last = art.metrics.back();
        std::printf("final: step=%llu loss_k1=%.4f acc_k1=%.4f bound=%.4f\n",
                    static_cast<unsigned long long>(last.step),
                    last.loss_k[0], last.acc_k[0], last.mi_bound_k1);
      }
      return cpc::kExitOk;
    }

    if (eval_mi->parsed()) {
      const cpc::ExperimentConfig config =
          resolve_config(eval_args, "gaussian");
      if (eval_args.print_config) return print_config_and_exit(config);
      const cpc::MiEstimate est = cpc::run_eval_mi_command(
          config, eval_checkpoint, eval_oracle, eval_batches, config.out_dir);
      std::cout << est.to_json() << "\n";
      return cpc::kExitOk;
    }

    if (ablate->parsed()) {
      const cpc::ExperimentConfig config =
          resolve_config(ablate_args, "markov");
      if (ablate_args.print_config) return print_config_and_exit(config);
      const auto rows =
          cpc::run_ablate_command(config, ablate_axis, config.out_dir);
      std::cout << cpc::ablate_csv(rows);
      return cpc::kExitOk;
    }

    if (probe->parsed()) {
      const cpc::ExperimentConfig config = resolve_config(probe_args, "markov");
      if (probe_args.print_config) return print_config_and_exit(config);
      if (probe_checkpoint.empty()) {
        throw cpc::ConfigError("probe requires --checkpoint");
      }
      const auto reports = cpc::run_probe_command(
          config, probe_checkpoint, probe_hidden, config.out_dir);
      std::cout << cpc::probe_reports_to_json(reports) << "\n";
      return cpc::kExitOk;
    }

    if (gradcheck->parsed()) {
      const auto results = cpc::run_gradcheck_suite();
      bool all_pass = true;
      for (const cpc::GradCheckResult& r : results) {
        std::printf("%-24s max_rel_err=%.3e checked=%zu %s\n", r.name.c_str(),
                    r.max_rel_err, r.checked, r.pass ? "PASS" : "FAIL");
        all_pass = all_pass && r.pass;
      }
      std::printf("gradcheck: %s (%zu ops, backend=%s)\n",
                  all_pass ? "PASS" : "FAIL", results.size(),
                  cpc::kernels::active().name);
      return all_pass ? cpc::kExitOk : cpc::kExitPropertyViolation;
    }

    if (gen_data->parsed()) {
      const cpc::ExperimentConfig config = resolve_config(gen_args, "markov");
      if (gen_args.print_config) return print_config_and_exit(config);
      for (const std::string& path :
           cpc::run_gen_data_command(config, gen_counts, config.out_dir)) {
        std::cout << "wrote " << path << "\n";
      }
      return cpc::kExitOk;
    }
  } catch (const cpc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return cpc::kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cpc::kExitRuntimeError;
  }
  return cpc::kExitOk;
}
