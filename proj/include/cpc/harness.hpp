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

#ifndef CPC_HARNESS_HPP_
#define CPC_HARNESS_HPP_

#include <string>
#include <vector>

#include "cpc/config.hpp"
#include "cpc/gradcheck.hpp"
#include "cpc/mi_eval.hpp"
#include "cpc/probe.hpp"

namespace cpc {

// Exit codes: 0 success, 2 config error, 3 self-test property violation.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntimeError = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitPropertyViolation = 3;

/// Config sections mapped onto trainer options.
CpcTrainOptions cpc_train_options(const ExperimentConfig& config);
PairTrainOptions pair_train_options(const ExperimentConfig& config);

struct TrainArtifacts {
  std::string checkpoint_path;
  std::string random_init_path;  // cpc runs only
  std::string metrics_csv_path;
  std::string summary_path;
  std::vector<MetricRow> metrics;
  double wall_clock_s = 0.0;
};

/// Trains per the config and writes checkpoint(s), metrics CSV, and a run
/// summary JSON under out_dir.
TrainArtifacts run_train_command(const ExperimentConfig& config,
                                 const std::string& out_dir);

/// MI evaluation on a task with oracle MI (gaussian or discrete). With
/// checkpoint_path empty the oracle (true density ratio) scorer is used.
/// Writes mi_report.json under out_dir when out_dir is non-empty.
MiEstimate run_eval_mi_command(const ExperimentConfig& config,
                               const std::string& checkpoint_path,
                               bool use_oracle, std::size_t batches,
                               const std::string& out_dir);

struct AblateRow {
  std::string axis;
  std::string setting;
  std::string status;  // ok | infeasible
  double probe_accuracy = 0.0;
  double final_acc_k1 = 0.0;
};

/// One full train+probe per setting; identical seeds except the ablated
/// axis. axis is "steps" (K in {1,2,4,8}) or "negatives" (five strategies).
/// CPC_LAB_THREADS caps parallel workers. Writes ablation.csv in out_dir.
std::vector<AblateRow> run_ablate_command(const ExperimentConfig& config,
                                          const std::string& axis,
                                          const std::string& out_dir);

std::string ablate_csv(const std::vector<AblateRow>& rows);

/// Finite-difference checks for every primitive op and the composed InfoNCE
/// training losses.
std::vector<GradCheckResult> run_gradcheck_suite();

/// Probe suite against a stored checkpoint. Reports are tagged random-init
/// when the checkpoint was never trained. Writes probe_reports.json when
/// out_dir is non-empty.
std::vector<ProbeReport> run_probe_command(const ExperimentConfig& config,
                                           const std::string& checkpoint_path,
                                           bool include_hidden_probe,
                                           const std::string& out_dir);

struct GenDataCounts {
  std::size_t train = 48;
  std::size_t val = 16;
  std::size_t test = 16;
};

/// Writes train/val/test dataset dumps for the config's task.
std::vector<std::string> run_gen_data_command(const ExperimentConfig& config,
                                              const GenDataCounts& counts,
                                              const std::string& out_dir);

}  // namespace cpc

#endif  // CPC_HARNESS_HPP_
