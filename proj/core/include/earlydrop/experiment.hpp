// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "earlydrop/config.hpp"
#include "earlydrop/data.hpp"
#include "earlydrop/model.hpp"

namespace earlydrop {

/// Headline numbers of a finished run, recomputable from its output
/// directory alone (see summarize_run).
struct RunSummary {
  double final_train_loss = 0.0;
  double final_test_loss = 0.0;
  double final_test_accuracy = 0.0;
  /// NaN when diagnostics were off or too sparse.
  double gde_auc_early = 0.0;
  double final_model_distance = 0.0;
  std::uint64_t seed = 0;
  std::int64_t iterations = 0;
  std::string config_digest;
};

struct RunOptions {
  /// Checkpoint written by an earlier run of the same config; training
  /// continues from the epoch it records.
  std::string resume_from;
  /// Workers for diagnostics and evaluation.
  std::size_t threads = 1;
};

/// Output files in `out_dir`:
///   config.txt        every effective key
///   metrics.csv       iteration,epoch,lr,drop_rate,train_loss,grad_norm
///   eval.csv          epoch,iteration,train_loss,train_accuracy,test_loss,
///                     test_accuracy,model_distance
///   diagnostics.csv   (diag.enabled) kDiagnosticsHeader columns
///   checkpoint_epoch<N>.ddck for each train.checkpoint_epochs entry
///   summary.txt       RunSummary as key=value
///   failure.txt       only when the run aborted
///
/// Throws ValidationError before any compute for a bad config and
/// NonFiniteError (after writing failure.txt) when the loss diverges.
RunSummary run_experiment(const ExperimentConfig &config, const std::string &out_dir,
                          const RunOptions &options = {});

/// Rebuilds the summary from config.txt, eval.csv and diagnostics.csv.
RunSummary summarize_run(const std::string &run_dir);

/// Datasets named by the config, generated or loaded.
DatasetPair load_experiment_data(const ExperimentConfig &config);
/// Model config with dimensions from the data and init seed from the run seed.
ModelConfig resolve_model_config(const ExperimentConfig &config, const Dataset &train);

/// Iterations per epoch: ceil(n / batch).
std::int64_t iterations_per_epoch(std::size_t n, std::size_t batch_size);

/// Thread count from EARLYDROP_THREADS, default 1.
std::size_t env_thread_count();

/// Copies the model's segments out of a checkpoint by name; other segments
/// (optimizer state, progress) are ignored.
void restore_parameters(Model &model, const ParameterVector &ckpt);

std::string summary_to_text(const RunSummary &s);

} // namespace earlydrop
