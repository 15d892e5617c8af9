// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "earlydrop/data.hpp"
#include "earlydrop/diagnostics.hpp"
#include "earlydrop/model.hpp"
#include "earlydrop/optimizers.hpp"
#include "earlydrop/schedules.hpp"
#include "earlydrop/text_io.hpp"

namespace earlydrop {

struct DiagConfig {
  bool enabled = false;
  std::size_t k = 8;
  /// 0 means "same as train.batch_size".
  std::size_t batch_size = 0;
  DiagCadence cadence;
  std::int64_t auc_window = 1500;
  std::size_t chunk_size = 2048;
};

/// Everything a training run needs. Built from flat dotted keys; see
/// ExperimentConfig::from_keys for the accepted set.
struct ExperimentConfig {
  std::string name = "run";
  /// input_dim and output_dim are filled in from the data.
  ModelConfig model;
  DatasetSpec data;
  /// When set, datasets are loaded from these files instead of generated.
  std::string train_path;
  std::string test_path;
  OptimizerHyper opt;
  double lr = 1e-3;
  double warmup_epochs = 0.0;
  LrDecay lr_decay = LrDecay::cosine;
  std::size_t reference_batch = 0; // 0: same as batch_size
  DropSchedule drop;
  std::size_t epochs = 1;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  std::vector<std::size_t> checkpoint_epochs;
  std::size_t eval_every = 1;
  DiagConfig diag;

  /// Unknown keys are rejected. Missing keys keep their defaults.
  static ExperimentConfig from_keys(const KeyValues &kv);
  /// Every key with its effective value; from_keys(to_keys()) round-trips.
  KeyValues to_keys() const;
  /// Whole-config validation; throws ValidationError listing the first
  /// problem. Schedule warnings are returned.
  std::vector<std::string> validate() const;

  LrConfig lr_config() const;
};

/// Overrides `key` in `kv` after checking that it is a known key.
void apply_override(KeyValues &kv, const std::string &key, const std::string &value);

/// The list of accepted dotted keys.
const std::vector<std::string> &known_config_keys();

} // namespace earlydrop
