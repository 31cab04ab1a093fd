// Copyright 2026 The spanlm Authors.
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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "spanlm/adamw.hpp"
#include "spanlm/checkpoint.hpp"
#include "spanlm/corruptor.hpp"
#include "spanlm/model.hpp"
#include "spanlm/train_config.hpp"

namespace spanlm {

// Mean over every masked position in the batch of -log p(x_i | masked x),
// read from the generator view. When `masked_logits` is given it receives
// one [masked rows, vocab] tensor per example. Throws std::invalid_argument
// if the batch has no masked position.
template <typename T>
Var<T> loss_gen(Tape<T>& tape, const Model<T>& model, std::span<const GenExample> batch,
                const ForwardOptions& options = {}, std::vector<Tensor<T>>* masked_logits = nullptr);

// Plain MLM objective: the same formula, with masks from random subword
// masking instead of K-MASK.
template <typename T>
Var<T> loss_mlm(Tape<T>& tape, const Model<T>& model, std::span<const GenExample> batch,
                const ForwardOptions& options = {}) {
  return loss_gen(tape, model, batch, options);
}

// Mean over every position in the batch of the binary cross-entropy between
// labels and the discriminator's replacement probability, computed from
// logits.
template <typename T>
Var<T> loss_disc(Tape<T>& tape, const Model<T>& model, std::span<const DiscExample> batch,
                 const ForwardOptions& options = {});

// Masked-token cross-entropy on precomputed logits: mean over rows of
// -log softmax(logits[r])[targets[r]].
template <typename T>
Var<T> masked_token_nll(Var<T> logits, std::span<const TokenId> targets);

// Mean binary cross-entropy between labels and sigmoid(logits).
template <typename T>
Var<T> replaced_token_bce(Var<T> logits, std::span<const std::uint8_t> labels);

// Pipeline generator decoding. Masked positions are filled in ascending
// order; under kSample each uses one uniform01() draw from
// Rng(epoch_seed(seed ^ kSampleStream, epoch, example_id)) and picks the
// first non-special id whose cumulative softmax mass (over non-special ids,
// accumulated in double) exceeds it. Returns the recovered sequence.
template <typename T>
std::vector<TokenId> fill_masked(const GenExample& gen, const Tensor<T>& masked_logits, GenDecode decode,
                                 std::uint64_t seed, std::uint64_t epoch, std::uint64_t example_id);

struct StepLosses {
  double total = 0.0;
  double gen = 0.0;
  double disc = 0.0;
};

struct LossRecord {
  std::int64_t step = 0;   // 1-based global optimizer step
  std::int64_t epoch = 0;  // 1-based
  StepLosses losses;
};

struct EpochSummary {
  std::int64_t epoch = 0;  // 1-based
  std::size_t steps = 0;
  StepLosses mean;
};

// Owns model, optimizer and the tokenized corpus. Example ids are indices
// into `examples`. Corruption, shuffling, sampling and dropout all derive
// from (config.seed, epoch, example id), so a run is a pure function of the
// config and data, and resuming from a checkpoint replays exactly.
template <typename T>
class Trainer {
 public:
  Trainer(TrainConfig config, const Vocabulary& vocab, std::vector<TokenizedExample> examples,
          ReplacementPool pool);

  const TrainConfig& config() const { return config_; }
  Model<T>& model() { return model_; }
  const Model<T>& model() const { return model_; }
  AdamW<T>& optimizer() { return optimizer_; }
  std::size_t num_examples() const { return examples_.size(); }

  std::int64_t epochs_done() const { return epoch_; }
  std::int64_t steps_done() const { return step_; }
  const std::vector<LossRecord>& curve() const { return curve_; }

  // Example order for a 0-based epoch: Fisher-Yates with
  // Rng(epoch_seed(seed ^ kShuffleStream, epoch, 0)).
  std::vector<std::size_t> epoch_order(std::uint64_t epoch) const;

  // Corrupts the listed examples for a 0-based epoch, evaluates the
  // scheme's losses and applies one optimizer step.
  StepLosses step(std::span<const std::size_t> example_ids, std::uint64_t epoch);

  // Evaluates losses without updating anything.
  StepLosses evaluate(std::span<const std::size_t> example_ids, std::uint64_t epoch);

  EpochSummary run_epoch();

  // The corrupted inputs of the most recent step/evaluate call.
  const std::vector<GenExample>& last_gen_batch() const { return last_gen_; }
  const std::vector<DiscExample>& last_disc_batch() const { return last_disc_; }

  Checkpoint checkpoint(const Vocabulary& vocab) const;
  // Restores parameters, optimizer moments and counters. The checkpoint's
  // model shape must match this trainer's.
  void restore(const Checkpoint& ckpt);

 private:
  StepLosses forward(std::span<const std::size_t> example_ids, std::uint64_t epoch, bool update);

  TrainConfig config_;
  const Vocabulary* vocab_;
  std::vector<TokenizedExample> examples_;
  ReplacementPool pool_;
  Model<T> model_;
  AdamW<T> optimizer_;
  std::int64_t epoch_ = 0;
  std::int64_t step_ = 0;
  std::vector<LossRecord> curve_;
  std::vector<GenExample> last_gen_;
  std::vector<DiscExample> last_disc_;
};

// Writes model (and, when given, optimizer) state under parameter names;
// moments are stored as "adam.m.<name>" / "adam.v.<name>".
Checkpoint make_checkpoint(const TrainConfig& config, const Vocabulary& vocab, const Model<float>& model,
                           const AdamW<float>* optimizer);

// Rebuilds the model described by a checkpoint's config and copies its
// tensors in. Throws DataError when a tensor is missing or misshapen.
Model<float> model_from_checkpoint(const Checkpoint& ckpt);

struct PretrainResult {
  std::vector<EpochSummary> epochs;
  std::filesystem::path last_checkpoint;
  std::filesystem::path best_checkpoint;
};

// End-to-end pre-training: reads config.annotated and config.vocab, trains,
// writes loss.csv, last.ckpt, best.ckpt (lowest epoch-mean total loss) and,
// if keep_epoch_checkpoints, epoch-<k>.ckpt into config.output_dir. With
// `resume`, continues from that checkpoint's epoch. `on_epoch` observes each
// finished epoch.
PretrainResult run_pretraining(const TrainConfig& config, const std::optional<std::filesystem::path>& resume = {},
                               const std::function<void(const EpochSummary&)>& on_epoch = {});

}  // namespace spanlm
