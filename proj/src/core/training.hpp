#pragma once

#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "core/adam.hpp"
#include "core/config.hpp"
#include "core/model.hpp"

namespace semgen {

struct EpochRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;  // global step after the epoch
  double loss = 0.0;     // mean batch loss over the epoch
  double valid_ppl = 0.0;
  bool improved = false;
};

struct TrainState {
  std::size_t epoch = 0;
  std::size_t step = 0;
  ad::AdamState adam;
  double best_valid_ppl = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> checkpoints;
  std::vector<EpochRecord> history;
  bool stopped_early = false;
};

struct TrainHooks {
  std::ostream* log = nullptr;  // one JSON object per epoch
  // Called after an improving epoch, with the model at its new best. May
  // return a checkpoint path to record in TrainState.
  std::function<std::string(const EpochRecord&, const Model&)> on_improve;
  // Checked after every epoch; returning true ends training.
  std::function<bool(const EpochRecord&, const Model&)> stop_when;
  // Leave the model at its best-validation parameters when training ends.
  bool restore_best = true;
};

ad::AdamState make_adam(const TrainConfig& cfg);
std::string epoch_record_json(const EpochRecord& r);

// One optimizer step over `batch`. The loss is the sum over supervised tasks
// of NLL / target tokens in the batch, which equals padding with masked
// loss. Returns that loss.
double train_batch(Model& model, std::span<const EncodedExample* const> batch,
                   ad::AdamState& adam, double clip_norm);

// Mini-batch Adam over shuffled `train`; after every epoch the validation
// perplexity picks the best parameters. Stops after max_epochs or once more
// than `patience` consecutive epochs fail to improve.
TrainState train(Model& model, std::span<const EncodedExample> train,
                 std::span<const EncodedExample> valid, const TrainConfig& cfg,
                 const TrainHooks& hooks = {});

struct PretrainResult {
  std::size_t steps = 0;
  std::vector<double> epoch_loss;
};

// Trains the definition decoder and the special-token rows as an
// unconditional language model over `sentences` for cfg.pretrain_epochs.
PretrainResult pretrain_decoder(Model& model, std::span<const std::vector<int>> sentences,
                                const TrainConfig& cfg, std::ostream* log = nullptr);

}  // namespace semgen
