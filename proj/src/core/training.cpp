#include "core/training.hpp"

#include <cmath>
#include <numeric>
#include <ostream>

#include "core/checkpoint.hpp"
#include "core/error.hpp"
#include "core/metrics.hpp"
#include "core/rng.hpp"
#include "json.hpp"

namespace semgen {

using json = nlohmann::ordered_json;

ad::AdamState make_adam(const TrainConfig& cfg) {
  ad::AdamState s;
  s.options = {cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon};
  return s;
}

std::string epoch_record_json(const EpochRecord& r) {
  return json{{"epoch", r.epoch},
              {"step", r.step},
              {"loss", r.loss},
              {"valid_ppl", r.valid_ppl},
              {"improved", r.improved}}
      .dump();
}

namespace {

std::size_t target_tokens(const std::vector<int>& seq) { return seq.size() + 1; }

void check_finite(double loss, const std::string& where) {
  if (!std::isfinite(loss)) throw NumericError("non-finite loss " + where);
}

std::vector<std::vector<double>> copy_values(const ParamStore& store) {
  std::vector<std::vector<double>> out;
  for (const auto* t : store.tensors()) out.push_back(t->storage());
  return out;
}

void restore_values(ParamStore& store, const std::vector<std::vector<double>>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) store.tensors()[i]->storage() = values[i];
}

}  // namespace

double train_batch(Model& model, std::span<const EncodedExample* const> batch,
                   ad::AdamState& adam, double clip_norm) {
  if (batch.empty()) throw InvalidArgument("train_batch: empty batch");
  const bool multi = is_multi_task(model.config().kind);
  std::size_t def_tokens = 0, usg_tokens = 0;
  for (const auto* ex : batch) {
    def_tokens += target_tokens(ex->definition);
    if (multi) usg_tokens += target_tokens(ex->usage);
  }

  model.params().zero_grad();
  double loss = 0.0;
  for (const auto* ex : batch) {
    ad::Tape tape;
    const ForwardOutput out = model.forward(tape, *ex);
    ad::Var l = ad::scale(out.definition->nll_sum, 1.0 / static_cast<double>(def_tokens));
    if (multi)
      l = ad::add(l, ad::scale(out.usage->nll_sum, 1.0 / static_cast<double>(usg_tokens)));
    const double value = tape.item(l);
    check_finite(value, "on entry '" + ex->id + "'");
    loss += value;
    tape.backward(l);
  }
  const auto& params = model.params().tensors();
  ad::clip_grad_norm(params, clip_norm);
  ad::adam_step(params, adam);
  return loss;
}

TrainState train(Model& model, std::span<const EncodedExample> train_set,
                 std::span<const EncodedExample> valid, const TrainConfig& cfg,
                 const TrainHooks& hooks) {
  cfg.validate();
  if (train_set.empty()) throw InvalidArgument("train: empty training set");
  if (valid.empty()) throw InvalidArgument("train: empty validation set");

  TrainState state;
  state.adam = make_adam(cfg);
  state.seed = cfg.seed;
  Rng rng(mix64(cfg.seed ^ 0x7472616e));
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::vector<double>> best;
  std::size_t bad_epochs = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::vector<const EncodedExample*> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + cfg.batch_size); ++i)
        batch.push_back(&train_set[order[i]]);
      try {
        loss_sum += train_batch(model, batch, state.adam, cfg.clip_norm);
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + " batch " + std::to_string(batches) +
                           " step " + std::to_string(state.step + 1) + ": " + e.what());
      }
      ++batches;
      ++state.step;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.step = state.step;
    rec.loss = loss_sum / static_cast<double>(batches);
    rec.valid_ppl = metrics::selection_perplexity(model, valid);
    check_finite(rec.valid_ppl, "in validation after epoch " + std::to_string(epoch));
    rec.improved = rec.valid_ppl < state.best_valid_ppl;
    state.epoch = epoch;
    state.history.push_back(rec);
    if (hooks.log) *hooks.log << epoch_record_json(rec) << '\n';

    if (rec.improved) {
      state.best_valid_ppl = rec.valid_ppl;
      state.best_epoch = epoch;
      bad_epochs = 0;
      if (hooks.restore_best) best = copy_values(model.params());
      if (hooks.on_improve) {
        std::string path = hooks.on_improve(rec, model);
        if (!path.empty()) state.checkpoints.push_back(std::move(path));
      }
    } else if (++bad_epochs > cfg.patience) {
      state.stopped_early = true;
      break;
    }
    if (hooks.stop_when && hooks.stop_when(rec, model)) {
      state.stopped_early = true;
      break;
    }
  }
  if (hooks.restore_best && !best.empty()) restore_values(model.params(), best);
  return state;
}

PretrainResult pretrain_decoder(Model& model, std::span<const std::vector<int>> sentences,
                                const TrainConfig& cfg, std::ostream* log) {
  cfg.validate();
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < sentences.size(); ++i)
    if (!sentences[i].empty()) usable.push_back(i);
  if (usable.empty()) throw InvalidArgument("pretrain: empty language-model corpus");

  std::vector<ad::Tensor*> params;
  const auto& store = model.params();
  for (std::size_t i = 0; i < store.names().size(); ++i)
    if (is_warm_start_parameter(store.names()[i])) params.push_back(store.tensors()[i]);

  ad::AdamState adam = make_adam(cfg);
  Rng rng(mix64(cfg.seed ^ 0x6c6d));
  PretrainResult result;
  for (std::size_t epoch = 1; epoch <= cfg.pretrain_epochs; ++epoch) {
    rng.shuffle(usable);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < usable.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(usable.size(), start + cfg.batch_size);
      std::size_t tokens = 0;
      for (std::size_t i = start; i < end; ++i) tokens += target_tokens(sentences[usable[i]]);
      model.params().zero_grad();
      double loss = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        ad::Tape tape;
        const TaskOutput out = model.forward_unconditional(tape, sentences[usable[i]]);
        ad::Var l = ad::scale(out.nll_sum, 1.0 / static_cast<double>(tokens));
        const double value = tape.item(l);
        check_finite(value, "in pretraining epoch " + std::to_string(epoch) + " batch " +
                                std::to_string(batches) + " step " +
                                std::to_string(result.steps + 1));
        loss += value;
        tape.backward(l);
      }
      ad::clip_grad_norm(params, cfg.clip_norm);
      ad::adam_step(params, adam);
      loss_sum += loss;
      ++batches;
      ++result.steps;
    }
    result.epoch_loss.push_back(loss_sum / static_cast<double>(batches));
    if (log)
      *log << json{{"pretrain_epoch", epoch}, {"step", result.steps}, {"loss", result.epoch_loss.back()}}
                  .dump()
           << '\n';
  }
  return result;
}

}  // namespace semgen
