#include <algorithm>
#include <cmath>
#include <functional>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "core/checkpoint.hpp"
#include "core/error.hpp"
#include "core/metrics.hpp"
#include "core/training.hpp"
#include "doctest.h"
#include "model_fixtures.hpp"

using namespace semgen;
using semgen::testing::micro_config;
using semgen::testing::micro_example;

namespace {

namespace fs = std::filesystem;

data::Vocabulary vocab20() {
  data::Tokens t;
  for (int i = 4; i < 20; ++i) t.push_back("t" + std::to_string(i));
  return data::Vocabulary(t);
}

std::vector<EncodedExample> examples(const ModelConfig& cfg, std::uint64_t first, std::uint64_t n) {
  std::vector<EncodedExample> out;
  for (std::uint64_t s = first; s < first + n; ++s) out.push_back(micro_example(cfg, s));
  return out;
}

TrainConfig quick(std::size_t epochs) {
  TrainConfig t;
  t.batch_size = 3;
  t.learning_rate = 1e-2;
  t.max_epochs = epochs;
  t.patience = 100;
  return t;
}

RunConfig run_config(const ModelConfig& m) {
  RunConfig r;
  r.model = m;
  return r;
}

std::string temp_path(const std::string& name) {
  return (fs::temp_directory_path() / ("semgen_test_" + name)).string();
}

std::vector<std::vector<double>> values(const Model& m) {
  std::vector<std::vector<double>> out;
  for (const auto* t : m.params().tensors()) out.push_back(t->storage());
  return out;
}

}  // namespace

TEST_CASE("checkpoint round trip is bit-exact") {
  const ModelConfig cfg = micro_config(ModelKind::kHierUD);
  Model m(cfg, 20, 3);
  const std::string path = temp_path("roundtrip.ckpt");
  save_checkpoint(path, snapshot(m, run_config(cfg), vocab20(), {{"epoch", "4"}}));
  const Checkpoint c = load_checkpoint(path);
  CHECK(c.meta("epoch") == "4");
  CHECK_FALSE(c.meta("missing").has_value());
  CHECK(c.vocab.fingerprint() == vocab20().fingerprint());
  CHECK(c.config().model.kind == ModelKind::kHierUD);
  auto restored = restore_model(c);
  CHECK(values(*restored) == values(m));
  CHECK(restored->params().names() == m.params().names());
  fs::remove(path);
}

TEST_CASE("corrupted checkpoints are rejected") {
  const ModelConfig cfg = micro_config();
  Model m(cfg, 20, 3);
  const std::string path = temp_path("corrupt.ckpt");
  save_checkpoint(path, snapshot(m, run_config(cfg), vocab20()));
  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto write = [&](const std::string& b) { std::ofstream(path, std::ios::binary | std::ios::trunc) << b; };

  std::string flipped = bytes;
  flipped[flipped.size() / 2] ^= 0x10;
  write(flipped);
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  write(bytes.substr(0, bytes.size() / 3));
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  write("not a checkpoint at all");
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  fs::remove(path);
  CHECK_THROWS_AS(load_checkpoint(path), IoError);
}

TEST_CASE("loading into a different architecture fails") {
  ModelConfig small = micro_config();
  Model a(small, 20, 1);
  const Checkpoint c = snapshot(a, run_config(small), vocab20());

  ModelConfig wide = small;
  wide.state_dim = 12;
  Model b(wide, 20, 1);
  CHECK_THROWS_AS(load_parameters(b, c), ShapeError);
  CHECK_THROWS_AS(warm_start(b, c), ShapeError);

  Model parallel(micro_config(ModelKind::kParallel), 20, 1);
  CHECK_THROWS_AS(load_parameters(parallel, c), FormatError);
  CHECK_THROWS_AS(snapshot(a, run_config(small), data::Vocabulary()), MismatchError);
}

TEST_CASE("first batch loss equals the forward-only NLL") {
  const ModelConfig cfg = micro_config(ModelKind::kParallel);
  Model m(cfg, 20, 2);
  const auto ex = examples(cfg, 1, 3);
  double def_nll = 0, usg_nll = 0;
  std::size_t def_tok = 0, usg_tok = 0;
  for (const auto& e : ex) {
    ad::Tape tape(false);
    const ForwardOutput out = m.forward(tape, e);
    def_nll += tape.item(out.definition->nll_sum);
    usg_nll += tape.item(out.usage->nll_sum);
    def_tok += out.definition->tokens;
    usg_tok += out.usage->tokens;
  }
  std::vector<const EncodedExample*> batch = {&ex[0], &ex[1], &ex[2]};
  ad::AdamState adam = make_adam(quick(1));
  const double loss = train_batch(m, batch, adam, 5.0);
  CHECK(loss == doctest::Approx(def_nll / def_tok + usg_nll / usg_tok).epsilon(1e-12));
  CHECK(adam.step == 1);
}

TEST_CASE("one-example batch loss is the model loss") {
  const ModelConfig cfg = micro_config();
  Model m(cfg, 20, 2);
  const auto ex = examples(cfg, 4, 1);
  ad::Tape tape;
  const double expected = tape.item(m.loss(m.forward(tape, ex[0])));
  std::vector<const EncodedExample*> batch = {&ex[0]};
  ad::AdamState adam = make_adam(quick(1));
  CHECK(train_batch(m, batch, adam, 5.0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("training is deterministic and keeps fixed tables") {
  const ModelConfig cfg = micro_config(ModelKind::kHierDU);
  const auto tr = examples(cfg, 1, 6);
  const auto va = examples(cfg, 7, 2);
  std::ostringstream log_a, log_b;
  Model a(cfg, 20, 11), b(cfg, 20, 11);
  const auto fixed_before = a.params().get("embed.decoder").storage();
  TrainHooks ha, hb;
  ha.log = &log_a;
  hb.log = &log_b;
  const TrainState sa = train(a, tr, va, quick(3), ha);
  const TrainState sb = train(b, tr, va, quick(3), hb);
  CHECK(log_a.str() == log_b.str());
  CHECK(values(a) == values(b));
  CHECK(sa.step == 6);
  CHECK(a.params().get("embed.decoder").storage() == fixed_before);
  for (const auto& r : sa.history) CHECK(std::isfinite(r.loss));
}

TEST_CASE("best checkpoint reproduces its validation perplexity") {
  const ModelConfig cfg = micro_config(ModelKind::kParallel);
  const auto tr = examples(cfg, 1, 6);
  const auto va = examples(cfg, 7, 3);
  Model m(cfg, 20, 5);
  const std::string path = temp_path("best.ckpt");
  double recorded = 0.0;
  TrainHooks hooks;
  hooks.on_improve = [&](const EpochRecord& rec, const Model& model) {
    save_checkpoint(path, snapshot(model, run_config(cfg), vocab20()));
    recorded = rec.valid_ppl;
    return path;
  };
  const TrainState st = train(m, tr, va, quick(4), hooks);
  REQUIRE_FALSE(st.checkpoints.empty());
  CHECK(st.best_valid_ppl == recorded);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : st.history)
    if (r.improved) {
      CHECK(r.valid_ppl < best);
      best = r.valid_ppl;
    }
  auto restored = restore_model(load_checkpoint(path));
  CHECK(std::abs(metrics::selection_perplexity(*restored, va) - recorded) < 1e-9);
  // The trained model itself is left at its best parameters.
  CHECK(std::abs(metrics::selection_perplexity(m, va) - recorded) < 1e-9);
  fs::remove(path);
}

TEST_CASE("patience 0 stops after the first non-improving epoch") {
  const ModelConfig cfg = micro_config();
  const auto tr = examples(cfg, 1, 4);
  const auto va = examples(cfg, 9, 2);
  Model m(cfg, 20, 3);
  TrainConfig t = quick(50);
  t.learning_rate = 0.5;  // overshoots quickly
  t.patience = 0;
  const TrainState st = train(m, tr, va, t);
  REQUIRE(st.stopped_early);
  CHECK_FALSE(st.history.back().improved);
  for (std::size_t i = 0; i + 1 < st.history.size(); ++i) CHECK(st.history[i].improved);
}

TEST_CASE("non-finite loss aborts with its location") {
  const ModelConfig cfg = micro_config();
  const auto tr = examples(cfg, 1, 4);
  const auto va = examples(cfg, 9, 2);
  Model m(cfg, 20, 3);
  m.params().get("decoder.def.out.b_d")[5] = std::numeric_limits<double>::quiet_NaN();
  try {
    train(m, tr, va, quick(2));
    FAIL("expected a NumericError");
  } catch (const NumericError& e) {
    const std::string what = e.what();
    CHECK(what.find("epoch 1 batch 0 step 1") != std::string::npos);
  }
}

TEST_CASE("pretraining touches only the decoder and special rows") {
  const ModelConfig cfg = micro_config();
  Model m(cfg, 20, 4);
  const auto before = values(m);
  std::vector<std::vector<int>> sentences = {{4, 5, 6}, {7, 8}, {}, {9, 4, 5, 6}};

  TrainConfig t = quick(1);
  t.pretrain_epochs = 0;
  CHECK(pretrain_decoder(m, sentences, t).steps == 0);
  CHECK(values(m) == before);

  t.pretrain_epochs = 3;
  const PretrainResult r = pretrain_decoder(m, sentences, t);
  CHECK(r.steps == 3);
  CHECK(r.epoch_loss.size() == 3);
  CHECK(r.epoch_loss.back() < r.epoch_loss.front());
  const auto after = values(m);
  for (std::size_t i = 0; i < after.size(); ++i) {
    const std::string& name = m.params().names()[i];
    if (is_warm_start_parameter(name))
      CHECK_MESSAGE(after[i] != before[i], name);
    else
      CHECK_MESSAGE(after[i] == before[i], name);
  }
  std::vector<std::vector<int>> none = {{}, {}};
  CHECK_THROWS_AS(pretrain_decoder(m, none, t), InvalidArgument);
}

TEST_CASE("warm start copies the pretrained decoder only") {
  const ModelConfig cfg = micro_config(ModelKind::kParallel);
  Model pre(cfg, 20, 1), fresh(cfg, 20, 2);
  const Checkpoint c = snapshot(pre, run_config(cfg), vocab20());
  const std::size_t copied = warm_start(fresh, c);
  std::size_t expected = 0;
  for (std::size_t i = 0; i < fresh.params().names().size(); ++i) {
    const std::string& name = fresh.params().names()[i];
    const bool same = fresh.params().tensors()[i]->storage() == pre.params().tensors()[i]->storage();
    if (is_warm_start_parameter(name)) {
      ++expected;
      CHECK_MESSAGE(same, name);
    } else {
      // Constant-initialized biases agree under any seed.
      const auto& v = pre.params().tensors()[i]->storage();
      if (std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) != v.end())
        CHECK_MESSAGE(!same, name);
    }
  }
  CHECK(copied == expected);
  CHECK(copied > 4);
}
