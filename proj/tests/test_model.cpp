#include <algorithm>
#include <cmath>
#include <vector>

#include "core/adam.hpp"
#include "core/error.hpp"
#include "core/grad_check.hpp"
#include "core/model.hpp"
#include "doctest.h"
#include "model_fixtures.hpp"

using namespace semgen;
using namespace semgen::ad;
using semgen::testing::micro_config;
using semgen::testing::micro_example;
using semgen::testing::trainable;

namespace {

constexpr ModelKind kKinds[] = {ModelKind::kSingle, ModelKind::kParallel, ModelKind::kHierDU,
                                ModelKind::kHierUD};

double nll(const Model& m, const EncodedExample& ex, Task task = Task::kDefinition) {
  Tape t(false);
  auto out = m.forward(t, ex);
  return t.item((task == Task::kDefinition ? *out.definition : *out.usage).nll_sum);
}

void perturb(Tensor& t, double by) {
  for (std::size_t i = 0; i < t.size(); ++i) t[i] += by * std::sin(double(i) + 1.0);
}

void perturb_prefix(Model& m, const std::string& prefix, double by) {
  const auto& names = m.params().names();
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i].rfind(prefix, 0) == 0) perturb(*m.params().tensors()[i], by);
}

}  // namespace

TEST_CASE("sequence NLL equals the per-step recomputation") {
  ModelConfig c = micro_config();
  c.word_dim = c.encoder_hidden = c.state_dim = c.attention_dim = c.contextual_dim = 4;
  Model m(c, 6, 3);
  EncodedExample ex = micro_example(c, 1, 6);
  Tape t(false);
  auto out = m.forward(t, ex);
  REQUIRE(out.definition);
  CHECK_FALSE(out.usage);
  CHECK(out.definition->tokens == 4);
  std::vector<int> targets = ex.definition;
  targets.push_back(data::Vocabulary::kEos);
  double total = 0.0;
  for (std::size_t s = 0; s < targets.size(); ++s) {
    auto l = t.value(out.definition->logits[s]);
    double mx = *std::max_element(l.begin(), l.end());
    double z = 0.0;
    for (double v : l) z += std::exp(v - mx);
    total += mx + std::log(z) - l[static_cast<std::size_t>(targets[s])];
  }
  CHECK(std::abs(t.item(out.definition->nll_sum) - total) < 1e-9);
  CHECK(t.item(out.definition->mean_nll()) == doctest::Approx(total / 4).epsilon(1e-12));
}

TEST_CASE("uniform output layer gives -T log|Y|") {
  ModelConfig c = micro_config();
  Model m(c, 20, 3);
  auto& out = m.decoder(Task::kDefinition).output();
  for (auto* p : {out.w_d, out.b_d})
    for (auto& v : p->data()) v = 0.0;
  EncodedExample ex = micro_example(c, 2);
  CHECK(nll(m, ex) == doctest::Approx(4 * std::log(20.0)).epsilon(1e-12));
}

TEST_CASE("with all conditioning removed the decoder is a language model") {
  ModelConfig c = micro_config();
  c.use_word = c.use_char = c.use_contextual = false;
  c.init = InitVariant::kZeros;
  Model m(c, 20, 3);
  EncodedExample a = micro_example(c, 1), b = micro_example(c, 2);
  b.definition = a.definition;
  b.word = "other";
  b.word_id = a.word_id == 5 ? 6 : 5;
  CHECK(nll(m, a) == nll(m, b));
}

TEST_CASE("single-token context runs") {
  ModelConfig c = micro_config();
  Model m(c, 20, 3);
  EncodedExample ex = micro_example(c, 3);
  ex.context = {ex.word_id};
  Tape t(false);
  auto out = m.forward(t, ex);
  for (Var l : out.definition->logits) {
    auto p = t.value(softmax(l, 1));
    double s = 0;
    for (double v : p) s += v;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("forward preconditions") {
  Model single(micro_config(), 20, 3);
  Model parallel(micro_config(ModelKind::kParallel), 20, 3);
  EncodedExample ex = micro_example(single.config(), 1);
  Tape t(false);
  EncodedExample no_def = ex;
  no_def.definition.clear();
  CHECK_THROWS_AS(single.forward(t, no_def), InvalidArgument);
  EncodedExample no_usage = ex;
  no_usage.usage.clear();
  CHECK_NOTHROW(single.forward(t, no_usage));
  CHECK_THROWS_AS(parallel.forward(t, no_usage), InvalidArgument);
  EncodedExample bad_ctx = ex;
  bad_ctx.contextual.pop_back();
  CHECK_THROWS_AS(single.forward(t, bad_ctx), ShapeError);
}

TEST_CASE("parallel model with the usage decoder removed matches the single model") {
  Model single(micro_config(), 20, 11);
  Model parallel(micro_config(ModelKind::kParallel), 20, 11);
  for (std::uint64_t s = 0; s < 3; ++s) {
    auto ex = micro_example(single.config(), s);
    CHECK(nll(single, ex) == nll(parallel, ex));
  }
}

TEST_CASE("parallel usage decoder does not touch the definition NLL") {
  Model m(micro_config(ModelKind::kParallel), 20, 5);
  auto ex = micro_example(m.config(), 4);
  const double def = nll(m, ex), usg = nll(m, ex, Task::kUsage);
  CHECK(std::isfinite(def));
  CHECK(std::isfinite(usg));
  perturb_prefix(m, "decoder.usg", 0.3);
  CHECK(nll(m, ex) == def);
  CHECK(nll(m, ex, Task::kUsage) != usg);
}

TEST_CASE("hierarchical shortcut shapes") {
  for (auto kind : {ModelKind::kHierDU, ModelKind::kHierUD}) {
    Model m(micro_config(kind), 20, 5);
    const auto& c = m.config();
    REQUIRE(m.shortcut());
    CHECK(m.shortcut()->shape() == Shape{c.input_dim() + c.state_dim, c.input_dim()});
    const Task upper = kind == ModelKind::kHierDU ? Task::kUsage : Task::kDefinition;
    CHECK(m.shortcut()->dim(1) == m.decoder(upper).gru().input_dim());
  }
  CHECK_FALSE(Model(micro_config(ModelKind::kParallel), 20, 5).shortcut());
}

TEST_CASE("zeroing the shortcut state block cuts the lower decoder out of the upper task") {
  for (auto kind : {ModelKind::kHierDU, ModelKind::kHierUD}) {
    Model m(micro_config(kind), 20, 5);
    const Task upper = kind == ModelKind::kHierDU ? Task::kUsage : Task::kDefinition;
    const std::string lower = kind == ModelKind::kHierDU ? "decoder.def.gru" : "decoder.usg.gru";
    auto ex = micro_example(m.config(), 6);
    const double before = nll(m, ex, upper);
    perturb_prefix(m, lower, 0.2);
    CHECK(nll(m, ex, upper) != before);

    Tensor& wp = *m.shortcut();
    const std::size_t x = m.config().input_dim();
    for (std::size_t r = x; r < wp.dim(0); ++r)
      for (std::size_t col = 0; col < wp.dim(1); ++col) wp.at(r, col) = 0.0;
    const double cut = nll(m, ex, upper);
    perturb_prefix(m, lower, 0.2);
    CHECK(nll(m, ex, upper) == cut);
  }
}

TEST_CASE("hier-du and hier-ud are not interchangeable") {
  Model du(micro_config(ModelKind::kHierDU), 20, 9);
  Model ud(micro_config(ModelKind::kHierUD), 20, 9);
  auto ex = micro_example(du.config(), 2);
  CHECK(nll(du, ex) != nll(ud, ex));
  CHECK(nll(du, ex, Task::kUsage) != nll(ud, ex, Task::kUsage));
  CHECK(std::isfinite(nll(ud, ex)));
  CHECK(std::isfinite(nll(ud, ex, Task::kUsage)));
}

TEST_CASE("multi-task loss") {
  CHECK(multi_task_loss(ModelKind::kParallel, 2.0, 3.0) == 5.0);
  CHECK(multi_task_loss(ModelKind::kHierDU, 2.0, 0.0) == 2.0);
  CHECK_THROWS_AS(multi_task_loss(ModelKind::kSingle, 2.0, 3.0), InvalidArgument);

  Model single(micro_config(), 20, 4);
  Model parallel(micro_config(ModelKind::kParallel), 20, 4);
  auto ex = micro_example(single.config(), 7);
  Tape t(false);
  auto ps = parallel.forward(t, ex);
  auto ss = single.forward(t, ex);
  const double def = t.item(ps.definition->mean_nll());
  const double usg = t.item(ps.usage->mean_nll());
  CHECK(t.item(parallel.loss(ps)) == doctest::Approx(def + usg).epsilon(1e-15));
  CHECK(multi_task_loss(ModelKind::kParallel, def, 0.0) == t.item(single.loss(ss)));
}

TEST_CASE("parameter count formula matches every switch combination") {
  for (auto kind : kKinds)
    for (bool gate : {true, false})
      for (bool word : {true, false})
        for (bool chars : {true, false})
          for (bool ctx : {true, false})
            for (auto init : {InitVariant::kZeros, InitVariant::kWord, InitVariant::kContext,
                              InitVariant::kBoth}) {
              ModelConfig c = micro_config(kind);
              c.use_gate = gate;
              c.use_word = word;
              c.use_char = chars;
              c.use_contextual = ctx;
              c.init = init;
              Model m(c, 20, 1);
              CHECK(m.params().parameter_count() == Model::parameter_count(c, 20));
            }
}

TEST_CASE("removing the gate drops exactly its square matrix per decoder") {
  for (auto kind : kKinds) {
    ModelConfig on = micro_config(kind), off = on;
    off.use_gate = false;
    const std::size_t x = on.input_dim();
    CHECK(x == 2 * 8 + 160 + 8);
    const std::size_t decoders = is_multi_task(kind) ? 2 : 1;
    CHECK(Model::parameter_count(on, 20) - Model::parameter_count(off, 20) == decoders * x * x);
  }
}

TEST_CASE("full-size count") {
  ModelConfig c;
  const std::size_t V = 1000;
  const std::size_t x = 300 + 300 + 160 + 1024;
  std::size_t expected = 2 * V * 300 + 4 * 300;
  expected += 2 * 3 * (300 * 150 + 150 * 150 + 150);
  expected += 300 * 300 + 2 * 300 * 300 + 300 * 300;
  expected += CharEncoder::parameter_count(c.chars);
  expected += 600 * 300 + 300;
  expected += x * x + 3 * (x * 300 + 300 * 300 + 300) + 3 * (300 * 300 + 300 * 300 + 300) + 300 * V + V;
  CHECK(Model::parameter_count(c, V) == expected);
}

TEST_CASE("fixed decoder table is not trainable") {
  Model m(micro_config(), 20, 1);
  CHECK_FALSE(m.params().get("embed.decoder").requires_grad());
  CHECK(m.params().get("embed.special").requires_grad());
  CHECK(m.params().get("embed.encoder").requires_grad());
}

TEST_CASE("every model kind passes the full-loss gradient check") {
  for (auto kind : kKinds) {
    CAPTURE(model_kind_name(kind));
    Model m(micro_config(kind), 20, 21);
    auto a = micro_example(m.config(), 1), b = micro_example(m.config(), 2);
    auto point = trainable(m);
    GradCheckOptions o;
    o.max_coords_per_tensor = 12;
    o.seed = 3;
    auto r = grad_check(
        [&](Tape& t) {
          Var la = m.loss(m.forward(t, a));
          Var lb = m.loss(m.forward(t, b));
          return scale(add(la, lb), 0.5);
        },
        point, o);
    CHECK(r.max_error < 1e-3);
    CHECK(r.coords_checked > 100);
    const auto d = directional_check(
        [&](Tape& t) { return scale(add(m.loss(m.forward(t, a)), m.loss(m.forward(t, b))), 0.5); },
        point, 4, o);
    CHECK(d.max_error < 1e-3);
  }
}

TEST_CASE("greedy generation follows the argmax of its own teacher-forced pass") {
  Model m(micro_config(ModelKind::kParallel), 20, 8);
  auto ex = micro_example(m.config(), 5);
  auto g = m.generate(ex, 1e-7, 1, 6);
  CHECK_FALSE(g.definition.empty());
  CHECK_FALSE(g.unknown_word);
  for (Task task : {Task::kDefinition, Task::kUsage}) {
    const auto& ids = task == Task::kDefinition ? g.definition : g.usage;
    if (ids.size() >= 6) continue;  // stopped by the length cap, no <eos> to check
    EncodedExample forced = ex;
    (task == Task::kDefinition ? forced.definition : forced.usage) = ids;
    if (ids.empty()) continue;
    Tape t(false);
    auto out = m.forward(t, forced);
    const auto& steps = (task == Task::kDefinition ? *out.definition : *out.usage).logits;
    for (std::size_t s = 0; s < steps.size(); ++s) {
      auto l = t.value(steps[s]);
      std::size_t best = 1;
      for (std::size_t i = 1; i < l.size(); ++i)
        if (i != 2 && l[i] > l[best]) best = i;
      const int expect = s < ids.size() ? ids[s] : data::Vocabulary::kEos;
      CHECK(static_cast<int>(best) == expect);
    }
  }
}

TEST_CASE("generation is seeded and respects the length cap") {
  Model m(micro_config(), 20, 8);
  auto ex = micro_example(m.config(), 5);
  auto a = m.generate(ex, 1.0, 42, 5);
  auto b = m.generate(ex, 1.0, 42, 5);
  CHECK(a.definition == b.definition);
  CHECK(a.definition.size() <= 5);
  CHECK(a.usage.empty());
  for (int id : a.definition) {
    CHECK(id != data::Vocabulary::kPad);
    CHECK(id != data::Vocabulary::kBos);
    CHECK(id != data::Vocabulary::kEos);
  }
  CHECK_THROWS_AS(m.generate(ex, 0.0, 1, 5), InvalidArgument);
  CHECK_THROWS_AS(m.generate(ex, 1.0, 1, 0), InvalidArgument);
  ex.word_known = false;
  ex.word_id = data::Vocabulary::kUnk;
  CHECK(m.generate(ex, 1.0, 1, 5).unknown_word);
}

TEST_CASE("sample_token masks pad and bos") {
  Rng rng(1);
  std::vector<double> logits = {100, 0, 100, 0, 0};
  for (int i = 0; i < 50; ++i) {
    int s = sample_token(logits, 1.0, rng);
    CHECK(s != data::Vocabulary::kPad);
    CHECK(s != data::Vocabulary::kBos);
  }
  std::vector<double> peaked = {0, 0, 0, 1, 5};
  CHECK(sample_token(peaked, 1e-9, rng) == 4);
}

TEST_CASE("a few Adam steps lower every kind's loss") {
  for (auto kind : kKinds) {
    CAPTURE(model_kind_name(kind));
    Model m(micro_config(kind), 20, 2);
    std::vector<EncodedExample> data;
    for (std::uint64_t s = 0; s < 4; ++s) data.push_back(micro_example(m.config(), s));
    auto params = trainable(m);
    AdamState st;
    st.options.learning_rate = 1e-2;
    auto total = [&] {
      double sum_def = 0, sum_usg = 0;
      for (const auto& ex : data) {
        Tape t(false);
        auto out = m.forward(t, ex);
        sum_def += t.item(out.definition->mean_nll());
        if (out.usage) sum_usg += t.item(out.usage->mean_nll());
      }
      return std::pair{sum_def, sum_usg};
    };
    auto [d0, u0] = total();
    for (int step = 0; step < 20; ++step) {
      m.params().zero_grad();
      for (const auto& ex : data) {
        Tape t;
        t.backward(scale(m.loss(m.forward(t, ex)), 0.25));
      }
      adam_step(params, st);
    }
    auto [d1, u1] = total();
    CHECK(d1 < d0);
    if (is_multi_task(kind)) CHECK(u1 < u0);
  }
}
