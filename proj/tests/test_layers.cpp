#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "core/decoder.hpp"
#include "core/encoder.hpp"
#include "core/error.hpp"
#include "core/grad_check.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace semgen;
using namespace semgen::ad;
using semgen::testing::random_tensor;

namespace {

std::vector<double> values(const Tape& t, Var v) {
  auto s = t.value(v);
  return {s.begin(), s.end()};
}

void fill(Tensor& t, double v) {
  for (auto& x : t.data()) x = v;
}

void zero_all(ParamStore& store) {
  for (auto* t : store.tensors()) fill(*t, 0.0);
}

std::vector<Tensor*> all(ParamStore& store) { return {store.tensors().begin(), store.tensors().end()}; }

}  // namespace

TEST_CASE("zero GRU cell halves the previous state") {
  ParamStore store;
  Rng rng(1);
  GruCell cell(store, "g", 3, 2, rng);
  zero_all(store);
  Tape t;
  Var h = cell.step(t, t.constant(Tensor::row({0.4, -2.0})), t.constant(Tensor::row({1, 2, 3})));
  CHECK(values(t, h) == std::vector<double>{0.2, -1.0});
  Var h0 = cell.step(t, t.zeros({1, 2}), t.constant(Tensor::row({1, 2, 3})));
  CHECK(values(t, h0) == std::vector<double>{0.0, 0.0});
}

TEST_CASE("GRU cell rejects mismatched inputs") {
  ParamStore store;
  Rng rng(1);
  GruCell cell(store, "g", 3, 2, rng);
  Tape t;
  CHECK_THROWS_AS(cell.step(t, t.zeros({1, 2}), t.zeros({1, 4})), ShapeError);
  CHECK_THROWS_AS(cell.step(t, t.zeros({1, 3}), t.zeros({1, 3})), ShapeError);
}

TEST_CASE("GRU cell gradients") {
  ParamStore store;
  Rng rng(2);
  GruCell cell(store, "g", 3, 4, rng);
  Tensor x = random_tensor({1, 3}, 5);
  Tensor h = random_tensor({1, 4}, 6);
  auto point = all(store);
  point.push_back(&x);
  point.push_back(&h);
  double err = grad_check(
      [&](Tape& t) {
        Var y = cell.step(t, t.leaf(h), t.leaf(x));
        y = cell.step(t, y, t.leaf(x));
        return sum(mul(y, y));
      },
      point, 1e-5);
  CHECK(err < 1e-6);
}

TEST_CASE("context encoder shapes and pooling") {
  ParamStore store;
  Rng rng(3);
  Tensor table = random_tensor({10, 6}, 4);
  ContextEncoder enc(store, "enc", table, 5, 4, rng);
  Tape t;
  std::vector<int> one = {7};
  auto e1 = enc.encode(t, one);
  CHECK(t.shape(e1.states) == Shape{1, 10});
  CHECK(values(t, e1.states) == values(t, e1.pooled));

  std::vector<int> ids = {4, 5, 6, 7, 8, 9};
  auto e = enc.encode(t, ids);
  CHECK(t.shape(e.states) == Shape{4, 10});  // truncated to max length
  auto H = values(t, e.states);
  auto vc = values(t, e.pooled);
  for (std::size_t j = 0; j < 10; ++j) {
    double m = H[j];
    for (std::size_t i = 1; i < 4; ++i) m = std::max(m, H[i * 10 + j]);
    CHECK(vc[j] == m);
  }
  CHECK_THROWS_AS(enc.encode(t, std::vector<int>{}), InvalidArgument);
}

TEST_CASE("full-size encoder produces 300-wide states") {
  ParamStore store;
  Rng rng(3);
  Tensor table = random_tensor({8, 300}, 4, -0.1, 0.1);
  ContextEncoder enc(store, "enc", table, 150, 64, rng);
  Tape t(false);
  std::vector<int> ids = {4, 5, 6};
  CHECK(t.shape(enc.encode(t, ids).states) == Shape{3, 300});
}

TEST_CASE("context order changes the per-token states") {
  ParamStore store;
  Rng rng(3);
  Tensor table = random_tensor({10, 4}, 4);
  ContextEncoder enc(store, "enc", table, 3, 64, rng);
  Tape t;
  std::vector<int> a = {4, 5, 6}, b = {6, 5, 4};
  CHECK(values(t, enc.encode(t, a).states) != values(t, enc.encode(t, b).states));
}

TEST_CASE("hand-evaluated attention example") {
  Tape t;
  Var q = t.constant(Tensor::row({1, 0}));
  Var k = t.constant(Tensor::matrix({{1, 0}, {0, 1}}));
  auto r = scaled_dot_attention(q, k, k);
  const double s = std::exp(1.0 / std::sqrt(2.0));
  const double w0 = s / (s + 1.0);
  auto w = values(t, r.weights);
  CHECK(w[0] == doctest::Approx(w0).epsilon(1e-12));
  CHECK(w[0] == doctest::Approx(0.6698).epsilon(1e-4));
  CHECK(w[1] == doctest::Approx(0.3302).epsilon(1e-4));
  Var a = matmul(r.output, t.constant(Tensor::matrix({{1, 0}, {0, 1}})));
  CHECK(values(t, a) == values(t, r.weights));
}

TEST_CASE("identical keys give uniform attention") {
  ParamStore store;
  Rng rng(5);
  SenseAttention att(store, "att", 4, 6, 3, rng);
  Tape t;
  Var row = t.constant(random_tensor({1, 6}, 9, -1, 1, false));
  Var H = concat({row, row, row}, 0);
  auto r = att.attend(t, t.constant(random_tensor({1, 4}, 10, -1, 1, false)), H);
  for (double w : t.value(r.weights)) CHECK(w == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("single-state attention ignores the query") {
  ParamStore store;
  Rng rng(5);
  SenseAttention att(store, "att", 4, 6, 3, rng);
  Tape t;
  Var H = t.constant(random_tensor({1, 6}, 9, -1, 1, false));
  auto a = values(t, att.attend(t, t.constant(random_tensor({1, 4}, 1, -1, 1, false)), H).output);
  auto b = values(t, att.attend(t, t.constant(random_tensor({1, 4}, 2, -1, 1, false)), H).output);
  CHECK(a == b);
  auto direct = values(t, matmul(matmul(H, t.leaf(*att.w_v)), t.leaf(*att.w_o)));
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(direct[i]).epsilon(1e-14));
}

TEST_CASE("attention weights form a distribution and are shift invariant") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Tape t;
    Var q = t.constant(random_tensor({1, 3}, seed, -5, 5, false));
    Var k = t.constant(random_tensor({5, 3}, seed + 100, -5, 5, false));
    auto w = values(t, scaled_dot_attention(q, k, k).weights);
    CHECK(std::accumulate(w.begin(), w.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    for (double x : w) CHECK(x >= 0.0);

    Var scores = scale(matmul(q, k, true), 1.0 / std::sqrt(3.0));
    Var shifted = add(scores, t.constant(Tensor({1, 5}, std::vector<double>(5, 7.5))));
    auto w2 = values(t, softmax(shifted, 1));
    for (std::size_t i = 0; i < 5; ++i) CHECK(w2[i] == doctest::Approx(w[i]).epsilon(1e-12));
  }
}

TEST_CASE("encoder and attention gradients end to end") {
  ParamStore store;
  Rng rng(8);
  Tensor table = random_tensor({9, 4}, 4);
  ContextEncoder enc(store, "enc", table, 3, 64, rng);
  SenseAttention att(store, "att", 4, 6, 5, rng);
  Tensor v = random_tensor({1, 4}, 12);
  auto point = all(store);
  point.push_back(&table);
  point.push_back(&v);
  std::vector<int> ids = {4, 8, 5, 4};
  double err = grad_check(
      [&](Tape& t) {
        auto e = enc.encode(t, ids);
        Var a = att.attend(t, t.leaf(v), e.states).output;
        return add(sum(mul(a, a)), sum(e.pooled));
      },
      point, 1e-5);
  CHECK(err < 1e-3);
  CHECK(err < 1e-6);
}

TEST_CASE("init state variants") {
  ParamStore store;
  Rng rng(1);
  InitState both(store, "i", 2, 3, 4, InitVariant::kBoth, rng);
  Tape t;
  fill(*both.b_s, 0.25);
  auto s = both.compute(t, t.zeros({1, 2}), t.zeros({1, 3}), 2);
  CHECK(values(t, s[0]) == std::vector<double>(4, 0.25));
  CHECK(values(t, s[1]) == std::vector<double>(4, 0.0));

  fill(*both.w_s, 0.0);
  auto s2 = both.compute(t, t.constant(random_tensor({1, 2}, 1)), t.constant(random_tensor({1, 3}, 2)), 2);
  CHECK(values(t, s2[0]) == std::vector<double>(4, 0.25));

  ParamStore zs;
  InitState zeros(zs, "i", 2, 3, 4, InitVariant::kZeros, rng);
  CHECK(zs.parameter_count() == 0);
  auto z = zeros.compute(t, t.constant(random_tensor({1, 2}, 1)), t.constant(random_tensor({1, 3}, 2)), 2);
  for (Var v : z) CHECK(values(t, v) == std::vector<double>(4, 0.0));

  CHECK_THROWS_AS(both.compute(t, t.zeros({1, 3}), t.zeros({1, 3}), 2), ShapeError);
}

TEST_CASE("word-only and context-only init drop the other component") {
  ParamStore store;
  Rng rng(1);
  InitState w(store, "w", 2, 3, 4, InitVariant::kWord, rng);
  InitState c(store, "c", 2, 3, 4, InitVariant::kContext, rng);
  Tape t;
  Var v = t.constant(random_tensor({1, 2}, 1));
  Var vc = t.constant(random_tensor({1, 3}, 2));
  CHECK(values(t, w.compute(t, v, vc, 1)[0]) == values(t, w.compute(t, v, t.zeros({1, 3}), 1)[0]));
  CHECK(values(t, c.compute(t, v, vc, 1)[0]) == values(t, c.compute(t, t.zeros({1, 2}), vc, 1)[0]));
  CHECK(values(t, w.compute(t, v, vc, 1)[0]) != values(t, w.compute(t, t.zeros({1, 2}), vc, 1)[0]));
}

TEST_CASE("gated input") {
  ParamStore store;
  Rng rng(1);
  InputGate gate(store, "g", 4, true, rng);
  Tape t;
  Var u = t.constant(Tensor::row({1, -2, 3, 0.5}));
  CHECK(values(t, gate.apply(t, t.zeros({1, 4}))) == std::vector<double>(4, 0.0));
  fill(*gate.w_g, 0.0);
  CHECK(values(t, gate.apply(t, u)) == std::vector<double>{0.5, -1.0, 1.5, 0.25});
  CHECK_THROWS_AS(gate.apply(t, t.zeros({1, 5})), ShapeError);

  ParamStore off_store;
  InputGate off(off_store, "g", 4, false, rng);
  CHECK(off_store.parameter_count() == 0);
  CHECK(values(t, off.apply(t, u)) == values(t, u));
  CHECK(InputGate::parameter_count(4, true) == 16);
}

TEST_CASE("decode step gives a proper distribution") {
  ParamStore store;
  Rng rng(4);
  SemanticsDecoder dec(store, "d", 5, 5, 3, 2, 7, true, rng);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Tape t;
    std::vector<Var> s = {t.constant(random_tensor({1, 3}, seed)), t.zeros({1, 3})};
    s = dec.gru().step(t, s, dec.gate().apply(t, t.constant(random_tensor({1, 5}, seed + 9))));
    auto p = values(t, softmax(dec.output().logits(t, s.back()), 1));
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    for (double x : p) CHECK(x > 0.0);
  }
  fill(*dec.output().w_d, 0.0);
  Tape t;
  std::vector<Var> s = {t.constant(random_tensor({1, 3}, 1)), t.zeros({1, 3})};
  auto p = values(t, softmax(dec.output().logits(t, s.back()), 1));
  for (double x : p) CHECK(x == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
  CHECK_THROWS_AS(dec.gru().step(t, {s[0]}, t.zeros({1, 5})), ShapeError);
}

TEST_CASE("two stacked cells pass the gradient check") {
  ParamStore store;
  Rng rng(4);
  SemanticsDecoder dec(store, "d", 5, 5, 3, 2, 7, true, rng);
  Tensor x = random_tensor({1, 5}, 3);
  auto point = all(store);
  point.push_back(&x);
  double err = grad_check(
      [&](Tape& t) {
        std::vector<Var> s = {t.zeros({1, 3}), t.zeros({1, 3})};
        Var loss;
        for (int step = 0; step < 3; ++step) {
          s = dec.gru().step(t, s, dec.gate().apply(t, t.leaf(x)));
          Var nll = cross_entropy_logits(dec.output().logits(t, s.back()), step + 1);
          loss = loss.valid() ? add(loss, nll) : nll;
        }
        return loss;
      },
      point, 1e-5);
  CHECK(err < 1e-6);
}

TEST_CASE("special rows come from the trainable table") {
  Tensor fixed = random_tensor({8, 3}, 1, -1, 1, false);
  Tensor special = random_tensor({4, 3}, 2);
  WordEmbedder emb(fixed, special);
  Tape t;
  CHECK(values(t, emb.embed(t, 2)) == std::vector<double>(special.data().begin() + 6, special.data().begin() + 9));
  CHECK(values(t, emb.embed(t, 5)) == std::vector<double>(fixed.data().begin() + 15, fixed.data().begin() + 18));
  CHECK_THROWS_AS(emb.embed(t, 8), InvalidArgument);
}
