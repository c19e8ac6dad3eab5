#include "core/encoder.hpp"

#include <cmath>
#include <vector>

#include "core/error.hpp"

namespace semgen {

using ad::Var;

GruCell::GruCell(ParamStore& store, const std::string& prefix, std::size_t input_dim,
                 std::size_t hidden, Rng& rng)
    : input_dim_(input_dim), hidden_(hidden) {
  auto weight = [&](const char* name, std::size_t rows) {
    auto& t = store.add(prefix + "." + name, {rows, hidden});
    init_xavier(t, rng);
    return &t;
  };
  w_z = weight("w_z", input_dim);
  w_r = weight("w_r", input_dim);
  w_h = weight("w_h", input_dim);
  u_z = weight("u_z", hidden);
  u_r = weight("u_r", hidden);
  u_h = weight("u_h", hidden);
  b_z = &store.add(prefix + ".b_z", {1, hidden});
  b_r = &store.add(prefix + ".b_r", {1, hidden});
  b_h = &store.add(prefix + ".b_h", {1, hidden});
}

Var GruCell::step(ad::Tape& tape, Var h_prev, Var x) const {
  if (tape.shape(x) != ad::Shape{1, input_dim_} || tape.shape(h_prev) != ad::Shape{1, hidden_})
    throw ShapeError("gru_cell_step: expected x [1," + std::to_string(input_dim_) + "] and h [1," +
                     std::to_string(hidden_) + "], got " + ad::shape_str(tape.shape(x)) + " and " +
                     ad::shape_str(tape.shape(h_prev)));
  auto affine = [&](ad::Tensor* w, ad::Tensor* u, ad::Tensor* b, Var h) {
    return ad::add(ad::add(ad::matmul(x, tape.leaf(*w)), ad::matmul(h, tape.leaf(*u))),
                   tape.leaf(*b));
  };
  Var z = ad::sigmoid(affine(w_z, u_z, b_z, h_prev));
  Var r = ad::sigmoid(affine(w_r, u_r, b_r, h_prev));
  Var cand = ad::tanh(affine(w_h, u_h, b_h, ad::mul(r, h_prev)));
  return ad::add(h_prev, ad::mul(z, ad::sub(cand, h_prev)));
}

ContextEncoder::ContextEncoder(ParamStore& store, const std::string& prefix, ad::Tensor& embedding,
                               std::size_t hidden, std::size_t max_length, Rng& rng)
    : embedding_(&embedding),
      forward_(store, prefix + ".fwd", embedding.dim(1), hidden, rng),
      backward_(store, prefix + ".bwd", embedding.dim(1), hidden, rng),
      max_length_(max_length) {
  if (max_length == 0) throw InvalidArgument("context encoder: max length must be positive");
}

EncodedContext ContextEncoder::encode(ad::Tape& tape, std::span<const int> ids) const {
  if (ids.empty()) throw InvalidArgument("encode_context: empty context");
  if (ids.size() > max_length_) ids = ids.first(max_length_);
  const std::size_t m = ids.size();
  const std::size_t d = forward_.hidden();
  Var x = ad::embedding_lookup(tape.leaf(*embedding_), ids);
  std::vector<Var> rows(m);
  for (std::size_t i = 0; i < m; ++i) rows[i] = ad::slice(x, 0, i, 1);

  std::vector<Var> fwd(m), bwd(m);
  Var h = tape.zeros({1, d});
  for (std::size_t i = 0; i < m; ++i) h = fwd[i] = forward_.step(tape, h, rows[i]);
  h = tape.zeros({1, d});
  for (std::size_t i = m; i-- > 0;) h = bwd[i] = backward_.step(tape, h, rows[i]);

  std::vector<Var> states(m);
  for (std::size_t i = 0; i < m; ++i) states[i] = ad::concat({fwd[i], bwd[i]}, 1);
  Var H = m == 1 ? states[0] : ad::concat(states, 0);
  return {H, ad::max_over_axis(H, 0)};
}

AttentionResult scaled_dot_attention(Var q, Var k, Var v) {
  ad::Tape& tape = *q.tape();
  const auto& qs = tape.shape(q);
  if (qs.size() != 2 || qs[0] != 1)
    throw ShapeError("sense_attention: query must be a row, got " + ad::shape_str(qs));
  Var scores = ad::scale(ad::matmul(q, k, true), 1.0 / std::sqrt(static_cast<double>(qs[1])));
  Var w = ad::softmax(scores, 1);
  return {w, ad::matmul(w, v)};
}

SenseAttention::SenseAttention(ParamStore& store, const std::string& prefix, std::size_t word_dim,
                               std::size_t state_dim, std::size_t attention_dim, Rng& rng) {
  auto weight = [&](const char* name, std::size_t rows, std::size_t cols) {
    auto& t = store.add(prefix + "." + name, {rows, cols});
    init_xavier(t, rng);
    return &t;
  };
  w_q = weight("w_q", word_dim, attention_dim);
  w_k = weight("w_k", state_dim, attention_dim);
  w_v = weight("w_v", state_dim, attention_dim);
  w_o = weight("w_o", attention_dim, word_dim);
}

AttentionResult SenseAttention::attend(ad::Tape& tape, Var v_star, Var states) const {
  Var q = ad::matmul(v_star, tape.leaf(*w_q));
  Var k = ad::matmul(states, tape.leaf(*w_k));
  Var v = ad::matmul(states, tape.leaf(*w_v));
  auto r = scaled_dot_attention(q, k, v);
  return {r.weights, ad::matmul(r.output, tape.leaf(*w_o))};
}

}  // namespace semgen
