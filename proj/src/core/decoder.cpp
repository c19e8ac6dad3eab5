#include "core/decoder.hpp"

#include "core/data.hpp"
#include "core/error.hpp"

namespace semgen {

using ad::Var;

const char* init_variant_name(InitVariant v) {
  switch (v) {
    case InitVariant::kZeros: return "zeros";
    case InitVariant::kWord: return "word";
    case InitVariant::kContext: return "context";
    case InitVariant::kBoth: return "both";
  }
  return "?";
}

std::optional<InitVariant> parse_init_variant(std::string_view name) {
  for (auto v : {InitVariant::kZeros, InitVariant::kWord, InitVariant::kContext, InitVariant::kBoth})
    if (name == init_variant_name(v)) return v;
  return std::nullopt;
}

InitState::InitState(ParamStore& store, const std::string& prefix, std::size_t word_dim,
                     std::size_t context_dim, std::size_t state_dim, InitVariant variant, Rng& rng)
    : variant_(variant), word_dim_(word_dim), context_dim_(context_dim), state_dim_(state_dim) {
  if (variant == InitVariant::kZeros) return;
  w_s = &store.add(prefix + ".w_s", {word_dim + context_dim, state_dim});
  init_xavier(*w_s, rng);
  b_s = &store.add(prefix + ".b_s", {1, state_dim});
}

std::vector<Var> InitState::compute(ad::Tape& tape, Var v_star, Var v_c, std::size_t layers) const {
  std::vector<Var> states(layers);
  for (auto& s : states) s = tape.zeros({1, state_dim_});
  if (variant_ == InitVariant::kZeros) return states;
  if (tape.shape(v_star) != ad::Shape{1, word_dim_} || tape.shape(v_c) != ad::Shape{1, context_dim_})
    throw ShapeError("init_state: expected v* [1," + std::to_string(word_dim_) + "] and v_c [1," +
                     std::to_string(context_dim_) + "], got " + ad::shape_str(tape.shape(v_star)) +
                     " and " + ad::shape_str(tape.shape(v_c)));
  Var w = variant_ == InitVariant::kContext ? tape.zeros({1, word_dim_}) : v_star;
  Var c = variant_ == InitVariant::kWord ? tape.zeros({1, context_dim_}) : v_c;
  states[0] = ad::add(ad::matmul(ad::concat({w, c}, 1), tape.leaf(*w_s)), tape.leaf(*b_s));
  return states;
}

InputGate::InputGate(ParamStore& store, const std::string& prefix, std::size_t dim, bool enabled,
                     Rng& rng)
    : dim_(dim) {
  if (!enabled) return;
  w_g = &store.add(prefix + ".w_g", {dim, dim});
  init_xavier(*w_g, rng);
}

Var InputGate::apply(ad::Tape& tape, Var u) const {
  if (tape.shape(u) != ad::Shape{1, dim_})
    throw ShapeError("gated_input: expected [1," + std::to_string(dim_) + "], got " +
                     ad::shape_str(tape.shape(u)));
  if (!w_g) return u;
  return ad::mul(ad::sigmoid(ad::matmul(u, tape.leaf(*w_g))), u);
}

GruStack::GruStack(ParamStore& store, const std::string& prefix, std::size_t input_dim,
                   std::size_t hidden, std::size_t layers, Rng& rng) {
  if (layers == 0) throw InvalidArgument("decoder needs at least one layer");
  cells_.reserve(layers);
  for (std::size_t l = 0; l < layers; ++l)
    cells_.emplace_back(store, prefix + ".layer" + std::to_string(l), l == 0 ? input_dim : hidden,
                        hidden, rng);
}

std::vector<Var> GruStack::step(ad::Tape& tape, const std::vector<Var>& states, Var x) const {
  if (states.size() != cells_.size())
    throw ShapeError("decode_step: " + std::to_string(states.size()) + " states for " +
                     std::to_string(cells_.size()) + " layers");
  std::vector<Var> next(states.size());
  Var in = x;
  for (std::size_t l = 0; l < cells_.size(); ++l) in = next[l] = cells_[l].step(tape, states[l], in);
  return next;
}

OutputLayer::OutputLayer(ParamStore& store, const std::string& prefix, std::size_t state_dim,
                         std::size_t vocab_size, Rng& rng) {
  w_d = &store.add(prefix + ".w_d", {state_dim, vocab_size});
  init_xavier(*w_d, rng);
  b_d = &store.add(prefix + ".b_d", {1, vocab_size});
}

Var OutputLayer::logits(ad::Tape& tape, Var state) const {
  return ad::add(ad::matmul(state, tape.leaf(*w_d)), tape.leaf(*b_d));
}

Var WordEmbedder::embed(ad::Tape& tape, int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= fixed_->dim(0))
    throw InvalidArgument("token id " + std::to_string(id) + " outside the vocabulary");
  if (id < data::Vocabulary::kNumSpecials) return ad::embedding_lookup(tape.leaf(*special_), id);
  return ad::embedding_lookup(tape.leaf(*fixed_), id);
}

SemanticsDecoder::SemanticsDecoder(ParamStore& store, const std::string& prefix,
                                   std::size_t input_dim, std::size_t gru_input_dim,
                                   std::size_t state_dim, std::size_t layers,
                                   std::size_t vocab_size, bool gate, Rng& rng)
    : gate_(store, prefix + ".gate", input_dim, gate, rng),
      gru_(store, prefix + ".gru", gru_input_dim, state_dim, layers, rng),
      output_(store, prefix + ".out", state_dim, vocab_size, rng) {}

}  // namespace semgen
