#pragma once

#include <optional>
#include <string>
#include <vector>

#include "core/encoder.hpp"
#include "core/params.hpp"
#include "core/tape.hpp"

namespace semgen {

enum class InitVariant { kZeros, kWord, kContext, kBoth };
const char* init_variant_name(InitVariant v);
std::optional<InitVariant> parse_init_variant(std::string_view name);

// s_0 of layer 1 = W_s [v*; v_c] + b_s, components dropped by the variant
// replaced with zeros. Other layers start at zero. The zeros variant owns no
// parameters.
class InitState {
 public:
  InitState(ParamStore& store, const std::string& prefix, std::size_t word_dim,
            std::size_t context_dim, std::size_t state_dim, InitVariant variant, Rng& rng);

  InitVariant variant() const { return variant_; }
  std::vector<ad::Var> compute(ad::Tape& tape, ad::Var v_star, ad::Var v_c, std::size_t layers) const;

  static std::size_t parameter_count(std::size_t word_dim, std::size_t context_dim,
                                     std::size_t state_dim, InitVariant variant) {
    return variant == InitVariant::kZeros ? 0 : (word_dim + context_dim) * state_dim + state_dim;
  }

  ad::Tensor* w_s = nullptr;
  ad::Tensor* b_s = nullptr;

 private:
  InitVariant variant_;
  std::size_t word_dim_, context_dim_, state_dim_;
};

// x = σ(u W_g) ⊙ u, or x = u when disabled.
class InputGate {
 public:
  InputGate(ParamStore& store, const std::string& prefix, std::size_t dim, bool enabled, Rng& rng);

  bool enabled() const { return w_g != nullptr; }
  std::size_t dim() const { return dim_; }
  ad::Var apply(ad::Tape& tape, ad::Var u) const;

  static std::size_t parameter_count(std::size_t dim, bool enabled) { return enabled ? dim * dim : 0; }

  ad::Tensor* w_g = nullptr;

 private:
  std::size_t dim_;
};

// Stacked GRU cells; layer l+1 consumes the new state of layer l.
class GruStack {
 public:
  GruStack(ParamStore& store, const std::string& prefix, std::size_t input_dim,
           std::size_t hidden, std::size_t layers, Rng& rng);

  std::size_t layers() const { return cells_.size(); }
  std::size_t hidden() const { return cells_.front().hidden(); }
  std::size_t input_dim() const { return cells_.front().input_dim(); }
  std::vector<ad::Var> step(ad::Tape& tape, const std::vector<ad::Var>& states, ad::Var x) const;

  static std::size_t parameter_count(std::size_t input_dim, std::size_t hidden, std::size_t layers) {
    return GruCell::parameter_count(input_dim, hidden) +
           (layers - 1) * GruCell::parameter_count(hidden, hidden);
  }

  const GruCell& cell(std::size_t i) const { return cells_.at(i); }

 private:
  std::vector<GruCell> cells_;
};

// Logits W_d s + b_d over the decoder vocabulary.
class OutputLayer {
 public:
  OutputLayer(ParamStore& store, const std::string& prefix, std::size_t state_dim,
              std::size_t vocab_size, Rng& rng);

  ad::Var logits(ad::Tape& tape, ad::Var state) const;

  static std::size_t parameter_count(std::size_t state_dim, std::size_t vocab_size) {
    return state_dim * vocab_size + vocab_size;
  }

  ad::Tensor* w_d;
  ad::Tensor* b_d;
};

// Previous-token embeddings: a fixed pretrained table plus trainable rows for
// the special tokens.
class WordEmbedder {
 public:
  WordEmbedder(ad::Tensor& fixed, ad::Tensor& special) : fixed_(&fixed), special_(&special) {}

  std::size_t dim() const { return fixed_->dim(1); }
  ad::Var embed(ad::Tape& tape, int id) const;

 private:
  ad::Tensor* fixed_;
  ad::Tensor* special_;
};

// Gate, GRU stack and output projection of one task decoder.
class SemanticsDecoder {
 public:
  SemanticsDecoder(ParamStore& store, const std::string& prefix, std::size_t input_dim,
                   std::size_t gru_input_dim, std::size_t state_dim, std::size_t layers,
                   std::size_t vocab_size, bool gate, Rng& rng);

  const InputGate& gate() const { return gate_; }
  const GruStack& gru() const { return gru_; }
  const OutputLayer& output() const { return output_; }

  static std::size_t parameter_count(std::size_t input_dim, std::size_t gru_input_dim,
                                     std::size_t state_dim, std::size_t layers,
                                     std::size_t vocab_size, bool gate) {
    return InputGate::parameter_count(input_dim, gate) +
           GruStack::parameter_count(gru_input_dim, state_dim, layers) +
           OutputLayer::parameter_count(state_dim, vocab_size);
  }

 private:
  InputGate gate_;
  GruStack gru_;
  OutputLayer output_;
};

}  // namespace semgen
