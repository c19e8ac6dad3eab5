#pragma once

#include <span>
#include <string>

#include "core/params.hpp"
#include "core/tape.hpp"

namespace semgen {

// z = σ(x W_z + h U_z + b_z)
// r = σ(x W_r + h U_r + b_r)
// h̃ = tanh(x W_h + (r ⊙ h) U_h + b_h)
// h' = (1 − z) ⊙ h + z ⊙ h̃
class GruCell {
 public:
  GruCell(ParamStore& store, const std::string& prefix, std::size_t input_dim, std::size_t hidden,
          Rng& rng);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t hidden() const { return hidden_; }

  // h_prev [1, hidden], x [1, input_dim] -> [1, hidden]
  ad::Var step(ad::Tape& tape, ad::Var h_prev, ad::Var x) const;

  static std::size_t parameter_count(std::size_t input_dim, std::size_t hidden) {
    return 3 * (input_dim * hidden + hidden * hidden + hidden);
  }

  ad::Tensor* w_z;
  ad::Tensor* w_r;
  ad::Tensor* w_h;
  ad::Tensor* u_z;
  ad::Tensor* u_r;
  ad::Tensor* u_h;
  ad::Tensor* b_z;
  ad::Tensor* b_r;
  ad::Tensor* b_h;

 private:
  std::size_t input_dim_;
  std::size_t hidden_;
};

struct EncodedContext {
  ad::Var states;  // H, [m, 2 * hidden]
  ad::Var pooled;  // v_c, [1, 2 * hidden]
};

// Bidirectional GRU over the encoder's own embedding table, max-pooled over
// time. Contexts longer than `max_length` are truncated.
class ContextEncoder {
 public:
  ContextEncoder(ParamStore& store, const std::string& prefix, ad::Tensor& embedding,
                 std::size_t hidden, std::size_t max_length, Rng& rng);

  std::size_t output_dim() const { return 2 * forward_.hidden(); }
  std::size_t max_length() const { return max_length_; }

  EncodedContext encode(ad::Tape& tape, std::span<const int> ids) const;

  static std::size_t parameter_count(std::size_t input_dim, std::size_t hidden) {
    return 2 * GruCell::parameter_count(input_dim, hidden);
  }

 private:
  ad::Tensor* embedding_;
  GruCell forward_;
  GruCell backward_;
  std::size_t max_length_;
};

struct AttentionResult {
  ad::Var weights;  // [1, m]
  ad::Var output;   // [1, out_dim]
};

// softmax(q kᵀ / √d) v for q [1,d], k [m,d], v [m,d].
AttentionResult scaled_dot_attention(ad::Var q, ad::Var k, ad::Var v);

// a* = (softmax(Q Kᵀ / √d) V) W^O with Q = v* W^Q, K = H W^K, V = H W^V.
class SenseAttention {
 public:
  SenseAttention(ParamStore& store, const std::string& prefix, std::size_t word_dim,
                 std::size_t state_dim, std::size_t attention_dim, Rng& rng);

  // v_star [1, word_dim], states [m, state_dim] -> a* [1, word_dim]
  AttentionResult attend(ad::Tape& tape, ad::Var v_star, ad::Var states) const;

  static std::size_t parameter_count(std::size_t word_dim, std::size_t state_dim, std::size_t d) {
    return word_dim * d + 2 * state_dim * d + d * word_dim;
  }

  ad::Tensor* w_q;
  ad::Tensor* w_k;
  ad::Tensor* w_v;
  ad::Tensor* w_o;
};

}  // namespace semgen
