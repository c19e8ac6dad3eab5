#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "core/decoder.hpp"
#include "core/embeddings.hpp"

namespace semgen {

enum class ModelKind { kSingle, kParallel, kHierDU, kHierUD };
const char* model_kind_name(ModelKind k);
std::optional<ModelKind> parse_model_kind(std::string_view name);
inline bool is_multi_task(ModelKind k) { return k != ModelKind::kSingle; }

struct ModelConfig {
  ModelKind kind = ModelKind::kSingle;
  std::size_t word_dim = 300;       // d_w
  std::size_t encoder_hidden = 150;  // d_h, per direction
  std::size_t state_dim = 300;      // d_s
  std::size_t layers = 2;
  std::size_t attention_dim = 300;  // d
  std::size_t contextual_dim = 1024;  // d_e
  std::size_t max_context = 64;
  std::size_t max_vocab = 65000;
  CharEncoderConfig chars;

  bool use_gate = true;
  bool use_word = true;  // a* in the decoder input
  bool use_char = true;
  bool use_contextual = true;
  InitVariant init = InitVariant::kBoth;

  std::size_t input_dim() const;  // length of [a*; y; c*; e*] under the switches
  void validate() const;
};

struct TrainConfig {
  std::uint64_t seed = 1;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 5.0;
  std::size_t patience = 5;
  std::size_t max_epochs = 100;
  std::size_t pretrain_epochs = 5;
  double tau = 0.05;
  std::size_t max_length = 40;  // generation cap
  void validate() const;
};

struct DataConfig {
  std::string corpus;  // input of `data split`
  std::string train;
  std::string valid;
  std::string test;
  std::string stopwords;
  std::string word_vectors;  // empty: random initialization
  std::string contextual = "hash";  // "hash" or "file"
  std::string contextual_file;
  std::string lm_corpus;
  std::string warm_start;  // pretrained decoder checkpoint
  std::array<double, 3> split_ratios = {0.8, 0.1, 0.1};
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;

  void validate() const;
};

// "key = value" lines; '#' starts a comment. Unknown keys are errors.
RunConfig parse_config(std::string_view text, const std::string& source = "<config>");
RunConfig load_config(const std::string& path);
void apply_override(RunConfig& cfg, std::string_view key_value);
void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value);

// Every key in a fixed order, so equal configs serialize identically.
std::string config_to_text(const RunConfig& cfg);
std::vector<std::string> config_keys();

// Makes relative data paths absolute against `base`.
void resolve_paths(RunConfig& cfg, const std::string& base);

// FNV-1a of config_to_text, 16 hex digits.
std::string config_digest(const RunConfig& cfg);

}  // namespace semgen
