#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/data.hpp"
#include "core/decoder.hpp"
#include "core/embeddings.hpp"
#include "core/encoder.hpp"
#include "core/params.hpp"

namespace semgen {

enum class Task { kDefinition, kUsage };
const char* task_name(Task t);

// One (entry, context) pair mapped to ids, with e* already looked up.
struct EncodedExample {
  std::string id;
  std::string word;
  int word_id = data::Vocabulary::kUnk;
  bool word_known = false;
  std::vector<int> context;
  std::vector<double> contextual;  // e*, empty when the switch is off
  std::vector<int> definition;     // without <bos>/<eos>
  std::vector<int> usage;
};

// `provider` may be null when the contextual switch is off.
EncodedExample encode_example(const data::DictionaryEntry& entry, std::size_t context_index,
                              const data::Vocabulary& vocab, const ModelConfig& cfg,
                              const ContextualProvider* provider);

struct TaskOutput {
  ad::Var nll_sum;  // [1,1], -log p(target)
  std::size_t tokens = 0;  // predicted tokens, <eos> included
  std::vector<ad::Var> logits;  // one [1,V] row per predicted token

  ad::Var mean_nll() const;
};

struct ForwardOutput {
  std::optional<TaskOutput> definition;
  std::optional<TaskOutput> usage;
};

struct Generation {
  std::vector<int> definition;
  std::vector<int> usage;  // multi-task kinds only
  bool unknown_word = false;
};

class Model {
 public:
  // `pretrained` (if any) initializes both embedding tables; otherwise they
  // are drawn from uniform(-0.1, 0.1).
  Model(const ModelConfig& config, std::size_t vocab_size, std::uint64_t seed,
        const EmbeddingTable* pretrained = nullptr);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  std::size_t vocab_size() const { return vocab_size_; }

  // Teacher-forced pass over every task the kind supervises.
  ForwardOutput forward(ad::Tape& tape, const EncodedExample& ex) const;
  // Definition mean NLL for single; sum of task mean NLLs otherwise.
  ad::Var loss(const ForwardOutput& out) const;

  // Definition decoder as an unconditional language model: every
  // conditioning feature and s_0 are zero.
  TaskOutput forward_unconditional(ad::Tape& tape, std::span<const int> sentence) const;

  Generation generate(const EncodedExample& ex, double tau, std::uint64_t seed,
                      std::size_t max_length) const;
  std::vector<int> generate_ids(const EncodedExample& ex, Task task, double tau, Rng& rng,
                                std::size_t max_length) const;

  const SemanticsDecoder& decoder(Task t) const;
  bool supervises(Task t) const;
  ad::Tensor* shortcut() const { return w_p_; }

  // Closed form of params().parameter_count() for a configuration.
  static std::size_t parameter_count(const ModelConfig& config, std::size_t vocab_size);

 private:
  struct Conditioning {
    ad::Var a_star, c_star, e_star;
    std::vector<ad::Var> s0;
  };
  struct TaskPath {
    const SemanticsDecoder* top;
    const SemanticsDecoder* lower;  // hierarchical upper task only
  };
  struct TaskState {
    std::vector<ad::Var> top, lower;
  };

  Conditioning condition(ad::Tape& tape, const EncodedExample& ex) const;
  Conditioning zero_conditioning(ad::Tape& tape) const;
  TaskPath path(Task t) const;
  ad::Var step(ad::Tape& tape, const Conditioning& c, const TaskPath& p, TaskState& s,
               int prev) const;
  TaskOutput teacher_force(ad::Tape& tape, const Conditioning& c, const TaskPath& p,
                           std::span<const int> target) const;

  ModelConfig config_;
  std::size_t vocab_size_;
  ParamStore params_;
  ad::Tensor* encoder_table_;
  ad::Tensor* decoder_table_;
  ad::Tensor* special_;
  std::unique_ptr<WordEmbedder> words_;
  std::unique_ptr<ContextEncoder> encoder_;
  std::unique_ptr<SenseAttention> attention_;
  std::unique_ptr<CharEncoder> chars_;
  std::unique_ptr<InitState> init_;
  std::unique_ptr<SemanticsDecoder> def_;
  std::unique_ptr<SemanticsDecoder> usg_;
  ad::Tensor* w_p_ = nullptr;
};

// NLL_def + NLL_usg over token-mean task losses.
double multi_task_loss(ModelKind kind, double definition_nll, double usage_nll);

// Index of the sampled token. Pad and <bos> are never drawn; tau < 1e-6 is
// argmax.
int sample_token(std::span<const double> logits, double tau, Rng& rng);

}  // namespace semgen
