#include "core/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "core/error.hpp"

namespace semgen {

using ad::Var;
using data::Vocabulary;

const char* task_name(Task t) { return t == Task::kDefinition ? "definition" : "usage"; }

EncodedExample encode_example(const data::DictionaryEntry& entry, std::size_t context_index,
                              const data::Vocabulary& vocab, const ModelConfig& cfg,
                              const ContextualProvider* provider) {
  if (entry.definition.empty()) throw InvalidArgument("entry '" + entry.id + "' has no definition");
  if (context_index >= entry.contexts.size())
    throw InvalidArgument("entry '" + entry.id + "' has no context " + std::to_string(context_index));
  const auto& ctx = entry.contexts[context_index];
  EncodedExample ex;
  ex.id = entry.id;
  ex.word = entry.word;
  auto wid = vocab.find(entry.word);
  ex.word_known = wid.has_value();
  ex.word_id = wid.value_or(Vocabulary::kUnk);
  ex.context = vocab.encode(ctx.tokens);
  ex.definition = vocab.encode(entry.definition);
  ex.usage = vocab.encode(entry.usage);
  if (cfg.use_contextual) {
    if (!provider) throw InvalidArgument("contextual embeddings are on but no provider was given");
    if (provider->dim() != cfg.contextual_dim)
      throw ShapeError("contextual provider dimension " + std::to_string(provider->dim()) +
                       " does not match contextual_dim " + std::to_string(cfg.contextual_dim));
    ex.contextual = contextual_embed(*provider, ctx.tokens, ctx.target, entry.word,
                                     contextual_key(entry.id, context_index));
  }
  return ex;
}

Var TaskOutput::mean_nll() const { return ad::scale(nll_sum, 1.0 / static_cast<double>(tokens)); }

double multi_task_loss(ModelKind kind, double definition_nll, double usage_nll) {
  if (!is_multi_task(kind)) throw InvalidArgument("multi_task_loss: single-task model");
  return definition_nll + usage_nll;
}

int sample_token(std::span<const double> logits, double tau, Rng& rng) {
  if (!(tau > 0)) throw InvalidArgument("sampling temperature must be positive");
  const int first = Vocabulary::kUnk;
  auto allowed = [](std::size_t i) { return i != Vocabulary::kPad && i != Vocabulary::kBos; };
  std::size_t best = first;
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (allowed(i) && logits[i] > logits[best]) best = i;
  if (tau < 1e-6) return static_cast<int>(best);
  std::vector<double> p(logits.size(), 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!allowed(i)) continue;
    p[i] = std::exp((logits[i] - logits[best]) / tau);
    z += p[i];
  }
  double u = rng.uniform() * z;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (u < p[i]) return static_cast<int>(i);
    u -= p[i];
  }
  return static_cast<int>(best);
}

Model::Model(const ModelConfig& config, std::size_t vocab_size, std::uint64_t seed,
             const EmbeddingTable* pretrained)
    : config_(config), vocab_size_(vocab_size) {
  config_.validate();
  if (vocab_size <= static_cast<std::size_t>(Vocabulary::kNumSpecials))
    throw InvalidArgument("vocabulary must contain at least one regular token");
  const auto& c = config_;
  Rng rng(seed);

  encoder_table_ = &params_.add("embed.encoder", {vocab_size, c.word_dim});
  decoder_table_ = &params_.add("embed.decoder", {vocab_size, c.word_dim}, false);
  special_ = &params_.add("embed.special", {static_cast<std::size_t>(Vocabulary::kNumSpecials), c.word_dim});
  if (pretrained) {
    if (pretrained->weights.shape() != ad::Shape{vocab_size, c.word_dim})
      throw ShapeError("pretrained table " + ad::shape_str(pretrained->weights.shape()) +
                       " does not match vocabulary x word_dim");
    std::copy(pretrained->weights.data().begin(), pretrained->weights.data().end(),
              encoder_table_->data().begin());
  } else {
    init_uniform(*encoder_table_, rng, 0.1);
  }
  std::copy(encoder_table_->data().begin(), encoder_table_->data().end(),
            decoder_table_->data().begin());
  init_uniform(*special_, rng, 0.1);
  words_ = std::make_unique<WordEmbedder>(*decoder_table_, *special_);

  encoder_ = std::make_unique<ContextEncoder>(params_, "encoder", *encoder_table_, c.encoder_hidden,
                                              c.max_context, rng);
  const std::size_t ctx_dim = encoder_->output_dim();
  if (c.use_word)
    attention_ = std::make_unique<SenseAttention>(params_, "attention", c.word_dim, ctx_dim,
                                                  c.attention_dim, rng);
  if (c.use_char) chars_ = std::make_unique<CharEncoder>(params_, "char", c.chars, rng);
  init_ = std::make_unique<InitState>(params_, "init", c.word_dim, ctx_dim, c.state_dim, c.init, rng);

  const std::size_t x = c.input_dim();
  def_ = std::make_unique<SemanticsDecoder>(params_, "decoder.def", x, x, c.state_dim, c.layers,
                                            vocab_size, c.use_gate, rng);
  if (is_multi_task(c.kind))
    usg_ = std::make_unique<SemanticsDecoder>(params_, "decoder.usg", x, x, c.state_dim, c.layers,
                                              vocab_size, c.use_gate, rng);
  if (c.kind == ModelKind::kHierDU || c.kind == ModelKind::kHierUD) {
    w_p_ = &params_.add("shortcut.w_p", {x + c.state_dim, x});
    init_xavier(*w_p_, rng);
  }
}

std::size_t Model::parameter_count(const ModelConfig& c, std::size_t V) {
  const std::size_t ctx_dim = 2 * c.encoder_hidden;
  const std::size_t x = c.input_dim();
  std::size_t n = 2 * V * c.word_dim + Vocabulary::kNumSpecials * c.word_dim;
  n += ContextEncoder::parameter_count(c.word_dim, c.encoder_hidden);
  if (c.use_word) n += SenseAttention::parameter_count(c.word_dim, ctx_dim, c.attention_dim);
  if (c.use_char) n += CharEncoder::parameter_count(c.chars);
  n += InitState::parameter_count(c.word_dim, ctx_dim, c.state_dim, c.init);
  const std::size_t decoder =
      SemanticsDecoder::parameter_count(x, x, c.state_dim, c.layers, V, c.use_gate);
  n += is_multi_task(c.kind) ? 2 * decoder : decoder;
  if (c.kind == ModelKind::kHierDU || c.kind == ModelKind::kHierUD) n += (x + c.state_dim) * x;
  return n;
}

bool Model::supervises(Task t) const { return t == Task::kDefinition || is_multi_task(config_.kind); }

const SemanticsDecoder& Model::decoder(Task t) const {
  if (t == Task::kDefinition) return *def_;
  if (!usg_) throw InvalidArgument("single-task model has no usage decoder");
  return *usg_;
}

Model::TaskPath Model::path(Task t) const {
  switch (config_.kind) {
    case ModelKind::kSingle:
    case ModelKind::kParallel: return {&decoder(t), nullptr};
    case ModelKind::kHierDU:
      return t == Task::kDefinition ? TaskPath{def_.get(), nullptr} : TaskPath{usg_.get(), def_.get()};
    case ModelKind::kHierUD:
      return t == Task::kUsage ? TaskPath{usg_.get(), nullptr} : TaskPath{def_.get(), usg_.get()};
  }
  throw InvalidArgument("unknown model kind");
}

Model::Conditioning Model::condition(ad::Tape& tape, const EncodedExample& ex) const {
  const auto& c = config_;
  if (ex.word_id < 0 || static_cast<std::size_t>(ex.word_id) >= vocab_size_)
    throw InvalidArgument("word id outside the vocabulary");
  Conditioning out;
  Var v_star = words_->embed(tape, ex.word_id);
  const bool need_context =
      c.use_word || c.init == InitVariant::kContext || c.init == InitVariant::kBoth;
  EncodedContext enc;
  if (need_context) enc = encoder_->encode(tape, ex.context);
  if (c.use_word) out.a_star = attention_->attend(tape, v_star, enc.states).output;
  if (c.use_char) out.c_star = chars_->encode(tape, ex.word);
  if (c.use_contextual) {
    if (ex.contextual.size() != c.contextual_dim)
      throw ShapeError("example carries " + std::to_string(ex.contextual.size()) +
                       " contextual values, expected " + std::to_string(c.contextual_dim));
    out.e_star = tape.constant(ad::Tensor({1, c.contextual_dim}, ex.contextual));
  }
  Var v_c = need_context ? enc.pooled : tape.zeros({1, encoder_->output_dim()});
  out.s0 = init_->compute(tape, v_star, v_c, c.layers);
  return out;
}

Model::Conditioning Model::zero_conditioning(ad::Tape& tape) const {
  const auto& c = config_;
  Conditioning out;
  if (c.use_word) out.a_star = tape.zeros({1, c.word_dim});
  if (c.use_char) out.c_star = tape.zeros({1, c.chars.output_dim()});
  if (c.use_contextual) out.e_star = tape.zeros({1, c.contextual_dim});
  for (std::size_t l = 0; l < c.layers; ++l) out.s0.push_back(tape.zeros({1, c.state_dim}));
  return out;
}

Var Model::step(ad::Tape& tape, const Conditioning& c, const TaskPath& p, TaskState& s,
                int prev) const {
  std::vector<Var> parts;
  parts.reserve(4);
  if (c.a_star.valid()) parts.push_back(c.a_star);
  parts.push_back(words_->embed(tape, prev));
  if (c.c_star.valid()) parts.push_back(c.c_star);
  if (c.e_star.valid()) parts.push_back(c.e_star);
  Var u = parts.size() == 1 ? parts[0] : ad::concat(parts, 1);
  Var x = p.top->gate().apply(tape, u);
  if (p.lower) {
    s.lower = p.lower->gru().step(tape, s.lower, x);
    x = ad::matmul(ad::concat({x, s.lower.back()}, 1), tape.leaf(*w_p_));
  }
  s.top = p.top->gru().step(tape, s.top, x);
  return p.top->output().logits(tape, s.top.back());
}

TaskOutput Model::teacher_force(ad::Tape& tape, const Conditioning& c, const TaskPath& p,
                                std::span<const int> target) const {
  if (target.empty()) throw InvalidArgument("sequence_log_prob: empty target");
  TaskState s{c.s0, c.s0};
  TaskOutput out;
  int prev = Vocabulary::kBos;
  for (std::size_t t = 0; t <= target.size(); ++t) {
    const int y = t < target.size() ? target[t] : Vocabulary::kEos;
    Var logits = step(tape, c, p, s, prev);
    Var nll = ad::cross_entropy_logits(logits, y);
    out.nll_sum = out.nll_sum.valid() ? ad::add(out.nll_sum, nll) : nll;
    out.logits.push_back(logits);
    prev = y;
  }
  out.tokens = target.size() + 1;
  return out;
}

ForwardOutput Model::forward(ad::Tape& tape, const EncodedExample& ex) const {
  if (ex.definition.empty()) throw InvalidArgument("entry '" + ex.id + "' has no definition");
  if (is_multi_task(config_.kind) && ex.usage.empty())
    throw InvalidArgument("entry '" + ex.id + "' has no usage");
  Conditioning c = condition(tape, ex);
  ForwardOutput out;
  out.definition = teacher_force(tape, c, path(Task::kDefinition), ex.definition);
  if (is_multi_task(config_.kind)) out.usage = teacher_force(tape, c, path(Task::kUsage), ex.usage);
  return out;
}

Var Model::loss(const ForwardOutput& out) const {
  if (!out.definition) throw InvalidArgument("loss: definition output missing");
  Var l = out.definition->mean_nll();
  if (is_multi_task(config_.kind)) {
    if (!out.usage) throw InvalidArgument("loss: usage output missing");
    l = ad::add(l, out.usage->mean_nll());
  }
  return l;
}

TaskOutput Model::forward_unconditional(ad::Tape& tape, std::span<const int> sentence) const {
  Conditioning c = zero_conditioning(tape);
  return teacher_force(tape, c, {def_.get(), nullptr}, sentence);
}

std::vector<int> Model::generate_ids(const EncodedExample& ex, Task task, double tau, Rng& rng,
                                     std::size_t max_length) const {
  if (max_length == 0) throw InvalidArgument("generate: max_length must be at least 1");
  if (!(tau > 0)) throw InvalidArgument("generate: tau must be positive");
  if (!supervises(task)) throw InvalidArgument("generate: model has no usage decoder");
  ad::Tape tape(false);
  Conditioning c = condition(tape, ex);
  const TaskPath p = path(task);
  TaskState s{c.s0, c.s0};
  std::vector<int> out;
  int prev = Vocabulary::kBos;
  while (out.size() < max_length) {
    Var logits = step(tape, c, p, s, prev);
    prev = sample_token(tape.value(logits), tau, rng);
    if (prev == Vocabulary::kEos) break;
    out.push_back(prev);
  }
  return out;
}

Generation Model::generate(const EncodedExample& ex, double tau, std::uint64_t seed,
                           std::size_t max_length) const {
  Generation g;
  g.unknown_word = !ex.word_known;
  Rng rng(seed);
  g.definition = generate_ids(ex, Task::kDefinition, tau, rng, max_length);
  if (is_multi_task(config_.kind)) g.usage = generate_ids(ex, Task::kUsage, tau, rng, max_length);
  return g;
}

}  // namespace semgen
