#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "core/data.hpp"
#include "core/params.hpp"
#include "core/tape.hpp"

namespace semgen {

// ---------------------------------------------------------------------------
// Pretrained word vectors

struct EmbeddingTable {
  ad::Tensor weights;  // [vocab, dim]
  bool trainable = false;
  std::size_t found = 0;  // vocabulary rows present in the source file
  double coverage = 0.0;  // found / vocabulary size (specials excluded)
};

// Reads "token v1 ... vd" lines, tolerating a leading "count dim" header.
// Rows for vocabulary tokens absent from the file are drawn from
// uniform(-0.1, 0.1) with `seed`.
EmbeddingTable load_word_embeddings(const std::string& path, const data::Vocabulary& vocab,
                                    std::uint64_t seed);
EmbeddingTable random_word_embeddings(std::size_t vocab_size, std::size_t dim, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Character CNN with highway layers

struct CharEncoderConfig {
  std::size_t char_dim = 20;
  std::vector<std::size_t> widths = {2, 3, 4, 5, 6};
  std::vector<std::size_t> filters = {10, 30, 40, 40, 40};
  std::size_t highway_layers = 2;

  std::size_t output_dim() const;
  std::size_t max_width() const;
};

class CharVocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBeginWord = 2;
  static constexpr int kEndWord = 3;

  static std::size_t size();
  static int id(char c);
  // Boundary-marked ids, right-padded with kPad up to `min_length`.
  static std::vector<int> encode(std::string_view word, std::size_t min_length);
};

class CharEncoder {
 public:
  CharEncoder(ParamStore& store, const std::string& prefix, CharEncoderConfig config, Rng& rng);

  const CharEncoderConfig& config() const { return config_; }
  std::size_t output_dim() const { return config_.output_dim(); }

  // Returns [1, output_dim].
  ad::Var encode(ad::Tape& tape, std::string_view word) const;
  // Convolution + max-pool features before the highway layers.
  ad::Var pooled_features(ad::Tape& tape, std::string_view word) const;

  static std::size_t parameter_count(const CharEncoderConfig& config);

  ad::Tensor& embedding() { return *embedding_; }
  ad::Tensor& kernel(std::size_t i) { return *kernels_.at(i); }
  ad::Tensor& kernel_bias(std::size_t i) { return *kernel_biases_.at(i); }
  ad::Tensor& transform_bias(std::size_t layer) { return *highway_.at(layer).b_t; }

 private:
  struct Highway {
    ad::Tensor* w_h;
    ad::Tensor* b_h;
    ad::Tensor* w_t;
    ad::Tensor* b_t;
  };

  CharEncoderConfig config_;
  ad::Tensor* embedding_;
  std::vector<ad::Tensor*> kernels_;
  std::vector<ad::Tensor*> kernel_biases_;
  std::vector<Highway> highway_;
};

// ---------------------------------------------------------------------------
// Contextual embeddings

struct ContextQuery {
  std::string key;  // "<entry id>#<context index>"
  std::string_view word;
  const data::Tokens* context = nullptr;
  std::optional<std::size_t> target;
};

class ContextualProvider {
 public:
  virtual ~ContextualProvider() = default;
  virtual std::size_t dim() const = 0;
  virtual std::vector<double> embed(const ContextQuery& query) const = 0;
};

// Unit-norm vector seeded by (target token, previous token, next token).
// Without a resolved target occurrence the word is used with empty
// neighbours.
class HashContextualProvider : public ContextualProvider {
 public:
  HashContextualProvider(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {}
  std::size_t dim() const override { return dim_; }
  std::vector<double> embed(const ContextQuery& query) const override;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

// Precomputed vectors, one "key v1 ... vd" line per (entry, context).
class FileContextualProvider : public ContextualProvider {
 public:
  FileContextualProvider(const std::string& path, std::size_t dim);
  std::size_t dim() const override { return dim_; }
  std::vector<double> embed(const ContextQuery& query) const override;
  std::size_t size() const { return vectors_.size(); }

 private:
  std::size_t dim_;
  std::unordered_map<std::string, std::vector<double>> vectors_;
};

std::string contextual_key(std::string_view entry_id, std::size_t context_index);

// Validates the target position, then queries the provider.
std::vector<double> contextual_embed(const ContextualProvider& provider, const data::Tokens& context,
                                     std::optional<std::size_t> target_index, std::string_view word,
                                     const std::string& key = {});

}  // namespace semgen
