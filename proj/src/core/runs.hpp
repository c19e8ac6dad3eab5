#pragma once

#include <memory>
#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/data.hpp"
#include "core/embeddings.hpp"
#include "core/model.hpp"

namespace semgen::runs {

// Seed of the hash-based contextual embeddings. Fixed so that a checkpoint
// always sees the same e* regardless of the training seed.
inline constexpr std::uint64_t kContextualSeed = 2019;

struct Invocation {
  RunConfig config;
  std::string out_dir;
  // Recorded in every artifact; the output directory is already masked.
  std::string command_line;
};

// Fills empty corpus paths from `data_dir` (train.jsonl, valid.jsonl,
// test.jsonl, corpus.jsonl, lm.txt, stopwords.txt). No-op for empty dir.
void apply_data_dir(RunConfig& cfg, const std::string& data_dir);

// Replaces every occurrence of `out_dir` by "<out-dir>".
std::string mask_out_dir(std::string command_line, const std::string& out_dir);

// Each command writes its artifacts under inv.out_dir and returns a short
// human-readable summary. While a command runs, an INCOMPLETE marker sits
// in the directory; on failure it keeps the cause.
std::string data_validate(const Invocation& inv);
std::string data_split(const Invocation& inv);
std::string data_stats(const Invocation& inv);
std::string data_vocab(const Invocation& inv);
std::string pretrain(const Invocation& inv);
std::string train(const Invocation& inv);
std::string eval(const Invocation& inv, const std::string& checkpoint);
std::string ablate(const Invocation& inv);

std::unique_ptr<ContextualProvider> make_contextual_provider(const RunConfig& cfg);

// Example for an arbitrary (word, context) pair.
EncodedExample encode_query(const std::string& word, const data::Tokens& context,
                            const data::Vocabulary& vocab, const ModelConfig& cfg,
                            const ContextualProvider* provider);

}  // namespace semgen::runs
