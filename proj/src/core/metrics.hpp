#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core/data.hpp"
#include "core/model.hpp"

namespace semgen::metrics {

struct BleuScore {
  double score = 0.0;
  bool empty_candidate = false;
};

// Sentence BLEU over n = 1..min(4, |candidate|). For n >= 2 a zero match
// count is smoothed to 1 / (total + 1). Empty reference is InvalidArgument.
BleuScore sentence_bleu_scored(const data::Tokens& candidate, const data::Tokens& reference);
double sentence_bleu(const data::Tokens& candidate, const data::Tokens& reference);

std::size_t lcs_length(const data::Tokens& a, const data::Tokens& b);
// Balanced ROUGE-L F-measure.
double rouge_l(const data::Tokens& candidate, const data::Tokens& reference);

struct NllTotal {
  double nll = 0.0;
  std::size_t tokens = 0;  // <eos> included
};

// Teacher-forced NLL summed over every target token of `examples`.
NllTotal corpus_nll(const Model& model, std::span<const EncodedExample> examples, Task task);
double perplexity(const Model& model, std::span<const EncodedExample> examples, Task task);
// Definition perplexity for single models; exp of the mean of the two task
// token-mean NLLs for multi-task kinds.
double selection_perplexity(const Model& model, std::span<const EncodedExample> examples);

struct EntryResult {
  std::string id;
  std::string word;
  data::Partition partition = data::Partition::kUnseen;
  data::Tokens hypothesis;
  data::Tokens reference;
  double bleu = 0.0;
  double rouge = 0.0;
  bool empty_hypothesis = false;
  bool unknown_word = false;
  std::optional<data::Tokens> usage;
  bool usage_has_word = false;
};

struct PartitionScores {
  std::size_t entries = 0;
  double bleu = 0.0;
  double rouge = 0.0;
};

struct EvalReport {
  PartitionScores full, seen, unseen;
  double perplexity = 0.0;  // definition
  std::optional<double> usage_perplexity;
  std::optional<double> usage_inclusion;
  std::size_t empty_hypotheses = 0;
  std::vector<EntryResult> entries;
};

struct EvalOptions {
  double tau = 0.05;
  std::uint64_t seed = 1;
  std::size_t max_length = 40;
};

// `examples[i]` encodes `entries[i]` and `partitions[i]` labels it.
EvalReport evaluate(const Model& model, const data::Vocabulary& vocab,
                    std::span<const data::DictionaryEntry> entries,
                    std::span<const EncodedExample> examples,
                    std::span<const data::Partition> partitions, const EvalOptions& options);

// One JSON object per entry, then one summary object.
std::string report_jsonl(const EvalReport& report);
// Scores ×100, the way dictionary-generation results are usually printed.
std::string report_table(const EvalReport& report);

}  // namespace semgen::metrics
