#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace semgen::data {

using Tokens = std::vector<std::string>;

// Lowercases and splits on ASCII whitespace.
Tokens tokenize(std::string_view text);
std::string join(const Tokens& tokens);

// True when `token` is `word` or `word` followed by one of the suffixes
// s, es, ed, ing, er, est. Non-letters at either end of `token` are ignored.
bool matches_inflection(std::string_view token, std::string_view word);
std::optional<std::size_t> find_target(const Tokens& tokens, std::string_view word);

struct Context {
  Tokens tokens;
  std::optional<std::size_t> target;  // position of the headword, if found
};

struct DictionaryEntry {
  std::string id;
  std::string word;
  std::string pos;
  std::string domain;
  std::string sense;
  Tokens definition;
  std::vector<Context> contexts;
  Tokens usage;
  std::optional<std::size_t> usage_target;
};

struct ValidationIssue {
  std::size_t line = 0;
  std::string reason;
};

struct CorpusReport {
  std::size_t records = 0;  // non-blank lines
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t contexts = 0;
  std::size_t contexts_without_target = 0;
  std::size_t usages = 0;
  std::size_t usages_without_target = 0;
  std::vector<ValidationIssue> issues;
};

struct Corpus {
  std::vector<DictionaryEntry> entries;
  CorpusReport report;
};

inline constexpr std::size_t kMaxContexts = 3;

// One JSON object per line:
//   {"id", "word", "pos", "domain", "sense", "definition", "contexts": [...], "usage"}
// Invalid lines are skipped and reported; more than half invalid is a
// FormatError.
Corpus parse_corpus(std::istream& in, const std::string& source_name = "<stream>");
Corpus load_corpus(const std::string& path);

std::string serialize_entry(const DictionaryEntry& entry);
void save_corpus(const std::string& path, std::span<const DictionaryEntry> entries);

std::string report_json(const CorpusReport& report);

// ---------------------------------------------------------------------------
// Vocabulary

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kNumSpecials = 4;
  static const std::array<std::string, 4>& specials();

  Vocabulary();
  // `tokens` excludes the specials, which are always prepended.
  explicit Vocabulary(const Tokens& tokens, std::vector<std::size_t> counts = {});

  std::size_t size() const { return tokens_.size(); }
  int id(std::string_view token) const;  // kUnk when absent
  std::optional<int> find(std::string_view token) const;
  const std::string& token(int id) const;
  const Tokens& tokens() const { return tokens_; }
  std::size_t count(int id) const;

  std::vector<int> encode(const Tokens& tokens) const;
  Tokens decode(std::span<const int> ids) const;

  // FNV-1a over the newline-joined token list, as 16 hex digits.
  std::string fingerprint() const;

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  Tokens tokens_;
  std::vector<std::size_t> counts_;
  std::unordered_map<std::string, int> index_;
};

struct VocabOptions {
  std::size_t max_size = 65000;  // including the four specials
  bool alphabetic_only = true;
  std::unordered_set<std::string> stopwords;
};

// Frequency-ranked top (max_size - 4) tokens after filtering; ties broken
// lexicographically.
Vocabulary build_vocab(std::span<const std::string> stream, const VocabOptions& options);

std::unordered_set<std::string> load_stopwords(const std::string& path);

// Every token the models read or predict: headwords, definitions, contexts
// and usages. No filtering, since definitions are mostly function words.
Vocabulary build_model_vocab(std::span<const DictionaryEntry> entries, std::size_t max_size);

// ---------------------------------------------------------------------------
// Splits and partitions

struct Splits {
  std::vector<DictionaryEntry> train;
  std::vector<DictionaryEntry> valid;
  std::vector<DictionaryEntry> test;
};

// Groups entries by (word, sense), shuffles the groups with `seed` and deals
// them out by `ratios` (train, valid, test).
Splits split_by_sense(std::span<const DictionaryEntry> entries, std::array<double, 3> ratios,
                      std::uint64_t seed);

void save_manifest(const std::string& path, const Splits& splits);

enum class Partition { kSeen, kUnseen };
const char* partition_name(Partition p);

std::vector<Partition> partition_seen_unseen(std::span<const DictionaryEntry> train,
                                             std::span<const DictionaryEntry> test);

struct SplitStats {
  std::size_t words = 0;
  std::size_t entries = 0;
  std::size_t tokens = 0;  // definition tokens
  double definition_length = 0.0;
  double context_length = 0.0;
  double usage_length = 0.0;
};

SplitStats corpus_stats(std::span<const DictionaryEntry> entries);
std::string stats_table(const std::vector<std::pair<std::string, SplitStats>>& splits);
std::string stats_json(const std::vector<std::pair<std::string, SplitStats>>& splits);

}  // namespace semgen::data
