#include "core/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <variant>

#include "core/error.hpp"
#include "core/rng.hpp"
#include "json.hpp"

namespace semgen::data {

using nlohmann::json;

Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string join(const Tokens& tokens) {
  std::string s;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) s += ' ';
    s += tokens[i];
  }
  return s;
}

namespace {

bool is_alpha_word(std::string_view w) {
  return !w.empty() &&
         std::all_of(w.begin(), w.end(), [](char c) { return std::isalpha(static_cast<unsigned char>(c)); });
}

std::string_view trim_nonalpha(std::string_view t) {
  while (!t.empty() && !std::isalpha(static_cast<unsigned char>(t.front()))) t.remove_prefix(1);
  while (!t.empty() && !std::isalpha(static_cast<unsigned char>(t.back()))) t.remove_suffix(1);
  return t;
}

constexpr std::string_view kSuffixes[] = {"s", "es", "ed", "ing", "er", "est"};

}  // namespace

bool matches_inflection(std::string_view token, std::string_view word) {
  token = trim_nonalpha(token);
  if (word.empty() || token.empty()) return false;
  if (token == word) return true;
  for (std::string_view suf : kSuffixes)
    if (token.size() == word.size() + suf.size() && token.substr(0, word.size()) == word &&
        token.substr(word.size()) == suf)
      return true;
  return false;
}

std::optional<std::size_t> find_target(const Tokens& tokens, std::string_view word) {
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (trim_nonalpha(tokens[i]) == word) return i;
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (matches_inflection(tokens[i], word)) return i;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Corpus IO

namespace {

std::string field_string(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return {};
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  throw FormatError(std::string("field '") + key + "' must be a string");
}

// Returns the parsed entry or the reason it was rejected.
std::variant<DictionaryEntry, std::string> parse_record(const std::string& line, std::size_t lineno) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    return std::string("unparseable record: ") + e.what();
  }
  if (!obj.is_object()) return std::string("record is not an object");
  DictionaryEntry e;
  try {
    e.id = field_string(obj, "id");
    if (e.id.empty()) e.id = "L" + std::to_string(lineno);
    auto word = tokenize(field_string(obj, "word"));
    if (word.size() != 1) return std::string("word must be a single token");
    e.word = word[0];
    if (!is_alpha_word(e.word)) return "word '" + e.word + "' is not purely alphabetic";
    e.pos = field_string(obj, "pos");
    e.domain = field_string(obj, "domain");
    e.sense = field_string(obj, "sense");
    e.definition = tokenize(field_string(obj, "definition"));
    if (e.definition.empty()) return std::string("missing definition");
    auto ctx = obj.find("contexts");
    if (ctx == obj.end() || !ctx->is_array() || ctx->empty())
      return std::string("missing contexts");
    if (ctx->size() > kMaxContexts)
      return "too many contexts (" + std::to_string(ctx->size()) + ")";
    for (const auto& c : *ctx) {
      if (!c.is_string()) return std::string("context must be a string");
      Context context;
      context.tokens = tokenize(c.get<std::string>());
      if (context.tokens.empty()) return std::string("empty context");
      context.target = find_target(context.tokens, e.word);
      e.contexts.push_back(std::move(context));
    }
    e.usage = tokenize(field_string(obj, "usage"));
    if (!e.usage.empty()) e.usage_target = find_target(e.usage, e.word);
  } catch (const FormatError& err) {
    return std::string(err.what());
  }
  return e;
}

}  // namespace

Corpus parse_corpus(std::istream& in, const std::string& source_name) {
  Corpus corpus;
  CorpusReport& r = corpus.report;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (std::all_of(line.begin(), line.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); }))
      continue;
    ++r.records;
    auto parsed = parse_record(line, lineno);
    if (auto* reason = std::get_if<std::string>(&parsed)) {
      ++r.rejected;
      r.issues.push_back({lineno, *reason});
      continue;
    }
    auto& e = std::get<DictionaryEntry>(parsed);
    if (!ids.insert(e.id).second) {
      ++r.rejected;
      r.issues.push_back({lineno, "duplicate entry id '" + e.id + "'"});
      continue;
    }
    for (const auto& c : e.contexts) {
      ++r.contexts;
      if (!c.target) ++r.contexts_without_target;
    }
    if (!e.usage.empty()) {
      ++r.usages;
      if (!e.usage_target) ++r.usages_without_target;
    }
    ++r.accepted;
    corpus.entries.push_back(std::move(e));
  }
  if (r.records > 0 && 2 * r.rejected > r.records)
    throw FormatError(source_name + ": " + std::to_string(r.rejected) + " of " +
                      std::to_string(r.records) + " records are malformed (first: line " +
                      std::to_string(r.issues.front().line) + ": " + r.issues.front().reason + ")");
  return corpus;
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus '" + path + "'");
  return parse_corpus(in, path);
}

std::string serialize_entry(const DictionaryEntry& e) {
  json obj = json::object();
  obj["id"] = e.id;
  obj["word"] = e.word;
  obj["pos"] = e.pos;
  obj["domain"] = e.domain;
  obj["sense"] = e.sense;
  obj["definition"] = join(e.definition);
  json ctx = json::array();
  for (const auto& c : e.contexts) ctx.push_back(join(c.tokens));
  obj["contexts"] = ctx;
  obj["usage"] = join(e.usage);
  return obj.dump();
}

void save_corpus(const std::string& path, std::span<const DictionaryEntry> entries) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  for (const auto& e : entries) out << serialize_entry(e) << '\n';
}

std::string report_json(const CorpusReport& r) {
  json obj = {{"records", r.records},
              {"accepted", r.accepted},
              {"rejected", r.rejected},
              {"contexts", r.contexts},
              {"contexts_without_target", r.contexts_without_target},
              {"usages", r.usages},
              {"usages_without_target", r.usages_without_target}};
  json issues = json::array();
  for (const auto& i : r.issues) issues.push_back({{"line", i.line}, {"reason", i.reason}});
  obj["issues"] = issues;
  return obj.dump();
}

// ---------------------------------------------------------------------------
// Vocabulary

const std::array<std::string, 4>& Vocabulary::specials() {
  static const std::array<std::string, 4> s = {"<pad>", "<unk>", "<bos>", "<eos>"};
  return s;
}

Vocabulary::Vocabulary() : Vocabulary(Tokens{}) {}

Vocabulary::Vocabulary(const Tokens& tokens, std::vector<std::size_t> counts) {
  tokens_.assign(specials().begin(), specials().end());
  counts_.assign(kNumSpecials, 0);
  if (!counts.empty() && counts.size() != tokens.size())
    throw InvalidArgument("vocabulary counts do not match tokens");
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    tokens_.push_back(tokens[i]);
    counts_.push_back(counts.empty() ? 0 : counts[i]);
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i)
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second)
      throw InvalidArgument("duplicate vocabulary token '" + tokens_[i] + "'");
}

int Vocabulary::id(std::string_view token) const { return find(token).value_or(kUnk); }

std::optional<int> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw InvalidArgument("token id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

std::size_t Vocabulary::count(int id) const { return counts_.at(static_cast<std::size_t>(id)); }

std::vector<int> Vocabulary::encode(const Tokens& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

Tokens Vocabulary::decode(std::span<const int> ids) const {
  Tokens out;
  for (int i : ids) out.push_back(token(i));
  return out;
}

std::string Vocabulary::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& t : tokens_) {
    h = fnv1a(t.data(), t.size(), h);
    h = fnv1a("\n", 1, h);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  for (std::size_t i = kNumSpecials; i < tokens_.size(); ++i)
    out << tokens_[i] << '\t' << counts_[i] << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary '" + path + "'");
  Tokens tokens;
  std::vector<std::size_t> counts;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto tab = line.find('\t');
    tokens.push_back(line.substr(0, tab));
    counts.push_back(tab == std::string::npos ? 0 : std::stoull(line.substr(tab + 1)));
  }
  return Vocabulary(tokens, std::move(counts));
}

Vocabulary build_vocab(std::span<const std::string> stream, const VocabOptions& options) {
  if (options.max_size < static_cast<std::size_t>(Vocabulary::kNumSpecials))
    throw InvalidArgument("vocabulary size must be at least 4");
  if (stream.empty()) throw InvalidArgument("build_vocab: empty token stream");
  std::unordered_map<std::string, std::size_t> freq;
  const auto& sp = Vocabulary::specials();
  for (const auto& t : stream) {
    if (options.alphabetic_only && !is_alpha_word(t)) continue;
    if (options.stopwords.count(t)) continue;
    if (std::find(sp.begin(), sp.end(), t) != sp.end()) continue;
    ++freq[t];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  const std::size_t keep = std::min(ranked.size(), options.max_size - Vocabulary::kNumSpecials);
  Tokens tokens;
  std::vector<std::size_t> counts;
  for (std::size_t i = 0; i < keep; ++i) {
    tokens.push_back(ranked[i].first);
    counts.push_back(ranked[i].second);
  }
  return Vocabulary(tokens, std::move(counts));
}

std::unordered_set<std::string> load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open stopword list '" + path + "'");
  std::unordered_set<std::string> out;
  std::string line;
  while (std::getline(in, line))
    for (auto& t : tokenize(line))
      if (t[0] != '#') out.insert(t);
  return out;
}

Vocabulary build_model_vocab(std::span<const DictionaryEntry> entries, std::size_t max_size) {
  std::vector<std::string> stream;
  for (const auto& e : entries) {
    stream.push_back(e.word);
    stream.insert(stream.end(), e.definition.begin(), e.definition.end());
    for (const auto& c : e.contexts) stream.insert(stream.end(), c.tokens.begin(), c.tokens.end());
    stream.insert(stream.end(), e.usage.begin(), e.usage.end());
  }
  VocabOptions o;
  o.max_size = max_size;
  o.alphabetic_only = false;
  return build_vocab(stream, o);
}

// ---------------------------------------------------------------------------
// Splits

Splits split_by_sense(std::span<const DictionaryEntry> entries, std::array<double, 3> ratios,
                      std::uint64_t seed) {
  double total = 0.0;
  for (double r : ratios) {
    if (r < 0.0) throw InvalidArgument("split ratios must be non-negative");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("split ratios must sum to 1");

  std::vector<std::vector<std::size_t>> groups;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto key = std::make_pair(entries[i].word, entries[i].sense);
    auto [it, fresh] = index.emplace(key, groups.size());
    if (fresh) groups.emplace_back();
    groups[it->second].push_back(i);
  }
  const std::size_t active =
      static_cast<std::size_t>(std::count_if(ratios.begin(), ratios.end(), [](double r) { return r > 0; }));
  if (groups.size() < active)
    throw InvalidArgument("split_by_sense: " + std::to_string(groups.size()) +
                          " (word, sense) groups cannot fill " + std::to_string(active) + " splits");

  const std::size_t n = groups.size();
  std::array<std::size_t, 3> counts{};
  std::size_t assigned = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    counts[s] = static_cast<std::size_t>(std::llround(ratios[s] * static_cast<double>(n)));
    if (ratios[s] > 0 && counts[s] == 0) counts[s] = 1;
    assigned += counts[s];
  }
  // Settle rounding drift on the largest split.
  auto largest = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  if (assigned > n)
    counts[largest] -= assigned - n;
  else
    counts[largest] += n - assigned;

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  Splits out;
  std::vector<DictionaryEntry>* dest[] = {&out.train, &out.valid, &out.test};
  std::size_t g = 0;
  for (std::size_t s = 0; s < 3; ++s)
    for (std::size_t k = 0; k < counts[s]; ++k, ++g)
      for (std::size_t idx : groups[order[g]]) dest[s]->push_back(entries[idx]);
  return out;
}

void save_manifest(const std::string& path, const Splits& splits) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  const std::pair<const char*, const std::vector<DictionaryEntry>*> parts[] = {
      {"train", &splits.train}, {"valid", &splits.valid}, {"test", &splits.test}};
  for (const auto& [name, entries] : parts)
    for (const auto& e : *entries) out << e.id << '\t' << name << '\n';
}

const char* partition_name(Partition p) { return p == Partition::kSeen ? "seen" : "unseen"; }

std::vector<Partition> partition_seen_unseen(std::span<const DictionaryEntry> train,
                                             std::span<const DictionaryEntry> test) {
  std::unordered_set<std::string> words;
  for (const auto& e : train) words.insert(e.word);
  std::vector<Partition> out;
  out.reserve(test.size());
  for (const auto& e : test) out.push_back(words.count(e.word) ? Partition::kSeen : Partition::kUnseen);
  return out;
}

SplitStats corpus_stats(std::span<const DictionaryEntry> entries) {
  SplitStats s;
  std::unordered_set<std::string> words;
  std::size_t ctx_tokens = 0, ctx_count = 0, usg_tokens = 0, usg_count = 0;
  for (const auto& e : entries) {
    words.insert(e.word);
    s.tokens += e.definition.size();
    for (const auto& c : e.contexts) {
      ctx_tokens += c.tokens.size();
      ++ctx_count;
    }
    if (!e.usage.empty()) {
      usg_tokens += e.usage.size();
      ++usg_count;
    }
  }
  s.words = words.size();
  s.entries = entries.size();
  auto avg = [](std::size_t a, std::size_t b) { return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0; };
  s.definition_length = avg(s.tokens, s.entries);
  s.context_length = avg(ctx_tokens, ctx_count);
  s.usage_length = avg(usg_tokens, usg_count);
  return s;
}

std::string stats_table(const std::vector<std::pair<std::string, SplitStats>>& splits) {
  std::ostringstream os;
  char buf[64];
  auto row = [&](const char* label, auto get) {
    std::snprintf(buf, sizeof buf, "%-10s", label);
    os << buf;
    for (const auto& [name, s] : splits) {
      os << " | " << get(s);
    }
    os << '\n';
  };
  auto num = [&](std::size_t v) {
    std::snprintf(buf, sizeof buf, "%10zu", v);
    return std::string(buf);
  };
  auto real = [&](double v) {
    std::snprintf(buf, sizeof buf, "%10.2f", v);
    return std::string(buf);
  };
  std::snprintf(buf, sizeof buf, "%-10s", "Split");
  os << buf;
  for (const auto& [name, s] : splits) {
    std::snprintf(buf, sizeof buf, " | %10s", name.c_str());
    os << buf;
  }
  os << '\n';
  row("#Words", [&](const SplitStats& s) { return num(s.words); });
  row("#Entries", [&](const SplitStats& s) { return num(s.entries); });
  row("#Tokens", [&](const SplitStats& s) { return num(s.tokens); });
  row("Def Len", [&](const SplitStats& s) { return real(s.definition_length); });
  row("Ctx Len", [&](const SplitStats& s) { return real(s.context_length); });
  row("Usg Len", [&](const SplitStats& s) { return real(s.usage_length); });
  return os.str();
}

std::string stats_json(const std::vector<std::pair<std::string, SplitStats>>& splits) {
  json out = json::object();
  for (const auto& [name, s] : splits)
    out[name] = {{"words", s.words},
                 {"entries", s.entries},
                 {"tokens", s.tokens},
                 {"definition_length", s.definition_length},
                 {"context_length", s.context_length},
                 {"usage_length", s.usage_length}};
  return out.dump();
}

}  // namespace semgen::data
