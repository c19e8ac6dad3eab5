#include <algorithm>
#include <filesystem>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "core/data.hpp"
#include "core/error.hpp"
#include "doctest.h"

using namespace semgen;
using namespace semgen::data;

namespace {

const std::string kMini = SEMGEN_SOURCE_DIR "/data/mini/";

Corpus parse(const std::string& text) {
  std::istringstream in(text);
  return parse_corpus(in);
}

DictionaryEntry make(std::string id, std::string word, std::string sense) {
  DictionaryEntry e;
  e.id = std::move(id);
  e.word = std::move(word);
  e.sense = std::move(sense);
  e.definition = {"x"};
  e.contexts.push_back({{e.word}, 0});
  return e;
}

std::set<std::pair<std::string, std::string>> keys(const std::vector<DictionaryEntry>& es) {
  std::set<std::pair<std::string, std::string>> out;
  for (const auto& e : es) out.emplace(e.word, e.sense);
  return out;
}

}  // namespace

TEST_CASE("inflected occurrence of the headword is resolved") {
  auto c = parse(R"({"id":"a","word":"check","definition":"x","contexts":["he paid the checks"]})");
  REQUIRE(c.entries.size() == 1);
  CHECK(c.entries[0].contexts[0].target == std::size_t{3});
  CHECK(find_target(tokenize("She Bills him"), "bill") == std::size_t{1});
  CHECK_FALSE(find_target(tokenize("a billion"), "bill"));
  CHECK(matches_inflection("checked,", "check"));
  CHECK(matches_inflection("fastest", "fast"));
  CHECK_FALSE(matches_inflection("checkers", "check"));
}

TEST_CASE("exact match wins over an earlier inflection") {
  CHECK(find_target(tokenize("checks and a check"), "check") == std::size_t{3});
}

TEST_CASE("soldier usage resolves the plural occurrence") {
  auto corpus = load_corpus(kMini + "train.jsonl");
  auto it = std::find_if(corpus.entries.begin(), corpus.entries.end(),
                         [](const DictionaryEntry& e) { return e.word == "soldier"; });
  REQUIRE(it != corpus.entries.end());
  REQUIRE(it->usage_target);
  CHECK(it->usage[*it->usage_target] == "soldiers");
}

TEST_CASE("malformed records are skipped and reported") {
  auto c = parse(
      "{\"id\":\"a\",\"word\":\"cat\",\"definition\":\"an animal\",\"contexts\":[\"the cat\"]}\n"
      "\n"
      "{\"id\":\"b\",\"word\":\"dog\",\"contexts\":[\"the dog\"]}\n"
      "{\"id\":\"c\",\"word\":\"cow\",\"definition\":\"an animal\",\"contexts\":[\"no target here\"]}\n");
  CHECK(c.report.records == 3);
  CHECK(c.report.accepted == 2);
  CHECK(c.report.rejected == 1);
  REQUIRE(c.report.issues.size() == 1);
  CHECK(c.report.issues[0].line == 3);
  CHECK(c.report.issues[0].reason == "missing definition");
  CHECK(c.report.contexts_without_target == 1);
  CHECK_FALSE(c.entries[1].contexts[0].target);
}

TEST_CASE("schema violations") {
  const char* bad[] = {
      R"({"word":"two words","definition":"x","contexts":["a"]})",
      R"({"word":"don't","definition":"x","contexts":["a"]})",
      R"({"word":"cat","definition":"x","contexts":[]})",
      R"({"word":"cat","definition":"x","contexts":["a","b","c","d"]})",
      R"({"word":"cat","definition":"x","contexts":["  "]})",
      R"(not json)",
  };
  for (const char* line : bad) {
    std::string text = std::string(line) + "\n" +
                       R"({"id":"ok1","word":"cat","definition":"x","contexts":["a cat"]})" "\n" +
                       R"({"id":"ok2","word":"cat","definition":"x","contexts":["a cat"]})" "\n";
    auto c = parse(text);
    CHECK_MESSAGE(c.report.rejected == 1, line);
  }
}

TEST_CASE("duplicate ids are rejected") {
  auto c = parse(
      "{\"id\":\"a\",\"word\":\"cat\",\"definition\":\"x\",\"contexts\":[\"c\"]}\n"
      "{\"id\":\"a\",\"word\":\"cat\",\"definition\":\"y\",\"contexts\":[\"c\"]}\n"
      "{\"id\":\"b\",\"word\":\"cat\",\"definition\":\"y\",\"contexts\":[\"c\"]}\n");
  CHECK(c.report.rejected == 1);
  CHECK(c.entries.size() == 2);
}

TEST_CASE("more than half malformed is a hard error") {
  CHECK_THROWS_AS(parse("garbage\n{\"word\":\"cat\"}\n"
                        "{\"word\":\"cat\",\"definition\":\"x\",\"contexts\":[\"c\"]}\n"),
                  FormatError);
}

TEST_CASE("serialize then parse is the identity on valid entries") {
  auto corpus = load_corpus(kMini + "corpus.jsonl");
  std::ostringstream os;
  for (const auto& e : corpus.entries) os << serialize_entry(e) << "\n";
  auto again = parse(os.str());
  REQUIRE(again.entries.size() == corpus.entries.size());
  for (std::size_t i = 0; i < corpus.entries.size(); ++i) {
    const auto& a = corpus.entries[i];
    const auto& b = again.entries[i];
    CHECK(a.id == b.id);
    CHECK(a.word == b.word);
    CHECK(a.pos == b.pos);
    CHECK(a.domain == b.domain);
    CHECK(a.sense == b.sense);
    CHECK(a.definition == b.definition);
    CHECK(a.usage == b.usage);
    CHECK(a.usage_target == b.usage_target);
    REQUIRE(a.contexts.size() == b.contexts.size());
    for (std::size_t k = 0; k < a.contexts.size(); ++k) {
      CHECK(a.contexts[k].tokens == b.contexts[k].tokens);
      CHECK(a.contexts[k].target == b.contexts[k].target);
    }
  }
}

TEST_CASE("build_vocab orders by frequency then lexicographically") {
  VocabOptions o;
  o.max_size = 6;
  std::vector<std::string> s1 = {"a", "a", "b"};
  auto v = build_vocab(s1, o);
  CHECK(v.size() == 6);
  CHECK(v.id("<pad>") == 0);
  CHECK(v.id("<unk>") == 1);
  CHECK(v.id("<bos>") == 2);
  CHECK(v.id("<eos>") == 3);
  CHECK(v.id("a") == 4);
  CHECK(v.id("b") == 5);

  std::vector<std::string> s2 = {"c", "b", "a", "a"};
  o.max_size = 6;
  auto w = build_vocab(s2, o);
  CHECK(w.id("a") == 4);
  CHECK(w.id("b") == 5);
  CHECK(w.id("c") == Vocabulary::kUnk);
}

TEST_CASE("build_vocab filters non-alphabetic tokens and stopwords") {
  VocabOptions o;
  o.stopwords = {"the"};
  std::vector<std::string> s = {"don't", "the", "the", "cat", "42"};
  auto v = build_vocab(s, o);
  CHECK(v.size() == 5);
  CHECK(v.find("cat"));
  CHECK_FALSE(v.find("don't"));
  CHECK_FALSE(v.find("the"));
  CHECK_FALSE(v.find("42"));
}

TEST_CASE("build_vocab preconditions") {
  VocabOptions o;
  std::vector<std::string> empty;
  CHECK_THROWS_AS(build_vocab(empty, o), InvalidArgument);
  o.max_size = 3;
  std::vector<std::string> s = {"a"};
  CHECK_THROWS_AS(build_vocab(s, o), InvalidArgument);
}

TEST_CASE("vocabulary round-trips through its file format") {
  auto corpus = load_corpus(kMini + "train.jsonl");
  auto v = build_model_vocab(corpus.entries, 65000);
  auto path = std::filesystem::temp_directory_path() / "semgen_vocab_roundtrip.tsv";
  v.save(path.string());
  auto w = Vocabulary::load(path.string());
  std::filesystem::remove(path);
  CHECK(w.tokens() == v.tokens());
  CHECK(w.fingerprint() == v.fingerprint());
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(w.count(int(i)) == v.count(int(i)));
  auto ids = v.encode({"the", "zzzunknown"});
  CHECK(ids[1] == Vocabulary::kUnk);
  CHECK(v.decode(ids)[0] == "the");
}

TEST_CASE("split_by_sense keeps (word, sense) groups together") {
  std::vector<DictionaryEntry> es = {make("1", "bank", "1"), make("2", "bank", "2"),
                                     make("3", "bank", "3"), make("4", "bank", "1"),
                                     make("5", "cat", "1"),  make("6", "dog", "1")};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto s = split_by_sense(es, {0.5, 0.25, 0.25}, seed);
    CHECK(s.train.size() + s.valid.size() + s.test.size() == es.size());
    auto a = keys(s.train), b = keys(s.valid), c = keys(s.test);
    for (const auto& k : a) CHECK((!b.count(k) && !c.count(k)));
    for (const auto& k : b) CHECK(!c.count(k));
    CHECK(!b.empty());
    CHECK(!c.empty());
  }
}

TEST_CASE("split_by_sense degenerate ratio and determinism") {
  auto corpus = load_corpus(kMini + "corpus.jsonl");
  auto all = split_by_sense(corpus.entries, {1, 0, 0}, 7);
  CHECK(all.train.size() == corpus.entries.size());
  CHECK(all.valid.empty());
  CHECK(all.test.empty());

  auto x = split_by_sense(corpus.entries, {0.8, 0.1, 0.1}, 11);
  auto y = split_by_sense(corpus.entries, {0.8, 0.1, 0.1}, 11);
  auto ids = [](const std::vector<DictionaryEntry>& es) {
    std::vector<std::string> out;
    for (const auto& e : es) out.push_back(e.id);
    return out;
  };
  CHECK(ids(x.train) == ids(y.train));
  CHECK(ids(x.valid) == ids(y.valid));
  CHECK(ids(x.test) == ids(y.test));
}

TEST_CASE("split_by_sense errors") {
  std::vector<DictionaryEntry> es = {make("1", "a", "1"), make("2", "b", "1")};
  CHECK_THROWS_AS(split_by_sense(es, {0.5, 0.25, 0.25}, 0), InvalidArgument);
  CHECK_THROWS_AS(split_by_sense(es, {0.5, 0.2, 0.2}, 0), InvalidArgument);
  CHECK_THROWS_AS(split_by_sense(es, {1.5, -0.5, 0.0}, 0), InvalidArgument);
}

TEST_CASE("seen and unseen partition") {
  std::vector<DictionaryEntry> train = {make("1", "bank", "1")};
  std::vector<DictionaryEntry> test = {make("2", "bank", "2"), make("3", "oven", "1")};
  auto p = partition_seen_unseen(train, test);
  CHECK(p == std::vector<Partition>{Partition::kSeen, Partition::kUnseen});
  auto none = partition_seen_unseen({}, test);
  CHECK(none == std::vector<Partition>{Partition::kUnseen, Partition::kUnseen});
}

TEST_CASE("bundled test split has both seen and unseen words") {
  auto train = load_corpus(kMini + "train.jsonl").entries;
  auto test = load_corpus(kMini + "test.jsonl").entries;
  auto p = partition_seen_unseen(train, test);
  CHECK(std::count(p.begin(), p.end(), Partition::kSeen) == 6);
  CHECK(std::count(p.begin(), p.end(), Partition::kUnseen) == 6);
}

// Frozen output of tools/recount_stats.py on the bundled splits.
TEST_CASE("mini-corpus statistics match the independent recount") {
  struct Expected {
    const char* split;
    std::size_t words, entries, tokens;
    double def_len, ctx_len, usg_len;
  };
  const Expected expected[] = {
      {"train", 26, 32, 211, 6.59375, 9.794117647058824, 7.5625},
      {"valid", 8, 8, 49, 6.125, 7.375, 7.375},
      {"test", 12, 12, 74, 6.166666666666667, 8.833333333333334, 7.166666666666667},
  };
  for (const auto& x : expected) {
    auto s = corpus_stats(load_corpus(kMini + x.split + ".jsonl").entries);
    CAPTURE(x.split);
    CHECK(s.words == x.words);
    CHECK(s.entries == x.entries);
    CHECK(s.tokens == x.tokens);
    CHECK(s.definition_length == doctest::Approx(x.def_len).epsilon(1e-12));
    CHECK(s.context_length == doctest::Approx(x.ctx_len).epsilon(1e-12));
    CHECK(s.usage_length == doctest::Approx(x.usg_len).epsilon(1e-12));
  }
}

TEST_CASE("empty split statistics are zero") {
  auto s = corpus_stats({});
  CHECK(s.words == 0);
  CHECK(s.entries == 0);
  CHECK(s.tokens == 0);
  CHECK(s.definition_length == 0.0);
  CHECK(s.context_length == 0.0);
  CHECK(s.usage_length == 0.0);
  auto table = stats_table({{"train", s}});
  CHECK(table.find("train") != std::string::npos);
}
