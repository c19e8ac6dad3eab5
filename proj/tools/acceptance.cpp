// Acceptance run: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria. Usage: acceptance [source-dir] [criterion...]
#include <algorithm>
#include <bitset>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "core/checkpoint.hpp"
#include "core/grad_check.hpp"
#include "core/metrics.hpp"
#include "core/runs.hpp"
#include "core/training.hpp"
#include "json.hpp"

using namespace semgen;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

fs::path g_source;

std::string mini(const char* file) { return (g_source / "data" / "mini" / file).string(); }

// ---------------------------------------------------------------------------
// 1. gradients

ModelConfig micro(ModelKind kind) {
  ModelConfig c;
  c.kind = kind;
  c.word_dim = 8;
  c.encoder_hidden = 4;
  c.state_dim = 8;
  c.attention_dim = 8;
  c.contextual_dim = 8;
  return c;
}

EncodedExample micro_example(const ModelConfig& c, std::uint64_t salt) {
  const HashContextualProvider provider(c.contextual_dim, salt);
  auto id = [&](std::uint64_t k) { return static_cast<int>(4 + mix64(salt * 31 + k) % 16); };
  EncodedExample ex;
  ex.id = "e" + std::to_string(salt);
  ex.word = salt % 2 ? "check" : "bank";
  ex.word_id = id(0);
  ex.word_known = true;
  ex.context = {id(1), ex.word_id, id(2)};
  ex.definition = {id(3), id(4), id(5)};
  ex.usage = {id(6), ex.word_id, id(7), id(8)};
  data::Tokens ctx = {"the", ex.word, "x"};
  ex.contextual = contextual_embed(provider, ctx, 1, ex.word);
  return ex;
}

double primitive_error() {
  using namespace ad;
  auto rnd = [](Shape s, std::uint64_t seed, double lo = -1, double hi = 1) {
    Rng rng(seed);
    Tensor t(std::move(s), true);
    for (auto& v : t.data()) v = rng.uniform(lo, hi);
    return t;
  };
  Tensor a = rnd({3, 4}, 11), b = rnd({4, 5}, 12), bt = rnd({5, 4}, 13), c = rnd({3, 4}, 14);
  Tensor table = rnd({6, 3}, 16), x = rnd({7, 3}, 17), k = rnd({3, 3, 5}, 18), kb = rnd({1, 5}, 19);
  Tensor logits = rnd({1, 9}, 20, -2, 2);
  auto mix = [](Tape& t, Var v) {
    const Shape s = t.shape(v);
    std::size_t n = 1;
    for (auto d : s) n *= d;
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = 0.3 + 0.1 * static_cast<double>(i % 7);
    return sum(mul(v, t.constant(Tensor(s, w))));
  };
  double worst = 0;
  auto check = [&](std::vector<Tensor*> p, GraphBuilder f) { worst = std::max(worst, grad_check(f, p, 1e-5)); };
  check({&a, &b}, [&](Tape& t) { return mix(t, matmul(t.leaf(a), t.leaf(b))); });
  check({&a, &bt}, [&](Tape& t) { return mix(t, matmul(t.leaf(a), t.leaf(bt), true)); });
  check({&a, &c}, [&](Tape& t) { return mix(t, add(t.leaf(a), t.leaf(c))); });
  check({&a, &c}, [&](Tape& t) { return mix(t, mul(t.leaf(a), t.leaf(c))); });
  check({&a, &c}, [&](Tape& t) { return mix(t, concat({t.leaf(a), t.leaf(c)}, 0)); });
  check({&a, &c}, [&](Tape& t) { return mix(t, concat({t.leaf(a), t.leaf(c)}, 1)); });
  check({&a}, [&](Tape& t) { return mix(t, sigmoid(t.leaf(a))); });
  check({&a}, [&](Tape& t) { return mix(t, tanh(t.leaf(a))); });
  check({&a}, [&](Tape& t) { return mix(t, softmax(t.leaf(a), 0)); });
  check({&a}, [&](Tape& t) { return mix(t, softmax(t.leaf(a), 1)); });
  check({&a}, [&](Tape& t) { return mix(t, max_over_axis(t.leaf(a), 0)); });
  check({&a}, [&](Tape& t) { return mix(t, max_over_axis(t.leaf(a), 1)); });
  check({&a}, [&](Tape& t) { return mix(t, scale(t.leaf(a), -1.7)); });
  check({&a}, [&](Tape& t) { return mix(t, slice(t.leaf(a), 1, 1, 2)); });
  check({&table}, [&](Tape& t) {
    const int ids[] = {4, 1, 4, 0};
    return mix(t, embedding_lookup(t.leaf(table), ids));
  });
  check({&x, &k, &kb}, [&](Tape& t) { return mix(t, conv1d(t.leaf(x), t.leaf(k), t.leaf(kb))); });
  check({&logits}, [&](Tape& t) { return cross_entropy_logits(t.leaf(logits), 4); });
  return worst;
}

Verdict gradients() {
  const auto t0 = Clock::now();
  const double prim = primitive_error();
  double model_err = 0, dir_err = 0;
  std::size_t coords = 0, total = 0;
  for (ModelKind kind : {ModelKind::kSingle, ModelKind::kParallel, ModelKind::kHierDU, ModelKind::kHierUD}) {
    Model m(micro(kind), 20, 21);
    const auto a = micro_example(m.config(), 1), b = micro_example(m.config(), 2);
    std::vector<ad::Tensor*> point;
    for (auto* t : m.params().tensors())
      if (t->requires_grad()) {
        point.push_back(t);
        total += t->size();
      }
    auto f = [&](ad::Tape& t) { return ad::scale(ad::add(m.loss(m.forward(t, a)), m.loss(m.forward(t, b))), 0.5); };
    ad::GradCheckOptions o;
    o.max_coords_per_tensor = 48;
    o.seed = 3;
    const auto r = ad::grad_check(f, point, o);
    const auto d = ad::directional_check(f, point, 16, o);
    model_err = std::max(model_err, r.max_error);
    dir_err = std::max(dir_err, d.max_error);
    coords += r.coords_checked;
  }
  const double secs = seconds_since(t0);
  Verdict v;
  v.pass = prim < 1e-6 && model_err < 1e-3 && dir_err < 1e-3 && secs < 120;
  v.detail = "primitives " + fmt("%.2e", prim) + ", full losses " + fmt("%.2e", model_err) + " over " +
             std::to_string(coords) + "/" + std::to_string(total) + " sampled coordinates, 64 directions " +
             fmt("%.2e", dir_err) + ", " + fmt("%.1f", secs) + " s";
  return v;
}

// ---------------------------------------------------------------------------
// Corpus-level fixtures for criteria 2, 3, 5, 6

struct Corpus {
  std::vector<data::DictionaryEntry> train, valid, test;
  data::Vocabulary vocab;
};

Corpus load_mini() {
  Corpus c;
  c.train = data::load_corpus(mini("train.jsonl")).entries;
  c.valid = data::load_corpus(mini("valid.jsonl")).entries;
  c.test = data::load_corpus(mini("test.jsonl")).entries;
  c.vocab = data::build_model_vocab(c.train, 65000);
  return c;
}

ModelConfig desk(ModelKind kind, std::size_t d) {
  ModelConfig c;
  c.kind = kind;
  c.word_dim = d;
  c.encoder_hidden = d / 2;
  c.state_dim = d;
  c.attention_dim = d;
  c.contextual_dim = d;
  c.layers = 1;
  return c;
}

struct Encoded {
  std::vector<EncodedExample> pairs, first;
};

Encoded encode(const std::vector<data::DictionaryEntry>& entries, const data::Vocabulary& vocab,
               const ModelConfig& cfg) {
  const HashContextualProvider provider(cfg.contextual_dim, runs::kContextualSeed);
  const ContextualProvider* p = cfg.use_contextual ? &provider : nullptr;
  Encoded e;
  for (const auto& entry : entries) {
    for (std::size_t k = 0; k < entry.contexts.size(); ++k)
      e.pairs.push_back(encode_example(entry, k, vocab, cfg, p));
    e.first.push_back(encode_example(entry, 0, vocab, cfg, p));
  }
  return e;
}

struct Memorized {
  double ppl = 0;
  std::size_t def_exact = 0, usg_exact = 0, entries = 0, epochs = 0;
  double secs = 0;
};

Memorized memorize(ModelKind kind) {
  const auto t0 = Clock::now();
  const Corpus c = load_mini();
  const ModelConfig cfg = desk(kind, 64);
  const Encoded e = encode(c.train, c.vocab, cfg);
  Model m(cfg, c.vocab.size(), 1);
  TrainConfig t;
  t.batch_size = 8;
  t.learning_rate = 5e-3;
  t.max_epochs = 400;
  t.patience = 400;
  TrainHooks hooks;
  hooks.stop_when = [](const EpochRecord& r, const Model&) { return r.valid_ppl < 1.03; };
  const TrainState st = train(m, e.pairs, e.first, t, hooks);

  Memorized r;
  r.epochs = st.epoch;
  r.entries = e.first.size();
  r.ppl = metrics::perplexity(m, e.first, Task::kDefinition);
  for (std::size_t i = 0; i < e.first.size(); ++i) {
    const Generation g = m.generate(e.first[i], 0.05, mix64(i), 40);
    r.def_exact += g.definition == e.first[i].definition;
    if (is_multi_task(kind)) r.usg_exact += g.usage == e.first[i].usage;
  }
  r.secs = seconds_since(t0);
  return r;
}

Verdict memorization() {
  const Memorized r = memorize(ModelKind::kSingle);
  const double frac = double(r.def_exact) / double(r.entries);
  Verdict v;
  v.pass = r.ppl < 1.5 && frac >= 0.9 && r.secs < 600;
  v.detail = "perplexity " + fmt("%.4f", r.ppl) + ", " + std::to_string(r.def_exact) + "/" +
             std::to_string(r.entries) + " definitions exact after " + std::to_string(r.epochs) +
             " epochs, " + fmt("%.1f", r.secs) + " s";
  return v;
}

Verdict multi_task() {
  const Memorized r = memorize(ModelKind::kParallel);
  const double df = double(r.def_exact) / double(r.entries), uf = double(r.usg_exact) / double(r.entries);
  std::string hier;
  bool hier_ok = true;
  const Corpus c = load_mini();
  for (ModelKind kind : {ModelKind::kHierDU, ModelKind::kHierUD}) {
    const ModelConfig cfg = desk(kind, 32);
    const Encoded e = encode(c.train, c.vocab, cfg);
    Model m(cfg, c.vocab.size(), 2);
    TrainConfig t;
    t.learning_rate = 5e-3;
    ad::AdamState adam = make_adam(t);
    Rng rng(5);
    std::vector<double> losses;
    for (int step = 0; step < 50; ++step) {
      std::vector<const EncodedExample*> batch;
      for (int i = 0; i < 8; ++i) batch.push_back(&e.pairs[rng.below(e.pairs.size())]);
      losses.push_back(train_batch(m, batch, adam, 5.0));
    }
    const bool finite = std::all_of(losses.begin(), losses.end(), [](double x) { return std::isfinite(x); });
    double head = 0, tail = 0;
    for (int i = 0; i < 10; ++i) {
      head += losses[i] / 10;
      tail += losses[40 + i] / 10;
    }
    hier_ok = hier_ok && finite && tail < head;
    hier += std::string(", ") + model_kind_name(kind) + " loss " + fmt("%.3f", head) + " -> " + fmt("%.3f", tail);
  }
  Verdict v;
  v.pass = df >= 0.8 && uf >= 0.8 && hier_ok;
  v.detail = "parallel " + std::to_string(r.def_exact) + "/" + std::to_string(r.entries) + " definitions, " +
             std::to_string(r.usg_exact) + "/" + std::to_string(r.entries) + " usages" + hier;
  return v;
}

// ---------------------------------------------------------------------------
// 4. metrics

Verdict metric_oracles() {
  using data::Tokens;
  const Tokens cand = {"the", "cat", "sat"}, ref = {"the", "cat", "sat", "down"};
  const double bleu = metrics::sentence_bleu(cand, ref);
  const double rouge = metrics::rouge_l(cand, ref);
  bool ok = std::abs(bleu - std::exp(1.0 - 4.0 / 3.0)) < 1e-6 && std::abs(rouge - 6.0 / 7.0) < 1e-6 &&
            metrics::sentence_bleu(ref, ref) == 1.0 && metrics::rouge_l(ref, ref) == 1.0 &&
            metrics::sentence_bleu({"x", "y"}, ref) == 0.0 && metrics::rouge_l({"x", "y"}, ref) == 0.0;

  // Every sequence over {a, b} up to length 8; LCS from intersecting
  // subsequence sets.
  std::vector<Tokens> seqs{{}};
  for (std::size_t begin = 0, len = 1; len <= 8; ++len) {
    const std::size_t end = seqs.size();
    for (std::size_t i = begin; i < end; ++i)
      for (const char* s : {"a", "b"}) {
        Tokens t = seqs[i];
        t.push_back(s);
        seqs.push_back(t);
      }
    begin = end;
  }
  std::map<Tokens, std::size_t> index;
  for (std::size_t i = 0; i < seqs.size(); ++i) index[seqs[i]] = i;
  std::vector<std::bitset<511>> subs(seqs.size());
  for (std::size_t i = 0; i < seqs.size(); ++i)
    for (std::uint32_t mask = 0; mask < (1u << seqs[i].size()); ++mask) {
      Tokens t;
      for (std::size_t k = 0; k < seqs[i].size(); ++k)
        if (mask >> k & 1) t.push_back(seqs[i][k]);
      subs[i].set(index.at(t));
    }
  std::size_t pairs = 0, bad = 0;
  for (std::size_t i = 0; i < seqs.size(); ++i)
    for (std::size_t j = 1; j < seqs.size(); ++j) {
      const auto common = subs[i] & subs[j];
      std::size_t l = 0;
      for (std::size_t b = seqs.size(); b-- > 0;)
        if (common.test(b)) {
          l = seqs[b].size();
          break;
        }
      const double p = seqs[i].empty() ? 0.0 : double(l) / seqs[i].size();
      const double r = double(l) / seqs[j].size();
      const double f = p + r == 0 ? 0.0 : 2 * p * r / (p + r);
      bad += std::abs(metrics::rouge_l(seqs[i], seqs[j]) - f) > 1e-12;
      ++pairs;
    }

  double worst_uniform = 0;
  for (std::size_t vocab : {20u, 41u, 363u}) {
    const ModelConfig cfg = micro(ModelKind::kSingle);
    Model m(cfg, vocab, 4);
    for (const char* name : {"decoder.def.out.w_d", "decoder.def.out.b_d"})
      for (auto& x : m.params().get(name).data()) x = 0.0;
    const std::vector<EncodedExample> corpus = {micro_example(cfg, 1), micro_example(cfg, 2)};
    const double ppl = metrics::perplexity(m, corpus, Task::kDefinition);
    worst_uniform = std::max(worst_uniform, std::abs(ppl - double(vocab)) / double(vocab));
  }
  ok = ok && bad == 0 && worst_uniform < 1e-12;
  Verdict v;
  v.pass = ok;
  v.detail = "BLEU " + fmt("%.6f", bleu) + ", ROUGE-L " + fmt("%.6f", rouge) + ", " + std::to_string(pairs) +
             " exhaustive LCS pairs (" + std::to_string(bad) + " mismatches), uniform perplexity rel. error " +
             fmt("%.1e", worst_uniform);
  return v;
}

// ---------------------------------------------------------------------------
// 5. pre-training

Verdict pretraining() {
  const Corpus c = load_mini();
  RunConfig rc = load_config((g_source / "configs" / "mini.conf").string());
  const ModelConfig& cfg = rc.model;
  const Encoded tr = encode(c.train, c.vocab, cfg);
  const Encoded va = encode(c.valid, c.vocab, cfg);
  std::vector<std::vector<int>> sentences;
  {
    std::ifstream in(mini("lm.txt"));
    for (std::string line; std::getline(in, line);) {
      auto ids = c.vocab.encode(data::tokenize(line));
      if (!ids.empty()) sentences.push_back(ids);
    }
  }
  TrainConfig t = rc.train;
  t.max_epochs = 5;
  t.patience = 100;
  TrainHooks hooks;
  hooks.restore_best = false;

  std::string detail;
  bool ok = true;
  for (std::uint64_t seed : {1, 2, 3}) {
    t.seed = seed;
    Model pre(cfg, c.vocab.size(), seed);
    pretrain_decoder(pre, sentences, t);
    const Checkpoint ckpt = snapshot(pre, rc, c.vocab);

    Model cold(cfg, c.vocab.size(), seed), warm(cfg, c.vocab.size(), seed);
    warm_start(warm, ckpt);
    const double cold_ppl = train(cold, tr.pairs, va.first, t, hooks).history.at(4).valid_ppl;
    const double warm_ppl = train(warm, tr.pairs, va.first, t, hooks).history.at(4).valid_ppl;
    ok = ok && warm_ppl < cold_ppl;
    detail += (detail.empty() ? "" : ", ") + std::string("seed ") + std::to_string(seed) + ": warm " +
              fmt("%.2f", warm_ppl) + " vs cold " + fmt("%.2f", cold_ppl);
  }
  return {ok, "validation perplexity at epoch 5, " + detail};
}

// ---------------------------------------------------------------------------
// 6. ablation plumbing

Verdict ablation() {
  const auto t0 = Clock::now();
  const Corpus c = load_mini();
  std::size_t configs = 0, count_mismatch = 0, gate_mismatch = 0, trained = 0;
  std::string failure;
  for (ModelKind kind : {ModelKind::kSingle, ModelKind::kParallel, ModelKind::kHierDU, ModelKind::kHierUD})
    for (int mask = 0; mask < 16; ++mask)
      for (InitVariant init : {InitVariant::kZeros, InitVariant::kWord, InitVariant::kContext, InitVariant::kBoth}) {
        ModelConfig cfg = desk(kind, 8);
        cfg.use_gate = mask & 1;
        cfg.use_word = mask & 2;
        cfg.use_char = mask & 4;
        cfg.use_contextual = mask & 8;
        cfg.init = init;
        cfg.chars.filters = {2, 2, 2, 2, 2};
        ++configs;
        Model m(cfg, c.vocab.size(), 1);
        count_mismatch += m.params().parameter_count() != Model::parameter_count(cfg, c.vocab.size());
        if (!cfg.use_gate) {
          ModelConfig gated = cfg;
          gated.use_gate = true;
          const std::size_t x = cfg.input_dim();
          const std::size_t decoders = is_multi_task(kind) ? 2 : 1;
          gate_mismatch += Model::parameter_count(gated, c.vocab.size()) - Model::parameter_count(cfg, c.vocab.size()) !=
                           decoders * x * x;
        }
        try {
          const Encoded tr = encode(c.train, c.vocab, cfg);
          const Encoded va = encode(c.valid, c.vocab, cfg);
          TrainConfig t;
          t.batch_size = 8;
          t.max_epochs = 1;
          const TrainState st = train(m, tr.pairs, va.first, t);
          trained += st.epoch == 1 && std::isfinite(st.best_valid_ppl);
        } catch (const std::exception& e) {
          if (failure.empty()) failure = std::string(", first failure: ") + e.what();
        }
      }
  Verdict v;
  v.pass = count_mismatch == 0 && gate_mismatch == 0 && trained == configs;
  v.detail = std::to_string(configs) + " configurations, " + std::to_string(count_mismatch) +
             " count mismatches, " + std::to_string(gate_mismatch) + " gate-delta mismatches, " +
             std::to_string(trained) + " trained one epoch, " + fmt("%.1f", seconds_since(t0)) + " s" + failure;
  return v;
}

// ---------------------------------------------------------------------------
// 7. data pipeline

std::map<std::string, data::SplitStats> recount() {
  // Values produced by tools/recount_stats.py, refreshed from the script
  // when python3 is available.
  std::map<std::string, data::SplitStats> frozen = {
      {"train", {26, 32, 211, 6.59375, 9.794117647058824, 7.5625}},
      {"valid", {8, 8, 49, 6.125, 7.375, 7.375}},
      {"test", {12, 12, 74, 6.166666666666667, 8.833333333333334, 7.166666666666667}}};
  const std::string cmd = "python3 \"" + (g_source / "tools" / "recount_stats.py").string() + "\" \"" +
                          mini("train.jsonl") + "\" \"" + mini("valid.jsonl") + "\" \"" + mini("test.jsonl") +
                          "\" 2>/dev/null";
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return frozen;
  std::string out;
  char buf[512];
  while (std::fgets(buf, sizeof buf, p)) out += buf;
  if (pclose(p) != 0) return frozen;
  std::istringstream lines(out);
  std::map<std::string, data::SplitStats> fresh;
  for (std::string line; std::getline(lines, line);) {
    const auto sp = line.find(' ');
    if (sp == std::string::npos) continue;
    const std::string file = fs::path(line.substr(0, sp)).stem().string();
    const auto j = nlohmann::json::parse(line.substr(sp + 1));
    fresh[file] = {j["words"], j["entries"], j["tokens"], j["definition_length"], j["context_length"],
                   j["usage_length"]};
  }
  return fresh.size() == 3 ? fresh : frozen;
}

Verdict data_pipeline() {
  const auto corpus = data::load_corpus(mini("corpus.jsonl")).entries;
  bool ok = true;
  std::size_t checked_splits = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto s = data::split_by_sense(corpus, {0.6, 0.2, 0.2}, seed);
    std::map<std::pair<std::string, std::string>, int> owner;
    std::multiset<std::string> ids;
    int split = 0;
    for (const auto* part : {&s.train, &s.valid, &s.test}) {
      for (const auto& e : *part) {
        auto [it, fresh] = owner.emplace(std::make_pair(e.word, e.sense), split);
        ok = ok && (fresh || it->second == split);
        ids.insert(e.id);
      }
      ++split;
    }
    std::multiset<std::string> all;
    for (const auto& e : corpus) all.insert(e.id);
    ok = ok && ids == all;
    const auto parts = data::partition_seen_unseen(s.train, s.test);
    ok = ok && parts.size() == s.test.size();
    std::set<std::string> train_words;
    for (const auto& e : s.train) train_words.insert(e.word);
    for (std::size_t i = 0; i < parts.size(); ++i)
      ok = ok && (parts[i] == data::Partition::kSeen) == train_words.count(s.test[i].word);
    ++checked_splits;
  }

  const auto expected = recount();
  std::size_t stat_mismatch = 0;
  for (const char* split : {"train", "valid", "test"}) {
    const auto got = data::corpus_stats(data::load_corpus(mini((std::string(split) + ".jsonl").c_str())).entries);
    const auto& e = expected.at(split);
    stat_mismatch += got.words != e.words || got.entries != e.entries || got.tokens != e.tokens ||
                     std::abs(got.definition_length - e.definition_length) > 1e-12 ||
                     std::abs(got.context_length - e.context_length) > 1e-12 ||
                     std::abs(got.usage_length - e.usage_length) > 1e-12;
  }
  Verdict v;
  v.pass = ok && stat_mismatch == 0;
  v.detail = std::to_string(checked_splits) + " seeded splits disjoint and covering, Seen/Unseen partitions exact, " +
             std::to_string(stat_mismatch) + " stats mismatches against the recount";
  return v;
}

// ---------------------------------------------------------------------------
// 8. determinism

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Verdict determinism() {
  RunConfig cfg = load_config((g_source / "configs" / "mini.conf").string());
  resolve_paths(cfg, (g_source / "configs").string());
  cfg.train.max_epochs = 4;
  cfg.model.kind = ModelKind::kParallel;
  const fs::path root = fs::temp_directory_path() / "semgen_acceptance_determinism";
  fs::remove_all(root);
  std::vector<std::string> files = {"train_log.jsonl", "best.ckpt", "report.jsonl", "report.txt"};
  std::vector<std::string> first;
  bool same = true;
  for (const char* run : {"a", "b"}) {
    runs::Invocation inv{cfg, (root / run).string(), "acceptance determinism --out-dir <out-dir>"};
    runs::train(inv);
    runs::eval(inv, (root / run / "best.ckpt").string());
    for (std::size_t i = 0; i < files.size(); ++i) {
      const std::string bytes = slurp(root / run / files[i]);
      if (first.size() < files.size()) first.push_back(bytes);
      else same = same && bytes == first[i] && !bytes.empty();
    }
  }
  fs::remove_all(root);
  return {same, "two seeded train+eval runs, " + std::to_string(files.size()) + " artifacts byte-identical: " +
                    (same ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  g_source = argc > 1 ? fs::path(argv[1]) : fs::path(SEMGEN_SOURCE_DIR);
  std::set<int> only;
  for (int i = 2; i < argc; ++i) only.insert(std::atoi(argv[i]));

  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"gradient integrity", gradients},   {"memorization", memorization},
      {"multi-task memorization", multi_task}, {"metric oracles", metric_oracles},
      {"pre-training effect", pretraining}, {"ablation plumbing", ablation},
      {"data pipeline", data_pipeline},     {"determinism", determinism}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && !only.count(int(i + 1))) continue;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("%s %zu %s: %s\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, v.detail.c_str());
    std::fflush(stdout);
  }
  return failed;
}
