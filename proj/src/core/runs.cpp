#include "core/runs.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "core/checkpoint.hpp"
#include "core/error.hpp"
#include "core/metrics.hpp"
#include "core/training.hpp"
#include "json.hpp"

namespace semgen::runs {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using data::DictionaryEntry;

void apply_data_dir(RunConfig& cfg, const std::string& data_dir) {
  if (data_dir.empty()) return;
  auto fill = [&](std::string& field, const char* file) {
    if (field.empty()) field = (fs::path(data_dir) / file).string();
  };
  fill(cfg.data.corpus, "corpus.jsonl");
  fill(cfg.data.train, "train.jsonl");
  fill(cfg.data.valid, "valid.jsonl");
  fill(cfg.data.test, "test.jsonl");
  fill(cfg.data.lm_corpus, "lm.txt");
  fill(cfg.data.stopwords, "stopwords.txt");
}

std::string mask_out_dir(std::string command_line, const std::string& out_dir) {
  if (out_dir.empty()) return command_line;
  for (std::size_t pos = command_line.find(out_dir); pos != std::string::npos;
       pos = command_line.find(out_dir, pos + 9))
    command_line.replace(pos, out_dir.size(), "<out-dir>");
  return command_line;
}

namespace {

std::string require_path(const std::string& value, const char* key) {
  if (value.empty()) throw InvalidArgument(std::string("config key '") + key + "' is not set");
  return value;
}

fs::path artifact(const Invocation& inv, const std::string& name) { return fs::path(inv.out_dir) / name; }

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string json_header(const Invocation& inv) {
  return json{{"command", inv.command_line}, {"config_digest", config_digest(inv.config)}}.dump() + "\n";
}

std::string text_header(const Invocation& inv) {
  return "# command: " + inv.command_line + "\n# config_digest: " + config_digest(inv.config) + "\n";
}

std::vector<std::pair<std::string, std::string>> provenance(const Invocation& inv) {
  return {{"command", inv.command_line}, {"config_digest", config_digest(inv.config)}};
}

// Runs `body` with an INCOMPLETE marker in the output directory and the
// resolved config written next to the artifacts.
std::string guarded(const Invocation& inv, const std::function<std::string()>& body) {
  if (inv.out_dir.empty()) throw InvalidArgument("an output directory is required");
  inv.config.validate();
  fs::create_directories(inv.out_dir);
  const fs::path marker = artifact(inv, "INCOMPLETE");
  write_file(marker, inv.command_line + "\n");
  write_file(artifact(inv, "config.txt"), text_header(inv) + config_to_text(inv.config));
  try {
    std::string summary = body();
    fs::remove(marker);
    return summary;
  } catch (const std::exception& e) {
    std::ofstream(marker, std::ios::app) << "error: " << e.what() << "\n";
    throw;
  }
}

std::vector<DictionaryEntry> load_entries(const std::string& path, const char* key) {
  return data::load_corpus(require_path(path, key)).entries;
}

struct Prepared {
  std::vector<DictionaryEntry> train, valid, test;
  data::Vocabulary vocab;
  std::unique_ptr<ContextualProvider> provider;
};

Prepared prepare(const RunConfig& cfg, bool need_test) {
  Prepared p;
  p.train = load_entries(cfg.data.train, "train");
  p.valid = load_entries(cfg.data.valid, "valid");
  if (need_test) p.test = load_entries(cfg.data.test, "test");
  p.vocab = data::build_model_vocab(p.train, cfg.model.max_vocab);
  p.provider = make_contextual_provider(cfg);
  return p;
}

bool usable(const DictionaryEntry& e, const ModelConfig& cfg) {
  return !e.contexts.empty() && (!is_multi_task(cfg.kind) || !e.usage.empty());
}

// Every (entry, context) pair.
std::vector<EncodedExample> encode_pairs(const std::vector<DictionaryEntry>& entries,
                                         const data::Vocabulary& vocab, const ModelConfig& cfg,
                                         const ContextualProvider* provider) {
  std::vector<EncodedExample> out;
  for (const auto& e : entries)
    if (usable(e, cfg))
      for (std::size_t k = 0; k < e.contexts.size(); ++k)
        out.push_back(encode_example(e, k, vocab, cfg, provider));
  return out;
}

// First context of each usable entry; `kept` receives those entries.
std::vector<EncodedExample> encode_first(const std::vector<DictionaryEntry>& entries,
                                         const data::Vocabulary& vocab, const ModelConfig& cfg,
                                         const ContextualProvider* provider,
                                         std::vector<DictionaryEntry>* kept = nullptr) {
  std::vector<EncodedExample> out;
  for (const auto& e : entries) {
    if (!usable(e, cfg)) continue;
    out.push_back(encode_example(e, 0, vocab, cfg, provider));
    if (kept) kept->push_back(e);
  }
  return out;
}

std::unique_ptr<Model> build_model(const RunConfig& cfg, const data::Vocabulary& vocab) {
  if (cfg.data.word_vectors.empty())
    return std::make_unique<Model>(cfg.model, vocab.size(), cfg.train.seed);
  const EmbeddingTable table = load_word_embeddings(cfg.data.word_vectors, vocab, cfg.train.seed);
  return std::make_unique<Model>(cfg.model, vocab.size(), cfg.train.seed, &table);
}

void check_vocab(const data::Vocabulary& expected, const Checkpoint& ckpt, const std::string& path) {
  if (ckpt.vocab.fingerprint() != expected.fingerprint())
    throw MismatchError("checkpoint '" + path + "' was trained with vocabulary " +
                        ckpt.vocab.fingerprint() + " but the configured data yields " +
                        expected.fingerprint());
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<std::pair<std::string, data::SplitStats>> split_stats(const RunConfig& cfg) {
  std::vector<std::pair<std::string, data::SplitStats>> rows;
  const std::pair<const char*, const std::string*> splits[] = {
      {"train", &cfg.data.train}, {"valid", &cfg.data.valid}, {"test", &cfg.data.test}};
  for (const auto& [name, path] : splits)
    if (!path->empty()) rows.emplace_back(name, data::corpus_stats(data::load_corpus(*path).entries));
  if (rows.empty()) throw InvalidArgument("data stats needs at least one of train, valid, test");
  return rows;
}

}  // namespace

std::unique_ptr<ContextualProvider> make_contextual_provider(const RunConfig& cfg) {
  if (!cfg.model.use_contextual) return nullptr;
  if (cfg.data.contextual == "hash")
    return std::make_unique<HashContextualProvider>(cfg.model.contextual_dim, kContextualSeed);
  if (cfg.data.contextual == "file")
    return std::make_unique<FileContextualProvider>(
        require_path(cfg.data.contextual_file, "contextual_file"), cfg.model.contextual_dim);
  throw InvalidArgument("contextual must be 'hash' or 'file', got '" + cfg.data.contextual + "'");
}

EncodedExample encode_query(const std::string& word, const data::Tokens& context,
                            const data::Vocabulary& vocab, const ModelConfig& cfg,
                            const ContextualProvider* provider) {
  const data::Tokens w = data::tokenize(word);
  if (w.size() != 1) throw InvalidArgument("generate: the word must be a single token, got '" + word + "'");
  if (context.empty()) throw InvalidArgument("generate: empty context");
  DictionaryEntry e;
  e.id = "query";
  e.word = w[0];
  e.definition = {"<unk>"};
  e.usage = {"<unk>"};
  e.contexts.push_back({context, data::find_target(context, e.word)});
  EncodedExample ex = encode_example(e, 0, vocab, cfg, provider);
  ex.definition.clear();
  ex.usage.clear();
  return ex;
}

std::string data_validate(const Invocation& inv) {
  return guarded(inv, [&] {
    const auto& d = inv.config.data;
    std::vector<std::pair<std::string, std::string>> files;
    if (!d.corpus.empty()) files.emplace_back("corpus", d.corpus);
    if (!d.train.empty()) files.emplace_back("train", d.train);
    if (!d.valid.empty()) files.emplace_back("valid", d.valid);
    if (!d.test.empty()) files.emplace_back("test", d.test);
    if (files.empty()) throw InvalidArgument("data validate needs corpus or train/valid/test");
    std::string out = json_header(inv), summary;
    for (const auto& [name, path] : files) {
      const data::Corpus c = data::load_corpus(path);
      json j = json::parse(data::report_json(c.report));
      out += json{{"file", name}, {"report", j}}.dump() + "\n";
      summary += name + ": " + std::to_string(c.report.accepted) + " accepted, " +
                 std::to_string(c.report.rejected) + " rejected, " +
                 std::to_string(c.report.contexts_without_target) + " contexts without target\n";
    }
    write_file(artifact(inv, "validation.jsonl"), out);
    return summary;
  });
}

std::string data_split(const Invocation& inv) {
  return guarded(inv, [&] {
    const auto entries = load_entries(inv.config.data.corpus, "corpus");
    const data::Splits s = data::split_by_sense(entries, inv.config.data.split_ratios, inv.config.train.seed);
    data::save_corpus(artifact(inv, "train.jsonl").string(), s.train);
    data::save_corpus(artifact(inv, "valid.jsonl").string(), s.valid);
    data::save_corpus(artifact(inv, "test.jsonl").string(), s.test);
    data::save_manifest(artifact(inv, "manifest.tsv").string(), s);
    return "split " + std::to_string(entries.size()) + " entries: train " + std::to_string(s.train.size()) +
           ", valid " + std::to_string(s.valid.size()) + ", test " + std::to_string(s.test.size()) + "\n";
  });
}

std::string data_stats(const Invocation& inv) {
  return guarded(inv, [&] {
    const auto rows = split_stats(inv.config);
    const std::string table = data::stats_table(rows);
    write_file(artifact(inv, "stats.txt"), text_header(inv) + table);
    write_file(artifact(inv, "stats.json"), data::stats_json(rows) + "\n");
    return table;
  });
}

std::string data_vocab(const Invocation& inv) {
  return guarded(inv, [&] {
    const auto& cfg = inv.config;
    const auto train = load_entries(cfg.data.train, "train");
    const data::Vocabulary model_vocab = data::build_model_vocab(train, cfg.model.max_vocab);
    model_vocab.save(artifact(inv, "vocab.tsv").string());

    data::VocabOptions opts;
    opts.max_size = cfg.model.max_vocab;
    if (!cfg.data.stopwords.empty()) opts.stopwords = data::load_stopwords(cfg.data.stopwords);
    std::vector<std::string> stream;
    for (const auto& e : train) {
      stream.insert(stream.end(), e.definition.begin(), e.definition.end());
      for (const auto& c : e.contexts) stream.insert(stream.end(), c.tokens.begin(), c.tokens.end());
      stream.insert(stream.end(), e.usage.begin(), e.usage.end());
    }
    const data::Vocabulary content = data::build_vocab(stream, opts);
    content.save(artifact(inv, "content_vocab.tsv").string());
    return "model vocabulary " + std::to_string(model_vocab.size()) + " tokens (fingerprint " +
           model_vocab.fingerprint() + "), content vocabulary " + std::to_string(content.size()) +
           " tokens\n";
  });
}

std::string pretrain(const Invocation& inv) {
  return guarded(inv, [&] {
    const auto& cfg = inv.config;
    const auto train = load_entries(cfg.data.train, "train");
    const data::Vocabulary vocab = data::build_model_vocab(train, cfg.model.max_vocab);
    std::ifstream in(require_path(cfg.data.lm_corpus, "lm_corpus"));
    if (!in) throw IoError("cannot open language-model corpus '" + cfg.data.lm_corpus + "'");
    std::vector<std::vector<int>> sentences;
    for (std::string line; std::getline(in, line);) {
      auto ids = vocab.encode(data::tokenize(line));
      if (!ids.empty()) sentences.push_back(std::move(ids));
    }
    auto model = build_model(cfg, vocab);
    std::ostringstream log;
    log << json_header(inv);
    const PretrainResult r = pretrain_decoder(*model, sentences, cfg.train, &log);
    write_file(artifact(inv, "pretrain_log.jsonl"), log.str());
    auto meta = provenance(inv);
    meta.emplace_back("pretrain_steps", std::to_string(r.steps));
    save_checkpoint(artifact(inv, "pretrained.ckpt").string(), snapshot(*model, cfg, vocab, meta));
    std::string summary = "pretrained on " + std::to_string(sentences.size()) + " sentences, " +
                          std::to_string(r.steps) + " steps";
    if (!r.epoch_loss.empty()) summary += ", final loss " + fmt("%.4f", r.epoch_loss.back());
    return summary + "\n";
  });
}

std::string train(const Invocation& inv) {
  return guarded(inv, [&] {
    const auto& cfg = inv.config;
    Prepared p = prepare(cfg, false);
    p.vocab.save(artifact(inv, "vocab.tsv").string());
    auto model = build_model(cfg, p.vocab);
    if (!cfg.data.warm_start.empty()) {
      const Checkpoint pre = load_checkpoint(cfg.data.warm_start);
      check_vocab(p.vocab, pre, cfg.data.warm_start);
      warm_start(*model, pre);
    }
    const auto train_set = encode_pairs(p.train, p.vocab, cfg.model, p.provider.get());
    const auto valid_set = encode_first(p.valid, p.vocab, cfg.model, p.provider.get());

    std::ostringstream log;
    log << json_header(inv);
    const std::string best_path = artifact(inv, "best.ckpt").string();
    TrainHooks hooks;
    hooks.log = &log;
    hooks.on_improve = [&](const EpochRecord& rec, const Model& m) {
      auto meta = provenance(inv);
      meta.emplace_back("epoch", std::to_string(rec.epoch));
      meta.emplace_back("step", std::to_string(rec.step));
      meta.emplace_back("valid_ppl", json(rec.valid_ppl).dump());
      save_checkpoint(best_path, snapshot(m, cfg, p.vocab, meta));
      return best_path;
    };
    const TrainState st = semgen::train(*model, train_set, valid_set, cfg.train, hooks);
    write_file(artifact(inv, "train_log.jsonl"), log.str());
    return "trained " + std::to_string(st.epoch) + " epochs (" + std::to_string(st.step) +
           " steps" + (st.stopped_early ? ", stopped early" : "") + "); best validation perplexity " +
           fmt("%.4f", st.best_valid_ppl) + " at epoch " + std::to_string(st.best_epoch) + "\n";
  });
}

std::string eval(const Invocation& inv, const std::string& checkpoint) {
  return guarded(inv, [&] {
    const Checkpoint ckpt = load_checkpoint(require_path(checkpoint, "checkpoint"));
    const auto train = load_entries(inv.config.data.train, "train");
    const auto test = load_entries(inv.config.data.test, "test");
    check_vocab(data::build_model_vocab(train, inv.config.model.max_vocab), ckpt, checkpoint);
    RunConfig model_cfg = ckpt.config();
    model_cfg.data.contextual = inv.config.data.contextual;
    model_cfg.data.contextual_file = inv.config.data.contextual_file;
    auto model = restore_model(ckpt);
    auto provider = make_contextual_provider(model_cfg);
    std::vector<DictionaryEntry> kept;
    const auto examples = encode_first(test, ckpt.vocab, model_cfg.model, provider.get(), &kept);
    const auto partitions = data::partition_seen_unseen(train, kept);
    metrics::EvalOptions opts{inv.config.train.tau, inv.config.train.seed, inv.config.train.max_length};
    const metrics::EvalReport report =
        metrics::evaluate(*model, ckpt.vocab, kept, examples, partitions, opts);
    const std::string table = metrics::report_table(report);
    write_file(artifact(inv, "report.jsonl"), json_header(inv) + metrics::report_jsonl(report));
    write_file(artifact(inv, "report.txt"), text_header(inv) + table);
    return table;
  });
}

namespace {

struct AblationSetting {
  std::string embeddings;
  bool contextual, chars;
};

const AblationSetting kEmbeddings[] = {
    {"W2V", false, false}, {"W2V+ELMo", true, false}, {"W2V+CH", false, true}, {"W2V+ELMo+CH", true, true}};
const InitVariant kInits[] = {InitVariant::kZeros, InitVariant::kWord, InitVariant::kContext,
                              InitVariant::kBoth};

}  // namespace

std::string ablate(const Invocation& inv) {
  return guarded(inv, [&] {
    const auto& base = inv.config;
    const auto train_entries = load_entries(base.data.train, "train");
    const auto valid_entries = load_entries(base.data.valid, "valid");
    const auto test_entries = load_entries(base.data.test, "test");
    const data::Vocabulary vocab = data::build_model_vocab(train_entries, base.model.max_vocab);

    std::string jsonl = json_header(inv);
    std::ostringstream table;
    char line[160];
    std::snprintf(line, sizeof line, "%-4s %-12s %-8s %10s %10s %8s %8s\n", "gate", "embeddings", "s0",
                  "params", "valid ppl", "BLEU", "ROUGE-L");
    table << line;
    for (bool gate : {true, false})
      for (const auto& emb : kEmbeddings)
        for (InitVariant init : kInits) {
          RunConfig cfg = base;
          cfg.model.use_gate = gate;
          cfg.model.use_contextual = emb.contextual;
          cfg.model.use_char = emb.chars;
          cfg.model.init = init;
          cfg.validate();
          auto provider = make_contextual_provider(cfg);
          auto model = build_model(cfg, vocab);
          const auto tr = encode_pairs(train_entries, vocab, cfg.model, provider.get());
          const auto va = encode_first(valid_entries, vocab, cfg.model, provider.get());
          std::vector<DictionaryEntry> kept;
          const auto te = encode_first(test_entries, vocab, cfg.model, provider.get(), &kept);
          const TrainState st = semgen::train(*model, tr, va, cfg.train);
          const metrics::EvalReport rep = metrics::evaluate(
              *model, vocab, kept, te, data::partition_seen_unseen(train_entries, kept),
              {cfg.train.tau, cfg.train.seed, cfg.train.max_length});
          const std::size_t params = model->params().parameter_count();
          jsonl += json{{"gate", gate},
                        {"embeddings", emb.embeddings},
                        {"init", init_variant_name(init)},
                        {"params", params},
                        {"epochs", st.epoch},
                        {"valid_ppl", st.best_valid_ppl},
                        {"bleu", rep.full.bleu},
                        {"rouge_l", rep.full.rouge}}
                       .dump() +
                   "\n";
          std::snprintf(line, sizeof line, "%-4s %-12s %-8s %10zu %10.3f %8.2f %8.2f\n",
                        gate ? "on" : "off", emb.embeddings.c_str(), init_variant_name(init), params,
                        st.best_valid_ppl, 100 * rep.full.bleu, 100 * rep.full.rouge);
          table << line;
        }
    write_file(artifact(inv, "ablation.jsonl"), jsonl);
    write_file(artifact(inv, "ablation.txt"), text_header(inv) + table.str());
    return table.str();
  });
}

}  // namespace semgen::runs
