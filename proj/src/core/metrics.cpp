#include "core/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "core/error.hpp"
#include "json.hpp"

namespace semgen::metrics {

using data::Tokens;
using json = nlohmann::ordered_json;

namespace {

std::map<std::vector<std::string>, std::size_t> ngram_counts(const Tokens& t, std::size_t n) {
  std::map<std::vector<std::string>, std::size_t> out;
  for (std::size_t i = 0; i + n <= t.size(); ++i)
    ++out[std::vector<std::string>(t.begin() + static_cast<long>(i), t.begin() + static_cast<long>(i + n))];
  return out;
}

void require_reference(const Tokens& reference, const char* metric) {
  if (reference.empty()) throw InvalidArgument(std::string(metric) + ": empty reference");
}

}  // namespace

BleuScore sentence_bleu_scored(const Tokens& candidate, const Tokens& reference) {
  require_reference(reference, "sentence_bleu");
  if (candidate.empty()) return {0.0, true};
  const std::size_t c = candidate.size(), r = reference.size();
  const std::size_t max_n = std::min<std::size_t>(4, c);
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= max_n; ++n) {
    const auto cand = ngram_counts(candidate, n);
    const auto ref = ngram_counts(reference, n);
    std::size_t matches = 0;
    for (const auto& [gram, count] : cand) {
      auto it = ref.find(gram);
      if (it != ref.end()) matches += std::min(count, it->second);
    }
    const std::size_t total = c - n + 1;
    double p;
    if (matches > 0)
      p = static_cast<double>(matches) / static_cast<double>(total);
    else if (n == 1)
      return {0.0, false};
    else
      p = 1.0 / static_cast<double>(total + 1);
    log_sum += std::log(p);
  }
  const double bp = c < r ? std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c)) : 1.0;
  return {bp * std::exp(log_sum / static_cast<double>(max_n)), false};
}

double sentence_bleu(const Tokens& candidate, const Tokens& reference) {
  return sentence_bleu_scored(candidate, reference).score;
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> row(b.size() + 1, 0);
  for (const auto& x : a) {
    std::size_t diag = 0;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = x == b[j - 1] ? diag + 1 : std::max(row[j], row[j - 1]);
      diag = up;
    }
  }
  return row[b.size()];
}

double rouge_l(const Tokens& candidate, const Tokens& reference) {
  require_reference(reference, "rouge_l");
  if (candidate.empty()) return 0.0;
  const double l = static_cast<double>(lcs_length(candidate, reference));
  const double p = l / static_cast<double>(candidate.size());
  const double r = l / static_cast<double>(reference.size());
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

NllTotal corpus_nll(const Model& model, std::span<const EncodedExample> examples, Task task) {
  if (examples.empty()) throw InvalidArgument("perplexity: empty corpus");
  if (!model.supervises(task)) throw InvalidArgument("perplexity: model has no usage decoder");
  NllTotal total;
  for (const auto& ex : examples) {
    ad::Tape tape(false);
    const ForwardOutput out = model.forward(tape, ex);
    const TaskOutput& t = task == Task::kDefinition ? *out.definition : *out.usage;
    total.nll += tape.item(t.nll_sum);
    total.tokens += t.tokens;
  }
  return total;
}

double perplexity(const Model& model, std::span<const EncodedExample> examples, Task task) {
  const NllTotal t = corpus_nll(model, examples, task);
  return std::exp(t.nll / static_cast<double>(t.tokens));
}

double selection_perplexity(const Model& model, std::span<const EncodedExample> examples) {
  if (!is_multi_task(model.config().kind)) return perplexity(model, examples, Task::kDefinition);
  if (examples.empty()) throw InvalidArgument("perplexity: empty corpus");
  NllTotal def, usg;
  for (const auto& ex : examples) {
    ad::Tape tape(false);
    const ForwardOutput out = model.forward(tape, ex);
    def.nll += tape.item(out.definition->nll_sum);
    def.tokens += out.definition->tokens;
    usg.nll += tape.item(out.usage->nll_sum);
    usg.tokens += out.usage->tokens;
  }
  const double mean = 0.5 * (def.nll / static_cast<double>(def.tokens) +
                             usg.nll / static_cast<double>(usg.tokens));
  return std::exp(mean);
}

namespace {

void accumulate(PartitionScores& s, const EntryResult& r) {
  ++s.entries;
  s.bleu += r.bleu;
  s.rouge += r.rouge;
}

void finish(PartitionScores& s) {
  if (s.entries == 0) return;
  s.bleu /= static_cast<double>(s.entries);
  s.rouge /= static_cast<double>(s.entries);
}

json scores_json(const PartitionScores& s) {
  return json{{"entries", s.entries}, {"bleu", s.bleu}, {"rouge_l", s.rouge}};
}

}  // namespace

EvalReport evaluate(const Model& model, const data::Vocabulary& vocab,
                    std::span<const data::DictionaryEntry> entries,
                    std::span<const EncodedExample> examples,
                    std::span<const data::Partition> partitions, const EvalOptions& options) {
  if (entries.empty()) throw InvalidArgument("evaluate: empty test set");
  if (examples.size() != entries.size())
    throw InvalidArgument("evaluate: one encoded example per entry is required");
  if (partitions.size() != entries.size())
    throw InvalidArgument("evaluate: Seen/Unseen partition missing or incomplete");

  const bool multi = is_multi_task(model.config().kind);
  EvalReport report;
  std::size_t with_word = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& entry = entries[i];
    const Generation g =
        model.generate(examples[i], options.tau, mix64(options.seed + i), options.max_length);
    EntryResult r;
    r.id = entry.id;
    r.word = entry.word;
    r.partition = partitions[i];
    r.hypothesis = vocab.decode(g.definition);
    r.reference = entry.definition;
    const BleuScore b = sentence_bleu_scored(r.hypothesis, r.reference);
    r.bleu = b.score;
    r.empty_hypothesis = b.empty_candidate;
    r.rouge = rouge_l(r.hypothesis, r.reference);
    r.unknown_word = g.unknown_word;
    if (multi) {
      r.usage = vocab.decode(g.usage);
      r.usage_has_word = std::any_of(r.usage->begin(), r.usage->end(), [&](const std::string& t) {
        return data::matches_inflection(t, entry.word);
      });
      with_word += r.usage_has_word;
    }
    report.empty_hypotheses += r.empty_hypothesis;
    accumulate(report.full, r);
    accumulate(r.partition == data::Partition::kSeen ? report.seen : report.unseen, r);
    report.entries.push_back(std::move(r));
  }
  finish(report.full);
  finish(report.seen);
  finish(report.unseen);
  report.perplexity = perplexity(model, examples, Task::kDefinition);
  if (multi) {
    report.usage_perplexity = perplexity(model, examples, Task::kUsage);
    report.usage_inclusion = static_cast<double>(with_word) / static_cast<double>(entries.size());
  }
  return report;
}

std::string report_jsonl(const EvalReport& report) {
  std::string out;
  for (const auto& r : report.entries) {
    json j{{"id", r.id},
           {"word", r.word},
           {"partition", data::partition_name(r.partition)},
           {"hypothesis", data::join(r.hypothesis)},
           {"reference", data::join(r.reference)},
           {"bleu", r.bleu},
           {"rouge_l", r.rouge}};
    if (r.empty_hypothesis) j["empty_hypothesis"] = true;
    if (r.unknown_word) j["unknown_word"] = true;
    if (r.usage) {
      j["usage"] = data::join(*r.usage);
      j["usage_has_word"] = r.usage_has_word;
    }
    out += j.dump() + "\n";
  }
  json s{{"summary", true},
         {"full", scores_json(report.full)},
         {"seen", scores_json(report.seen)},
         {"unseen", scores_json(report.unseen)},
         {"perplexity", report.perplexity},
         {"empty_hypotheses", report.empty_hypotheses}};
  if (report.usage_perplexity) s["usage_perplexity"] = *report.usage_perplexity;
  if (report.usage_inclusion) s["usage_inclusion"] = *report.usage_inclusion;
  out += s.dump() + "\n";
  return out;
}

std::string report_table(const EvalReport& report) {
  std::ostringstream os;
  char line[128];
  std::snprintf(line, sizeof line, "%-8s %8s %8s %8s\n", "split", "entries", "BLEU", "ROUGE-L");
  os << line;
  const std::pair<const char*, const PartitionScores*> rows[] = {
      {"Full", &report.full}, {"Seen", &report.seen}, {"Unseen", &report.unseen}};
  for (const auto& [name, s] : rows) {
    std::snprintf(line, sizeof line, "%-8s %8zu %8.2f %8.2f\n", name, s->entries, 100 * s->bleu,
                  100 * s->rouge);
    os << line;
  }
  std::snprintf(line, sizeof line, "perplexity %.4f\n", report.perplexity);
  os << line;
  if (report.usage_perplexity) {
    std::snprintf(line, sizeof line, "usage perplexity %.4f\n", *report.usage_perplexity);
    os << line;
  }
  if (report.usage_inclusion) {
    std::snprintf(line, sizeof line, "usage inclusion %.2f%%\n", 100 * *report.usage_inclusion);
    os << line;
  }
  return os.str();
}

}  // namespace semgen::metrics
