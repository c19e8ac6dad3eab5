#include "core/embeddings.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "core/error.hpp"

namespace semgen {

// ---------------------------------------------------------------------------
// Pretrained word vectors

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  std::string f;
  while (is >> f) out.push_back(f);
  return out;
}

bool is_count_dim_header(const std::vector<std::string>& fields) {
  if (fields.size() != 2) return false;
  for (const auto& f : fields)
    if (f.empty() || f.find_first_not_of("0123456789") != std::string::npos) return false;
  return true;
}

double parse_real(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError(where + ": '" + s + "' is not a finite number");
  }
}

}  // namespace

EmbeddingTable random_word_embeddings(std::size_t vocab_size, std::size_t dim, std::uint64_t seed) {
  EmbeddingTable table;
  table.weights = ad::Tensor({vocab_size, dim});
  Rng rng(seed);
  init_uniform(table.weights, rng, 0.1);
  return table;
}

EmbeddingTable load_word_embeddings(const std::string& path, const data::Vocabulary& vocab,
                                    std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open word embeddings '" + path + "'");
  std::unordered_map<std::string, std::vector<double>> rows;
  std::size_t dim = 0;
  std::string line;
  std::size_t lineno = 0;
  bool any = false;
  while (std::getline(in, line)) {
    ++lineno;
    auto fields = split_ws(line);
    if (fields.empty()) continue;
    if (!any && is_count_dim_header(fields)) {
      dim = std::stoul(fields[1]);
      any = true;
      continue;
    }
    any = true;
    const std::string where = path + ":" + std::to_string(lineno);
    if (fields.size() < 2) throw FormatError(where + ": expected a token followed by a vector");
    if (dim == 0) dim = fields.size() - 1;
    if (fields.size() - 1 != dim)
      throw FormatError(where + ": expected " + std::to_string(dim) + " values, found " +
                        std::to_string(fields.size() - 1));
    if (!vocab.find(fields[0])) continue;
    std::vector<double> v(dim);
    for (std::size_t i = 0; i < dim; ++i) v[i] = parse_real(fields[i + 1], where);
    rows.emplace(fields[0], std::move(v));
  }
  if (!any || dim == 0) throw FormatError("word embedding file '" + path + "' is empty");

  EmbeddingTable table = random_word_embeddings(vocab.size(), dim, seed);
  for (std::size_t id = 0; id < vocab.size(); ++id) {
    auto it = rows.find(vocab.token(static_cast<int>(id)));
    if (it == rows.end()) continue;
    std::copy(it->second.begin(), it->second.end(), &table.weights[id * dim]);
    if (id >= static_cast<std::size_t>(data::Vocabulary::kNumSpecials)) ++table.found;
  }
  const std::size_t regular = vocab.size() - data::Vocabulary::kNumSpecials;
  table.coverage = regular ? static_cast<double>(table.found) / static_cast<double>(regular) : 1.0;
  return table;
}

// ---------------------------------------------------------------------------
// Character CNN

std::size_t CharEncoderConfig::output_dim() const {
  return std::accumulate(filters.begin(), filters.end(), std::size_t{0});
}

std::size_t CharEncoderConfig::max_width() const {
  std::size_t w = 0;
  for (auto x : widths) w = std::max(w, x);
  return w;
}

namespace {
constexpr std::string_view kAlphabet = "abcdefghijklmnopqrstuvwxyz0123456789-'";
}

std::size_t CharVocabulary::size() { return 4 + kAlphabet.size(); }

int CharVocabulary::id(char c) {
  const char lower = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  auto pos = kAlphabet.find(lower);
  return pos == std::string_view::npos ? kUnk : static_cast<int>(4 + pos);
}

std::vector<int> CharVocabulary::encode(std::string_view word, std::size_t min_length) {
  std::vector<int> ids;
  ids.reserve(word.size() + 2);
  ids.push_back(kBeginWord);
  for (char c : word) ids.push_back(id(c));
  ids.push_back(kEndWord);
  while (ids.size() < min_length) ids.push_back(kPad);
  return ids;
}

CharEncoder::CharEncoder(ParamStore& store, const std::string& prefix, CharEncoderConfig config,
                         Rng& rng)
    : config_(std::move(config)) {
  if (config_.widths.size() != config_.filters.size() || config_.widths.empty())
    throw InvalidArgument("char encoder: widths and filter counts must align");
  embedding_ = &store.add(prefix + ".embedding", {CharVocabulary::size(), config_.char_dim});
  init_uniform(*embedding_, rng, 0.1);
  for (std::size_t i = 0; i < config_.widths.size(); ++i) {
    const std::string w = std::to_string(config_.widths[i]);
    auto& k = store.add(prefix + ".conv" + w + ".kernel",
                        {config_.widths[i], config_.char_dim, config_.filters[i]});
    init_xavier(k, rng);
    kernels_.push_back(&k);
    kernel_biases_.push_back(&store.add(prefix + ".conv" + w + ".bias", {1, config_.filters[i]}));
  }
  const std::size_t d = config_.output_dim();
  for (std::size_t l = 0; l < config_.highway_layers; ++l) {
    const std::string p = prefix + ".highway" + std::to_string(l);
    Highway h;
    h.w_h = &store.add(p + ".w_h", {d, d});
    init_xavier(*h.w_h, rng);
    h.b_h = &store.add(p + ".b_h", {1, d});
    h.w_t = &store.add(p + ".w_t", {d, d});
    init_xavier(*h.w_t, rng);
    h.b_t = &store.add(p + ".b_t", {1, d});
    for (auto& v : h.b_t->data()) v = -2.0;  // start close to carry
    highway_.push_back(h);
  }
}

std::size_t CharEncoder::parameter_count(const CharEncoderConfig& c) {
  std::size_t n = CharVocabulary::size() * c.char_dim;
  for (std::size_t i = 0; i < c.widths.size(); ++i)
    n += c.widths[i] * c.char_dim * c.filters[i] + c.filters[i];
  const std::size_t d = c.output_dim();
  return n + c.highway_layers * 2 * (d * d + d);
}

ad::Var CharEncoder::pooled_features(ad::Tape& tape, std::string_view word) const {
  if (word.empty()) throw InvalidArgument("char_encode: empty word");
  const auto ids = CharVocabulary::encode(word, config_.max_width());
  ad::Var chars = ad::embedding_lookup(tape.leaf(*embedding_), ids);
  std::vector<ad::Var> pooled;
  pooled.reserve(kernels_.size());
  for (std::size_t i = 0; i < kernels_.size(); ++i) {
    ad::Var conv = ad::conv1d(chars, tape.leaf(*kernels_[i]), tape.leaf(*kernel_biases_[i]));
    pooled.push_back(ad::max_over_axis(ad::tanh(conv), 0));
  }
  return ad::concat(pooled, 1);
}

ad::Var CharEncoder::encode(ad::Tape& tape, std::string_view word) const {
  ad::Var x = pooled_features(tape, word);
  for (const auto& h : highway_) {
    ad::Var t = ad::sigmoid(ad::add(ad::matmul(x, tape.leaf(*h.w_t)), tape.leaf(*h.b_t)));
    ad::Var g = ad::tanh(ad::add(ad::matmul(x, tape.leaf(*h.w_h)), tape.leaf(*h.b_h)));
    // t * g + (1 - t) * x
    x = ad::add(x, ad::mul(t, ad::sub(g, x)));
  }
  return x;
}

// ---------------------------------------------------------------------------
// Contextual embeddings

std::string contextual_key(std::string_view entry_id, std::size_t context_index) {
  return std::string(entry_id) + "#" + std::to_string(context_index);
}

std::vector<double> HashContextualProvider::embed(const ContextQuery& q) const {
  std::string target(q.word), prev, next;
  if (q.context && q.target) {
    const auto& c = *q.context;
    target = c.at(*q.target);
    if (*q.target > 0) prev = c[*q.target - 1];
    if (*q.target + 1 < c.size()) next = c[*q.target + 1];
  }
  std::uint64_t h = fnv1a(target.data(), target.size());
  h = fnv1a("\x1f", 1, h);
  h = fnv1a(prev.data(), prev.size(), h);
  h = fnv1a("\x1f", 1, h);
  h = fnv1a(next.data(), next.size(), h);
  Rng rng(mix64(h ^ mix64(seed_)));
  std::vector<double> v(dim_);
  double norm = 0.0;
  while (norm == 0.0) {
    norm = 0.0;
    for (auto& x : v) {
      x = rng.uniform(-1.0, 1.0);
      norm += x * x;
    }
  }
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

FileContextualProvider::FileContextualProvider(const std::string& path, std::size_t dim) : dim_(dim) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open contextual embeddings '" + path + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto fields = split_ws(line);
    if (fields.empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    if (fields.size() != dim_ + 1)
      throw FormatError(where + ": expected " + std::to_string(dim_) + " values, found " +
                        std::to_string(fields.size() - 1));
    std::vector<double> v(dim_);
    for (std::size_t i = 0; i < dim_; ++i) v[i] = parse_real(fields[i + 1], where);
    if (!vectors_.emplace(fields[0], std::move(v)).second)
      throw FormatError(where + ": duplicate key '" + fields[0] + "'");
  }
}

std::vector<double> FileContextualProvider::embed(const ContextQuery& q) const {
  auto it = vectors_.find(q.key);
  if (it == vectors_.end())
    throw InvalidArgument("no precomputed contextual embedding for '" + q.key + "'");
  return it->second;
}

std::vector<double> contextual_embed(const ContextualProvider& provider, const data::Tokens& context,
                                     std::optional<std::size_t> target_index, std::string_view word,
                                     const std::string& key) {
  if (target_index) {
    if (*target_index >= context.size())
      throw InvalidArgument("contextual_embed: target index " + std::to_string(*target_index) +
                            " outside context of length " + std::to_string(context.size()));
    if (!data::matches_inflection(context[*target_index], word))
      throw InvalidArgument("contextual_embed: token '" + context[*target_index] +
                            "' does not match word '" + std::string(word) + "'");
  }
  ContextQuery q{key, word, &context, target_index};
  auto v = provider.embed(q);
  if (v.size() != provider.dim()) throw ShapeError("contextual provider returned wrong dimension");
  return v;
}

}  // namespace semgen
