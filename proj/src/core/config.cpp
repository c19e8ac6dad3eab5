#include "core/config.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "core/error.hpp"

namespace semgen {

const char* model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::kSingle: return "single";
    case ModelKind::kParallel: return "parallel";
    case ModelKind::kHierDU: return "hier-du";
    case ModelKind::kHierUD: return "hier-ud";
  }
  return "?";
}

std::optional<ModelKind> parse_model_kind(std::string_view name) {
  for (auto k : {ModelKind::kSingle, ModelKind::kParallel, ModelKind::kHierDU, ModelKind::kHierUD})
    if (name == model_kind_name(k)) return k;
  return std::nullopt;
}

std::size_t ModelConfig::input_dim() const {
  return (use_word ? word_dim : 0) + word_dim + (use_char ? chars.output_dim() : 0) +
         (use_contextual ? contextual_dim : 0);
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw InvalidArgument(std::string(name) + " must be positive");
  };
  positive(word_dim, "word_dim");
  positive(encoder_hidden, "encoder_hidden");
  positive(state_dim, "state_dim");
  positive(layers, "layers");
  positive(attention_dim, "attention_dim");
  positive(contextual_dim, "contextual_dim");
  positive(max_context, "max_context");
  positive(chars.char_dim, "char_dim");
  if (max_vocab < 5) throw InvalidArgument("max_vocab must leave room for at least one token");
  if (chars.widths.empty() || chars.widths.size() != chars.filters.size())
    throw InvalidArgument("char_widths and char_filters must be non-empty and of equal length");
  for (auto w : chars.widths) positive(w, "char_widths entry");
  for (auto f : chars.filters) positive(f, "char_filters entry");
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw InvalidArgument("batch_size must be positive");
  if (!(learning_rate >= 0)) throw InvalidArgument("learning_rate must be non-negative");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
    throw InvalidArgument("beta1 and beta2 must lie in [0, 1)");
  if (!(epsilon > 0)) throw InvalidArgument("epsilon must be positive");
  if (!(clip_norm > 0)) throw InvalidArgument("clip_norm must be positive");
  if (!(tau > 0)) throw InvalidArgument("tau must be positive");
  if (max_length == 0) throw InvalidArgument("max_length must be at least 1");
}

void RunConfig::validate() const {
  model.validate();
  train.validate();
  if (data.contextual != "hash" && data.contextual != "file")
    throw InvalidArgument("contextual must be 'hash' or 'file'");
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

template <class T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw InvalidArgument(std::string(key) + ": '" + std::string(v) + "' is not a valid number");
  return out;
}

double parse_double(std::string_view key, std::string_view v) {
  try {
    std::size_t used = 0;
    std::string s(v);
    double d = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return d;
  } catch (const std::exception&) {
    throw InvalidArgument(std::string(key) + ": '" + std::string(v) + "' is not a valid number");
  }
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  throw InvalidArgument(std::string(key) + ": expected true/false, got '" + std::string(v) + "'");
}

std::vector<std::string> split_list(std::string_view v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is{std::string(v)};
  while (std::getline(is, item, ',')) out.push_back(trim(item));
  return out;
}

template <class T>
std::string join_list(const T& xs) {
  std::string out;
  for (const auto& x : xs) {
    if (!out.empty()) out += ",";
    if constexpr (std::is_floating_point_v<std::decay_t<decltype(x)>>)
      out += fmt_double(x);
    else
      out += std::to_string(x);
  }
  return out;
}

struct Field {
  const char* key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view)> set;
};

template <class Section, class T>
Field make_field(const char* key, Section RunConfig::*section, T Section::*member) {
  Field f{key, nullptr, nullptr};
  f.get = [=](const RunConfig& c) -> std::string {
    const T& v = c.*section.*member;
    if constexpr (std::is_same_v<T, bool>)
      return v ? "true" : "false";
    else if constexpr (std::is_same_v<T, double>)
      return fmt_double(v);
    else if constexpr (std::is_same_v<T, std::string>)
      return v;
    else
      return std::to_string(v);
  };
  f.set = [=](RunConfig& c, std::string_view v) {
    T& out = c.*section.*member;
    if constexpr (std::is_same_v<T, bool>)
      out = parse_bool(key, v);
    else if constexpr (std::is_same_v<T, double>)
      out = parse_double(key, v);
    else if constexpr (std::is_same_v<T, std::string>)
      out = std::string(v);
    else
      out = parse_number<T>(key, v);
  };
  return f;
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    using R = RunConfig;
    using M = ModelConfig;
    using T = TrainConfig;
    using D = DataConfig;
    std::vector<Field> f;
    f.push_back({"kind", [](const R& c) { return std::string(model_kind_name(c.model.kind)); },
                 [](R& c, std::string_view v) {
                   auto k = parse_model_kind(v);
                   if (!k) throw InvalidArgument("kind: expected single, parallel, hier-du or hier-ud");
                   c.model.kind = *k;
                 }});
    f.push_back(make_field("word_dim", &R::model, &M::word_dim));
    f.push_back(make_field("encoder_hidden", &R::model, &M::encoder_hidden));
    f.push_back(make_field("state_dim", &R::model, &M::state_dim));
    f.push_back(make_field("layers", &R::model, &M::layers));
    f.push_back(make_field("attention_dim", &R::model, &M::attention_dim));
    f.push_back(make_field("contextual_dim", &R::model, &M::contextual_dim));
    f.push_back(make_field("max_context", &R::model, &M::max_context));
    f.push_back(make_field("max_vocab", &R::model, &M::max_vocab));
    f.push_back({"char_dim", [](const R& c) { return std::to_string(c.model.chars.char_dim); },
                 [](R& c, std::string_view v) { c.model.chars.char_dim = parse_number<std::size_t>("char_dim", v); }});
    f.push_back({"char_widths", [](const R& c) { return join_list(c.model.chars.widths); },
                 [](R& c, std::string_view v) {
                   c.model.chars.widths.clear();
                   for (const auto& s : split_list(v))
                     c.model.chars.widths.push_back(parse_number<std::size_t>("char_widths", s));
                 }});
    f.push_back({"char_filters", [](const R& c) { return join_list(c.model.chars.filters); },
                 [](R& c, std::string_view v) {
                   c.model.chars.filters.clear();
                   for (const auto& s : split_list(v))
                     c.model.chars.filters.push_back(parse_number<std::size_t>("char_filters", s));
                 }});
    f.push_back({"highway_layers", [](const R& c) { return std::to_string(c.model.chars.highway_layers); },
                 [](R& c, std::string_view v) {
                   c.model.chars.highway_layers = parse_number<std::size_t>("highway_layers", v);
                 }});
    f.push_back(make_field("use_gate", &R::model, &M::use_gate));
    f.push_back(make_field("use_word", &R::model, &M::use_word));
    f.push_back(make_field("use_char", &R::model, &M::use_char));
    f.push_back(make_field("use_contextual", &R::model, &M::use_contextual));
    f.push_back({"init", [](const R& c) { return std::string(init_variant_name(c.model.init)); },
                 [](R& c, std::string_view v) {
                   auto k = parse_init_variant(v);
                   if (!k) throw InvalidArgument("init: expected zeros, word, context or both");
                   c.model.init = *k;
                 }});

    f.push_back(make_field("seed", &R::train, &T::seed));
    f.push_back(make_field("batch_size", &R::train, &T::batch_size));
    f.push_back(make_field("learning_rate", &R::train, &T::learning_rate));
    f.push_back(make_field("beta1", &R::train, &T::beta1));
    f.push_back(make_field("beta2", &R::train, &T::beta2));
    f.push_back(make_field("epsilon", &R::train, &T::epsilon));
    f.push_back(make_field("clip_norm", &R::train, &T::clip_norm));
    f.push_back(make_field("patience", &R::train, &T::patience));
    f.push_back(make_field("max_epochs", &R::train, &T::max_epochs));
    f.push_back(make_field("pretrain_epochs", &R::train, &T::pretrain_epochs));
    f.push_back(make_field("tau", &R::train, &T::tau));
    f.push_back(make_field("max_length", &R::train, &T::max_length));

    f.push_back(make_field("corpus", &R::data, &D::corpus));
    f.push_back(make_field("train", &R::data, &D::train));
    f.push_back(make_field("valid", &R::data, &D::valid));
    f.push_back(make_field("test", &R::data, &D::test));
    f.push_back(make_field("stopwords", &R::data, &D::stopwords));
    f.push_back(make_field("word_vectors", &R::data, &D::word_vectors));
    f.push_back(make_field("contextual", &R::data, &D::contextual));
    f.push_back(make_field("contextual_file", &R::data, &D::contextual_file));
    f.push_back(make_field("lm_corpus", &R::data, &D::lm_corpus));
    f.push_back(make_field("warm_start", &R::data, &D::warm_start));
    f.push_back({"split_ratios", [](const R& c) { return join_list(c.data.split_ratios); },
                 [](R& c, std::string_view v) {
                   auto parts = split_list(v);
                   if (parts.size() != 3) throw InvalidArgument("split_ratios: expected three values");
                   for (std::size_t i = 0; i < 3; ++i)
                     c.data.split_ratios[i] = parse_double("split_ratios", parts[i]);
                 }});
    return f;
  }();
  return table;
}

const char* const kPathKeys[] = {"corpus",          "train",     "valid",     "test",
                                 "stopwords",       "word_vectors", "contextual_file",
                                 "lm_corpus",       "warm_start"};

}  // namespace

void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
  for (const auto& f : fields())
    if (key == f.key) return f.set(cfg, trim(value));
  throw InvalidArgument("unknown config key '" + std::string(key) + "'");
}

void apply_override(RunConfig& cfg, std::string_view kv) {
  auto eq = kv.find('=');
  if (eq == std::string_view::npos)
    throw InvalidArgument("override '" + std::string(kv) + "' is not of the form key=value");
  set_config_value(cfg, trim(kv.substr(0, eq)), kv.substr(eq + 1));
}

RunConfig parse_config(std::string_view text, const std::string& source) {
  RunConfig cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    auto body = trim(line);
    if (body.empty()) continue;
    auto eq = body.find('=');
    if (eq == std::string::npos)
      throw InvalidArgument(source + ":" + std::to_string(lineno) + ": expected key = value");
    try {
      set_config_value(cfg, trim(body.substr(0, eq)), body.substr(eq + 1));
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

std::string config_to_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(cfg) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.emplace_back(f.key);
  return out;
}

void resolve_paths(RunConfig& cfg, const std::string& base) {
  namespace fs = std::filesystem;
  for (const char* key : kPathKeys) {
    for (const auto& f : fields()) {
      if (std::string_view(f.key) != key) continue;
      std::string v = f.get(cfg);
      if (v.empty() || fs::path(v).is_absolute()) continue;
      f.set(cfg, (fs::path(base) / v).lexically_normal().string());
    }
  }
}

std::string config_digest(const RunConfig& cfg) {
  const std::string text = config_to_text(cfg);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(text.data(), text.size())));
  return buf;
}

}  // namespace semgen
