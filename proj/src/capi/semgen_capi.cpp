#include "semgen/semgen.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <memory>
#include <new>
#include <string>

#include "core/checkpoint.hpp"
#include "core/error.hpp"
#include "core/metrics.hpp"
#include "core/runs.hpp"
#include "json.hpp"

struct semgen_config {
  semgen::RunConfig cfg;
};

struct semgen_model {
  semgen::Checkpoint ckpt;
  semgen::RunConfig cfg;
  std::unique_ptr<semgen::Model> model;
  std::unique_ptr<semgen::ContextualProvider> provider;
};

namespace {

thread_local std::string g_last_error;

semgen_status to_status(semgen::ErrorCode c) {
  switch (c) {
    case semgen::ErrorCode::kInvalidArgument: return SEMGEN_ERR_INVALID_ARGUMENT;
    case semgen::ErrorCode::kIo: return SEMGEN_ERR_IO;
    case semgen::ErrorCode::kFormat: return SEMGEN_ERR_FORMAT;
    case semgen::ErrorCode::kShape: return SEMGEN_ERR_SHAPE;
    case semgen::ErrorCode::kNumeric: return SEMGEN_ERR_NUMERIC;
    case semgen::ErrorCode::kMismatch: return SEMGEN_ERR_MISMATCH;
    case semgen::ErrorCode::kInternal: return SEMGEN_ERR_INTERNAL;
  }
  return SEMGEN_ERR_INTERNAL;
}

// Runs `f`, translating exceptions into status codes.
template <class F>
semgen_status guard(F&& f) {
  try {
    f();
    g_last_error.clear();
    return SEMGEN_OK;
  } catch (const semgen::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return SEMGEN_ERR_IO;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return SEMGEN_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SEMGEN_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown exception";
    return SEMGEN_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) throw semgen::InvalidArgument(std::string(what) + " must not be NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

void emit(char** out, const std::string& s) {
  if (out) *out = dup_string(s);
}

semgen::runs::Invocation invocation(const semgen_config* cfg, const char* out_dir,
                                    const char* command_line) {
  require(cfg, "config");
  require(out_dir, "out_dir");
  semgen::runs::Invocation inv;
  inv.config = cfg->cfg;
  inv.out_dir = out_dir;
  inv.command_line = command_line ? command_line : "";
  return inv;
}

}  // namespace

extern "C" {

const char* semgen_version(void) { return "1.0.0"; }

const char* semgen_last_error(void) { return g_last_error.c_str(); }

const char* semgen_status_name(semgen_status status) {
  switch (status) {
    case SEMGEN_OK: return "ok";
    case SEMGEN_ERR_INVALID_ARGUMENT: return "invalid argument";
    case SEMGEN_ERR_IO: return "i/o error";
    case SEMGEN_ERR_FORMAT: return "format error";
    case SEMGEN_ERR_SHAPE: return "shape error";
    case SEMGEN_ERR_NUMERIC: return "numeric error";
    case SEMGEN_ERR_MISMATCH: return "mismatch";
    case SEMGEN_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void semgen_string_free(char* s) { std::free(s); }

semgen_status semgen_config_new(semgen_config** out) {
  return guard([&] {
    require(out, "out");
    *out = new semgen_config{};
  });
}

semgen_status semgen_config_load(const char* path, semgen_config** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    auto c = std::make_unique<semgen_config>();
    c->cfg = semgen::load_config(path);
    semgen::resolve_paths(c->cfg, std::filesystem::path(path).parent_path().string());
    *out = c.release();
  });
}

void semgen_config_free(semgen_config* cfg) { delete cfg; }

semgen_status semgen_config_set(semgen_config* cfg, const char* key, const char* value) {
  return guard([&] {
    require(cfg, "config");
    require(key, "key");
    require(value, "value");
    semgen::set_config_value(cfg->cfg, key, value);
  });
}

semgen_status semgen_config_override(semgen_config* cfg, const char* key_value) {
  return guard([&] {
    require(cfg, "config");
    require(key_value, "override");
    semgen::apply_override(cfg->cfg, key_value);
  });
}

semgen_status semgen_config_set_data_dir(semgen_config* cfg, const char* dir) {
  return guard([&] {
    require(cfg, "config");
    require(dir, "dir");
    semgen::runs::apply_data_dir(cfg->cfg, dir);
  });
}

semgen_status semgen_config_to_text(const semgen_config* cfg, char** out) {
  return guard([&] {
    require(cfg, "config");
    require(out, "out");
    *out = dup_string(semgen::config_to_text(cfg->cfg));
  });
}

semgen_status semgen_config_digest(const semgen_config* cfg, char** out) {
  return guard([&] {
    require(cfg, "config");
    require(out, "out");
    *out = dup_string(semgen::config_digest(cfg->cfg));
  });
}

semgen_status semgen_run(const semgen_config* cfg, const char* command, const char* out_dir,
                         const char* command_line, char** summary) {
  return guard([&] {
    require(command, "command");
    const auto inv = invocation(cfg, out_dir, command_line);
    const std::string c = command;
    std::string s;
    if (c == "data validate") s = semgen::runs::data_validate(inv);
    else if (c == "data split") s = semgen::runs::data_split(inv);
    else if (c == "data stats") s = semgen::runs::data_stats(inv);
    else if (c == "data vocab") s = semgen::runs::data_vocab(inv);
    else if (c == "pretrain") s = semgen::runs::pretrain(inv);
    else if (c == "train") s = semgen::runs::train(inv);
    else if (c == "ablate") s = semgen::runs::ablate(inv);
    else throw semgen::InvalidArgument("unknown command '" + c + "'");
    emit(summary, s);
  });
}

semgen_status semgen_eval(const semgen_config* cfg, const char* checkpoint, const char* out_dir,
                          const char* command_line, char** summary) {
  return guard([&] {
    require(checkpoint, "checkpoint");
    emit(summary, semgen::runs::eval(invocation(cfg, out_dir, command_line), checkpoint));
  });
}

semgen_status semgen_model_load(const char* checkpoint, semgen_model** out) {
  return guard([&] {
    require(checkpoint, "checkpoint");
    require(out, "out");
    auto m = std::make_unique<semgen_model>();
    m->ckpt = semgen::load_checkpoint(checkpoint);
    m->cfg = m->ckpt.config();
    m->model = semgen::restore_model(m->ckpt);
    m->provider = semgen::runs::make_contextual_provider(m->cfg);
    *out = m.release();
  });
}

void semgen_model_free(semgen_model* model) { delete model; }

semgen_status semgen_model_parameter_count(const semgen_model* model, size_t* out) {
  return guard([&] {
    require(model, "model");
    require(out, "out");
    *out = model->model->params().parameter_count();
  });
}

semgen_status semgen_model_vocab_fingerprint(const semgen_model* model, char** out) {
  return guard([&] {
    require(model, "model");
    require(out, "out");
    *out = dup_string(model->ckpt.vocab.fingerprint());
  });
}

semgen_status semgen_model_generate(const semgen_model* model, const char* word, const char* context,
                                    double tau, uint64_t seed, size_t max_length, char** json_out) {
  return guard([&] {
    require(model, "model");
    require(word, "word");
    require(context, "context");
    require(json_out, "json_out");
    const auto& vocab = model->ckpt.vocab;
    const semgen::data::Tokens ctx = semgen::data::tokenize(context);
    const auto ex = semgen::runs::encode_query(word, ctx, vocab, model->cfg.model, model->provider.get());
    const auto g = model->model->generate(ex, tau, seed, max_length);
    nlohmann::ordered_json j{{"word", ex.word},
                             {"context", semgen::data::join(ctx)},
                             {"definition", semgen::data::join(vocab.decode(g.definition))}};
    if (semgen::is_multi_task(model->cfg.model.kind))
      j["usage"] = semgen::data::join(vocab.decode(g.usage));
    j["unknown_word"] = g.unknown_word;
    j["target_found"] = semgen::data::find_target(ctx, ex.word).has_value();
    *json_out = dup_string(j.dump());
  });
}

semgen_status semgen_sentence_bleu(const char* candidate, const char* reference, double* out) {
  return guard([&] {
    require(candidate, "candidate");
    require(reference, "reference");
    require(out, "out");
    *out = semgen::metrics::sentence_bleu(semgen::data::tokenize(candidate),
                                          semgen::data::tokenize(reference));
  });
}

semgen_status semgen_rouge_l(const char* candidate, const char* reference, double* out) {
  return guard([&] {
    require(candidate, "candidate");
    require(reference, "reference");
    require(out, "out");
    *out = semgen::metrics::rouge_l(semgen::data::tokenize(candidate), semgen::data::tokenize(reference));
  });
}

}  // extern "C"
