// Command-line front end. Talks to the library only through the C API.
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "semgen/semgen.h"

namespace {

constexpr int kExitUser = 1;
constexpr int kExitInternal = 2;

int exit_code(semgen_status s) {
  switch (s) {
    case SEMGEN_OK: return 0;
    case SEMGEN_ERR_NUMERIC:
    case SEMGEN_ERR_INTERNAL: return kExitInternal;
    default: return kExitUser;
  }
}

// Prints the one-line cause and returns the process exit code.
int fail(semgen_status s) {
  std::fprintf(stderr, "semgen: %s: %s\n", semgen_status_name(s), semgen_last_error());
  return exit_code(s);
}

struct ConfigHandle {
  semgen_config* p = nullptr;
  ~ConfigHandle() { semgen_config_free(p); }
};

struct ModelHandle {
  semgen_model* p = nullptr;
  ~ModelHandle() { semgen_model_free(p); }
};

void print_and_free(char* s, std::FILE* to = stdout) {
  if (!s) return;
  std::fputs(s, to);
  semgen_string_free(s);
}

std::string masked_command_line(int argc, char** argv, const std::string& out_dir) {
  std::string line;
  for (int i = 0; i < argc; ++i) {
    std::string arg = argv[i];
    if (i == 0) arg = "semgen";
    if (!out_dir.empty())
      for (std::size_t pos = arg.find(out_dir); pos != std::string::npos; pos = arg.find(out_dir, pos + 9))
        arg.replace(pos, out_dir.size(), "<out-dir>");
    if (i) line += ' ';
    line += arg;
  }
  return line;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Definition and usage generation for dictionary words"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(semgen_version()));

  std::string config_path, out_dir, checkpoint, word;
  std::vector<std::string> overrides, contexts;
  std::uint64_t seed = 0;
  double tau = 0.05;
  std::size_t max_length = 40;

  auto common = [&](CLI::App* sub, bool needs_out) {
    sub->add_option("--config", config_path, "Run configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Overrides the configured seed");
    auto* o = sub->add_option("--out-dir", out_dir, "Directory for artifacts");
    if (needs_out) o->required();
    sub->add_option("--override", overrides, "key=value, repeatable")->take_all();
  };

  auto* data = app.add_subcommand("data", "Corpus preparation");
  data->require_subcommand(1);
  std::vector<std::pair<CLI::App*, std::string>> runs;
  const std::pair<const char*, const char*> data_cmds[] = {
      {"validate", "Check a corpus file and report problems"},
      {"split", "Split the corpus into train/valid/test by sense"},
      {"stats", "Count words, entries and average lengths per split"},
      {"vocab", "Write the model and content vocabularies"}};
  for (const auto& [name, help] : data_cmds) {
    auto* sub = data->add_subcommand(name, help);
    common(sub, true);
    runs.emplace_back(sub, std::string("data ") + name);
  }
  const std::pair<const char*, const char*> model_cmds[] = {
      {"pretrain", "Pre-train the definition decoder as a language model"},
      {"train", "Train a model and keep the best validation checkpoint"},
      {"ablate", "Train and score every switch setting of the ablation grid"}};
  for (const auto& [name, help] : model_cmds) {
    auto* sub = app.add_subcommand(name, help);
    common(sub, true);
    runs.emplace_back(sub, name);
  }
  auto* eval = app.add_subcommand("eval", "Score a checkpoint on the test split");
  common(eval, true);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint to evaluate")->required();

  auto* gen = app.add_subcommand("generate", "Generate definitions for a word in context");
  gen->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  gen->add_option("--word", word)->required();
  gen->add_option("--context", contexts, "Context sentence, repeatable")->required()->take_all();
  gen->add_option("--tau", tau, "Sampling temperature")->check(CLI::PositiveNumber);
  gen->add_option("--seed", seed);
  gen->add_option("--max-length", max_length)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUser;
  }

  if (gen->parsed()) {
    ModelHandle model;
    if (auto s = semgen_model_load(checkpoint.c_str(), &model.p); s != SEMGEN_OK) return fail(s);
    const std::uint64_t use_seed = gen->count("--seed") ? seed : 1;
    for (const auto& ctx : contexts) {
      char* out = nullptr;
      auto s = semgen_model_generate(model.p, word.c_str(), ctx.c_str(), tau, use_seed, max_length, &out);
      if (s != SEMGEN_OK) return fail(s);
      print_and_free(out);
      std::fputc('\n', stdout);
    }
    return 0;
  }

  ConfigHandle cfg;
  if (auto s = semgen_config_load(config_path.c_str(), &cfg.p); s != SEMGEN_OK) return fail(s);
  if (const char* dir = std::getenv("SEMGEN_DATA_DIR"); dir && *dir)
    if (auto s = semgen_config_set_data_dir(cfg.p, dir); s != SEMGEN_OK) return fail(s);
  for (const auto& kv : overrides)
    if (auto s = semgen_config_override(cfg.p, kv.c_str()); s != SEMGEN_OK) return fail(s);
  if (!app.get_subcommands().empty()) {
    const CLI::App* leaf = app.get_subcommands().front();
    if (!leaf->get_subcommands().empty()) leaf = leaf->get_subcommands().front();
    if (leaf->count("--seed"))
      if (auto s = semgen_config_set(cfg.p, "seed", std::to_string(seed).c_str()); s != SEMGEN_OK)
        return fail(s);
  }

  const std::string cmdline = masked_command_line(argc, argv, out_dir);
  char* summary = nullptr;
  semgen_status s;
  if (eval->parsed()) {
    s = semgen_eval(cfg.p, checkpoint.c_str(), out_dir.c_str(), cmdline.c_str(), &summary);
  } else {
    std::string command;
    for (const auto& [sub, name] : runs)
      if (sub->parsed()) command = name;
    s = semgen_run(cfg.p, command.c_str(), out_dir.c_str(), cmdline.c_str(), &summary);
  }
  if (s != SEMGEN_OK) return fail(s);
  print_and_free(summary);
  return 0;
}
