#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "semgen/semgen.h"

namespace fs = std::filesystem;

namespace {

const std::string kSource = SEMGEN_SOURCE_DIR;

std::string take(char* s) {
  std::string out = s ? s : "";
  semgen_string_free(s);
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("semgen_capi_" + name);
  fs::remove_all(p);
  return p;
}

// Mini-corpus config shrunk so a few epochs run in well under a second.
semgen_config* tiny_config(int epochs) {
  semgen_config* cfg = nullptr;
  REQUIRE(semgen_config_load((kSource + "/configs/mini.conf").c_str(), &cfg) == SEMGEN_OK);
  for (const char* kv : {"word_dim=8", "encoder_hidden=4", "state_dim=8", "attention_dim=8",
                         "contextual_dim=8", "char_filters=2,2,2,2,2"})
    REQUIRE(semgen_config_override(cfg, kv) == SEMGEN_OK);
  REQUIRE(semgen_config_set(cfg, "max_epochs", std::to_string(epochs).c_str()) == SEMGEN_OK);
  return cfg;
}

}  // namespace

TEST_CASE("errors are reported through status codes") {
  semgen_config* cfg = nullptr;
  CHECK(semgen_config_new(nullptr) == SEMGEN_ERR_INVALID_ARGUMENT);
  CHECK(std::string(semgen_last_error()).find("NULL") != std::string::npos);
  REQUIRE(semgen_config_new(&cfg) == SEMGEN_OK);
  CHECK(std::string(semgen_last_error()).empty());
  CHECK(semgen_config_set(cfg, "no_such_key", "1") == SEMGEN_ERR_INVALID_ARGUMENT);
  CHECK(std::string(semgen_last_error()).find("no_such_key") != std::string::npos);
  CHECK(semgen_config_load("/nonexistent.conf", &cfg) == SEMGEN_ERR_IO);
  CHECK(semgen_run(cfg, "dance", "/tmp", "", nullptr) == SEMGEN_ERR_INVALID_ARGUMENT);
  semgen_model* model = nullptr;
  CHECK(semgen_model_load("/nonexistent.ckpt", &model) == SEMGEN_ERR_IO);
  CHECK(model == nullptr);
  CHECK(std::string(semgen_status_name(SEMGEN_ERR_MISMATCH)) == "mismatch");
  semgen_config_free(cfg);
  semgen_config_free(nullptr);
  semgen_model_free(nullptr);
}

TEST_CASE("config text and digest") {
  semgen_config* cfg = nullptr;
  REQUIRE(semgen_config_new(&cfg) == SEMGEN_OK);
  REQUIRE(semgen_config_override(cfg, "kind=parallel") == SEMGEN_OK);
  char* text = nullptr;
  REQUIRE(semgen_config_to_text(cfg, &text) == SEMGEN_OK);
  CHECK(take(text).find("kind = parallel\n") != std::string::npos);
  char* d1 = nullptr;
  char* d2 = nullptr;
  REQUIRE(semgen_config_digest(cfg, &d1) == SEMGEN_OK);
  REQUIRE(semgen_config_set(cfg, "seed", "9") == SEMGEN_OK);
  REQUIRE(semgen_config_digest(cfg, &d2) == SEMGEN_OK);
  CHECK(take(d1) != take(d2));
  semgen_config_free(cfg);
}

TEST_CASE("metric entry points") {
  double v = 0;
  REQUIRE(semgen_sentence_bleu("The cat sat", "the cat sat down", &v) == SEMGEN_OK);
  CHECK(v == doctest::Approx(0.716531).epsilon(1e-5));
  REQUIRE(semgen_rouge_l("the cat sat", "the cat sat down", &v) == SEMGEN_OK);
  CHECK(v == doctest::Approx(6.0 / 7.0));
  CHECK(semgen_rouge_l("a", "", &v) == SEMGEN_ERR_INVALID_ARGUMENT);
}

TEST_CASE("data commands write artifacts with provenance") {
  semgen_config* cfg = tiny_config(1);
  const fs::path dir = fresh_dir("data");
  char* summary = nullptr;
  REQUIRE(semgen_run(cfg, "data stats", dir.c_str(), "semgen data stats", &summary) == SEMGEN_OK);
  CHECK(take(summary).find("train") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "INCOMPLETE"));
  CHECK(slurp(dir / "config.txt").find("# command: semgen data stats") != std::string::npos);
  CHECK(slurp(dir / "stats.txt").find("# config_digest: ") != std::string::npos);

  REQUIRE(semgen_run(cfg, "data split", dir.c_str(), "split", nullptr) == SEMGEN_OK);
  CHECK(fs::exists(dir / "manifest.tsv"));
  REQUIRE(semgen_run(cfg, "data validate", dir.c_str(), "validate", nullptr) == SEMGEN_OK);
  CHECK(fs::exists(dir / "validation.jsonl"));
  REQUIRE(semgen_run(cfg, "data vocab", dir.c_str(), "vocab", nullptr) == SEMGEN_OK);
  CHECK(fs::exists(dir / "vocab.tsv"));
  semgen_config_free(cfg);
  fs::remove_all(dir);
}

TEST_CASE("failed commands leave a flagged directory") {
  semgen_config* cfg = tiny_config(1);
  REQUIRE(semgen_config_set(cfg, "train", "/nonexistent/train.jsonl") == SEMGEN_OK);
  const fs::path dir = fresh_dir("failed");
  CHECK(semgen_run(cfg, "train", dir.c_str(), "semgen train", nullptr) == SEMGEN_ERR_IO);
  REQUIRE(fs::exists(dir / "INCOMPLETE"));
  CHECK(slurp(dir / "INCOMPLETE").find("error: ") != std::string::npos);
  semgen_config_free(cfg);
  fs::remove_all(dir);
}

TEST_CASE("train, evaluate and generate through the C interface") {
  semgen_config* cfg = tiny_config(2);
  REQUIRE(semgen_config_override(cfg, "kind=parallel") == SEMGEN_OK);
  const fs::path a = fresh_dir("run_a"), b = fresh_dir("run_b");
  for (const fs::path& dir : {a, b}) {
    REQUIRE(semgen_run(cfg, "train", dir.c_str(), "semgen train --out-dir <out-dir>", nullptr) == SEMGEN_OK);
    const std::string ckpt = (dir / "best.ckpt").string();
    REQUIRE(semgen_eval(cfg, ckpt.c_str(), dir.c_str(), "semgen eval --out-dir <out-dir>", nullptr) ==
            SEMGEN_OK);
  }
  for (const char* f : {"train_log.jsonl", "report.jsonl", "report.txt", "config.txt", "vocab.tsv"})
    CHECK_MESSAGE(slurp(a / f) == slurp(b / f), f);
  CHECK(slurp(a / "report.txt").find("Unseen") != std::string::npos);

  semgen_model* model = nullptr;
  REQUIRE(semgen_model_load((a / "best.ckpt").c_str(), &model) == SEMGEN_OK);
  std::size_t params = 0;
  REQUIRE(semgen_model_parameter_count(model, &params) == SEMGEN_OK);
  CHECK(params > 0);
  char* out = nullptr;
  REQUIRE(semgen_model_generate(model, "check", "she asked the waiter for the check", 0.05, 3, 10,
                                &out) == SEMGEN_OK);
  const auto j = nlohmann::json::parse(take(out));
  CHECK(j["word"] == "check");
  CHECK(j["target_found"] == true);
  CHECK(j["unknown_word"] == false);
  CHECK(j.contains("usage"));
  REQUIRE(semgen_model_generate(model, "zyzzyva", "a zyzzyva crawled by", 0.05, 3, 10, &out) == SEMGEN_OK);
  CHECK(nlohmann::json::parse(take(out))["unknown_word"] == true);
  CHECK(semgen_model_generate(model, "check", "", 0.05, 3, 10, &out) == SEMGEN_ERR_INVALID_ARGUMENT);
  CHECK(semgen_model_generate(model, "check", "the check", 0.0, 3, 10, &out) == SEMGEN_ERR_INVALID_ARGUMENT);
  semgen_model_free(model);

  // A checkpoint built over a different vocabulary is refused.
  REQUIRE(semgen_config_set(cfg, "train", (kSource + "/data/mini/test.jsonl").c_str()) == SEMGEN_OK);
  const fs::path c = fresh_dir("mismatch");
  CHECK(semgen_eval(cfg, (a / "best.ckpt").c_str(), c.c_str(), "eval", nullptr) == SEMGEN_ERR_MISMATCH);
  semgen_config_free(cfg);
  for (const fs::path& d : {a, b, c}) fs::remove_all(d);
}
