/* C interface to the semgen library. Every function returns a status code;
 * on failure semgen_last_error() describes the cause for the calling thread.
 * Strings returned through `char**` are owned by the caller and released
 * with semgen_string_free(). */
#ifndef SEMGEN_SEMGEN_H
#define SEMGEN_SEMGEN_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SEMGEN_API __declspec(dllexport)
#else
#define SEMGEN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum semgen_status {
  SEMGEN_OK = 0,
  SEMGEN_ERR_INVALID_ARGUMENT = 1,
  SEMGEN_ERR_IO = 2,
  SEMGEN_ERR_FORMAT = 3,
  SEMGEN_ERR_SHAPE = 4,
  SEMGEN_ERR_NUMERIC = 5,
  SEMGEN_ERR_MISMATCH = 6,
  SEMGEN_ERR_INTERNAL = 7
} semgen_status;

typedef struct semgen_config semgen_config;
typedef struct semgen_model semgen_model;

SEMGEN_API const char* semgen_version(void);
/* Message of the last failed call on this thread; "" if none. */
SEMGEN_API const char* semgen_last_error(void);
SEMGEN_API const char* semgen_status_name(semgen_status status);
SEMGEN_API void semgen_string_free(char* s);

/* ---- configuration ---------------------------------------------------- */

SEMGEN_API semgen_status semgen_config_new(semgen_config** out);
/* Relative data paths are resolved against the file's directory. */
SEMGEN_API semgen_status semgen_config_load(const char* path, semgen_config** out);
SEMGEN_API void semgen_config_free(semgen_config* cfg);
SEMGEN_API semgen_status semgen_config_set(semgen_config* cfg, const char* key, const char* value);
/* "key=value". */
SEMGEN_API semgen_status semgen_config_override(semgen_config* cfg, const char* key_value);
/* Fills corpus paths that are still empty from a data directory. */
SEMGEN_API semgen_status semgen_config_set_data_dir(semgen_config* cfg, const char* dir);
SEMGEN_API semgen_status semgen_config_to_text(const semgen_config* cfg, char** out);
SEMGEN_API semgen_status semgen_config_digest(const semgen_config* cfg, char** out);

/* ---- commands --------------------------------------------------------- */

/* `command` is one of "data validate", "data split", "data stats",
 * "data vocab", "pretrain", "train", "ablate". Artifacts go to `out_dir`;
 * `command_line` is recorded in them. `summary` may be NULL. */
SEMGEN_API semgen_status semgen_run(const semgen_config* cfg, const char* command, const char* out_dir,
                                    const char* command_line, char** summary);
SEMGEN_API semgen_status semgen_eval(const semgen_config* cfg, const char* checkpoint,
                                     const char* out_dir, const char* command_line, char** summary);

/* ---- models ----------------------------------------------------------- */

SEMGEN_API semgen_status semgen_model_load(const char* checkpoint, semgen_model** out);
SEMGEN_API void semgen_model_free(semgen_model* model);
SEMGEN_API semgen_status semgen_model_parameter_count(const semgen_model* model, size_t* out);
SEMGEN_API semgen_status semgen_model_vocab_fingerprint(const semgen_model* model, char** out);
/* One JSON object with the definition (and usage for multi-task kinds). */
SEMGEN_API semgen_status semgen_model_generate(const semgen_model* model, const char* word,
                                               const char* context, double tau, uint64_t seed,
                                               size_t max_length, char** json_out);

/* ---- metrics ---------------------------------------------------------- */

/* Whitespace-tokenized, lowercased inputs. */
SEMGEN_API semgen_status semgen_sentence_bleu(const char* candidate, const char* reference, double* out);
SEMGEN_API semgen_status semgen_rouge_l(const char* candidate, const char* reference, double* out);

#ifdef __cplusplus
}
#endif

#endif /* SEMGEN_SEMGEN_H */
