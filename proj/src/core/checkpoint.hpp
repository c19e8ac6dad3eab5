#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "core/config.hpp"
#include "core/data.hpp"
#include "core/model.hpp"
#include "core/tensor.hpp"

namespace semgen {

// Everything needed to rebuild a model bit-exactly: the resolved config
// text, the vocabulary, free-form provenance and the named parameters.
struct Checkpoint {
  std::string config_text;
  data::Vocabulary vocab;
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<std::pair<std::string, ad::Tensor>> tensors;

  const ad::Tensor* find(const std::string& name) const;
  std::optional<std::string> meta(const std::string& key) const;
  RunConfig config() const;
};

Checkpoint snapshot(const Model& model, const RunConfig& cfg, const data::Vocabulary& vocab,
                    std::vector<std::pair<std::string, std::string>> metadata = {});

// Little-endian binary with a trailing FNV-1a checksum; doubles are stored
// as their bit patterns.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Copies every model parameter from `ckpt`. Missing names are FormatError,
// shape differences ShapeError.
void load_parameters(Model& model, const Checkpoint& ckpt);
std::unique_ptr<Model> restore_model(const Checkpoint& ckpt);

// Copies the pretrained definition decoder (gate, GRU stack, output layer)
// and the special-token rows. Returns the number of tensors copied.
std::size_t warm_start(Model& model, const Checkpoint& pretrained);
bool is_warm_start_parameter(const std::string& name);

}  // namespace semgen
