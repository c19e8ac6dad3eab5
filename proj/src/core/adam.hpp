#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "core/tensor.hpp"

namespace semgen::ad {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First/second moments per parameter, allocated lazily on the first step.
struct AdamState {
  AdamOptions options;
  std::int64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

// One bias-corrected Adam update over `params` using their grad() buffers.
// Parameters that do not require grad are skipped but keep their slot.
void adam_step(std::span<Tensor* const> params, AdamState& state);

// Rescales all gradients so their global L2 norm is at most `max_norm`.
// Returns the norm before clipping.
double clip_grad_norm(std::span<Tensor* const> params, double max_norm);

}  // namespace semgen::ad
