#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>

#include "core/tape.hpp"

namespace semgen::ad {

using GraphBuilder = std::function<Var(Tape&)>;

struct GradCheckOptions {
  double h = 1e-5;
  // Coordinates checked per tensor; 0 checks every coordinate. Larger
  // tensors get a seeded random subset of this size.
  std::size_t max_coords_per_tensor = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_error = 0.0;
  std::size_t coords_checked = 0;
};

// Compares reverse-mode gradients of the scalar built by `f` against central
// differences in every tensor of `point`. The error per coordinate is
// |analytic - numeric| / max(1, |analytic|). `f` must read the tensors in
// `point` through Tape::leaf and be deterministic.
GradCheckResult grad_check(const GraphBuilder& f, std::span<Tensor* const> point,
                           const GradCheckOptions& options = {});

double grad_check(const GraphBuilder& f, std::span<Tensor* const> point, double h);

// Compares the analytic directional derivative along `directions` random
// unit vectors (spanning every tensor of `point` at once) with central
// differences. `coords_checked` counts directions.
GradCheckResult directional_check(const GraphBuilder& f, std::span<Tensor* const> point,
                                  std::size_t directions, const GradCheckOptions& options = {});

}  // namespace semgen::ad
