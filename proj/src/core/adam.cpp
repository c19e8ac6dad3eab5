#include "core/adam.hpp"

#include <cmath>

#include "core/error.hpp"

namespace semgen::ad {

void adam_step(std::span<Tensor* const> params, AdamState& state) {
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i]->size(), 0.0);
      state.v[i].assign(params[i]->size(), 0.0);
    }
  }
  if (state.m.size() != params.size())
    throw ShapeError("adam_step: optimizer state tracks " + std::to_string(state.m.size()) +
                     " tensors, got " + std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i)
    if (state.m[i].size() != params[i]->size())
      throw ShapeError("adam_step: moment shape mismatch for tensor " + std::to_string(i) + " " +
                       shape_str(params[i]->shape()));

  const AdamOptions& o = state.options;
  state.step += 1;
  const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    if (!p.requires_grad()) continue;
    auto g = p.grad();
    auto theta = p.data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < theta.size(); ++j) {
      m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * g[j];
      v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * g[j] * g[j];
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      theta[j] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
    }
  }
}

double clip_grad_norm(std::span<Tensor* const> params, double max_norm) {
  double sq = 0.0;
  for (const Tensor* p : params)
    if (p->requires_grad())
      for (double g : p->grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double f = max_norm / norm;
    for (Tensor* p : params)
      if (p->requires_grad())
        for (double& g : p->grad()) g *= f;
  }
  return norm;
}

}  // namespace semgen::ad
