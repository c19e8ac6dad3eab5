#include "core/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace semgen::ad {

namespace {
double evaluate(const GraphBuilder& f) {
  Tape tape(false);
  Var loss = f(tape);
  const double v = tape.item(loss);
  if (!std::isfinite(v)) throw NumericError("grad_check: non-finite loss");
  return v;
}

std::vector<std::vector<double>> analytic_gradient(const GraphBuilder& f,
                                                   std::span<Tensor* const> point) {
  for (Tensor* t : point) t->zero_grad();
  Tape tape;
  Var loss = f(tape);
  tape.backward(loss);
  std::vector<std::vector<double>> out(point.size());
  for (std::size_t i = 0; i < point.size(); ++i) {
    auto g = point[i]->grad();
    out[i].assign(g.begin(), g.end());
  }
  return out;
}

}  // namespace

GradCheckResult grad_check(const GraphBuilder& f, std::span<Tensor* const> point,
                           const GradCheckOptions& options) {
  if (!(options.h > 0.0) || !std::isfinite(options.h))
    throw InvalidArgument("grad_check: step h must be positive and finite");

  std::vector<bool> restore(point.size());
  for (std::size_t i = 0; i < point.size(); ++i) {
    restore[i] = point[i]->requires_grad();
    point[i]->set_requires_grad(true);
  }
  const auto analytic = analytic_gradient(f, point);

  Rng rng(options.seed);
  GradCheckResult result;
  for (std::size_t i = 0; i < point.size(); ++i) {
    Tensor& t = *point[i];
    std::vector<std::size_t> coords(t.size());
    std::iota(coords.begin(), coords.end(), 0);
    if (options.max_coords_per_tensor && coords.size() > options.max_coords_per_tensor) {
      rng.shuffle(coords);
      coords.resize(options.max_coords_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t c : coords) {
      const double x0 = t[c];
      t[c] = x0 + options.h;
      const double fp = evaluate(f);
      t[c] = x0 - options.h;
      const double fm = evaluate(f);
      t[c] = x0;
      const double numeric = (fp - fm) / (2.0 * options.h);
      const double a = analytic[i][c];
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      result.max_error = std::max(result.max_error, err);
      ++result.coords_checked;
    }
  }

  for (std::size_t i = 0; i < point.size(); ++i) point[i]->set_requires_grad(restore[i]);
  return result;
}

GradCheckResult directional_check(const GraphBuilder& f, std::span<Tensor* const> point,
                                  std::size_t directions, const GradCheckOptions& options) {
  if (!(options.h > 0.0) || !std::isfinite(options.h))
    throw InvalidArgument("grad_check: step h must be positive and finite");
  std::vector<bool> restore(point.size());
  for (std::size_t i = 0; i < point.size(); ++i) {
    restore[i] = point[i]->requires_grad();
    point[i]->set_requires_grad(true);
  }
  const auto analytic = analytic_gradient(f, point);

  Rng rng(options.seed);
  GradCheckResult result;
  std::vector<std::vector<double>> v(point.size());
  for (std::size_t d = 0; d < directions; ++d) {
    double norm2 = 0.0;
    for (std::size_t i = 0; i < point.size(); ++i) {
      v[i].resize(point[i]->size());
      for (auto& x : v[i]) {
        x = rng.uniform(-1.0, 1.0);
        norm2 += x * x;
      }
    }
    const double inv = 1.0 / std::sqrt(norm2);
    double expected = 0.0;
    for (std::size_t i = 0; i < point.size(); ++i)
      for (std::size_t c = 0; c < v[i].size(); ++c) {
        v[i][c] *= inv;
        expected += analytic[i][c] * v[i][c];
      }
    auto shift = [&](double s) {
      for (std::size_t i = 0; i < point.size(); ++i)
        for (std::size_t c = 0; c < v[i].size(); ++c) (*point[i])[c] += s * v[i][c];
    };
    const std::vector<std::vector<double>> saved = [&] {
      std::vector<std::vector<double>> out;
      for (Tensor* t : point) out.push_back(t->storage());
      return out;
    }();
    shift(options.h);
    const double fp = evaluate(f);
    for (std::size_t i = 0; i < point.size(); ++i) point[i]->storage() = saved[i];
    shift(-options.h);
    const double fm = evaluate(f);
    for (std::size_t i = 0; i < point.size(); ++i) point[i]->storage() = saved[i];
    const double numeric = (fp - fm) / (2.0 * options.h);
    result.max_error =
        std::max(result.max_error, std::abs(expected - numeric) / std::max(1.0, std::abs(expected)));
    ++result.coords_checked;
  }

  for (std::size_t i = 0; i < point.size(); ++i) point[i]->set_requires_grad(restore[i]);
  return result;
}

double grad_check(const GraphBuilder& f, std::span<Tensor* const> point, double h) {
  GradCheckOptions o;
  o.h = h;
  return grad_check(f, point, o).max_error;
}

}  // namespace semgen::ad
