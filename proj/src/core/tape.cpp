#include "core/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "core/error.hpp"

namespace semgen::ad {

// ---------------------------------------------------------------------------
// Tape

const Tape::Node& Tape::node(Var v) const {
  if (v.tape_ != this || v.id_ >= nodes_.size())
    throw InvalidArgument("variable does not belong to this tape");
  return nodes_[v.id_];
}

Tape::Node& Tape::node(Var v) {
  return const_cast<Node&>(static_cast<const Tape&>(*this).node(v));
}

Var Tape::constant(Tensor value) {
  Node n;
  n.shape = value.shape();
  n.value = std::move(value.storage());
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::zeros(Shape shape) { return constant(Tensor(std::move(shape))); }

Var Tape::leaf(Tensor& param) {
  Node n;
  n.shape = param.shape();
  n.param = &param;
  n.requires_grad = record_ && param.requires_grad();
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

std::span<const double> Tape::value(Var v) const {
  const Node& n = node(v);
  if (n.param) return n.param->data();
  return n.value;
}

Tensor Tape::tensor(Var v) const {
  auto val = value(v);
  return Tensor(shape(v), std::vector<double>(val.begin(), val.end()));
}

double Tape::item(Var v) const {
  auto val = value(v);
  if (val.size() != 1)
    throw ShapeError("item() requires a single-element tensor, got " + shape_str(shape(v)));
  return val[0];
}

std::span<double> Tape::grad(Var v) {
  Node& n = node(v);
  if (n.param) return n.param->grad();
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

Var Tape::record(Shape shape, std::vector<double> value, std::initializer_list<Var> inputs,
                 BackwardFn fn, const char* op) {
  return record(std::move(shape), std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(fn), op);
}

Var Tape::record(Shape shape, std::vector<double> value, std::span<const Var> inputs,
                 BackwardFn fn, const char* op) {
  for (double x : value)
    if (!std::isfinite(x)) throw NumericError(std::string(op) + ": non-finite output");
  bool needs_grad = false;
  if (record_)
    for (const Var& in : inputs) needs_grad = needs_grad || node(in).requires_grad;
  Node n;
  n.shape = std::move(shape);
  n.value = std::move(value);
  n.requires_grad = needs_grad;
  if (needs_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

void Tape::backward(Var loss) {
  if (!record_) throw InvalidArgument("backward() on a tape that does not record");
  if (loss.tape_ != this) throw InvalidArgument("backward(): loss was not produced on this tape");
  const Node& ln = node(loss);
  if (ln.value.size() != 1 && !(ln.param && ln.param->size() == 1))
    throw ShapeError("backward(): loss must be scalar, got " + shape_str(ln.shape));
  if (backward_done_) throw InvalidArgument("backward() already ran on this tape");
  backward_done_ = true;
  if (!ln.requires_grad) return;
  grad(loss)[0] += 1.0;
  for (std::int64_t i = loss.id_; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
    n.backward(*this, Var(this, static_cast<std::uint32_t>(i)));
  }
  std::unordered_set<const Tensor*> checked;
  for (const Node& n : nodes_) {
    if (!n.param || !n.requires_grad || !checked.insert(n.param).second) continue;
    for (double g : n.param->grad())
      if (!std::isfinite(g)) throw NumericError("backward(): non-finite gradient");
  }
}

// ---------------------------------------------------------------------------
// Primitives

namespace {

Tape& tape_of(Var a) {
  if (!a.valid()) throw InvalidArgument("uninitialized variable");
  return *a.tape();
}

Tape& tape_of(Var a, Var b) {
  Tape& t = tape_of(a);
  if (b.tape() != &t) throw InvalidArgument("variables belong to different tapes");
  return t;
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " +
                   shape_str(b));
}

struct AxisGeometry {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisGeometry geometry(const Shape& s, std::size_t axis, const char* op) {
  if (axis >= s.size())
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for " +
                     shape_str(s));
  AxisGeometry g;
  for (std::size_t i = 0; i < axis; ++i) g.outer *= s[i];
  g.extent = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) g.inner *= s[i];
  return g;
}

void require_rank2(const char* op, const Shape& s) {
  if (s.size() != 2) throw ShapeError(std::string(op) + ": expected rank-2 tensor, got " + shape_str(s));
}

}  // namespace

Var matmul(Var a, Var b, bool transpose_b) {
  Tape& t = tape_of(a, b);
  const Shape& sa = t.shape(a);
  const Shape& sb = t.shape(b);
  if (sa.size() != 2 || sb.size() != 2) shape_error("matmul", sa, sb);
  const std::size_t m = sa[0], k = sa[1];
  const std::size_t n = transpose_b ? sb[0] : sb[1];
  if ((transpose_b ? sb[1] : sb[0]) != k) shape_error("matmul", sa, sb);

  auto A = t.value(a);
  auto B = t.value(b);
  std::vector<double> C(m * n, 0.0);
  if (!transpose_b) {
    for (std::size_t i = 0; i < m; ++i) {
      double* c = &C[i * n];
      for (std::size_t p = 0; p < k; ++p) {
        const double av = A[i * k + p];
        if (av == 0.0) continue;
        const double* brow = &B[p * n];
        for (std::size_t j = 0; j < n; ++j) c[j] += av * brow[j];
      }
    }
  } else {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p) s += A[i * k + p] * B[j * k + p];
        C[i * n + j] = s;
      }
  }
  return t.record({m, n}, std::move(C), {a, b},
                  [a, b, m, k, n, transpose_b](Tape& tp, Var self) {
                    auto G = tp.grad(self);
                    auto A = tp.value(a);
                    auto B = tp.value(b);
                    if (tp.requires_grad(a)) {
                      auto dA = tp.grad(a);
                      for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t p = 0; p < k; ++p) {
                          double s = 0.0;
                          if (!transpose_b)
                            for (std::size_t j = 0; j < n; ++j) s += G[i * n + j] * B[p * n + j];
                          else
                            for (std::size_t j = 0; j < n; ++j) s += G[i * n + j] * B[j * k + p];
                          dA[i * k + p] += s;
                        }
                    }
                    if (tp.requires_grad(b)) {
                      auto dB = tp.grad(b);
                      for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t p = 0; p < k; ++p) {
                          const double av = A[i * k + p];
                          if (av == 0.0) continue;
                          if (!transpose_b)
                            for (std::size_t j = 0; j < n; ++j) dB[p * n + j] += av * G[i * n + j];
                          else
                            for (std::size_t j = 0; j < n; ++j) dB[j * k + p] += av * G[i * n + j];
                        }
                    }
                  },
                  "matmul");
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  if (t.shape(a) != t.shape(b)) shape_error("add", t.shape(a), t.shape(b));
  auto A = t.value(a);
  auto B = t.value(b);
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] + B[i];
  return t.record(t.shape(a), std::move(out), {a, b},
                  [a, b](Tape& tp, Var self) {
                    auto G = tp.grad(self);
                    for (Var in : {a, b}) {
                      if (!tp.requires_grad(in)) continue;
                      auto d = tp.grad(in);
                      for (std::size_t i = 0; i < G.size(); ++i) d[i] += G[i];
                    }
                  },
                  "add");
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  if (t.shape(a) != t.shape(b)) shape_error("mul", t.shape(a), t.shape(b));
  auto A = t.value(a);
  auto B = t.value(b);
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] * B[i];
  return t.record(t.shape(a), std::move(out), {a, b},
                  [a, b](Tape& tp, Var self) {
                    auto G = tp.grad(self);
                    auto A = tp.value(a);
                    auto B = tp.value(b);
                    if (tp.requires_grad(a)) {
                      auto d = tp.grad(a);
                      for (std::size_t i = 0; i < G.size(); ++i) d[i] += G[i] * B[i];
                    }
                    if (tp.requires_grad(b)) {
                      auto d = tp.grad(b);
                      for (std::size_t i = 0; i < G.size(); ++i) d[i] += G[i] * A[i];
                    }
                  },
                  "mul");
}

Var concat(std::initializer_list<Var> parts, std::size_t axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw InvalidArgument("concat: no inputs");
  Tape& t = tape_of(parts[0]);
  Shape out_shape = t.shape(parts[0]);
  if (axis >= out_shape.size()) geometry(out_shape, axis, "concat");
  out_shape[axis] = 0;
  for (const Var& p : parts) {
    if (p.tape() != &t) throw InvalidArgument("concat: variables belong to different tapes");
    const Shape& s = t.shape(p);
    if (s.size() != out_shape.size()) shape_error("concat", t.shape(parts[0]), s);
    for (std::size_t i = 0; i < s.size(); ++i)
      if (i != axis && s[i] != out_shape[i]) shape_error("concat", t.shape(parts[0]), s);
    out_shape[axis] += s[axis];
  }
  const AxisGeometry g = geometry(out_shape, axis, "concat");
  std::vector<double> out(numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const Var& p : parts) {
    offsets.push_back(off);
    const std::size_t ext = t.shape(p)[axis];
    auto v = t.value(p);
    for (std::size_t o = 0; o < g.outer; ++o)
      std::copy_n(&v[o * ext * g.inner], ext * g.inner,
                  &out[(o * g.extent + off) * g.inner]);
    off += ext;
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return t.record(out_shape, std::move(out), parts,
                  [inputs, offsets, g, axis](Tape& tp, Var self) {
                    auto G = tp.grad(self);
                    for (std::size_t k = 0; k < inputs.size(); ++k) {
                      if (!tp.requires_grad(inputs[k])) continue;
                      const std::size_t ext = tp.shape(inputs[k])[axis];
                      auto d = tp.grad(inputs[k]);
                      for (std::size_t o = 0; o < g.outer; ++o) {
                        const double* src = &G[(o * g.extent + offsets[k]) * g.inner];
                        double* dst = &d[o * ext * g.inner];
                        for (std::size_t i = 0; i < ext * g.inner; ++i) dst[i] += src[i];
                      }
                    }
                  },
                  "concat");
}

Var sigmoid(Var a) {
  Tape& t = tape_of(a);
  auto A = t.value(a);
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = A[i];
    out[i] = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }
  return t.record(t.shape(a), std::move(out), {a},
                  [a](Tape& tp, Var self) {
                    auto G = tp.grad(self);
                    auto Y = tp.value(self);
                    auto d = tp.grad(a);
                    for (std::size_t i = 0; i < G.size(); ++i) d[i] += G[i] * Y[i] * (1.0 - Y[i]);
                  },
                  "sigmoid");
}

Var tanh(Var a) {
  Tape& t = tape_of(a);
  auto A = t.value(a);
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(A[i]);
  return t.record(t.shape(a), std::move(out), {a},
                  [a](Tape& tp, Var self) {
                    auto G = tp.grad(self);
                    auto Y = tp.value(self);
                    auto d = tp.grad(a);
                    for (std::size_t i = 0; i < G.size(); ++i) d[i] += G[i] * (1.0 - Y[i] * Y[i]);
                  },
                  "tanh");
}

Var softmax(Var a, std::size_t axis) {
  Tape& t = tape_of(a);
  const AxisGeometry g = geometry(t.shape(a), axis, "softmax");
  auto A = t.value(a);
  std::vector<double> out(A.size());
  for (std::size_t o = 0; o < g.outer; ++o)
    for (std::size_t in = 0; in < g.inner; ++in) {
      const std::size_t base = o * g.extent * g.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t e = 0; e < g.extent; ++e) mx = std::max(mx, A[base + e * g.inner]);
      double z = 0.0;
      for (std::size_t e = 0; e < g.extent; ++e) {
        const double v = std::exp(A[base + e * g.inner] - mx);
        out[base + e * g.inner] = v;
        z += v;
      }
      for (std::size_t e = 0; e < g.extent; ++e) out[base + e * g.inner] /= z;
    }
  return t.record(t.shape(a), std::move(out), {a},
                  [a, g](Tape& tp, Var self) {
                    auto G = tp.grad(self);
                    auto Y = tp.value(self);
                    auto d = tp.grad(a);
                    for (std::size_t o = 0; o < g.outer; ++o)
                      for (std::size_t in = 0; in < g.inner; ++in) {
                        const std::size_t base = o * g.extent * g.inner + in;
                        double dot = 0.0;
                        for (std::size_t e = 0; e < g.extent; ++e)
                          dot += G[base + e * g.inner] * Y[base + e * g.inner];
                        for (std::size_t e = 0; e < g.extent; ++e) {
                          const std::size_t i = base + e * g.inner;
                          d[i] += Y[i] * (G[i] - dot);
                        }
                      }
                  },
                  "softmax");
}

Var max_over_axis(Var a, std::size_t axis) {
  Tape& t = tape_of(a);
  const AxisGeometry g = geometry(t.shape(a), axis, "max_over_axis");
  Shape out_shape = t.shape(a);
  out_shape[axis] = 1;
  auto A = t.value(a);
  std::vector<double> out(g.outer * g.inner);
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t o = 0; o < g.outer; ++o)
    for (std::size_t in = 0; in < g.inner; ++in) {
      const std::size_t base = o * g.extent * g.inner + in;
      std::size_t best = base;
      for (std::size_t e = 1; e < g.extent; ++e)
        if (A[base + e * g.inner] > A[best]) best = base + e * g.inner;
      out[o * g.inner + in] = A[best];
      argmax[o * g.inner + in] = best;
    }
  return t.record(out_shape, std::move(out), {a},
                  [a, argmax = std::move(argmax)](Tape& tp, Var self) {
                    auto G = tp.grad(self);
                    auto d = tp.grad(a);
                    for (std::size_t i = 0; i < G.size(); ++i) d[argmax[i]] += G[i];
                  },
                  "max_over_axis");
}

Var embedding_lookup(Var table, std::span<const int> ids) {
  Tape& t = tape_of(table);
  const Shape& s = t.shape(table);
  require_rank2("embedding_lookup", s);
  if (ids.empty()) throw InvalidArgument("embedding_lookup: empty id list");
  const std::size_t vocab = s[0], dim = s[1];
  auto T = t.value(table);
  std::vector<double> out(ids.size() * dim);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= vocab)
      throw InvalidArgument("embedding_lookup: id " + std::to_string(ids[r]) +
                            " outside table of " + std::to_string(vocab) + " rows");
    std::copy_n(&T[static_cast<std::size_t>(ids[r]) * dim], dim, &out[r * dim]);
  }
  std::vector<int> id_copy(ids.begin(), ids.end());
  return t.record({ids.size(), dim}, std::move(out), {table},
                  [table, dim, id_copy = std::move(id_copy)](Tape& tp, Var self) {
                    auto G = tp.grad(self);
                    auto d = tp.grad(table);
                    for (std::size_t r = 0; r < id_copy.size(); ++r) {
                      double* dst = &d[static_cast<std::size_t>(id_copy[r]) * dim];
                      for (std::size_t j = 0; j < dim; ++j) dst[j] += G[r * dim + j];
                    }
                  },
                  "embedding_lookup");
}

Var embedding_lookup(Var table, int id) { return embedding_lookup(table, std::span<const int>(&id, 1)); }

Var conv1d(Var x, Var kernel, Var bias) {
  Tape& t = tape_of(x, kernel);
  if (bias.tape() != &t) throw InvalidArgument("conv1d: variables belong to different tapes");
  const Shape& sx = t.shape(x);
  const Shape& sk = t.shape(kernel);
  require_rank2("conv1d", sx);
  if (sk.size() != 3 || sk[1] != sx[1]) shape_error("conv1d", sx, sk);
  const std::size_t len = sx[0], ch = sx[1], width = sk[0], filters = sk[2];
  if (t.shape(bias) != Shape{1, filters}) shape_error("conv1d", sk, t.shape(bias));
  if (len < width)
    throw ShapeError("conv1d: input length " + std::to_string(len) + " shorter than kernel width " +
                     std::to_string(width));
  const std::size_t out_len = len - width + 1;
  auto X = t.value(x);
  auto K = t.value(kernel);
  auto B = t.value(bias);
  std::vector<double> out(out_len * filters);
  for (std::size_t p = 0; p < out_len; ++p) {
    double* o = &out[p * filters];
    std::copy_n(B.data(), filters, o);
    for (std::size_t w = 0; w < width; ++w)
      for (std::size_t c = 0; c < ch; ++c) {
        const double xv = X[(p + w) * ch + c];
        const double* krow = &K[(w * ch + c) * filters];
        for (std::size_t f = 0; f < filters; ++f) o[f] += xv * krow[f];
      }
  }
  return t.record({out_len, filters}, std::move(out), {x, kernel, bias},
                  [x, kernel, bias, out_len, ch, width, filters](Tape& tp, Var self) {
                    auto G = tp.grad(self);
                    auto X = tp.value(x);
                    auto K = tp.value(kernel);
                    if (tp.requires_grad(bias)) {
                      auto dB = tp.grad(bias);
                      for (std::size_t p = 0; p < out_len; ++p)
                        for (std::size_t f = 0; f < filters; ++f) dB[f] += G[p * filters + f];
                    }
                    const bool gx = tp.requires_grad(x), gk = tp.requires_grad(kernel);
                    std::span<double> dX, dK;
                    if (gx) dX = tp.grad(x);
                    if (gk) dK = tp.grad(kernel);
                    for (std::size_t p = 0; p < out_len; ++p) {
                      const double* g = &G[p * filters];
                      for (std::size_t w = 0; w < width; ++w)
                        for (std::size_t c = 0; c < ch; ++c) {
                          const std::size_t xi = (p + w) * ch + c;
                          const std::size_t ki = (w * ch + c) * filters;
                          if (gx) {
                            double s = 0.0;
                            for (std::size_t f = 0; f < filters; ++f) s += g[f] * K[ki + f];
                            dX[xi] += s;
                          }
                          if (gk) {
                            const double xv = X[xi];
                            for (std::size_t f = 0; f < filters; ++f) dK[ki + f] += xv * g[f];
                          }
                        }
                    }
                  },
                  "conv1d");
}

Var cross_entropy_logits(Var logits, int target) {
  Tape& t = tape_of(logits);
  auto L = t.value(logits);
  if (target < 0 || static_cast<std::size_t>(target) >= L.size())
    throw InvalidArgument("cross_entropy_logits: target " + std::to_string(target) +
                          " outside " + std::to_string(L.size()) + " classes");
  const double mx = *std::max_element(L.begin(), L.end());
  double z = 0.0;
  for (double v : L) z += std::exp(v - mx);
  const double log_z = mx + std::log(z);
  const double loss = log_z - L[static_cast<std::size_t>(target)];
  return t.record({1, 1}, {loss}, {logits},
                  [logits, target, log_z](Tape& tp, Var self) {
                    const double g = tp.grad(self)[0];
                    auto L = tp.value(logits);
                    auto d = tp.grad(logits);
                    for (std::size_t i = 0; i < L.size(); ++i) d[i] += g * std::exp(L[i] - log_z);
                    d[static_cast<std::size_t>(target)] -= g;
                  },
                  "cross_entropy_logits");
}

Var scale(Var a, double factor) {
  Tape& t = tape_of(a);
  auto A = t.value(a);
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] * factor;
  return t.record(t.shape(a), std::move(out), {a},
                  [a, factor](Tape& tp, Var self) {
                    auto G = tp.grad(self);
                    auto d = tp.grad(a);
                    for (std::size_t i = 0; i < G.size(); ++i) d[i] += G[i] * factor;
                  },
                  "scale");
}

Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t len) {
  Tape& t = tape_of(a);
  const AxisGeometry g = geometry(t.shape(a), axis, "slice");
  if (len == 0 || begin + len > g.extent)
    throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(begin + len) +
                     ") outside axis of extent " + std::to_string(g.extent));
  Shape out_shape = t.shape(a);
  out_shape[axis] = len;
  auto A = t.value(a);
  std::vector<double> out(g.outer * len * g.inner);
  for (std::size_t o = 0; o < g.outer; ++o)
    std::copy_n(&A[(o * g.extent + begin) * g.inner], len * g.inner, &out[o * len * g.inner]);
  return t.record(out_shape, std::move(out), {a},
                  [a, g, begin, len](Tape& tp, Var self) {
                    auto G = tp.grad(self);
                    auto d = tp.grad(a);
                    for (std::size_t o = 0; o < g.outer; ++o)
                      for (std::size_t i = 0; i < len * g.inner; ++i)
                        d[(o * g.extent + begin) * g.inner + i] += G[o * len * g.inner + i];
                  },
                  "slice");
}

Var sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

Var sum(Var a) {
  Tape& t = tape_of(a);
  const Shape s = t.shape(a);
  require_rank2("sum", s);
  Var cols = matmul(a, t.constant(Tensor({1, s[1]}, std::vector<double>(s[1], 1.0))), true);
  if (s[0] == 1) return cols;
  return matmul(t.constant(Tensor({1, s[0]}, std::vector<double>(s[0], 1.0))), cols);
}

}  // namespace semgen::ad
