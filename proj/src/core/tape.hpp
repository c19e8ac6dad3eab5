#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "core/tensor.hpp"

namespace semgen::ad {

class Tape;

// Handle to a value recorded on a tape. Cheap to copy; only valid while the
// owning tape is alive.
class Var {
 public:
  Var() = default;
  Tape* tape() const { return tape_; }
  std::uint32_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

// Reverse-mode tape. Nodes are appended in evaluation order, so the node
// list is always topologically sorted. Parameter leaves alias the caller's
// Tensor: their gradients accumulate straight into Tensor::grad().
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, Var self)>;

  // A tape constructed with record=false evaluates values only; no backward
  // closures are kept and backward() is rejected.
  explicit Tape(bool record = true) : record_(record) { nodes_.reserve(1024); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var zeros(Shape shape);
  Var leaf(Tensor& param);

  const Shape& shape(Var v) const { return node(v).shape; }
  std::span<const double> value(Var v) const;
  Tensor tensor(Var v) const;
  double item(Var v) const;
  bool requires_grad(Var v) const { return node(v).requires_grad; }
  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  void backward(Var loss);

  // Used by primitive implementations.
  Var record(Shape shape, std::vector<double> value, std::initializer_list<Var> inputs,
             BackwardFn fn, const char* op);
  Var record(Shape shape, std::vector<double> value, std::span<const Var> inputs,
             BackwardFn fn, const char* op);
  std::span<double> grad(Var v);

 private:
  struct Node {
    Shape shape;
    std::vector<double> value;
    Tensor* param = nullptr;
    std::vector<double> grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  const Node& node(Var v) const;
  Node& node(Var v);

  std::vector<Node> nodes_;
  bool record_;
  bool backward_done_ = false;
};

// Primitive set. Shape rules:
//   matmul      [m,k]x[k,n] -> [m,n];  with transpose_b: [m,k]x[n,k] -> [m,n]
//   add, mul    identical shapes
//   concat      same rank, all dims equal except `axis`
//   sigmoid, tanh, scale   any shape
//   softmax     normalizes along `axis`
//   max_over_axis          reduces `axis` to extent 1
//   embedding_lookup       table [V,d], n ids -> [n,d]
//   conv1d      x [L,C], kernel [K,C,F], bias [1,F] -> [L-K+1,F] (valid padding)
//   cross_entropy_logits   logits with V elements, target id -> [1,1]
//   slice       `len` entries of `axis` starting at `begin`
Var matmul(Var a, Var b, bool transpose_b = false);
Var add(Var a, Var b);
Var concat(std::span<const Var> parts, std::size_t axis);
Var concat(std::initializer_list<Var> parts, std::size_t axis);
Var mul(Var a, Var b);
Var sigmoid(Var a);
Var tanh(Var a);
Var softmax(Var a, std::size_t axis);
Var max_over_axis(Var a, std::size_t axis);
Var embedding_lookup(Var table, std::span<const int> ids);
Var conv1d(Var x, Var kernel, Var bias);
Var cross_entropy_logits(Var logits, int target);
Var scale(Var a, double factor);
Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t len);

// Compositions of the primitives above.
Var sub(Var a, Var b);
Var sum(Var a);
Var embedding_lookup(Var table, int id);

}  // namespace semgen::ad
