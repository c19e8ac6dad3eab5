#include "core/params.hpp"

#include <cmath>

#include "core/error.hpp"

namespace semgen {

ad::Tensor& ParamStore::add(const std::string& name, ad::Shape shape, bool trainable) {
  if (index_.count(name)) throw InvalidArgument("duplicate parameter '" + name + "'");
  storage_.emplace_back(std::move(shape), trainable);
  index_[name] = names_.size();
  names_.push_back(name);
  ptrs_.push_back(&storage_.back());
  return storage_.back();
}

ad::Tensor* ParamStore::find(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : ptrs_[it->second];
}

const ad::Tensor* ParamStore::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : ptrs_[it->second];
}

ad::Tensor& ParamStore::get(const std::string& name) {
  if (auto* t = find(name)) return *t;
  throw InvalidArgument("unknown parameter '" + name + "'");
}

const ad::Tensor& ParamStore::get(const std::string& name) const {
  if (const auto* t = find(name)) return *t;
  throw InvalidArgument("unknown parameter '" + name + "'");
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto* t : ptrs_) n += t->size();
  return n;
}

std::size_t ParamStore::trainable_count() const {
  std::size_t n = 0;
  for (const auto* t : ptrs_)
    if (t->requires_grad()) n += t->size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto* t : ptrs_) t->zero_grad();
}

void init_uniform(ad::Tensor& t, Rng& rng, double limit) {
  for (auto& v : t.data()) v = rng.uniform(-limit, limit);
}

void init_xavier(ad::Tensor& t, Rng& rng) {
  const auto& s = t.shape();
  const std::size_t fan_out = s.back();
  const std::size_t fan_in = t.size() / fan_out;
  init_uniform(t, rng, std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)));
}

}  // namespace semgen
