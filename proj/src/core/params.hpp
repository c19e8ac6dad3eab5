#pragma once

#include <deque>
#include <string>
#include <unordered_map>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace semgen {

// Named parameter tensors in creation order. Addresses are stable for the
// lifetime of the store.
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;

  ad::Tensor& add(const std::string& name, ad::Shape shape, bool trainable = true);
  ad::Tensor& get(const std::string& name);
  const ad::Tensor& get(const std::string& name) const;
  ad::Tensor* find(const std::string& name);
  const ad::Tensor* find(const std::string& name) const;

  const std::vector<std::string>& names() const { return names_; }
  const std::vector<ad::Tensor*>& tensors() const { return ptrs_; }
  std::size_t parameter_count() const;
  std::size_t trainable_count() const;
  void zero_grad();

 private:
  std::deque<ad::Tensor> storage_;
  std::vector<std::string> names_;
  std::vector<ad::Tensor*> ptrs_;
  std::unordered_map<std::string, std::size_t> index_;
};

void init_uniform(ad::Tensor& t, Rng& rng, double limit);
// Glorot uniform over the last two dimensions' fan-in/fan-out.
void init_xavier(ad::Tensor& t, Rng& rng);

}  // namespace semgen
