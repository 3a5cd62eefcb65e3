#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "csakd/autograd.hpp"

namespace csakd {

// Named, shaped parameter tensors with a creation-order manifest. Shapes are
// immutable after creation. Serialized as <base>.manifest.json (name ->
// {shape, dtype "f32", offset}) plus <base>.bin, a single little-endian f32
// blob; load/save round-trips are bit-exact at the file level.
class ParameterStore {
 public:
  ParameterStore() = default;
  explicit ParameterStore(std::string role) : role_(std::move(role)) {}

  // Create-or-fetch. On creation `init` fills the value; on fetch the shape
  // must match.
  Tensor param(const std::string& name, const std::vector<int>& shape,
               const std::function<void(Array&)>& init);

  Tensor get(const std::string& name) const;
  bool has(const std::string& name) const { return entries_.count(name) > 0; }
  const std::vector<std::string>& names() const { return order_; }
  std::size_t parameter_count() const;
  const std::string& role() const { return role_; }

  void zero_grads();

  void save(const std::filesystem::path& base) const;
  static ParameterStore load(const std::filesystem::path& base);

  // Deep value copy (fresh leaf tensors), used by checkpointing tests.
  ParameterStore clone() const;

 private:
  std::string role_;
  std::map<std::string, Tensor> entries_;
  std::vector<std::string> order_;
};

}  // namespace csakd
