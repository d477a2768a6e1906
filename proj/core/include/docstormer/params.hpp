#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "docstormer/tensor.hpp"

namespace docstormer {

using Rng = std::mt19937_64;

/// Named, ordered collection of trainable tensors. Modules keep handles to the
/// same nodes, so in-place updates (optimizer steps, checkpoint loads) are
/// visible everywhere.
template <class T>
class ParameterSet {
 public:
  using Entry = std::pair<std::string, Tensor<T>>;

  Tensor<T> add(std::string name, Tensor<T> value);
  Tensor<T> get(const std::string& name) const;
  bool contains(const std::string& name) const;

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::int64_t element_count() const;
  void zero_grad();
  /// Appends every entry of `other` (names must not collide).
  void merge(const ParameterSet& other);

 private:
  std::vector<Entry> entries_;
};

extern template class ParameterSet<float>;
extern template class ParameterSet<double>;

namespace init {
/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <class T>
Tensor<T> fan_in_uniform(Shape shape, std::int64_t fan_in, Rng& rng);
template <class T>
Tensor<T> uniform(Shape shape, T lo, T hi, Rng& rng);
}  // namespace init

}  // namespace docstormer
