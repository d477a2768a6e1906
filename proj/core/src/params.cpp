#include "docstormer/params.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace docstormer {

template <class T>
Tensor<T> ParameterSet<T>::add(std::string name, Tensor<T> value) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  value.set_requires_grad(true);
  entries_.emplace_back(std::move(name), value);
  return value;
}

template <class T>
Tensor<T> ParameterSet<T>::get(const std::string& name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  throw std::out_of_range("unknown parameter: " + name);
}

template <class T>
bool ParameterSet<T>::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.first == name; });
}

template <class T>
std::int64_t ParameterSet<T>::element_count() const {
  std::int64_t n = 0;
  for (const auto& e : entries_) n += e.second.numel();
  return n;
}

template <class T>
void ParameterSet<T>::zero_grad() {
  for (auto& e : entries_) e.second.zero_grad();
}

template <class T>
void ParameterSet<T>::merge(const ParameterSet& other) {
  for (const auto& [n, t] : other.entries_) {
    if (contains(n)) throw std::invalid_argument("duplicate parameter name: " + n);
    entries_.emplace_back(n, t);
  }
}

template class ParameterSet<float>;
template class ParameterSet<double>;

namespace init {

template <class T>
Tensor<T> uniform(Shape shape, T lo, T hi, Rng& rng) {
  Tensor<T> t(std::move(shape));
  std::uniform_real_distribution<double> dist(static_cast<double>(lo), static_cast<double>(hi));
  for (auto& v : t.mutable_data()) v = static_cast<T>(dist(rng));
  return t;
}

template <class T>
Tensor<T> fan_in_uniform(Shape shape, std::int64_t fan_in, Rng& rng) {
  const T bound = T(1) / std::sqrt(static_cast<T>(fan_in));
  return uniform<T>(std::move(shape), -bound, bound, rng);
}

template Tensor<float> uniform<float>(Shape, float, float, Rng&);
template Tensor<double> uniform<double>(Shape, double, double, Rng&);
template Tensor<float> fan_in_uniform<float>(Shape, std::int64_t, Rng&);
template Tensor<double> fan_in_uniform<double>(Shape, std::int64_t, Rng&);

}  // namespace init

}  // namespace docstormer
