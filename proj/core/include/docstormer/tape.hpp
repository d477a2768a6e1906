#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "docstormer/tensor.hpp"

namespace docstormer {

/// Ordered record of differentiable operations executed while the tape is
/// active on the current thread. Entries are appended in execution order, so
/// the record is topologically sorted by construction; `backward` walks it in
/// exact reverse.
class Tape {
 public:
  struct Entry {
    const char* op;
    std::vector<const void*> inputs;
    const void* output;
    std::function<void()> backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(const char* op, std::vector<const void*> inputs, const void* output,
              std::function<void()> backward);
  std::size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }
  bool produced(const void* node) const;
  /// True when every entry's inputs are leaves or outputs of earlier entries.
  bool is_topologically_ordered() const;
  void clear() { entries_.clear(); }

  /// Runs every entry's backward rule in reverse order.
  void run_backward();

 private:
  std::vector<Entry> entries_;
};

/// The tape recording on this thread, or nullptr.
Tape* active_tape();

/// Makes `tape` the active tape for the enclosing scope. Passing nullptr
/// suspends recording.
class TapeScope {
 public:
  explicit TapeScope(Tape* tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

/// Seeds d(loss)/d(loss) = 1 and back-propagates through `tape`.
/// Accumulates into the grad buffer of every tensor on the graph.
template <class T>
void backward(const Tensor<T>& loss, Tape& tape);

// Test hook: when set, the named op's backward rule runs twice so its
// contribution is doubled. Used to prove the gradient checker catches faults.
void set_backward_fault(std::string op_name);
const std::string& backward_fault();

namespace detail {

template <class T>
bool any_requires_grad(std::initializer_list<const Tensor<T>*> inputs) {
  for (const auto* t : inputs) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

/// Throws NumericError if `t` holds NaN or Inf.
template <class T>
void check_finite(const Tensor<T>& t, const char* op) {
  for (T v : t.data()) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite value in output");
  }
}

/// Attaches `out` to the active tape when any input requires a gradient.
/// `fn` receives the output gradient span and must accumulate into inputs.
template <class T, class Fn>
void attach(const char* op, Tensor<T>& out, std::initializer_list<const Tensor<T>*> inputs, Fn&& fn) {
  check_finite(out, op);
  Tape* tape = active_tape();
  if (!tape || !any_requires_grad<T>(inputs)) return;
  out.set_requires_grad(true);
  std::vector<const void*> ids;
  ids.reserve(inputs.size());
  for (const auto* t : inputs) ids.push_back(t->defined() ? t->node().get() : nullptr);
  auto out_node = out.node();
  tape->record(op, std::move(ids), out_node.get(),
               [out_node, fn = std::forward<Fn>(fn)]() mutable {
                 if (out_node->grad.empty()) return;  // output did not reach the loss
                 fn(std::span<const T>(out_node->grad.data(), out_node->grad.size()));
               });
}

/// Gradient span of an input, or an empty span when it does not track grads.
template <class T>
std::span<T> grad_of(const Tensor<T>& t) {
  if (!t.defined() || !t.requires_grad()) return {};
  auto& node = *t.node();
  if (node.grad.empty()) node.grad.assign(node.data.size(), T(0));
  return {node.grad.data(), node.grad.size()};
}

}  // namespace detail

}  // namespace docstormer
