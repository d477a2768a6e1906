#include "docstormer/tape.hpp"

#include <algorithm>
#include <unordered_set>

namespace docstormer {

namespace {
thread_local Tape* t_active = nullptr;
std::string g_fault;
}  // namespace

void Tape::record(const char* op, std::vector<const void*> inputs, const void* output,
                  std::function<void()> backward) {
  entries_.push_back(Entry{op, std::move(inputs), output, std::move(backward)});
}

bool Tape::produced(const void* node) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.output == node; });
}

bool Tape::is_topologically_ordered() const {
  std::unordered_set<const void*> outputs;
  for (const auto& e : entries_) outputs.insert(e.output);
  std::unordered_set<const void*> seen;
  for (const auto& e : entries_) {
    for (const void* in : e.inputs) {
      if (in && outputs.count(in) && !seen.count(in)) return false;
    }
    seen.insert(e.output);
  }
  return true;
}

void Tape::run_backward() {
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    it->backward();
    if (!g_fault.empty() && g_fault == it->op) it->backward();
  }
}

Tape* active_tape() { return t_active; }

TapeScope::TapeScope(Tape* tape) : previous_(t_active) { t_active = tape; }
TapeScope::~TapeScope() { t_active = previous_; }

void set_backward_fault(std::string op_name) { g_fault = std::move(op_name); }
const std::string& backward_fault() { return g_fault; }

template <class T>
void backward(const Tensor<T>& loss, Tape& tape) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ShapeError("backward needs a scalar loss");
  }
  if (!loss.requires_grad()) {
    throw GraphError("loss is detached: no recorded operation leads to it");
  }
  if (!tape.produced(loss.node().get()) && tape.size() > 0) {
    throw GraphError("loss was not produced on this tape");
  }
  Tensor<T> seed = loss;
  seed.mutable_grad()[0] += T(1);
  tape.run_backward();
}

template void backward<float>(const Tensor<float>&, Tape&);
template void backward<double>(const Tensor<double>&, Tape&);

}  // namespace docstormer
