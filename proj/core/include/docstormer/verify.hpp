#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "docstormer/gradcheck.hpp"

// Finite-difference verification suite: one case per differentiable op, one
// per composite loss, and one per network block.

namespace docstormer {

enum class Precision { Single, Double };

struct GradcheckCaseResult {
  std::string name;
  std::string group;  // "op", "loss" or "block"
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t checked = 0;
  int seeds = 0;
  bool passed = false;
};

struct GradcheckOptions {
  Precision precision = Precision::Double;
  int seeds = 10;
  double tolerance = 1e-5;
  std::vector<std::string> groups = {"op", "loss", "block"};
  std::string only;  // run a single case by name when non-empty
};

struct GradcheckCase {
  std::string name;
  std::string group;
  std::function<GradCheckReport(std::uint64_t seed)> run_double;
  std::function<GradCheckReport(std::uint64_t seed)> run_single;  // empty: double only
};

const std::vector<GradcheckCase>& gradcheck_cases();

std::vector<GradcheckCaseResult> run_gradcheck_suite(const GradcheckOptions& options);

}  // namespace docstormer
