#pragma once

#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "policyscope/common.hpp"
#include "policyscope/tree.hpp"

namespace policyscope {

// Conjunction of threshold predicates over named state dimensions,
// obtained from one decision path of one neuron's tree.
struct LogicProgram {
  std::vector<Predicate> predicates;  // root->leaf order
  std::string neuron;                 // source neuron id (may be empty)
  PathId path = 0;

  bool operator==(const LogicProgram&) const = default;
};

// Half-open interval (lo, hi]. Unconstrained ends sit at +-infinity.
struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  bool constrained() const {
    return lo != -std::numeric_limits<double>::infinity() ||
           hi != std::numeric_limits<double>::infinity();
  }
  bool empty() const { return hi <= lo; }
  bool operator==(const Interval&) const = default;
};

struct IntervalBox {
  std::vector<Interval> dims;  // length d_s

  bool feasible() const {
    for (const auto& iv : dims)
      if (iv.constrained() && iv.empty()) return false;
    return true;
  }
  bool operator==(const IntervalBox&) const = default;
};

// A state dimension whose combined interval is empty, witnessed by the
// neuron pair supplying the clashing bounds.
struct Conflict {
  int feature = 0;
  std::string neuron_a;  // source of the binding lower bound
  std::string neuron_b;  // source of the binding upper bound
  bool operator==(const Conflict&) const = default;
};

// Interval form of one program's conjunction.
IntervalBox box_of(const LogicProgram& program, std::size_t d_s);

// Per-dimension intersection across programs. Conflicts list every
// dimension whose intersection is empty; the box still reports the
// tightest bounds. Conflict is a result, not an error.
std::pair<IntervalBox, std::vector<Conflict>> reduce(
    std::span<const LogicProgram> programs, std::size_t d_s);

// Average over timesteps of the fraction of multiply-constrained state
// dimensions (>= 2 distinct neurons) whose interval intersection is
// empty. Timesteps with no such dimension contribute 0.
double conflict_rate(const std::vector<std::vector<LogicProgram>>& steps, std::size_t d_s);

LogicProgram program_of(const std::vector<std::vector<Predicate>>& tree_paths,
                        PathId path, std::string neuron = {});

// Text form. ascii_ops gives "(name <= 0.33)", unicode_ops "(name ≤ 0.33)";
// clauses join with " ∧ ". Thresholds print at 2 decimals. Empty programs
// render "None"; a self-inconsistent one renders "(conflict)".
enum class OpStyle { ascii_ops, unicode_ops };
std::string render(const LogicProgram& program, std::span<const std::string> names,
                   OpStyle style = OpStyle::ascii_ops);

// Inverse of render for the canonical grammar:
//   program := "None" | clause (" ∧ " clause)*
//   clause  := "(" name (" <= " | " > ") number ")"
// "&&" is accepted as a join fallback, "≤" as an operator fallback.
LogicProgram parse_program(std::string_view text, std::span<const std::string> names);

}  // namespace policyscope
