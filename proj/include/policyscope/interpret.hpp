#pragma once

#include <span>
#include <string>
#include <vector>

#include <json_fwd.hpp>

#include "policyscope/dataset.hpp"
#include "policyscope/logic.hpp"
#include "policyscope/tree.hpp"

namespace policyscope {

// Everything needed to explain one neuron: the regression surrogate over
// states, the inverse response->path classifier, and the path->program map.
struct NeuronInterpreter {
  std::string neuron;
  DecisionTree surrogate;    // states -> response
  DecisionTree classifier;   // response (1-D) -> PathId
  std::vector<LogicProgram> programs;  // indexed by the surrogate's PathId

  bool operator==(const NeuronInterpreter&) const = default;
};

struct PolicyInterpretation {
  std::vector<std::string> state_names;
  TreeConfig tree_config;  // surrogate config
  TreeConfig cls_config;   // classifier config
  std::vector<NeuronInterpreter> interpreters;

  const NeuronInterpreter* find(const std::string& neuron) const;

  nlohmann::json to_json() const;
  static PolicyInterpretation from_json(const nlohmann::json& j);

  bool operator==(const PolicyInterpretation&) const = default;
};

// Per neuron: fit the surrogate on (state -> response), label every row
// with its decision path, fit the inverse classifier on (response -> path),
// and assemble the path->program map. `neurons` empty selects all.
// Neuron builds run concurrently when threads allow.
PolicyInterpretation build_interpretation(const TrajectoryDataset& ds,
                                          std::span<const std::string> neurons,
                                          const TreeConfig& tree_cfg,
                                          const TreeConfig& cls_cfg,
                                          int n_threads = 0);

// response -> logic program for one neuron.
const LogicProgram& interpret_response(const PolicyInterpretation& pi,
                                       const std::string& neuron, double z);

struct TimestepInterpretation {
  std::vector<LogicProgram> programs;  // one per interpreter, same order
  IntervalBox box;
  std::vector<Conflict> conflicts;
};

// Applies interpret_response per neuron, then reduces the programs to the
// per-dimension interval intersection. z aligns with pi.interpreters.
TimestepInterpretation interpret_timestep(const PolicyInterpretation& pi,
                                          std::span<const double> z);

// Maps each interpreter's neuron id onto its dataset response column.
std::vector<int> resolve_neuron_columns(const TrajectoryDataset& ds,
                                        const PolicyInterpretation& pi);

}  // namespace policyscope
