#include "policyscope/interpret.hpp"

#include <algorithm>

#include <fmt/format.h>
#include <json.hpp>

#include "policyscope/kernels.hpp"
#include "policyscope/parallel.hpp"

namespace policyscope {

using nlohmann::json;

namespace {

json tree_config_to_json(const TreeConfig& cfg) {
  json j;
  j["criterion"] = cfg.criterion == SplitCriterion::friedman_mse ? "friedman_mse" : "gini";
  j["max_depth"] = cfg.max_depth;
  j["min_leaf_fraction"] = cfg.min_leaf_fraction;
  j["ccp_alpha"] = cfg.ccp_alpha;
  return j;
}

TreeConfig tree_config_from_json(const json& j) {
  TreeConfig cfg;
  const std::string crit = j.at("criterion").get<std::string>();
  if (crit == "friedman_mse")
    cfg.criterion = SplitCriterion::friedman_mse;
  else if (crit == "gini")
    cfg.criterion = SplitCriterion::gini;
  else
    throw SchemaError("unknown criterion '" + crit + "'");
  cfg.max_depth = j.at("max_depth").get<int>();
  cfg.min_leaf_fraction = j.at("min_leaf_fraction").get<double>();
  cfg.ccp_alpha = j.at("ccp_alpha").get<double>();
  cfg.validate();
  return cfg;
}

}  // namespace

const NeuronInterpreter* PolicyInterpretation::find(const std::string& neuron) const {
  for (const auto& ni : interpreters)
    if (ni.neuron == neuron) return &ni;
  return nullptr;
}

PolicyInterpretation build_interpretation(const TrajectoryDataset& ds,
                                          std::span<const std::string> neurons,
                                          const TreeConfig& tree_cfg,
                                          const TreeConfig& cls_cfg,
                                          int n_threads) {
  ds.validate();
  tree_cfg.validate();
  cls_cfg.validate();

  std::vector<std::string> ids;
  std::vector<int> cols;
  if (neurons.empty()) {
    ids = ds.neuron_ids;
    cols.resize(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) cols[i] = static_cast<int>(i);
  } else {
    for (const auto& id : neurons) {
      auto it = std::find(ds.neuron_ids.begin(), ds.neuron_ids.end(), id);
      if (it == ds.neuron_ids.end())
        throw SchemaError(fmt::format("neuron '{}' not in dataset", id));
      ids.push_back(id);
      cols.push_back(static_cast<int>(it - ds.neuron_ids.begin()));
    }
  }

  const DatasetView view = flatten(ds);
  PolicyInterpretation pi;
  pi.state_names = ds.state_names;
  pi.tree_config = tree_cfg;
  pi.cls_config = cls_cfg;
  pi.interpreters =
      kernels::build_neurons(view, ids, cols, tree_cfg, cls_cfg, resolve_threads(n_threads));
  return pi;
}

const LogicProgram& interpret_response(const PolicyInterpretation& pi,
                                       const std::string& neuron, double z) {
  const NeuronInterpreter* ni = pi.find(neuron);
  if (!ni) throw SchemaError(fmt::format("unknown neuron '{}'", neuron));
  const double x[1] = {z};
  const PathId path = static_cast<PathId>(ni->classifier.predict(x));
  return ni->programs.at(path);
}

TimestepInterpretation interpret_timestep(const PolicyInterpretation& pi,
                                          std::span<const double> z) {
  if (z.size() != pi.interpreters.size())
    throw SchemaError(fmt::format("interpret_timestep: got {} responses for {} neurons",
                                  z.size(), pi.interpreters.size()));
  TimestepInterpretation out;
  out.programs.reserve(z.size());
  for (std::size_t i = 0; i < z.size(); ++i)
    out.programs.push_back(interpret_response(pi, pi.interpreters[i].neuron, z[i]));
  auto [box, conflicts] = reduce(out.programs, pi.state_names.size());
  out.box = std::move(box);
  out.conflicts = std::move(conflicts);
  return out;
}

std::vector<int> resolve_neuron_columns(const TrajectoryDataset& ds,
                                        const PolicyInterpretation& pi) {
  std::vector<int> cols;
  cols.reserve(pi.interpreters.size());
  for (const auto& ni : pi.interpreters) {
    auto it = std::find(ds.neuron_ids.begin(), ds.neuron_ids.end(), ni.neuron);
    if (it == ds.neuron_ids.end())
      throw SchemaError(fmt::format("interpreted neuron '{}' not in dataset", ni.neuron));
    cols.push_back(static_cast<int>(it - ds.neuron_ids.begin()));
  }
  return cols;
}

json PolicyInterpretation::to_json() const {
  json j;
  j["format_version"] = 1;
  j["state_names"] = state_names;
  j["tree_config"] = tree_config_to_json(tree_config);
  j["cls_config"] = tree_config_to_json(cls_config);
  json arr = json::array();
  for (const auto& ni : interpreters) {
    json jn;
    jn["neuron"] = ni.neuron;
    jn["surrogate"] = ni.surrogate.to_json();
    jn["classifier"] = ni.classifier.to_json();
    json progs = json::array();
    for (const auto& prog : ni.programs) {
      json jp;
      jp["path"] = prog.path;
      json preds = json::array();
      for (const auto& p : prog.predicates) {
        json jpred;
        jpred["feature"] = p.feature;
        jpred["op"] = p.leq ? "<=" : ">";
        jpred["threshold"] = p.threshold;
        preds.push_back(std::move(jpred));
      }
      jp["predicates"] = std::move(preds);
      progs.push_back(std::move(jp));
    }
    jn["programs"] = std::move(progs);
    arr.push_back(std::move(jn));
  }
  j["interpreters"] = std::move(arr);
  return j;
}

PolicyInterpretation PolicyInterpretation::from_json(const json& j) {
  PolicyInterpretation pi;
  try {
    const int version = j.at("format_version").get<int>();
    if (version != 1)
      throw SchemaError(fmt::format("unsupported interpretation format_version {}", version));
    pi.state_names = j.at("state_names").get<std::vector<std::string>>();
    pi.tree_config = tree_config_from_json(j.at("tree_config"));
    pi.cls_config = tree_config_from_json(j.at("cls_config"));
    for (const auto& jn : j.at("interpreters")) {
      NeuronInterpreter ni;
      ni.neuron = jn.at("neuron").get<std::string>();
      ni.surrogate = DecisionTree::from_json(jn.at("surrogate"));
      ni.classifier = DecisionTree::from_json(jn.at("classifier"));
      for (const auto& jp : jn.at("programs")) {
        LogicProgram prog;
        prog.neuron = ni.neuron;
        prog.path = jp.at("path").get<PathId>();
        for (const auto& jpred : jp.at("predicates")) {
          Predicate p;
          p.feature = jpred.at("feature").get<int>();
          const std::string op = jpred.at("op").get<std::string>();
          if (op == "<=")
            p.leq = true;
          else if (op == ">")
            p.leq = false;
          else
            throw SchemaError("predicate op must be '<=' or '>'");
          p.threshold = jpred.at("threshold").get<double>();
          prog.predicates.push_back(p);
        }
        ni.programs.push_back(std::move(prog));
      }
      if (static_cast<int>(ni.programs.size()) != ni.surrogate.n_leaves())
        throw SchemaError(fmt::format("neuron '{}': {} programs for {} leaves", ni.neuron,
                                      ni.programs.size(), ni.surrogate.n_leaves()));
      pi.interpreters.push_back(std::move(ni));
    }
  } catch (const json::exception& e) {
    throw SchemaError(fmt::format("interpretation bundle: {}", e.what()));
  }
  return pi;
}

}  // namespace policyscope
