#pragma once

#include <span>
#include <string>
#include <vector>

#include <json_fwd.hpp>

#include "policyscope/common.hpp"

namespace policyscope {

enum class SplitCriterion { friedman_mse, gini };
enum class TreeKind { regression, classification };

// Identifies one leaf of a specific tree, equivalently one root-to-leaf
// decision path. Dense in [0, n_leaves), assigned left-to-right.
using PathId = int;

struct TreeConfig {
  SplitCriterion criterion = SplitCriterion::friedman_mse;
  int max_depth = 3;
  double min_leaf_fraction = 0.10;  // per-leaf minimum as a fraction of N
  double ccp_alpha = 0.003;         // minimal cost-complexity pruning strength

  void validate() const;

  static TreeConfig surrogate_default() { return {}; }
  static TreeConfig classifier_default() {
    return {SplitCriterion::gini, 3, 0.01, 0.01};
  }
  bool operator==(const TreeConfig&) const = default;
};

struct TreeNode {
  int feature = -1;   // split feature; -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int count = 0;      // training rows reaching this node
  double impurity = 0.0;  // variance (regression) or Gini (classification)
  double value = 0.0;     // mean response, or majority class label
  std::vector<int> class_counts;  // classification only
  PathId path = -1;   // leaf id, -1 on internal nodes

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

// One decision rule: `x[feature] <= threshold` when leq, else `>`.
struct Predicate {
  int feature = 0;
  bool leq = true;
  double threshold = 0.0;
  bool operator==(const Predicate&) const = default;
};

// Binary threshold tree in pre-order storage; nodes[0] is the root.
// Routing convention: x[feature] <= threshold goes left, else right.
struct DecisionTree {
  TreeKind kind = TreeKind::regression;
  int n_features = 0;
  int n_train = 0;
  std::vector<TreeNode> nodes;

  int n_leaves() const;
  int depth() const;

  double predict(std::span<const double> x) const;
  PathId path_of(std::span<const double> x) const;

  // One predicate list per leaf, indexed by PathId, in root->leaf order.
  // A single-leaf tree yields one empty list.
  std::vector<std::vector<Predicate>> enumerate_paths() const;

  nlohmann::json to_json() const;
  static DecisionTree from_json(const nlohmann::json& j);

  bool operator==(const DecisionTree&) const = default;
};

DecisionTree fit_regression(const Matrix& X, std::span<const double> y,
                            const TreeConfig& cfg);
DecisionTree fit_classification(const Matrix& X, std::span<const int> y,
                                const TreeConfig& cfg);

// Weakest-link minimal cost-complexity pruning with per-node risk
// R(t) = impurity(t) * count(t) / n_train. Collapses the subtree with the
// smallest effective alpha until all survive ccp_alpha. alpha = 0 returns
// the tree unchanged.
DecisionTree prune(const DecisionTree& tree, double ccp_alpha);

}  // namespace policyscope
