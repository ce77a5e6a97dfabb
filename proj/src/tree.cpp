#include "policyscope/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include <fmt/format.h>
#include <json.hpp>

namespace policyscope {

using nlohmann::json;

void TreeConfig::validate() const {
  if (max_depth < 1) throw SchemaError("TreeConfig: max_depth must be >= 1");
  if (!(min_leaf_fraction > 0.0 && min_leaf_fraction <= 0.5))
    throw SchemaError("TreeConfig: min_leaf_fraction must be in (0, 0.5]");
  if (!(ccp_alpha >= 0.0)) throw SchemaError("TreeConfig: ccp_alpha must be >= 0");
}

namespace {

// Minimum rows per leaf. The tiny slack absorbs float dust in
// fraction * N (0.01 * 100 must give 1, not 2).
int min_leaf_count(double fraction, std::size_t n) {
  double m = std::ceil(fraction * static_cast<double>(n) - 1e-12);
  return std::max(1, static_cast<int>(m));
}

struct Candidate {
  double score = 0.0;  // strictly positive for an acceptable split
  int feature = -1;
  double threshold = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& X, std::span<const double> y_reg, std::span<const int> y_cls,
              TreeKind kind, const TreeConfig& cfg)
      : X_(X), y_reg_(y_reg), y_cls_(y_cls), kind_(kind), cfg_(cfg) {
    n_ = X.rows();
    rows_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) rows_[i] = static_cast<int>(i);
    min_leaf_ = min_leaf_count(cfg.min_leaf_fraction, n_);
    if (kind_ == TreeKind::classification) {
      int max_label = 0;
      for (int label : y_cls_) {
        if (label < 0) throw SchemaError("fit_classification: labels must be >= 0");
        max_label = std::max(max_label, label);
      }
      n_classes_ = max_label + 1;
    }
  }

  DecisionTree build() {
    DecisionTree tree;
    tree.kind = kind_;
    tree.n_features = static_cast<int>(X_.cols());
    tree.n_train = static_cast<int>(n_);
    grow(0, static_cast<int>(n_), 0);
    tree.nodes = std::move(nodes_);
    PathId next = 0;
    for (auto& node : tree.nodes)
      if (node.is_leaf()) node.path = next++;
    return tree;
  }

 private:
  struct Stats {
    int count = 0;
    double impurity = 0.0;
    double value = 0.0;
    std::vector<int> class_counts;
    bool pure = false;
  };

  Stats node_stats(int begin, int end) const {
    Stats s;
    s.count = end - begin;
    if (kind_ == TreeKind::regression) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      double sum = 0.0;
      for (int i = begin; i < end; ++i) {
        double v = y_reg_[rows_[i]];
        sum += v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      s.value = sum / s.count;
      double sse = 0.0;
      for (int i = begin; i < end; ++i) {
        double d = y_reg_[rows_[i]] - s.value;
        sse += d * d;
      }
      s.pure = (lo == hi);
      s.impurity = s.pure ? 0.0 : sse / s.count;
    } else {
      s.class_counts.assign(n_classes_, 0);
      for (int i = begin; i < end; ++i) ++s.class_counts[y_cls_[rows_[i]]];
      int present = 0, majority = 0;
      double sum_sq = 0.0;
      for (int c = 0; c < n_classes_; ++c) {
        if (s.class_counts[c] > 0) ++present;
        if (s.class_counts[c] > s.class_counts[majority]) majority = c;
        sum_sq += static_cast<double>(s.class_counts[c]) * s.class_counts[c];
      }
      s.value = majority;  // ties resolved to the smallest label by the > scan
      s.pure = (present <= 1);
      s.impurity = s.pure ? 0.0 : 1.0 - sum_sq / (static_cast<double>(s.count) * s.count);
    }
    return s;
  }

  // Greedy best split over all (feature, midpoint) candidates. Features
  // ascend and thresholds ascend per feature, so keeping the first
  // strictly-better candidate realizes the smaller-feature,
  // smaller-threshold tie rule.
  Candidate best_split(int begin, int end) const {
    const int n = end - begin;
    Candidate best;
    std::vector<std::pair<double, int>> order(n);
    std::vector<int> left_counts;

    for (std::size_t j = 0; j < X_.cols(); ++j) {
      for (int i = begin; i < end; ++i)
        order[i - begin] = {X_(rows_[i], j), rows_[i]};
      std::stable_sort(order.begin(), order.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });

      if (kind_ == TreeKind::regression) {
        double total = 0.0;
        for (const auto& [x, r] : order) total += y_reg_[r];
        double sum_left = 0.0;
        for (int i = 1; i < n; ++i) {
          sum_left += y_reg_[order[i - 1].second];
          if (order[i].first == order[i - 1].first) continue;
          const int nl = i, nr = n - i;
          if (nl < min_leaf_ || nr < min_leaf_) continue;
          const double mean_l = sum_left / nl;
          const double mean_r = (total - sum_left) / nr;
          const double diff = mean_l - mean_r;
          // Friedman improvement: w_l w_r / (w_l + w_r) * (mean_l - mean_r)^2
          const double score =
              (static_cast<double>(nl) * nr / n) * diff * diff;
          if (score > best.score) {
            best = {score, static_cast<int>(j), midpoint(order[i - 1].first, order[i].first)};
          }
        }
      } else {
        std::vector<int> totals(n_classes_, 0);
        for (const auto& [x, r] : order) ++totals[y_cls_[r]];
        double total_sq = 0.0;
        for (int c = 0; c < n_classes_; ++c)
          total_sq += static_cast<double>(totals[c]) * totals[c];
        left_counts.assign(n_classes_, 0);
        for (int i = 1; i < n; ++i) {
          ++left_counts[y_cls_[order[i - 1].second]];
          if (order[i].first == order[i - 1].first) continue;
          const int nl = i, nr = n - i;
          if (nl < min_leaf_ || nr < min_leaf_) continue;
          double left_sq = 0.0, right_sq = 0.0;
          for (int c = 0; c < n_classes_; ++c) {
            const double lc = left_counts[c];
            const double rc = totals[c] - left_counts[c];
            left_sq += lc * lc;
            right_sq += rc * rc;
          }
          // Unnormalized Gini decrease: n*G(t) - nl*G(l) - nr*G(r).
          const double score = left_sq / nl + right_sq / nr - total_sq / n;
          if (score > best.score) {
            best = {score, static_cast<int>(j), midpoint(order[i - 1].first, order[i].first)};
          }
        }
      }
    }
    return best;
  }

  static double midpoint(double a, double b) {
    double mid = (a + b) / 2.0;
    // Adjacent doubles can round the midpoint onto b, which would route
    // both values left; fall back to the lower value.
    return mid == b ? a : mid;
  }

  int grow(int begin, int end, int depth) {
    const int idx = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    Stats s = node_stats(begin, end);
    nodes_[idx].count = s.count;
    nodes_[idx].impurity = s.impurity;
    nodes_[idx].value = s.value;
    nodes_[idx].class_counts = std::move(s.class_counts);

    if (depth < cfg_.max_depth && s.count >= 2 * min_leaf_ && !s.pure) {
      Candidate c = best_split(begin, end);
      if (c.feature >= 0 && c.score > 0.0) {
        auto mid = std::stable_partition(
            rows_.begin() + begin, rows_.begin() + end,
            [&](int r) { return X_(r, c.feature) <= c.threshold; });
        const int split = static_cast<int>(mid - rows_.begin());
        nodes_[idx].feature = c.feature;
        nodes_[idx].threshold = c.threshold;
        const int left = grow(begin, split, depth + 1);
        const int right = grow(split, end, depth + 1);
        nodes_[idx].left = left;
        nodes_[idx].right = right;
      }
    }
    return idx;
  }

  const Matrix& X_;
  std::span<const double> y_reg_;
  std::span<const int> y_cls_;
  TreeKind kind_;
  TreeConfig cfg_;
  std::size_t n_ = 0;
  int min_leaf_ = 1;
  int n_classes_ = 0;
  std::vector<int> rows_;
  std::vector<TreeNode> nodes_;
};

void check_matrix(const Matrix& X, std::size_t n_targets, const char* op) {
  if (X.rows() == 0) throw DataError(fmt::format("{}: empty training set", op));
  if (X.rows() != n_targets)
    throw SchemaError(fmt::format("{}: X has {} rows but y has {}", op, X.rows(), n_targets));
}

}  // namespace

DecisionTree fit_regression(const Matrix& X, std::span<const double> y,
                            const TreeConfig& cfg) {
  cfg.validate();
  if (cfg.criterion != SplitCriterion::friedman_mse)
    throw SchemaError("fit_regression requires the friedman_mse criterion");
  check_matrix(X, y.size(), "fit_regression");
  TreeBuilder builder(X, y, {}, TreeKind::regression, cfg);
  return prune(builder.build(), cfg.ccp_alpha);
}

DecisionTree fit_classification(const Matrix& X, std::span<const int> y,
                                const TreeConfig& cfg) {
  cfg.validate();
  if (cfg.criterion != SplitCriterion::gini)
    throw SchemaError("fit_classification requires the gini criterion");
  check_matrix(X, y.size(), "fit_classification");
  TreeBuilder builder(X, {}, y, TreeKind::classification, cfg);
  return prune(builder.build(), cfg.ccp_alpha);
}

int DecisionTree::n_leaves() const {
  int k = 0;
  for (const auto& node : nodes) k += node.is_leaf();
  return k;
}

int DecisionTree::depth() const {
  std::vector<int> depth_of(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!nodes[i].is_leaf()) {
      depth_of[nodes[i].left] = depth_of[i] + 1;
      depth_of[nodes[i].right] = depth_of[i] + 1;
    }
    deepest = std::max(deepest, depth_of[i]);
  }
  return deepest;
}

namespace {

int route(const DecisionTree& tree, std::span<const double> x) {
  if (static_cast<int>(x.size()) != tree.n_features)
    throw SchemaError(fmt::format("predict: input has {} features, tree expects {}",
                                  x.size(), tree.n_features));
  int i = 0;
  while (!tree.nodes[i].is_leaf()) {
    const TreeNode& node = tree.nodes[i];
    i = x[node.feature] <= node.threshold ? node.left : node.right;
  }
  return i;
}

}  // namespace

double DecisionTree::predict(std::span<const double> x) const {
  return nodes[route(*this, x)].value;
}

PathId DecisionTree::path_of(std::span<const double> x) const {
  return nodes[route(*this, x)].path;
}

std::vector<std::vector<Predicate>> DecisionTree::enumerate_paths() const {
  std::vector<std::vector<Predicate>> out(n_leaves());
  std::vector<Predicate> prefix;
  // DFS left-first, matching PathId assignment order.
  auto walk = [&](auto&& self, int i) -> void {
    const TreeNode& node = nodes[i];
    if (node.is_leaf()) {
      out[node.path] = prefix;
      return;
    }
    prefix.push_back({node.feature, true, node.threshold});
    self(self, node.left);
    prefix.back().leq = false;
    self(self, node.right);
    prefix.pop_back();
  };
  walk(walk, 0);
  return out;
}

DecisionTree prune(const DecisionTree& tree, double ccp_alpha) {
  if (!(ccp_alpha >= 0.0)) throw SchemaError("prune: ccp_alpha must be >= 0");
  if (ccp_alpha == 0.0 || tree.nodes.size() <= 1) return tree;

  auto nodes = tree.nodes;
  std::vector<char> live(nodes.size(), 1);
  const double n_train = tree.n_train;
  auto risk = [&](int i) { return nodes[i].impurity * nodes[i].count / n_train; };

  while (true) {
    // Subtree risk and leaf counts over the current structure.
    std::vector<double> subtree_risk(nodes.size(), 0.0);
    std::vector<int> subtree_leaves(nodes.size(), 0);
    auto accumulate = [&](auto&& self, int i) -> void {
      if (nodes[i].is_leaf()) {
        subtree_risk[i] = risk(i);
        subtree_leaves[i] = 1;
        return;
      }
      self(self, nodes[i].left);
      self(self, nodes[i].right);
      subtree_risk[i] = subtree_risk[nodes[i].left] + subtree_risk[nodes[i].right];
      subtree_leaves[i] = subtree_leaves[nodes[i].left] + subtree_leaves[nodes[i].right];
    };
    accumulate(accumulate, 0);

    // Weakest link: smallest effective alpha, ties to the smallest id.
    int weakest = -1;
    double weakest_alpha = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (!live[i] || nodes[i].is_leaf()) continue;
      const double g = (risk(static_cast<int>(i)) - subtree_risk[i]) / (subtree_leaves[i] - 1);
      if (g < weakest_alpha) {
        weakest_alpha = g;
        weakest = static_cast<int>(i);
      }
    }
    if (weakest < 0 || weakest_alpha > ccp_alpha) break;

    auto drop = [&](auto&& self, int i) -> void {
      if (nodes[i].is_leaf()) return;
      live[nodes[i].left] = 0;
      live[nodes[i].right] = 0;
      self(self, nodes[i].left);
      self(self, nodes[i].right);
    };
    drop(drop, weakest);
    nodes[weakest].feature = -1;
    nodes[weakest].left = -1;
    nodes[weakest].right = -1;
  }

  // Compact surviving nodes back into pre-order and refresh PathIds.
  DecisionTree out;
  out.kind = tree.kind;
  out.n_features = tree.n_features;
  out.n_train = tree.n_train;
  PathId next = 0;
  auto copy = [&](auto&& self, int i) -> int {
    const int idx = static_cast<int>(out.nodes.size());
    out.nodes.push_back(nodes[i]);
    if (nodes[i].is_leaf()) {
      out.nodes[idx].path = next++;
      return idx;
    }
    out.nodes[idx].path = -1;
    const int left = self(self, nodes[i].left);
    const int right = self(self, nodes[i].right);
    out.nodes[idx].left = left;
    out.nodes[idx].right = right;
    return idx;
  };
  copy(copy, 0);
  return out;
}

json DecisionTree::to_json() const {
  json j;
  j["kind"] = kind == TreeKind::regression ? "regression" : "classification";
  j["n_features"] = n_features;
  j["n_train"] = n_train;
  json arr = json::array();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const TreeNode& node = nodes[i];
    json jn;
    jn["id"] = i;
    jn["feature"] = node.feature;
    jn["threshold"] = node.threshold;
    jn["left"] = node.left;
    jn["right"] = node.right;
    jn["prediction"] = node.value;
    jn["n"] = node.count;
    jn["impurity"] = node.impurity;
    if (kind == TreeKind::classification) jn["class_counts"] = node.class_counts;
    arr.push_back(std::move(jn));
  }
  j["nodes"] = std::move(arr);
  return j;
}

DecisionTree DecisionTree::from_json(const json& j) {
  DecisionTree tree;
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "regression")
      tree.kind = TreeKind::regression;
    else if (kind == "classification")
      tree.kind = TreeKind::classification;
    else
      throw SchemaError("tree: unknown kind '" + kind + "'");
    tree.n_features = j.at("n_features").get<int>();
    tree.n_train = j.at("n_train").get<int>();
    for (const auto& jn : j.at("nodes")) {
      TreeNode node;
      node.feature = jn.at("feature").get<int>();
      node.threshold = jn.at("threshold").get<double>();
      node.left = jn.at("left").get<int>();
      node.right = jn.at("right").get<int>();
      node.value = jn.at("prediction").get<double>();
      node.count = jn.at("n").get<int>();
      node.impurity = jn.at("impurity").get<double>();
      if (jn.contains("class_counts"))
        node.class_counts = jn.at("class_counts").get<std::vector<int>>();
      tree.nodes.push_back(std::move(node));
    }
  } catch (const json::exception& e) {
    throw SchemaError(fmt::format("tree: {}", e.what()));
  }
  if (tree.nodes.empty()) throw SchemaError("tree: empty node array");
  const int n = static_cast<int>(tree.nodes.size());
  for (const auto& node : tree.nodes) {
    if (node.is_leaf()) continue;
    if (node.left <= 0 || node.left >= n || node.right <= 0 || node.right >= n)
      throw SchemaError("tree: child index out of range");
  }
  // PathIds are not serialized; reassign by left-to-right traversal.
  PathId next = 0;
  int visited = 0;
  auto assign = [&](auto&& self, int i) -> void {
    ++visited;
    if (visited > n) throw SchemaError("tree: node links form a cycle");
    if (tree.nodes[i].is_leaf()) {
      tree.nodes[i].path = next++;
      return;
    }
    self(self, tree.nodes[i].left);
    self(self, tree.nodes[i].right);
  };
  assign(assign, 0);
  if (visited != n) throw SchemaError("tree: unreachable nodes in array");
  return tree;
}

}  // namespace policyscope
