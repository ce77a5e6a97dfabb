#include "policyscope/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <fmt/format.h>
#include <json.hpp>

#include "policyscope/parallel.hpp"

namespace policyscope {

using nlohmann::json;

Discretizer Discretizer::fit(const Matrix& responses_flat, std::span<const int> cols,
                             int n_bins, BinStrategy strategy) {
  if (n_bins < 1) throw SchemaError("Discretizer: n_bins must be >= 1");
  if (responses_flat.rows() == 0) throw DataError("Discretizer: empty responses");
  Discretizer d;
  d.n_bins = n_bins;
  d.strategy = strategy;
  for (int col : cols) {
    std::vector<double> v = responses_flat.column(col);
    if (strategy == BinStrategy::equal_width) {
      auto [mn, mx] = std::minmax_element(v.begin(), v.end());
      d.lo.push_back(*mn);
      d.hi.push_back(*mx);
      d.edges.emplace_back();
    } else {
      std::sort(v.begin(), v.end());
      std::vector<double> edges;
      for (int k = 1; k < n_bins; ++k) {
        // Edge at the k/n_bins empirical quantile (nearest-rank);
        // duplicate edges collapse, so sparse data yields fewer bins.
        const auto rank = static_cast<std::size_t>(
            std::ceil(static_cast<double>(k) * v.size() / n_bins));
        const double q = v[std::min(v.size() - 1, rank > 0 ? rank - 1 : 0)];
        if (edges.empty() || q > edges.back()) edges.push_back(q);
      }
      d.lo.push_back(0.0);
      d.hi.push_back(0.0);
      d.edges.push_back(std::move(edges));
    }
  }
  return d;
}

Discretizer Discretizer::fit_for(const TrajectoryDataset& ds, const PolicyInterpretation& pi,
                                 int n_bins, BinStrategy strategy) {
  const DatasetView view = flatten(ds);
  const std::vector<int> cols = resolve_neuron_columns(ds, pi);
  return fit(view.responses_flat, cols, n_bins, strategy);
}

int Discretizer::bin(std::size_t neuron, double value) const {
  if (strategy == BinStrategy::equal_width) {
    const double span = hi[neuron] - lo[neuron];
    if (!(span > 0.0)) return 0;  // constant neuron
    int b = static_cast<int>(std::floor((value - lo[neuron]) / span * n_bins));
    return std::clamp(b, 0, n_bins - 1);
  }
  const auto& e = edges[neuron];
  // Bins are (e[i-1], e[i]]: count edges strictly below value.
  return static_cast<int>(std::lower_bound(e.begin(), e.end(), value) - e.begin());
}

std::vector<int> Discretizer::bin_column(const Matrix& responses_flat, std::size_t neuron,
                                         int col) const {
  std::vector<int> out(responses_flat.rows());
  for (std::size_t r = 0; r < responses_flat.rows(); ++r)
    out[r] = bin(neuron, responses_flat(r, col));
  return out;
}

FactorSet build_factor_set(const PolicyInterpretation& pi,
                           const std::vector<std::vector<PathId>>& true_paths,
                           std::size_t n_rows) {
  FactorSet fs;
  fs.n_rows = n_rows;
  for (std::size_t i = 0; i < pi.interpreters.size(); ++i) {
    const int n_paths = pi.interpreters[i].surrogate.n_leaves();
    for (PathId k = 0; k < n_paths; ++k) {
      Factor f;
      f.neuron_index = static_cast<int>(i);
      f.neuron = pi.interpreters[i].neuron;
      f.path = k;
      f.occupancy.assign(n_rows, 0);
      fs.factors.push_back(std::move(f));
    }
  }
  std::size_t base = 0;
  for (std::size_t i = 0; i < pi.interpreters.size(); ++i) {
    for (std::size_t r = 0; r < n_rows; ++r)
      fs.factors[base + true_paths[i][r]].occupancy[r] = 1;
    base += pi.interpreters[i].surrogate.n_leaves();
  }
  return fs;
}

namespace {

// Population variance with an exact-zero fast path for constant groups.
double population_variance(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  if (*mn == *mx) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double sse = 0.0;
  for (double x : v) sse += (x - mean) * (x - mean);
  return sse / static_cast<double>(v.size());
}

struct PipelineTables {
  DatasetView view;
  std::vector<int> cols;
  std::vector<std::vector<int>> z_bins;
  std::vector<std::vector<PathId>> true_p;
  FactorSet factors;
};

PipelineTables prepare(const TrajectoryDataset& ds, const PolicyInterpretation& pi,
                       const Discretizer& disc, int threads) {
  PipelineTables t;
  t.view = flatten(ds);
  t.cols = resolve_neuron_columns(ds, pi);
  t.z_bins.reserve(pi.interpreters.size());
  for (std::size_t i = 0; i < pi.interpreters.size(); ++i)
    t.z_bins.push_back(disc.bin_column(t.view.responses_flat, i, t.cols[i]));
  t.true_p = kernels::true_paths(pi.interpreters, t.view.states_flat, threads);
  t.factors = build_factor_set(pi, t.true_p, t.view.states_flat.rows());
  return t;
}

double variance_core(const PolicyInterpretation& pi, const PipelineTables& t, int n_bins,
                     std::vector<MetricsReport::PerNeuron>* breakdown) {
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < pi.interpreters.size(); ++i) {
    const int n_paths = pi.interpreters[i].surrogate.n_leaves();
    std::vector<std::vector<double>> groups(n_paths);
    for (std::size_t r = 0; r < t.z_bins[i].size(); ++r)
      groups[t.true_p[i][r]].push_back(static_cast<double>(t.z_bins[i][r]) / n_bins);
    double sum = 0.0;
    int counted = 0;
    for (const auto& g : groups) {
      if (g.empty()) continue;  // possible only when evaluating off the build set
      sum += population_variance(g);
      ++counted;
    }
    const double neuron_var = counted > 0 ? sum / counted : 0.0;
    if (breakdown) {
      auto& row = (*breakdown)[i];
      row.n_paths = n_paths;
      row.variance = neuron_var;
    }
    if (counted > 0) {
      total += neuron_var;
      ++used;
    }
  }
  if (used == 0) throw UndefinedMetricError("variance: no neuron has occupied paths");
  return total / static_cast<double>(used);
}

std::vector<std::vector<std::uint8_t>> occupancies(const FactorSet& fs) {
  std::vector<std::vector<std::uint8_t>> out;
  out.reserve(fs.factors.size());
  for (const auto& f : fs.factors) out.push_back(f.occupancy);
  return out;
}

double path_accuracy_core(const PolicyInterpretation& pi, const Matrix& states_flat,
                          const std::vector<std::vector<PathId>>& pred,
                          std::vector<MetricsReport::PerNeuron>* breakdown) {
  const std::size_t n_rows = states_flat.rows();
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < pi.interpreters.size(); ++i) {
    const auto& programs = pi.interpreters[i].programs;
    bool any_predicates = false;
    for (const auto& prog : programs) any_predicates |= !prog.predicates.empty();
    if (!any_predicates) continue;  // unsplit surrogate, excluded from the mean

    double acc = 0.0;
    for (std::size_t r = 0; r < n_rows; ++r) {
      const LogicProgram& prog = programs[pred[i][r]];
      if (prog.predicates.empty()) {
        acc += 1.0;  // vacuously true
        continue;
      }
      const auto x = states_flat.row(r);
      int holds = 0;
      for (const auto& p : prog.predicates)
        holds += p.leq ? x[p.feature] <= p.threshold : x[p.feature] > p.threshold;
      acc += static_cast<double>(holds) / static_cast<double>(prog.predicates.size());
    }
    acc /= static_cast<double>(n_rows);
    if (breakdown) (*breakdown)[i].path_accuracy = acc;
    total += acc;
    ++used;
  }
  if (used == 0)
    throw UndefinedMetricError("path_accuracy: no interpreted neuron has predicates");
  return total / static_cast<double>(used);
}

}  // namespace

double mig_from_tables(const kernels::MiTables& t,
                       std::vector<MetricsReport::PerFactor>* breakdown) {
  const std::size_t n_i = t.zp.size();
  const std::size_t k_total = t.hp.size();
  if (k_total < 2) throw UndefinedMetricError("mig: needs at least 2 factors");

  double total = 0.0;
  std::size_t used = 0, degenerate = 0;
  for (std::size_t k = 0; k < k_total; ++k) {
    if (!(t.hp[k] > 0.0)) {
      ++degenerate;
      continue;
    }
    std::size_t i_star = 0;
    for (std::size_t i = 1; i < n_i; ++i)
      if (t.zp[i][k] > t.zp[i_star][k]) i_star = i;

    // Calibrated runner-up: the Lemma-1 lower bound of the corrected
    // mutual information, maximized over the other neurons. No other
    // neuron means the maximum over the empty set, taken as 0.
    double runner = 0.0;
    for (std::size_t j = 0; j < n_i; ++j) {
      if (j == i_star) continue;
      std::size_t k_j = 0;
      for (std::size_t l = 1; l < k_total; ++l)
        if (t.zp[j][l] > t.zp[j][k_j]) k_j = l;
      runner = std::max(runner, std::max(0.0, t.zp[j][k] - t.pp[k][k_j]));
    }
    const double score = (t.zp[i_star][k] - runner) / t.hp[k];
    if (breakdown) {
      auto& row = (*breakdown)[k];
      row.top_mi = t.zp[i_star][k];
      row.score = score;
    }
    total += score;
    ++used;
  }
  if (degenerate > 0)
    std::fprintf(stderr, "policyscope: mig skipped %zu degenerate factor(s)\n", degenerate);
  if (used == 0) throw UndefinedMetricError("mig: all factors degenerate");
  return total / static_cast<double>(used);
}

double modularity_from_tables(const kernels::MiTables& t,
                              std::vector<std::optional<double>>* per_neuron) {
  const std::size_t n_i = t.zp.size();
  const std::size_t k_total = t.hp.size();
  if (k_total < 2) throw UndefinedMetricError("modularity: needs at least 2 factors");

  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < n_i; ++i) {
    std::size_t k_star = 0;
    for (std::size_t l = 1; l < k_total; ++l)
      if (t.zp[i][l] > t.zp[i][k_star]) k_star = l;
    const double top = t.zp[i][k_star];
    if (!(top > 0.0)) continue;  // skipped neuron

    double off_target = 0.0;
    for (std::size_t k = 0; k < k_total; ++k) {
      if (k == k_star) continue;
      const double cal = std::max(0.0, t.zp[i][k] - t.pp[k][k_star]);
      off_target += cal * cal;
    }
    const double score =
        1.0 - off_target / (static_cast<double>(k_total - 1) * top * top);
    if (per_neuron) (*per_neuron)[i] = score;
    total += score;
    ++used;
  }
  if (used == 0) throw UndefinedMetricError("modularity: every neuron skipped");
  return total / static_cast<double>(used);
}

double variance_metric(const TrajectoryDataset& ds, const PolicyInterpretation& pi,
                       const Discretizer& disc) {
  const int threads = resolve_threads(0);
  const PipelineTables t = prepare(ds, pi, disc, threads);
  return variance_core(pi, t, disc.n_bins, nullptr);
}

double mig_metric(const TrajectoryDataset& ds, const PolicyInterpretation& pi,
                  const Discretizer& disc) {
  const int threads = resolve_threads(0);
  const PipelineTables t = prepare(ds, pi, disc, threads);
  const auto tables = kernels::mi_tables(t.z_bins, occupancies(t.factors), threads);
  return mig_from_tables(tables, nullptr);
}

double modularity_metric(const TrajectoryDataset& ds, const PolicyInterpretation& pi,
                         const Discretizer& disc) {
  const int threads = resolve_threads(0);
  const PipelineTables t = prepare(ds, pi, disc, threads);
  const auto tables = kernels::mi_tables(t.z_bins, occupancies(t.factors), threads);
  return modularity_from_tables(tables, nullptr);
}

double path_accuracy(const TrajectoryDataset& ds, const PolicyInterpretation& pi) {
  const int threads = resolve_threads(0);
  const DatasetView view = flatten(ds);
  const std::vector<int> cols = resolve_neuron_columns(ds, pi);
  const auto pred = kernels::predicted_paths(pi.interpreters, view.responses_flat, cols, threads);
  return path_accuracy_core(pi, view.states_flat, pred, nullptr);
}

double conflict_metric(const TrajectoryDataset& ds, const PolicyInterpretation& pi) {
  const int threads = resolve_threads(0);
  const DatasetView view = flatten(ds);
  const std::vector<int> cols = resolve_neuron_columns(ds, pi);
  const auto pred = kernels::predicted_paths(pi.interpreters, view.responses_flat, cols, threads);
  const auto fractions =
      kernels::conflict_fractions(pi.interpreters, pred, ds.d_s(), threads);
  if (fractions.empty()) throw DataError("conflict_metric: no timesteps");
  double sum = 0.0;
  for (double f : fractions) sum += f;
  return sum / static_cast<double>(fractions.size());
}

MetricsReport compute_metrics(const TrajectoryDataset& ds, const PolicyInterpretation& pi,
                              const MetricsConfig& cfg) {
  const int threads = resolve_threads(cfg.threads);
  const Discretizer disc = Discretizer::fit_for(ds, pi, cfg.n_bins, cfg.strategy);
  const PipelineTables t = prepare(ds, pi, disc, threads);

  MetricsReport report;
  report.config = cfg;
  report.per_neuron.resize(pi.interpreters.size());
  for (std::size_t i = 0; i < pi.interpreters.size(); ++i)
    report.per_neuron[i].neuron = pi.interpreters[i].neuron;
  report.per_factor.resize(t.factors.factors.size());
  for (std::size_t k = 0; k < t.factors.factors.size(); ++k) {
    report.per_factor[k].neuron = t.factors.factors[k].neuron;
    report.per_factor[k].path = t.factors.factors[k].path;
  }

  report.variance = variance_core(pi, t, disc.n_bins, &report.per_neuron);

  const auto tables = kernels::mi_tables(t.z_bins, occupancies(t.factors), threads);
  for (std::size_t k = 0; k < t.factors.factors.size(); ++k) {
    report.per_factor[k].entropy = tables.hp[k];
    std::size_t i_star = 0;
    for (std::size_t i = 1; i < tables.zp.size(); ++i)
      if (tables.zp[i][k] > tables.zp[i_star][k]) i_star = i;
    report.per_factor[k].top_neuron = pi.interpreters[i_star].neuron;
  }
  report.mig = mig_from_tables(tables, &report.per_factor);
  std::vector<std::optional<double>> per_neuron_mod(pi.interpreters.size());
  report.modularity = modularity_from_tables(tables, &per_neuron_mod);
  for (std::size_t i = 0; i < per_neuron_mod.size(); ++i)
    report.per_neuron[i].modularity = per_neuron_mod[i];

  const auto pred =
      kernels::predicted_paths(pi.interpreters, t.view.responses_flat, t.cols, threads);
  report.path_accuracy = path_accuracy_core(pi, t.view.states_flat, pred, &report.per_neuron);

  const auto fractions = kernels::conflict_fractions(pi.interpreters, pred, ds.d_s(), threads);
  double sum = 0.0;
  for (double f : fractions) sum += f;
  report.logic_conflict = sum / static_cast<double>(fractions.size());
  return report;
}

std::vector<MetricsReport> hyperparameter_sweep(const TrajectoryDataset& ds,
                                                std::span<const std::string> neurons,
                                                const MetricsConfig& base,
                                                std::span<const double> ccp_values,
                                                std::span<const double> leaf_values) {
  if (ccp_values.empty() || leaf_values.empty())
    throw SchemaError("hyperparameter_sweep: grid must be non-empty");
  std::vector<MetricsReport> reports;
  reports.reserve(ccp_values.size() * leaf_values.size());
  for (double ccp : ccp_values) {
    for (double leaf : leaf_values) {
      MetricsConfig cfg = base;
      cfg.tree.ccp_alpha = ccp;
      cfg.tree.min_leaf_fraction = leaf;
      const PolicyInterpretation pi =
          build_interpretation(ds, neurons, cfg.tree, cfg.cls, cfg.threads);
      reports.push_back(compute_metrics(ds, pi, cfg));
    }
  }
  return reports;
}

namespace {

json config_to_json(const MetricsConfig& cfg) {
  json j;
  j["tree"] = {{"criterion", cfg.tree.criterion == SplitCriterion::friedman_mse
                                 ? "friedman_mse"
                                 : "gini"},
               {"max_depth", cfg.tree.max_depth},
               {"min_leaf_fraction", cfg.tree.min_leaf_fraction},
               {"ccp_alpha", cfg.tree.ccp_alpha}};
  j["cls"] = {{"criterion",
               cfg.cls.criterion == SplitCriterion::friedman_mse ? "friedman_mse" : "gini"},
              {"max_depth", cfg.cls.max_depth},
              {"min_leaf_fraction", cfg.cls.min_leaf_fraction},
              {"ccp_alpha", cfg.cls.ccp_alpha}};
  j["n_bins"] = cfg.n_bins;
  j["strategy"] = cfg.strategy == BinStrategy::equal_width ? "equal_width" : "quantile";
  return j;
}

}  // namespace

json MetricsReport::to_json() const {
  json j;
  j["variance"] = variance;
  j["mig"] = mig;
  j["modularity"] = modularity;
  j["path_accuracy"] = path_accuracy;
  j["logic_conflict"] = logic_conflict;
  j["config"] = config_to_json(config);
  json jn = json::array();
  for (const auto& n : per_neuron) {
    json row;
    row["neuron"] = n.neuron;
    row["n_paths"] = n.n_paths;
    row["variance"] = n.variance;
    row["modularity"] = n.modularity ? json(*n.modularity) : json(nullptr);
    row["path_accuracy"] = n.path_accuracy ? json(*n.path_accuracy) : json(nullptr);
    jn.push_back(std::move(row));
  }
  j["per_neuron"] = std::move(jn);
  json jf = json::array();
  for (const auto& f : per_factor) {
    json row;
    row["neuron"] = f.neuron;
    row["path"] = f.path;
    row["entropy"] = f.entropy;
    row["top_mi"] = f.top_mi;
    row["top_neuron"] = f.top_neuron;
    row["score"] = f.score ? json(*f.score) : json(nullptr);
    jf.push_back(std::move(row));
  }
  j["per_factor"] = std::move(jf);
  return j;
}

std::string MetricsReport::csv_header() {
  return "variance,mig,modularity,path_accuracy,logic_conflict";
}

std::string MetricsReport::csv_row() const {
  return fmt::format("{},{},{},{},{}", variance, mig, modularity, path_accuracy,
                     logic_conflict);
}

std::string MetricsReport::markdown() const {
  std::string out;
  out += "| Variance ↓ | MI-Gap ↑ | Modularity ↑ | Decision Path Accuracy ↑ | Logic Conflict ↓ |\n";
  out += "|---|---|---|---|---|\n";
  out += fmt::format("| {:.4f} | {:.4f} | {:.4f} | {:.4f} | {:.4f} |\n", variance, mig,
                     modularity, path_accuracy, logic_conflict);
  return out;
}

std::string sweep_csv(std::span<const MetricsReport> reports) {
  std::string out = "ccp_alpha,min_leaf_fraction," + MetricsReport::csv_header() + "\n";
  for (const auto& r : reports)
    out += fmt::format("{},{},{}\n", r.config.tree.ccp_alpha,
                       r.config.tree.min_leaf_fraction, r.csv_row());
  return out;
}

std::string sweep_markdown(std::span<const MetricsReport> reports) {
  std::string out =
      "| CCP α | Leaf fraction | Variance ↓ | MI-Gap ↑ | Modularity ↑ | "
      "Decision Path Accuracy ↑ | Logic Conflict ↓ |\n|---|---|---|---|---|---|---|\n";
  for (const auto& r : reports)
    out += fmt::format("| {} | {} | {:.4f} | {:.4f} | {:.4f} | {:.4f} | {:.4f} |\n",
                       r.config.tree.ccp_alpha, r.config.tree.min_leaf_fraction, r.variance,
                       r.mig, r.modularity, r.path_accuracy, r.logic_conflict);
  return out;
}

}  // namespace policyscope
