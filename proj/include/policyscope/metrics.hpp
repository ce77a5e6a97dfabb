#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json_fwd.hpp>

#include "policyscope/dataset.hpp"
#include "policyscope/info.hpp"
#include "policyscope/interpret.hpp"
#include "policyscope/kernels.hpp"

namespace policyscope {

enum class BinStrategy { equal_width, quantile };

// Maps each interpreted neuron's responses onto bin indices in [0, n_bins).
// Neuron index here means position in the interpretation, not the dataset
// column. equal_width spans the observed per-neuron [min, max]; quantile
// places edges at empirical quantiles (duplicates collapse).
struct Discretizer {
  int n_bins = 20;
  BinStrategy strategy = BinStrategy::equal_width;
  std::vector<double> lo, hi;               // equal_width ranges
  std::vector<std::vector<double>> edges;   // quantile internal edges

  static Discretizer fit(const Matrix& responses_flat, std::span<const int> cols,
                         int n_bins, BinStrategy strategy);
  // Convenience: derives the columns from (ds, pi).
  static Discretizer fit_for(const TrajectoryDataset& ds, const PolicyInterpretation& pi,
                             int n_bins, BinStrategy strategy);

  int bin(std::size_t neuron, double value) const;
  std::vector<int> bin_column(const Matrix& responses_flat, std::size_t neuron,
                              int col) const;
};

// One pseudo ground-truth factor: the binary occupancy of one decision
// path of one neuron's surrogate tree.
struct Factor {
  int neuron_index = 0;
  std::string neuron;
  PathId path = 0;
  std::vector<std::uint8_t> occupancy;  // length N
};

struct FactorSet {
  std::vector<Factor> factors;
  std::size_t n_rows = 0;
};

FactorSet build_factor_set(const PolicyInterpretation& pi,
                           const std::vector<std::vector<PathId>>& true_paths,
                           std::size_t n_rows);

struct MetricsConfig {
  TreeConfig tree = TreeConfig::surrogate_default();
  TreeConfig cls = TreeConfig::classifier_default();
  int n_bins = 20;
  BinStrategy strategy = BinStrategy::equal_width;
  int threads = 0;
};

struct MetricsReport {
  double variance = 0.0;
  double mig = 0.0;
  double modularity = 0.0;
  double path_accuracy = 0.0;
  double logic_conflict = 0.0;

  struct PerNeuron {
    std::string neuron;
    int n_paths = 0;
    double variance = 0.0;
    std::optional<double> modularity;      // empty when the neuron was skipped
    std::optional<double> path_accuracy;   // empty when no path has predicates
  };
  struct PerFactor {
    std::string neuron;
    PathId path = 0;
    double entropy = 0.0;
    double top_mi = 0.0;
    std::string top_neuron;
    std::optional<double> score;  // empty when degenerate (H = 0)
  };
  std::vector<PerNeuron> per_neuron;
  std::vector<PerFactor> per_factor;
  MetricsConfig config;

  nlohmann::json to_json() const;
  static std::string csv_header();
  std::string csv_row() const;
  std::string markdown() const;
};

// Table-level cores, shared by the public metrics and directly testable
// against hand-built contingency constructions.
double mig_from_tables(const kernels::MiTables& t,
                       std::vector<MetricsReport::PerFactor>* breakdown = nullptr);
double modularity_from_tables(const kernels::MiTables& t,
                              std::vector<std::optional<double>>* per_neuron = nullptr);

// Spec operations. Each takes a dataset plus an interpretation built on a
// compatible neuron set; the Discretizer must be aligned with pi.
double variance_metric(const TrajectoryDataset& ds, const PolicyInterpretation& pi,
                       const Discretizer& disc);
double mig_metric(const TrajectoryDataset& ds, const PolicyInterpretation& pi,
                  const Discretizer& disc);
double modularity_metric(const TrajectoryDataset& ds, const PolicyInterpretation& pi,
                         const Discretizer& disc);
double path_accuracy(const TrajectoryDataset& ds, const PolicyInterpretation& pi);
double conflict_metric(const TrajectoryDataset& ds, const PolicyInterpretation& pi);

MetricsReport compute_metrics(const TrajectoryDataset& ds, const PolicyInterpretation& pi,
                              const MetricsConfig& cfg);

// Full pipeline per grid cell (surrogate ccp_alpha x min_leaf_fraction);
// the classifier config stays fixed. Reports carry their cell in the
// config echo, ordered ccp-major.
std::vector<MetricsReport> hyperparameter_sweep(const TrajectoryDataset& ds,
                                                std::span<const std::string> neurons,
                                                const MetricsConfig& base,
                                                std::span<const double> ccp_values,
                                                std::span<const double> leaf_values);

std::string sweep_csv(std::span<const MetricsReport> reports);
std::string sweep_markdown(std::span<const MetricsReport> reports);

}  // namespace policyscope
