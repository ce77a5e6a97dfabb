#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "policyscope/common.hpp"
#include "policyscope/interpret.hpp"
#include "policyscope/tree.hpp"

namespace policyscope::kernels {

// Hot loops of the pipeline, OpenMP-parallel over neurons, table pairs,
// or rows. Each kernel has a serial reference twin in kernels::serial
// with identical output (tests compare them bit for bit; the benchmark
// tool compares their runtimes). Per-item results land in preallocated
// slots and reductions happen serially afterwards, so outputs do not
// depend on the thread count.

// Fits one NeuronInterpreter per selected response column.
std::vector<NeuronInterpreter> build_neurons(const DatasetView& view,
                                             std::span<const std::string> ids,
                                             std::span<const int> cols,
                                             const TreeConfig& tree_cfg,
                                             const TreeConfig& cls_cfg,
                                             int n_threads);

// Surrogate decision path of every row, per interpreter.
std::vector<std::vector<PathId>> true_paths(std::span<const NeuronInterpreter> neurons,
                                            const Matrix& states_flat, int n_threads);

// Classifier-predicted path of every row, per interpreter. cols maps each
// interpreter onto its response column.
std::vector<std::vector<PathId>> predicted_paths(std::span<const NeuronInterpreter> neurons,
                                                 const Matrix& responses_flat,
                                                 std::span<const int> cols, int n_threads);

// Mutual-information tables between discretized responses and factor
// occupancies (zp), among factors (pp, symmetric), plus factor entropies.
struct MiTables {
  std::vector<std::vector<double>> zp;  // [neuron][factor]
  std::vector<std::vector<double>> pp;  // [factor][factor]
  std::vector<double> hp;               // [factor]
};
MiTables mi_tables(const std::vector<std::vector<int>>& z_bins,
                   const std::vector<std::vector<std::uint8_t>>& occupancy,
                   int n_threads);

// Per-row conflict fraction among the programs selected by the predicted
// paths: of the dimensions constrained by >= 2 neurons, the share whose
// interval intersection is empty.
std::vector<double> conflict_fractions(std::span<const NeuronInterpreter> neurons,
                                       const std::vector<std::vector<PathId>>& predicted,
                                       std::size_t d_s, int n_threads);

namespace serial {

std::vector<NeuronInterpreter> build_neurons(const DatasetView& view,
                                             std::span<const std::string> ids,
                                             std::span<const int> cols,
                                             const TreeConfig& tree_cfg,
                                             const TreeConfig& cls_cfg);
std::vector<std::vector<PathId>> true_paths(std::span<const NeuronInterpreter> neurons,
                                            const Matrix& states_flat);
std::vector<std::vector<PathId>> predicted_paths(std::span<const NeuronInterpreter> neurons,
                                                 const Matrix& responses_flat,
                                                 std::span<const int> cols);
MiTables mi_tables(const std::vector<std::vector<int>>& z_bins,
                   const std::vector<std::vector<std::uint8_t>>& occupancy);
std::vector<double> conflict_fractions(std::span<const NeuronInterpreter> neurons,
                                       const std::vector<std::vector<PathId>>& predicted,
                                       std::size_t d_s);

}  // namespace serial
}  // namespace policyscope::kernels
