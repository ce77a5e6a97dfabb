#include "policyscope/kernels.hpp"

#include <cstdint>
#include <exception>

#include <fmt/format.h>

#include "policyscope/info.hpp"

namespace policyscope::kernels {

namespace {

// OpenMP loop wrapper: per-item work writes to its own slot; exceptions
// are captured and rethrown on the calling thread.
template <typename Fn>
void parallel_loop(std::int64_t n, int n_threads, Fn&& fn) {
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic) num_threads(n_threads) if (n_threads > 1)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

NeuronInterpreter build_one(const DatasetView& view, const std::string& id, int col,
                            const TreeConfig& tree_cfg, const TreeConfig& cls_cfg) {
  NeuronInterpreter ni;
  ni.neuron = id;
  const std::vector<double> z = view.responses_flat.column(col);
  ni.surrogate = fit_regression(view.states_flat, z, tree_cfg);

  // D_dp: each row's response labelled with its surrogate decision path.
  const std::size_t n = view.states_flat.rows();
  std::vector<int> labels(n);
  Matrix z_col(n, 1);
  for (std::size_t r = 0; r < n; ++r) {
    labels[r] = ni.surrogate.path_of(view.states_flat.row(r));
    z_col(r, 0) = z[r];
  }
  ni.classifier = fit_classification(z_col, labels, cls_cfg);

  const auto paths = ni.surrogate.enumerate_paths();
  ni.programs.reserve(paths.size());
  for (PathId k = 0; k < static_cast<PathId>(paths.size()); ++k)
    ni.programs.push_back(program_of(paths, k, id));
  return ni;
}

std::vector<PathId> true_paths_one(const NeuronInterpreter& ni, const Matrix& states) {
  std::vector<PathId> out(states.rows());
  for (std::size_t r = 0; r < states.rows(); ++r)
    out[r] = ni.surrogate.path_of(states.row(r));
  return out;
}

std::vector<PathId> predicted_paths_one(const NeuronInterpreter& ni,
                                        const Matrix& responses, int col) {
  std::vector<PathId> out(responses.rows());
  for (std::size_t r = 0; r < responses.rows(); ++r) {
    const double z[1] = {responses(r, col)};
    out[r] = static_cast<PathId>(ni.classifier.predict(z));
  }
  return out;
}

double conflict_fraction_one(std::span<const NeuronInterpreter> neurons,
                             const std::vector<std::vector<PathId>>& predicted,
                             std::size_t d_s, std::size_t row) {
  std::vector<Interval> combined(d_s);
  std::vector<int> constrainers(d_s, 0);
  std::vector<char> touched(d_s);
  for (std::size_t i = 0; i < neurons.size(); ++i) {
    const LogicProgram& prog = neurons[i].programs[predicted[i][row]];
    std::fill(touched.begin(), touched.end(), 0);
    for (const auto& p : prog.predicates) {
      Interval& iv = combined[p.feature];
      if (p.leq)
        iv.hi = std::min(iv.hi, p.threshold);
      else
        iv.lo = std::max(iv.lo, p.threshold);
      touched[p.feature] = 1;
    }
    for (std::size_t d = 0; d < d_s; ++d) constrainers[d] += touched[d];
  }
  int eligible = 0, clashing = 0;
  for (std::size_t d = 0; d < d_s; ++d) {
    if (constrainers[d] < 2) continue;
    ++eligible;
    if (combined[d].empty()) ++clashing;
  }
  return eligible == 0 ? 0.0 : static_cast<double>(clashing) / eligible;
}

double mi_z_occupancy(const std::vector<int>& z,
                      const std::vector<std::uint8_t>& occ) {
  return mutual_information(std::span<const int>(z), std::span<const std::uint8_t>(occ));
}

}  // namespace

std::vector<NeuronInterpreter> build_neurons(const DatasetView& view,
                                             std::span<const std::string> ids,
                                             std::span<const int> cols,
                                             const TreeConfig& tree_cfg,
                                             const TreeConfig& cls_cfg, int n_threads) {
  if (ids.size() != cols.size())
    throw SchemaError("build_neurons: ids and cols must align");
  std::vector<NeuronInterpreter> out(ids.size());
  parallel_loop(static_cast<std::int64_t>(ids.size()), n_threads, [&](std::size_t i) {
    out[i] = build_one(view, ids[i], cols[i], tree_cfg, cls_cfg);
  });
  return out;
}

std::vector<std::vector<PathId>> true_paths(std::span<const NeuronInterpreter> neurons,
                                            const Matrix& states_flat, int n_threads) {
  std::vector<std::vector<PathId>> out(neurons.size());
  parallel_loop(static_cast<std::int64_t>(neurons.size()), n_threads, [&](std::size_t i) {
    out[i] = true_paths_one(neurons[i], states_flat);
  });
  return out;
}

std::vector<std::vector<PathId>> predicted_paths(std::span<const NeuronInterpreter> neurons,
                                                 const Matrix& responses_flat,
                                                 std::span<const int> cols, int n_threads) {
  if (neurons.size() != cols.size())
    throw SchemaError("predicted_paths: neurons and cols must align");
  std::vector<std::vector<PathId>> out(neurons.size());
  parallel_loop(static_cast<std::int64_t>(neurons.size()), n_threads, [&](std::size_t i) {
    out[i] = predicted_paths_one(neurons[i], responses_flat, cols[i]);
  });
  return out;
}

MiTables mi_tables(const std::vector<std::vector<int>>& z_bins,
                   const std::vector<std::vector<std::uint8_t>>& occupancy,
                   int n_threads) {
  MiTables t;
  const std::size_t n_i = z_bins.size();
  const std::size_t k = occupancy.size();
  t.zp.assign(n_i, std::vector<double>(k, 0.0));
  t.pp.assign(k, std::vector<double>(k, 0.0));
  t.hp.resize(k);

  parallel_loop(static_cast<std::int64_t>(n_i * k), n_threads, [&](std::size_t idx) {
    const std::size_t i = idx / k, f = idx % k;
    t.zp[i][f] = mi_z_occupancy(z_bins[i], occupancy[f]);
  });

  // Upper triangle (incl. diagonal), mirrored afterwards.
  const std::size_t pairs = k * (k + 1) / 2;
  parallel_loop(static_cast<std::int64_t>(pairs), n_threads, [&](std::size_t idx) {
    // Unrank idx -> (a, b) with a <= b.
    std::size_t a = 0, remaining = idx;
    while (remaining >= k - a) {
      remaining -= k - a;
      ++a;
    }
    const std::size_t b = a + remaining;
    t.pp[a][b] = mutual_information(std::span<const std::uint8_t>(occupancy[a]),
                                    std::span<const std::uint8_t>(occupancy[b]));
  });
  for (std::size_t a = 0; a < k; ++a) {
    t.hp[a] = entropy(std::span<const std::uint8_t>(occupancy[a]));
    for (std::size_t b = 0; b < a; ++b) t.pp[a][b] = t.pp[b][a];
  }
  return t;
}

std::vector<double> conflict_fractions(std::span<const NeuronInterpreter> neurons,
                                       const std::vector<std::vector<PathId>>& predicted,
                                       std::size_t d_s, int n_threads) {
  if (neurons.size() != predicted.size())
    throw SchemaError("conflict_fractions: neurons and predictions must align");
  const std::size_t n = neurons.empty() ? 0 : predicted.front().size();
  std::vector<double> out(n);
  parallel_loop(static_cast<std::int64_t>(n), n_threads, [&](std::size_t row) {
    out[row] = conflict_fraction_one(neurons, predicted, d_s, row);
  });
  return out;
}

namespace serial {

std::vector<NeuronInterpreter> build_neurons(const DatasetView& view,
                                             std::span<const std::string> ids,
                                             std::span<const int> cols,
                                             const TreeConfig& tree_cfg,
                                             const TreeConfig& cls_cfg) {
  if (ids.size() != cols.size())
    throw SchemaError("build_neurons: ids and cols must align");
  std::vector<NeuronInterpreter> out;
  out.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i)
    out.push_back(build_one(view, ids[i], cols[i], tree_cfg, cls_cfg));
  return out;
}

std::vector<std::vector<PathId>> true_paths(std::span<const NeuronInterpreter> neurons,
                                            const Matrix& states_flat) {
  std::vector<std::vector<PathId>> out;
  out.reserve(neurons.size());
  for (const auto& ni : neurons) out.push_back(true_paths_one(ni, states_flat));
  return out;
}

std::vector<std::vector<PathId>> predicted_paths(std::span<const NeuronInterpreter> neurons,
                                                 const Matrix& responses_flat,
                                                 std::span<const int> cols) {
  if (neurons.size() != cols.size())
    throw SchemaError("predicted_paths: neurons and cols must align");
  std::vector<std::vector<PathId>> out;
  out.reserve(neurons.size());
  for (std::size_t i = 0; i < neurons.size(); ++i)
    out.push_back(predicted_paths_one(neurons[i], responses_flat, cols[i]));
  return out;
}

MiTables mi_tables(const std::vector<std::vector<int>>& z_bins,
                   const std::vector<std::vector<std::uint8_t>>& occupancy) {
  MiTables t;
  const std::size_t n_i = z_bins.size();
  const std::size_t k = occupancy.size();
  t.zp.assign(n_i, std::vector<double>(k, 0.0));
  t.pp.assign(k, std::vector<double>(k, 0.0));
  t.hp.resize(k);
  for (std::size_t i = 0; i < n_i; ++i)
    for (std::size_t f = 0; f < k; ++f) t.zp[i][f] = mi_z_occupancy(z_bins[i], occupancy[f]);
  for (std::size_t a = 0; a < k; ++a) {
    t.hp[a] = entropy(std::span<const std::uint8_t>(occupancy[a]));
    for (std::size_t b = a; b < k; ++b)
      t.pp[a][b] = mutual_information(std::span<const std::uint8_t>(occupancy[a]),
                                      std::span<const std::uint8_t>(occupancy[b]));
    for (std::size_t b = 0; b < a; ++b) t.pp[a][b] = t.pp[b][a];
  }
  return t;
}

std::vector<double> conflict_fractions(std::span<const NeuronInterpreter> neurons,
                                       const std::vector<std::vector<PathId>>& predicted,
                                       std::size_t d_s) {
  if (neurons.size() != predicted.size())
    throw SchemaError("conflict_fractions: neurons and predictions must align");
  const std::size_t n = neurons.empty() ? 0 : predicted.front().size();
  std::vector<double> out(n);
  for (std::size_t row = 0; row < n; ++row)
    out[row] = conflict_fraction_one(neurons, predicted, d_s, row);
  return out;
}

}  // namespace serial
}  // namespace policyscope::kernels
