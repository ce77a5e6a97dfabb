#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "policyscope/common.hpp"

namespace policyscope {

// One rollout: per-timestep world states and neuron responses, plus the
// actions the policy emitted (kept for provenance, unused by metrics).
struct Episode {
  Matrix states;                   // T x d_s
  Matrix responses;                // T x d_z
  std::optional<Matrix> actions;   // T x d_a

  std::size_t length() const { return states.rows(); }
  bool operator==(const Episode&) const = default;
};

struct TrajectoryDataset {
  std::vector<std::string> state_names;  // length d_s
  std::vector<std::string> neuron_ids;   // length d_z
  std::vector<Episode> episodes;

  std::size_t d_s() const { return state_names.size(); }
  std::size_t d_z() const { return neuron_ids.size(); }
  std::size_t n_rows() const;

  // Enforces the structural invariants: per-episode dimensions match the
  // header lists, all values finite, at least one timestep overall.
  void validate() const;

  bool operator==(const TrajectoryDataset&) const = default;
};

// Episodes concatenated in episode order then time order. Row r of both
// matrices originates from the same (episode, t).
struct DatasetView {
  Matrix states_flat;     // N x d_s
  Matrix responses_flat;  // N x d_z
};

DatasetView flatten(const TrajectoryDataset& ds);

enum class DataFormat { json, csv_dir };

TrajectoryDataset load_dataset(const std::filesystem::path& path, DataFormat format);
void save_dataset(const TrajectoryDataset& ds, const std::filesystem::path& path,
                  DataFormat format);

// Picks csv_dir for directories, json otherwise.
DataFormat guess_format(const std::filesystem::path& path);

}  // namespace policyscope
