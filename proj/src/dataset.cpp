#include "policyscope/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

namespace policyscope {

namespace fs = std::filesystem;
using nlohmann::json;

std::size_t TrajectoryDataset::n_rows() const {
  std::size_t n = 0;
  for (const auto& ep : episodes) n += ep.length();
  return n;
}

namespace {

void check_finite(const Matrix& m, std::size_t ep, const char* what) {
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c)
      if (!std::isfinite(m(r, c)))
        throw DataError(fmt::format("episode {}, timestep {}: {}[{}] is not finite",
                                    ep, r, what, c));
}

}  // namespace

void TrajectoryDataset::validate() const {
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    const Episode& ep = episodes[e];
    if (ep.states.cols() != d_s())
      throw SchemaError(fmt::format("episode {}: states have {} columns, expected d_s={}",
                                    e, ep.states.cols(), d_s()));
    if (ep.responses.cols() != d_z())
      throw SchemaError(fmt::format("episode {}: responses have {} columns, expected d_z={}",
                                    e, ep.responses.cols(), d_z()));
    if (ep.responses.rows() != ep.states.rows())
      throw SchemaError(fmt::format("episode {}: states have T={} but responses T={}",
                                    e, ep.states.rows(), ep.responses.rows()));
    if (ep.actions && ep.actions->rows() != ep.states.rows())
      throw SchemaError(fmt::format("episode {}: states have T={} but actions T={}",
                                    e, ep.states.rows(), ep.actions->rows()));
    check_finite(ep.states, e, "states");
    check_finite(ep.responses, e, "responses");
    if (ep.actions) check_finite(*ep.actions, e, "actions");
  }
  if (n_rows() == 0) throw DataError("dataset has no timesteps");
}

DatasetView flatten(const TrajectoryDataset& ds) {
  const std::size_t n = ds.n_rows();
  DatasetView view{Matrix(n, ds.d_s()), Matrix(n, ds.d_z())};
  std::size_t row = 0;
  for (const auto& ep : ds.episodes) {
    for (std::size_t t = 0; t < ep.length(); ++t, ++row) {
      for (std::size_t c = 0; c < ds.d_s(); ++c) view.states_flat(row, c) = ep.states(t, c);
      for (std::size_t c = 0; c < ds.d_z(); ++c)
        view.responses_flat(row, c) = ep.responses(t, c);
    }
  }
  return view;
}

namespace {

std::vector<std::string> read_name_list(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array())
    throw SchemaError(fmt::format("missing or non-array field '{}'", key));
  std::vector<std::string> out;
  for (const auto& v : j.at(key)) {
    if (v.is_string())
      out.push_back(v.get<std::string>());
    else if (v.is_number_integer())
      out.push_back(std::to_string(v.get<long long>()));
    else
      throw SchemaError(fmt::format("field '{}' entries must be strings or integers", key));
  }
  return out;
}

Matrix matrix_from_json(const json& j, std::size_t episode, const char* what) {
  if (!j.is_array())
    throw SchemaError(fmt::format("episode {}: '{}' must be an array of rows", episode, what));
  std::vector<std::vector<double>> rows;
  rows.reserve(j.size());
  for (const auto& row : j) {
    if (!row.is_array())
      throw SchemaError(fmt::format("episode {}: '{}' row must be an array", episode, what));
    std::vector<double> vals;
    vals.reserve(row.size());
    for (const auto& v : row) {
      if (!v.is_number())
        throw SchemaError(fmt::format("episode {}: '{}' contains a non-number", episode, what));
      vals.push_back(v.get<double>());
    }
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) return Matrix(0, 0);
  const std::size_t cols = rows.front().size();
  for (std::size_t r = 0; r < rows.size(); ++r)
    if (rows[r].size() != cols)
      throw SchemaError(fmt::format("episode {}: '{}' row {} has {} values, expected {}",
                                    episode, what, r, rows[r].size(), cols));
  return Matrix::from_rows(rows);
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

TrajectoryDataset dataset_from_json(const json& j) {
  TrajectoryDataset ds;
  ds.state_names = read_name_list(j, "state_names");
  ds.neuron_ids = read_name_list(j, "neuron_ids");
  if (!j.contains("episodes") || !j.at("episodes").is_array())
    throw SchemaError("missing or non-array field 'episodes'");
  std::size_t e = 0;
  for (const auto& jep : j.at("episodes")) {
    Episode ep;
    if (!jep.contains("states") || !jep.contains("responses"))
      throw SchemaError(fmt::format("episode {}: needs 'states' and 'responses'", e));
    ep.states = matrix_from_json(jep.at("states"), e, "states");
    ep.responses = matrix_from_json(jep.at("responses"), e, "responses");
    // Zero-row matrices carry no column count; pin them to the header.
    if (ep.states.rows() == 0) ep.states = Matrix(0, ds.d_s());
    if (ep.responses.rows() == 0) ep.responses = Matrix(0, ds.d_z());
    if (jep.contains("actions") && !jep.at("actions").is_null())
      ep.actions = matrix_from_json(jep.at("actions"), e, "actions");
    ds.episodes.push_back(std::move(ep));
    ++e;
  }
  ds.validate();
  return ds;
}

json dataset_to_json(const TrajectoryDataset& ds) {
  json j;
  j["state_names"] = ds.state_names;
  j["neuron_ids"] = ds.neuron_ids;
  json eps = json::array();
  for (const auto& ep : ds.episodes) {
    json jep;
    jep["states"] = matrix_to_json(ep.states);
    jep["responses"] = matrix_to_json(ep.responses);
    jep["actions"] = ep.actions ? matrix_to_json(*ep.actions) : json(nullptr);
    eps.push_back(std::move(jep));
  }
  j["episodes"] = std::move(eps);
  return j;
}

Matrix read_csv_matrix(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError(fmt::format("cannot open '{}'", file.string()));
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> vals;
    std::size_t start = 0, field = 0;
    while (start <= line.size()) {
      std::size_t comma = line.find(',', start);
      std::string cell = line.substr(start, comma == std::string::npos ? std::string::npos
                                                                       : comma - start);
      ++field;
      try {
        std::size_t used = 0;
        double v = std::stod(cell, &used);
        while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used])))
          ++used;
        if (used != cell.size()) throw std::invalid_argument("trailing characters");
        vals.push_back(v);
      } catch (const std::exception&) {
        throw ParseError(fmt::format("{}: line {}, field {}: '{}' is not a number",
                                     file.filename().string(), lineno, field, cell));
      }
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) return Matrix(0, 0);
  const std::size_t cols = rows.front().size();
  for (std::size_t r = 0; r < rows.size(); ++r)
    if (rows[r].size() != cols)
      throw ParseError(fmt::format("{}: line {} has {} fields, expected {}",
                                   file.filename().string(), r + 1, rows[r].size(), cols));
  return Matrix::from_rows(rows);
}

void write_csv_matrix(const Matrix& m, const fs::path& file) {
  std::ofstream out(file);
  if (!out) throw DataError(fmt::format("cannot write '{}'", file.string()));
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << fmt::format("{}", m(r, c));
    }
    out << '\n';
  }
}

json parse_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

}  // namespace

DataFormat guess_format(const fs::path& path) {
  return fs::is_directory(path) ? DataFormat::csv_dir : DataFormat::json;
}

TrajectoryDataset load_dataset(const fs::path& path, DataFormat format) {
  if (format == DataFormat::json) return dataset_from_json(parse_json_file(path));

  const fs::path header = path / "header.json";
  json jh = parse_json_file(header);
  TrajectoryDataset ds;
  ds.state_names = read_name_list(jh, "state_names");
  ds.neuron_ids = read_name_list(jh, "neuron_ids");
  std::size_t count = 0;
  if (jh.contains("n_episodes")) {
    count = jh.at("n_episodes").get<std::size_t>();
  } else {
    while (fs::exists(path / fmt::format("ep_{}_states.csv", count))) ++count;
  }
  for (std::size_t k = 0; k < count; ++k) {
    Episode ep;
    ep.states = read_csv_matrix(path / fmt::format("ep_{}_states.csv", k));
    ep.responses = read_csv_matrix(path / fmt::format("ep_{}_responses.csv", k));
    if (ep.states.rows() == 0) ep.states = Matrix(0, ds.d_s());
    if (ep.responses.rows() == 0) ep.responses = Matrix(0, ds.d_z());
    const fs::path actions = path / fmt::format("ep_{}_actions.csv", k);
    if (fs::exists(actions)) ep.actions = read_csv_matrix(actions);
    ds.episodes.push_back(std::move(ep));
  }
  ds.validate();
  return ds;
}

void save_dataset(const TrajectoryDataset& ds, const fs::path& path, DataFormat format) {
  ds.validate();
  if (format == DataFormat::json) {
    std::ofstream out(path);
    if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
    out << dataset_to_json(ds).dump(2) << '\n';
    return;
  }
  fs::create_directories(path);
  json jh;
  jh["state_names"] = ds.state_names;
  jh["neuron_ids"] = ds.neuron_ids;
  jh["n_episodes"] = ds.episodes.size();
  std::ofstream out(path / "header.json");
  if (!out) throw DataError(fmt::format("cannot write '{}'", (path / "header.json").string()));
  out << jh.dump(2) << '\n';
  for (std::size_t k = 0; k < ds.episodes.size(); ++k) {
    const Episode& ep = ds.episodes[k];
    write_csv_matrix(ep.states, path / fmt::format("ep_{}_states.csv", k));
    write_csv_matrix(ep.responses, path / fmt::format("ep_{}_responses.csv", k));
    if (ep.actions) write_csv_matrix(*ep.actions, path / fmt::format("ep_{}_actions.csv", k));
  }
}

}  // namespace policyscope
