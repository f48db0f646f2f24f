#include "bnn/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "bnn/errors.hpp"

namespace bnn::io {

namespace fs = std::filesystem;
using nlohmann::json;

void write_text_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << content;
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_draws(const fs::path& bin_path, const PosteriorDraws& draws, std::uint64_t seed) {
  draws.validate();
  if (bin_path.has_parent_path()) fs::create_directories(bin_path.parent_path());
  const fs::path tmp = bin_path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    // Eigen's default storage is column-major, so the buffer is written as-is.
    out.write(reinterpret_cast<const char*>(draws.draws.data()),
              static_cast<std::streamsize>(sizeof(double) * draws.draws.size()));
  }
  fs::rename(tmp, bin_path);

  json header;
  header["rows"] = draws.draws.rows();
  header["cols"] = draws.draws.cols();
  header["dtype"] = "float64";
  header["byte_order"] = "little";
  header["layout"] = "column-major";
  header["source"] = to_string(draws.source);
  header["chains"] = draws.chains;
  header["samples_per_chain"] = draws.samples_per_chain;
  header["seed"] = seed;
  header["diagnostics"] = draws.diagnostics;
  fs::path header_path = bin_path;
  header_path.replace_extension(".json");
  write_text_atomic(header_path, header.dump(2) + "\n");
}

PosteriorDraws read_draws(const fs::path& bin_path) {
  fs::path header_path = bin_path;
  header_path.replace_extension(".json");
  json header;
  try {
    header = json::parse(read_text(header_path));
  } catch (const json::parse_error& e) {
    throw ConfigError("bad draws header " + header_path.string() + ": " + e.what());
  }
  const Eigen::Index rows = header.at("rows").get<Eigen::Index>();
  const Eigen::Index cols = header.at("cols").get<Eigen::Index>();

  PosteriorDraws out;
  out.draws.resize(rows, cols);
  std::ifstream in(bin_path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + bin_path.string());
  in.read(reinterpret_cast<char*>(out.draws.data()),
          static_cast<std::streamsize>(sizeof(double) * rows * cols));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(double) * rows * cols))
    throw ConfigError("draws file is truncated: " + bin_path.string());

  out.source = header.at("source").get<std::string>() == "hmc" ? PosteriorDraws::Source::Hmc
                                                               : PosteriorDraws::Source::Vi;
  out.chains = header.value("chains", 1);
  out.samples_per_chain = header.value("samples_per_chain", rows);
  if (header.contains("diagnostics"))
    out.diagnostics = header.at("diagnostics").get<std::map<std::string, double>>();
  out.validate();
  return out;
}

void write_dataset_csv(const fs::path& csv_path, const Dataset& data) {
  data.validate();
  std::ostringstream os;
  os.precision(17);
  for (Eigen::Index c = 0; c < data.x.cols(); ++c) os << "x" << c << ',';
  for (Eigen::Index c = 0; c < data.y.cols(); ++c)
    os << "y" << c << (c + 1 < data.y.cols() ? "," : "");
  os << '\n';
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    for (Eigen::Index c = 0; c < data.x.cols(); ++c) os << data.x(i, c) << ',';
    for (Eigen::Index c = 0; c < data.y.cols(); ++c)
      os << data.y(i, c) << (c + 1 < data.y.cols() ? "," : "");
    os << '\n';
  }
  write_text_atomic(csv_path, os.str());

  json sidecar;
  sidecar["n"] = data.n();
  sidecar["input_dim"] = data.x.cols();
  sidecar["output_dim"] = data.y.cols();
  sidecar["meta"] = data.meta;
  fs::path sidecar_path = csv_path;
  sidecar_path += ".json";
  write_text_atomic(sidecar_path, sidecar.dump(2) + "\n");
}

Dataset read_dataset_csv(const fs::path& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw ConfigError("cannot read " + csv_path.string());
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("dataset CSV is empty");
  int n_x = 0, n_y = 0;
  {
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
      if (!field.empty() && field[0] == 'x') ++n_x;
      if (!field.empty() && field[0] == 'y') ++n_y;
    }
  }
  if (n_x < 1 || n_y < 1) throw ConfigError("dataset CSV header must name x*/y* columns");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) row.push_back(std::stod(field));
    if (static_cast<int>(row.size()) != n_x + n_y)
      throw ConfigError("dataset CSV row has wrong field count");
    rows.push_back(std::move(row));
  }
  Dataset d;
  d.x.resize(static_cast<Eigen::Index>(rows.size()), n_x);
  d.y.resize(static_cast<Eigen::Index>(rows.size()), n_y);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int c = 0; c < n_x; ++c) d.x(static_cast<Eigen::Index>(i), c) = rows[i][c];
    for (int c = 0; c < n_y; ++c) d.y(static_cast<Eigen::Index>(i), c) = rows[i][n_x + c];
  }

  fs::path sidecar_path = csv_path;
  sidecar_path += ".json";
  if (fs::exists(sidecar_path)) {
    const json sidecar = json::parse(read_text(sidecar_path));
    if (sidecar.contains("meta"))
      d.meta = sidecar.at("meta").get<std::map<std::string, std::string>>();
  }
  return d;
}

std::string elpd_to_json(const assess::ElpdResult& result) {
  json j;
  j["model_id"] = result.model_id;
  j["method"] = result.method == assess::ElpdMethod::PsisLoo ? "psis_loo" : "waic";
  j["total"] = result.total;
  j["se"] = result.se;
  j["pointwise"] = std::vector<double>(result.pointwise.data(),
                                       result.pointwise.data() + result.pointwise.size());
  std::vector<double> khat(result.khat.data(), result.khat.data() + result.khat.size());
  // JSON has no inf; the degenerate-tail sentinel becomes a large number.
  for (double& k : khat)
    if (!std::isfinite(k)) k = 1e9;
  j["khat"] = khat;
  return j.dump(2) + "\n";
}

assess::ElpdResult elpd_from_json(const std::string& text) {
  const json j = json::parse(text);
  assess::ElpdResult r;
  r.model_id = j.at("model_id").get<std::string>();
  r.method = j.at("method").get<std::string>() == "waic" ? assess::ElpdMethod::Waic
                                                         : assess::ElpdMethod::PsisLoo;
  r.total = j.at("total").get<double>();
  r.se = j.at("se").get<double>();
  const auto pw = j.at("pointwise").get<std::vector<double>>();
  r.pointwise = Eigen::Map<const Eigen::VectorXd>(pw.data(), static_cast<Eigen::Index>(pw.size()));
  const auto kh = j.at("khat").get<std::vector<double>>();
  r.khat = Eigen::Map<const Eigen::VectorXd>(kh.data(), static_cast<Eigen::Index>(kh.size()));
  return r;
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

std::string hash_hex(const std::string& text) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(text)));
  return buf;
}

}  // namespace bnn::io
