#include "coaltree/dataset.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "coaltree/errors.hpp"

namespace coaltree {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << text;
  if (!out) throw DataError("write failed for " + path);
}

double parse_double(const std::string& token, const std::string& path, int line) {
  const char* s = token.c_str();
  char* end = nullptr;
  const double v = std::strtod(s, &end);
  while (end && *end == ' ') ++end;
  if (end == s || (end && *end != '\0'))
    throw DataError(path + ":" + std::to_string(line) + ": bad number '" + token + "'");
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Eigen::MatrixXd read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string token;
    while (std::getline(ss, token, ',')) row.push_back(parse_double(token, path, lineno));
    if (!rows.empty() && row.size() != rows.front().size())
      throw DataError(path + ":" + std::to_string(lineno) + ": expected " +
                      std::to_string(rows.front().size()) + " columns, found " +
                      std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(path + ": empty matrix");
  Eigen::MatrixXd m(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  return m;
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m) {
  std::string out;
  out.reserve(static_cast<size_t>(m.size()) * 20);
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  write_file(path, out);
}

std::vector<int> read_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<int> labels;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      size_t used = 0;
      const int v = std::stoi(line, &used);
      if (used != line.size()) throw std::invalid_argument(line);
      labels.push_back(v);
    } catch (const std::exception&) {
      throw DataError(path + ":" + std::to_string(lineno) + ": bad label '" + line + "'");
    }
  }
  if (labels.empty()) throw DataError(path + ": empty labels");
  return labels;
}

void write_labels(const std::string& path, const std::vector<int>& labels) {
  std::string out;
  for (int v : labels) {
    out += std::to_string(v);
    out += '\n';
  }
  write_file(path, out);
}

Coords read_coords(const std::string& path) {
  ordered_json j;
  try {
    j = ordered_json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  Coords c;
  if (j.contains("grid")) {
    if (!j["grid"].is_array() || j["grid"].size() != 2)
      throw DataError(path + ": 'grid' must be [h, w]");
    c.kind = Coords::Kind::grid;
    c.grid_h = j["grid"][0].get<int>();
    c.grid_w = j["grid"][1].get<int>();
    if (c.grid_h <= 0 || c.grid_w <= 0) throw DataError(path + ": grid sides must be positive");
  } else if (j.contains("positions")) {
    c.kind = Coords::Kind::positions;
    c.positions = j["positions"].get<std::vector<double>>();
    if (c.positions.empty()) throw DataError(path + ": empty positions");
  } else {
    throw DataError(path + ": expected 'grid' or 'positions'");
  }
  return c;
}

void write_coords(const std::string& path, const Coords& coords) {
  ordered_json j;
  switch (coords.kind) {
    case Coords::Kind::grid:
      j["grid"] = {coords.grid_h, coords.grid_w};
      break;
    case Coords::Kind::positions:
      j["positions"] = coords.positions;
      break;
    case Coords::Kind::none:
      throw DataError(path + ": no coordinates to write");
  }
  write_file(path, j.dump(2) + "\n");
}

}  // namespace coaltree
