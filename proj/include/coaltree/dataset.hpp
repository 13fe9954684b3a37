#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace coaltree {

// Optional per-dimension coordinate metadata used by structured kernels.
struct Coords {
  enum class Kind { none, positions, grid };
  Kind kind = Kind::none;
  std::vector<double> positions;  // one coordinate per data dimension
  int grid_h = 0;                 // grid layout: dimension j sits at
  int grid_w = 0;                 // (j / grid_w, j % grid_w)

  int size() const {
    return kind == Kind::grid ? grid_h * grid_w : static_cast<int>(positions.size());
  }
};

struct Dataset {
  Eigen::MatrixXd x;        // n rows (items) by d columns (features)
  std::vector<int> labels;  // optional class ids, empty when unlabeled
  Coords coords;

  int n() const { return static_cast<int>(x.rows()); }
  int d() const { return static_cast<int>(x.cols()); }
};

// Header-free CSV of doubles, one row per line. Throws DataError on ragged or
// unparsable input.
Eigen::MatrixXd read_matrix_csv(const std::string& path);
void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m);

std::vector<int> read_labels(const std::string& path);
void write_labels(const std::string& path, const std::vector<int>& labels);

// JSON with either {"grid": [h, w]} or {"positions": [...]}.
Coords read_coords(const std::string& path);
void write_coords(const std::string& path, const Coords& coords);

std::string format_double(double v);  // round-trip-safe %.17g rendering

}  // namespace coaltree
