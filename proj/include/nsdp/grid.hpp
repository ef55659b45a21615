#pragma once

// Tensor grids over boxes, the infeasible-value sentinel, and multilinear
// interpolation of node values.

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <vector>

namespace nsdp {

// Breakpoints per dimension, each strictly increasing. Nodes are numbered
// row-major with dimension 0 varying slowest.
class Grid {
 public:
  Grid() = default;
  explicit Grid(std::vector<std::vector<double>> axes);
  // `points` equally spaced breakpoints on [lo, hi] in every dimension.
  static Grid uniform(Eigen::Index dim, double lo, double hi, std::size_t points);

  Eigen::Index dim() const { return static_cast<Eigen::Index>(axes_.size()); }
  std::size_t size() const { return size_; }
  const std::vector<std::vector<double>>& axes() const { return axes_; }

  Eigen::VectorXd node(std::size_t index) const;
  std::vector<std::size_t> multi_index(std::size_t index) const;
  std::size_t flat_index(const std::vector<std::size_t>& multi) const;

  Eigen::VectorXd lower() const;
  Eigen::VectorXd upper() const;
  bool contains(const Eigen::VectorXd& x, double tol = 1e-12) const;
  double max_spacing() const;

  bool operator==(const Grid& other) const { return axes_ == other.axes_; }

 private:
  std::vector<std::vector<double>> axes_;
  std::size_t size_ = 0;
};

// A value-table entry: a finite number or the infeasible marker. Reading the
// number of an infeasible entry throws.
class StageValue {
 public:
  static StageValue finite(double v);
  static StageValue infeasible() { return StageValue(); }

  bool is_finite() const { return finite_; }
  double value() const;

  bool operator==(const StageValue& other) const {
    return finite_ == other.finite_ && (!finite_ || value_ == other.value_);
  }

 private:
  StageValue() = default;
  double value_ = 0.0;
  bool finite_ = false;
};

// Multilinear interpolation. Corners with zero weight are skipped, so values
// at nodes are reproduced exactly. Returns nullopt when x is outside the grid
// box (beyond tol) or some corner with positive weight is infeasible.
std::optional<double> interpolate(const Grid& grid, const std::vector<StageValue>& values,
                                  const Eigen::VectorXd& x, double tol = 1e-12);

}  // namespace nsdp
