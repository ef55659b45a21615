#include "nsdp/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "nsdp/errors.hpp"

namespace nsdp {

Grid::Grid(std::vector<std::vector<double>> axes) : axes_(std::move(axes)) {
  if (axes_.empty()) throw ModelError("grid: needs at least one dimension");
  size_ = 1;
  for (std::size_t d = 0; d < axes_.size(); ++d) {
    const auto& axis = axes_[d];
    if (axis.empty()) throw ModelError("grid: axis " + std::to_string(d) + " has no breakpoints");
    for (std::size_t i = 0; i < axis.size(); ++i) {
      if (!std::isfinite(axis[i])) throw ModelError("grid: non-finite breakpoint on axis " + std::to_string(d));
      if (i > 0 && !(axis[i] > axis[i - 1])) {
        throw ModelError("grid: axis " + std::to_string(d) + " is not strictly increasing");
      }
    }
    size_ *= axis.size();
  }
}

Grid Grid::uniform(Eigen::Index dim, double lo, double hi, std::size_t points) {
  if (points == 0) throw ModelError("grid: needs at least one point per axis");
  std::vector<double> axis(points);
  for (std::size_t i = 0; i < points; ++i) {
    axis[i] = points == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  if (points > 1) axis.back() = hi;
  return Grid(std::vector<std::vector<double>>(static_cast<std::size_t>(dim), axis));
}

std::vector<std::size_t> Grid::multi_index(std::size_t index) const {
  if (index >= size_) throw std::out_of_range("grid: node index out of range");
  std::vector<std::size_t> multi(axes_.size());
  for (std::size_t d = axes_.size(); d-- > 0;) {
    multi[d] = index % axes_[d].size();
    index /= axes_[d].size();
  }
  return multi;
}

std::size_t Grid::flat_index(const std::vector<std::size_t>& multi) const {
  std::size_t index = 0;
  for (std::size_t d = 0; d < axes_.size(); ++d) index = index * axes_[d].size() + multi[d];
  return index;
}

Eigen::VectorXd Grid::node(std::size_t index) const {
  const auto multi = multi_index(index);
  Eigen::VectorXd x(dim());
  for (std::size_t d = 0; d < axes_.size(); ++d) x(static_cast<Eigen::Index>(d)) = axes_[d][multi[d]];
  return x;
}

Eigen::VectorXd Grid::lower() const {
  Eigen::VectorXd x(dim());
  for (std::size_t d = 0; d < axes_.size(); ++d) x(static_cast<Eigen::Index>(d)) = axes_[d].front();
  return x;
}

Eigen::VectorXd Grid::upper() const {
  Eigen::VectorXd x(dim());
  for (std::size_t d = 0; d < axes_.size(); ++d) x(static_cast<Eigen::Index>(d)) = axes_[d].back();
  return x;
}

bool Grid::contains(const Eigen::VectorXd& x, double tol) const {
  if (x.size() != dim()) return false;
  for (std::size_t d = 0; d < axes_.size(); ++d) {
    const double v = x(static_cast<Eigen::Index>(d));
    if (v < axes_[d].front() - tol || v > axes_[d].back() + tol) return false;
  }
  return true;
}

double Grid::max_spacing() const {
  double spacing = 0.0;
  for (const auto& axis : axes_) {
    for (std::size_t i = 1; i < axis.size(); ++i) spacing = std::max(spacing, axis[i] - axis[i - 1]);
  }
  return spacing;
}

StageValue StageValue::finite(double v) {
  if (!std::isfinite(v)) throw std::invalid_argument("stage value must be finite");
  StageValue s;
  s.value_ = v;
  s.finite_ = true;
  return s;
}

double StageValue::value() const {
  if (!finite_) throw std::logic_error("arithmetic on an infeasible stage value");
  return value_;
}

std::optional<double> interpolate(const Grid& grid, const std::vector<StageValue>& values,
                                  const Eigen::VectorXd& x, double tol) {
  if (x.size() != grid.dim()) throw DimensionMismatch("interpolate: point dimension mismatch");
  if (values.size() != grid.size()) throw DimensionMismatch("interpolate: value count mismatch");
  if (!grid.contains(x, tol)) return std::nullopt;

  // Per dimension: up to two (index, weight) pairs with positive weight.
  struct Corner {
    std::size_t index;
    double weight;
  };
  std::vector<std::vector<Corner>> factors(grid.axes().size());
  for (std::size_t d = 0; d < grid.axes().size(); ++d) {
    const auto& axis = grid.axes()[d];
    const double v = std::clamp(x(static_cast<Eigen::Index>(d)), axis.front(), axis.back());
    auto it = std::lower_bound(axis.begin(), axis.end(), v);
    const std::size_t hi = static_cast<std::size_t>(it - axis.begin());
    if (axis[hi] == v) {
      factors[d].push_back({hi, 1.0});
      continue;
    }
    const std::size_t lo = hi - 1;
    const double w = (v - axis[lo]) / (axis[hi] - axis[lo]);
    factors[d].push_back({lo, 1.0 - w});
    factors[d].push_back({hi, w});
  }

  std::vector<std::size_t> choice(factors.size(), 0);
  std::vector<std::size_t> multi(factors.size());
  double total = 0.0;
  while (true) {
    double weight = 1.0;
    for (std::size_t d = 0; d < factors.size(); ++d) {
      weight *= factors[d][choice[d]].weight;
      multi[d] = factors[d][choice[d]].index;
    }
    if (weight > 0.0) {
      const StageValue& entry = values[grid.flat_index(multi)];
      if (!entry.is_finite()) return std::nullopt;
      total += weight * entry.value();
    }
    std::size_t d = 0;
    while (d < factors.size() && ++choice[d] == factors[d].size()) choice[d++] = 0;
    if (d == factors.size()) break;
  }
  return total;
}

}  // namespace nsdp
