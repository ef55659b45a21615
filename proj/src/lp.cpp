#include "nsdp/lp.hpp"

#include <cmath>
#include <stdexcept>

#include "nsdp/errors.hpp"

namespace nsdp::lp {

namespace {

// Dense tableau over [A | I_artificial]. Columns >= n are artificials; their
// block of the tableau is B^{-1}, which is what the dual extraction reads.
class Tableau {
 public:
  Tableau(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Options& options)
      : n_(A.cols()), m_(A.rows()), options_(options) {
    T_ = Eigen::MatrixXd::Zero(m_, n_ + m_);
    rhs_ = b;
    sign_ = Eigen::VectorXd::Ones(m_);
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (b(i) < 0.0) sign_(i) = -1.0;
      T_.row(i).head(n_) = sign_(i) * A.row(i);
      rhs_(i) = sign_(i) * b(i);
      T_(i, n_ + i) = 1.0;
    }
    basis_.resize(m_);
    in_basis_.assign(n_ + m_, false);
    for (Eigen::Index i = 0; i < m_; ++i) {
      basis_[i] = n_ + i;
      in_basis_[n_ + i] = true;
    }
    active_row_.assign(m_, true);
    limit_ = options.max_iterations != 0
                 ? options.max_iterations
                 : 20000 + 50 * static_cast<std::size_t>(m_ + n_);
  }

  // Runs simplex iterations for `cost` (size n + m); columns >= `allowed`
  // never enter. Returns false when unbounded.
  bool optimize(const Eigen::VectorXd& cost, Eigen::Index allowed) {
    Eigen::VectorXd reduced = reduced_costs(cost);
    while (true) {
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < allowed; ++j) {
        if (reduced(j) < -options_.optimality_tol && !is_basic(j)) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return true;

      Eigen::Index leave = -1;
      double best = 0.0;
      for (Eigen::Index i = 0; i < m_; ++i) {
        if (!active_row_[i]) continue;
        const double a = T_(i, enter);
        if (a <= options_.pivot_tol) continue;
        const double ratio = rhs_(i) / a;
        const double slack = 1e-12 * (1.0 + std::abs(best));
        if (leave < 0 || ratio < best - slack) {
          leave = i;
          best = ratio;
        } else if (ratio <= best + slack && basis_[i] < basis_[leave]) {
          leave = i;
          best = std::min(best, ratio);
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
      const double factor = reduced(enter);
      reduced -= factor * T_.row(leave).transpose();
      reduced(enter) = 0.0;
      if (++iterations_ > limit_) {
        throw std::runtime_error("simplex iteration limit exceeded");
      }
    }
  }

  // After phase one: pivots artificials out of the basis where possible and
  // deactivates redundant rows.
  void purge_artificials() {
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (!active_row_[i] || basis_[i] < n_) continue;
      Eigen::Index col = -1;
      double best = options_.pivot_tol;
      for (Eigen::Index j = 0; j < n_; ++j) {
        if (std::abs(T_(i, j)) > best && !is_basic(j)) {
          best = std::abs(T_(i, j));
          col = j;
        }
      }
      if (col >= 0) {
        pivot(i, col);
      } else {
        active_row_[i] = false;
        in_basis_[basis_[i]] = false;
      }
    }
  }

  Eigen::VectorXd primal() const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n_);
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (active_row_[i] && basis_[i] < n_) x(basis_[i]) = std::max(0.0, rhs_(i));
    }
    return x;
  }

  double artificial_sum() const {
    double s = 0.0;
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (active_row_[i] && basis_[i] >= n_) s += rhs_(i);
    }
    return s;
  }

  // y = B^{-T} c_B in the original row orientation.
  Eigen::VectorXd duals(const Eigen::VectorXd& cost) const {
    Eigen::VectorXd cb(m_);
    for (Eigen::Index i = 0; i < m_; ++i) cb(i) = active_row_[i] ? cost(basis_[i]) : 0.0;
    Eigen::VectorXd y = T_.rightCols(m_).transpose() * cb;
    return y.cwiseProduct(sign_);
  }

  std::size_t iterations() const { return iterations_; }
  Eigen::Index n() const { return n_; }
  Eigen::Index m() const { return m_; }

 private:
  bool is_basic(Eigen::Index j) const { return in_basis_[j]; }

  Eigen::VectorXd reduced_costs(const Eigen::VectorXd& cost) const {
    Eigen::VectorXd reduced = cost;
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (!active_row_[i]) continue;
      const double cb = cost(basis_[i]);
      if (cb != 0.0) reduced -= cb * T_.row(i).transpose();
    }
    return reduced;
  }

  void pivot(Eigen::Index r, Eigen::Index c) {
    const double p = T_(r, c);
    T_.row(r) /= p;
    rhs_(r) /= p;
    T_(r, c) = 1.0;
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (i == r || !active_row_[i]) continue;
      const double f = T_(i, c);
      if (f == 0.0) continue;
      T_.row(i) -= f * T_.row(r);
      rhs_(i) -= f * rhs_(r);
      T_(i, c) = 0.0;
      if (rhs_(i) < 0.0 && rhs_(i) > -1e-13) rhs_(i) = 0.0;
    }
    in_basis_[basis_[r]] = false;
    in_basis_[c] = true;
    basis_[r] = c;
  }

  Eigen::Index n_;
  Eigen::Index m_;
  Options options_;
  Eigen::MatrixXd T_;
  Eigen::VectorXd rhs_;
  Eigen::VectorXd sign_;
  std::vector<Eigen::Index> basis_;
  std::vector<bool> active_row_;
  std::vector<bool> in_basis_;
  std::size_t iterations_ = 0;
  std::size_t limit_ = 0;
};

}  // namespace

StandardFormResult solve_standard_form(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                       const Eigen::VectorXd& c, const Options& options) {
  if (A.rows() != b.size() || A.cols() != c.size()) {
    throw DimensionMismatch("solve_standard_form: inconsistent LP shapes");
  }
  const Eigen::Index n = A.cols();
  const Eigen::Index m = A.rows();
  StandardFormResult result;

  Tableau tableau(A, b, options);
  Eigen::VectorXd phase_one_cost = Eigen::VectorXd::Zero(n + m);
  phase_one_cost.tail(m).setOnes();
  tableau.optimize(phase_one_cost, n);
  result.phase_one_objective = tableau.artificial_sum();

  if (result.phase_one_objective > options.feasibility_tol) {
    result.status = Status::infeasible;
    result.farkas = tableau.duals(phase_one_cost);
    result.iterations = tableau.iterations();
    return result;
  }

  tableau.purge_artificials();
  Eigen::VectorXd phase_two_cost = Eigen::VectorXd::Zero(n + m);
  phase_two_cost.head(n) = c;
  const bool bounded = tableau.optimize(phase_two_cost, n);
  result.x = tableau.primal();
  result.objective = c.dot(result.x);
  result.status = bounded ? Status::optimal : Status::unbounded;
  result.iterations = tableau.iterations();
  return result;
}

std::size_t LinearProgram::add_variable(double cost, double lower, double upper) {
  if (lower > upper) throw std::invalid_argument("LinearProgram: lower bound exceeds upper");
  if (std::isinf(lower) && lower > 0) throw std::invalid_argument("LinearProgram: lower = +inf");
  variables_.push_back({cost, lower, upper});
  return variables_.size() - 1;
}

void LinearProgram::add_constraint(std::vector<std::pair<std::size_t, double>> terms,
                                   Relation relation, double rhs) {
  for (const auto& [index, coefficient] : terms) {
    (void)coefficient;
    if (index >= variables_.size()) {
      throw std::out_of_range("LinearProgram: constraint references unknown variable");
    }
  }
  rows_.push_back({std::move(terms), relation, rhs});
}

Solution LinearProgram::solve(const Options& options) const {
  // Column layout: one (or two, for free variables) standard columns per
  // variable, then one slack per inequality row and per finite upper bound.
  struct Mapping {
    Eigen::Index plus;
    Eigen::Index minus;  // -1 unless free
    double shift;        // lower bound (0 for free)
  };
  std::vector<Mapping> map;
  Eigen::Index columns = 0;
  for (const auto& v : variables_) {
    if (std::isinf(v.lower)) {
      map.push_back({columns, columns + 1, 0.0});
      columns += 2;
    } else {
      map.push_back({columns, -1, v.lower});
      columns += 1;
    }
  }
  std::size_t upper_rows = 0;
  for (const auto& v : variables_) {
    if (!std::isinf(v.upper)) ++upper_rows;
  }
  std::size_t slacks = upper_rows;
  for (const auto& r : rows_) {
    if (r.relation != Relation::equal) ++slacks;
  }
  const Eigen::Index total_rows = static_cast<Eigen::Index>(rows_.size() + upper_rows);
  const Eigen::Index total_cols = columns + static_cast<Eigen::Index>(slacks);

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(total_rows, total_cols);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(total_rows);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(total_cols);
  double constant = 0.0;
  for (std::size_t k = 0; k < variables_.size(); ++k) {
    c(map[k].plus) = variables_[k].cost;
    if (map[k].minus >= 0) c(map[k].minus) = -variables_[k].cost;
    constant += variables_[k].cost * map[k].shift;
  }

  Eigen::Index row = 0;
  Eigen::Index slack = columns;
  for (const auto& r : rows_) {
    double rhs = r.rhs;
    for (const auto& [index, coefficient] : r.terms) {
      A(row, map[index].plus) += coefficient;
      if (map[index].minus >= 0) A(row, map[index].minus) -= coefficient;
      rhs -= coefficient * map[index].shift;
    }
    if (r.relation == Relation::less_equal) A(row, slack++) = 1.0;
    if (r.relation == Relation::greater_equal) A(row, slack++) = -1.0;
    b(row) = rhs;
    ++row;
  }
  for (std::size_t k = 0; k < variables_.size(); ++k) {
    if (std::isinf(variables_[k].upper)) continue;
    A(row, map[k].plus) = 1.0;
    if (map[k].minus >= 0) A(row, map[k].minus) = -1.0;
    A(row, slack++) = 1.0;
    b(row) = variables_[k].upper - map[k].shift;
    ++row;
  }

  const StandardFormResult sf = solve_standard_form(A, b, c, options);
  Solution solution;
  solution.status = sf.status;
  if (sf.status == Status::infeasible) return solution;
  solution.values.resize(static_cast<Eigen::Index>(variables_.size()));
  for (std::size_t k = 0; k < variables_.size(); ++k) {
    double v = sf.x(map[k].plus) + map[k].shift;
    if (map[k].minus >= 0) v -= sf.x(map[k].minus);
    solution.values(static_cast<Eigen::Index>(k)) = v;
  }
  solution.objective = sf.objective + constant;
  return solution;
}

}  // namespace nsdp::lp
