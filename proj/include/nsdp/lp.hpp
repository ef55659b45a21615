#pragma once

// Dense two-phase simplex with Bland's rule, plus a small builder that lowers
// bounded/free variables and inequality rows to standard form.

#include <Eigen/Dense>

#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

namespace nsdp::lp {

enum class Status { optimal, infeasible, unbounded };

struct Options {
  double pivot_tol = 1e-11;
  // Phase one declares feasibility when the sum of artificials is at most this.
  double feasibility_tol = 1e-9;
  double optimality_tol = 1e-11;
  std::size_t max_iterations = 0;  // 0: 20000 + 50 * (rows + cols)
};

struct StandardFormResult {
  Status status = Status::infeasible;
  Eigen::VectorXd x;  // primal point (size n) unless infeasible
  double objective = 0.0;
  // Sum of artificials at the end of phase one, i.e. the l1 residual of the
  // closest point phase one found.
  double phase_one_objective = 0.0;
  // On infeasibility: y with A^T y <= 0 (to optimality_tol) and b^T y > 0.
  Eigen::VectorXd farkas;
  std::size_t iterations = 0;
};

// minimize c^T x  s.t.  A x = b, x >= 0.
StandardFormResult solve_standard_form(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                       const Eigen::VectorXd& c, const Options& options = {});

enum class Relation { less_equal, equal, greater_equal };

struct Solution {
  Status status = Status::infeasible;
  Eigen::VectorXd values;
  double objective = 0.0;
};

class LinearProgram {
 public:
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  // Returns the variable index. `lower` may be -kInf (free below), `upper` may
  // be kInf.
  std::size_t add_variable(double cost, double lower = 0.0, double upper = kInf);
  void add_constraint(std::vector<std::pair<std::size_t, double>> terms, Relation relation,
                      double rhs);

  std::size_t num_variables() const { return variables_.size(); }
  std::size_t num_constraints() const { return rows_.size(); }

  Solution solve(const Options& options = {}) const;

 private:
  struct Variable {
    double cost;
    double lower;
    double upper;
  };
  struct Row {
    std::vector<std::pair<std::size_t, double>> terms;
    Relation relation;
    double rhs;
  };
  std::vector<Variable> variables_;
  std::vector<Row> rows_;
};

}  // namespace nsdp::lp
