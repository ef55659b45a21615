#pragma once

// Piecewise-smooth expressions: smooth atoms combined by sum, nonnegative
// scaling, negation, max, min, abs, partial application (bind) and coordinate
// selection. Expressions are immutable DAGs and may share subtrees.

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace nsdp {

// a.x + b
struct Affine {
  Eigen::VectorXd a;
  double b = 0.0;
};

// 0.5 x'Qx + a.x + c. Q is symmetrized when the atom is built.
struct QuadraticForm {
  Eigen::MatrixXd Q;
  Eigen::VectorXd a;
  double c = 0.0;
};

// exp(a.x + b)
struct ExpAffine {
  Eigen::VectorXd a;
  double b = 0.0;
};

// 0.5 |x - center|^2
struct NormSquared {
  Eigen::VectorXd center;
};

// User-supplied atom. Not serializable; two custom atoms compare equal only
// when they are the same object.
struct CustomAtom {
  std::string name;
  Eigen::Index arity = 0;
  std::function<double(const Eigen::VectorXd&)> eval;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> grad;
  // Global Euclidean Lipschitz bound, if known.
  std::optional<double> lipschitz;
};

class SmoothAtom {
 public:
  using Data = std::variant<Affine, QuadraticForm, ExpAffine, NormSquared,
                            std::shared_ptr<const CustomAtom>>;

  explicit SmoothAtom(Affine atom);
  explicit SmoothAtom(QuadraticForm atom);
  explicit SmoothAtom(ExpAffine atom);
  explicit SmoothAtom(NormSquared atom);
  explicit SmoothAtom(std::shared_ptr<const CustomAtom> atom);

  Eigen::Index arity() const { return arity_; }
  const Data& data() const { return data_; }
  std::string name() const;

  double eval(const Eigen::VectorXd& x) const;
  // Throws UndefinedGradient when the gradient has non-finite entries.
  Eigen::VectorXd grad(const Eigen::VectorXd& x) const;
  // Euclidean Lipschitz bound valid on the box [lower, upper]; +inf if the
  // atom carries none.
  double lipschitz_bound(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) const;

  bool operator==(const SmoothAtom& other) const;

 private:
  Data data_;
  Eigen::Index arity_;
};

enum class NodeKind { atom, sum, scale, neg, max, min, abs, bind, select };

const char* to_string(NodeKind kind);

struct ExprNode;

class Expr {
 public:
  static Expr atom(SmoothAtom atom);
  static Expr sum(std::vector<Expr> children);
  // factor must be nonnegative and finite.
  static Expr scale(double factor, Expr child);
  static Expr neg(Expr child);
  static Expr max(std::vector<Expr> children);
  static Expr min(std::vector<Expr> children);
  static Expr abs(Expr child);
  // Fixes child coordinates [offset, offset + values.size()) to `values`. The
  // result reads the remaining child coordinates, in order.
  static Expr bind(Expr child, Eigen::Index offset, Eigen::VectorXd values);
  // result(x) = child(x[indices]) for x of size input_dim. Indices must be
  // distinct.
  static Expr select(Expr child, std::vector<Eigen::Index> indices, Eigen::Index input_dim);

  Eigen::Index input_dim() const;
  NodeKind kind() const;
  const ExprNode& node() const { return *node_; }
  const std::vector<Expr>& children() const;

  double evaluate(const Eigen::VectorXd& point) const;

  // Identity of the shared node; used to short-circuit structural equality.
  const void* identity() const { return node_.get(); }

 private:
  explicit Expr(std::shared_ptr<const ExprNode> node) : node_(std::move(node)) {}
  std::shared_ptr<const ExprNode> node_;
};

struct ExprNode {
  NodeKind kind = NodeKind::atom;
  Eigen::Index input_dim = 0;
  std::vector<Expr> children;
  std::optional<SmoothAtom> atom;
  double factor = 1.0;            // scale
  Eigen::Index offset = 0;        // bind
  Eigen::VectorXd values;         // bind
  std::vector<Eigen::Index> indices;  // select
};

// Builders for the registered atoms.
Expr affine(Eigen::VectorXd a, double b = 0.0);
Expr quadratic(Eigen::MatrixXd Q, Eigen::VectorXd a, double c = 0.0);
Expr exp_affine(Eigen::VectorXd a, double b = 0.0);
Expr norm_squared(Eigen::VectorXd center);
// x_i on R^dim.
Expr coordinate(Eigen::Index dim, Eigen::Index i);
Expr constant(Eigen::Index dim, double value);

bool structurally_equal(const Expr& a, const Expr& b);

// Euclidean Lipschitz bound on the box, composed from atom bounds.
double lipschitz_bound(const Expr& expr, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);

}  // namespace nsdp
