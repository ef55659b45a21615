#include "nsdp/expr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "nsdp/errors.hpp"

namespace nsdp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_dim(const Eigen::VectorXd& x, Eigen::Index dim, const char* where) {
  if (x.size() != dim) {
    throw DimensionMismatch(std::string(where) + ": expected dimension " + std::to_string(dim) +
                            ", got " + std::to_string(x.size()));
  }
}

// Componentwise max of |x| over the box, shifted by `center`.
Eigen::VectorXd far_corner(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                           const Eigen::VectorXd& center) {
  return (lower - center).cwiseAbs().cwiseMax((upper - center).cwiseAbs());
}

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

SmoothAtom::SmoothAtom(Affine atom) : arity_(atom.a.size()) { data_ = std::move(atom); }

SmoothAtom::SmoothAtom(QuadraticForm atom) : arity_(atom.Q.rows()) {
  if (atom.Q.rows() != atom.Q.cols() || atom.a.size() != atom.Q.rows()) {
    throw DimensionMismatch("quadratic atom: Q must be square and match a");
  }
  atom.Q = 0.5 * (atom.Q + atom.Q.transpose());
  data_ = std::move(atom);
}

SmoothAtom::SmoothAtom(ExpAffine atom) : arity_(atom.a.size()) { data_ = std::move(atom); }

SmoothAtom::SmoothAtom(NormSquared atom) : arity_(atom.center.size()) { data_ = std::move(atom); }

SmoothAtom::SmoothAtom(std::shared_ptr<const CustomAtom> atom) : arity_(atom ? atom->arity : 0) {
  if (!atom || !atom->eval || !atom->grad) throw std::invalid_argument("custom atom: missing callbacks");
  data_ = std::move(atom);
}

std::string SmoothAtom::name() const {
  return std::visit(
      Overloaded{[](const Affine&) { return std::string("affine"); },
                 [](const QuadraticForm&) { return std::string("quadratic"); },
                 [](const ExpAffine&) { return std::string("exp_affine"); },
                 [](const NormSquared&) { return std::string("norm_squared"); },
                 [](const std::shared_ptr<const CustomAtom>& c) { return c->name; }},
      data_);
}

double SmoothAtom::eval(const Eigen::VectorXd& x) const {
  require_dim(x, arity_, "atom eval");
  return std::visit(
      Overloaded{[&](const Affine& f) { return f.a.dot(x) + f.b; },
                 [&](const QuadraticForm& f) { return 0.5 * x.dot(f.Q * x) + f.a.dot(x) + f.c; },
                 [&](const ExpAffine& f) { return std::exp(f.a.dot(x) + f.b); },
                 [&](const NormSquared& f) { return 0.5 * (x - f.center).squaredNorm(); },
                 [&](const std::shared_ptr<const CustomAtom>& f) { return f->eval(x); }},
      data_);
}

Eigen::VectorXd SmoothAtom::grad(const Eigen::VectorXd& x) const {
  require_dim(x, arity_, "atom grad");
  Eigen::VectorXd g = std::visit(
      Overloaded{[&](const Affine& f) -> Eigen::VectorXd { return f.a; },
                 [&](const QuadraticForm& f) -> Eigen::VectorXd { return f.Q * x + f.a; },
                 [&](const ExpAffine& f) -> Eigen::VectorXd {
                   return std::exp(f.a.dot(x) + f.b) * f.a;
                 },
                 [&](const NormSquared& f) -> Eigen::VectorXd { return x - f.center; },
                 [&](const std::shared_ptr<const CustomAtom>& f) -> Eigen::VectorXd {
                   return f->grad(x);
                 }},
      data_);
  if (g.size() != arity_ || !g.allFinite()) {
    throw UndefinedGradient("atom '" + name() + "' has no finite gradient at the requested point");
  }
  return g;
}

double SmoothAtom::lipschitz_bound(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) const {
  require_dim(lower, arity_, "atom lipschitz_bound");
  require_dim(upper, arity_, "atom lipschitz_bound");
  const Eigen::VectorXd origin = Eigen::VectorXd::Zero(arity_);
  return std::visit(
      Overloaded{[&](const Affine& f) { return f.a.norm(); },
                 [&](const QuadraticForm& f) {
                   return f.Q.norm() * far_corner(lower, upper, origin).norm() + f.a.norm();
                 },
                 [&](const ExpAffine& f) {
                   double top = f.b;
                   for (Eigen::Index i = 0; i < arity_; ++i) {
                     top += std::max(f.a(i) * lower(i), f.a(i) * upper(i));
                   }
                   return f.a.norm() * std::exp(top);
                 },
                 [&](const NormSquared& f) { return far_corner(lower, upper, f.center).norm(); },
                 [&](const std::shared_ptr<const CustomAtom>& f) { return f->lipschitz.value_or(kInf); }},
      data_);
}

bool SmoothAtom::operator==(const SmoothAtom& other) const {
  if (data_.index() != other.data_.index() || arity_ != other.arity_) return false;
  return std::visit(
      Overloaded{[&](const Affine& f) {
                   const auto& g = std::get<Affine>(other.data_);
                   return f.a == g.a && f.b == g.b;
                 },
                 [&](const QuadraticForm& f) {
                   const auto& g = std::get<QuadraticForm>(other.data_);
                   return f.Q == g.Q && f.a == g.a && f.c == g.c;
                 },
                 [&](const ExpAffine& f) {
                   const auto& g = std::get<ExpAffine>(other.data_);
                   return f.a == g.a && f.b == g.b;
                 },
                 [&](const NormSquared& f) { return f.center == std::get<NormSquared>(other.data_).center; },
                 [&](const std::shared_ptr<const CustomAtom>& f) {
                   return f == std::get<std::shared_ptr<const CustomAtom>>(other.data_);
                 }},
      data_);
}

const char* to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::atom: return "atom";
    case NodeKind::sum: return "sum";
    case NodeKind::scale: return "scale";
    case NodeKind::neg: return "neg";
    case NodeKind::max: return "max";
    case NodeKind::min: return "min";
    case NodeKind::abs: return "abs";
    case NodeKind::bind: return "bind";
    case NodeKind::select: return "select";
  }
  return "?";
}

Expr Expr::atom(SmoothAtom atom) {
  auto node = std::make_shared<ExprNode>();
  node->kind = NodeKind::atom;
  node->input_dim = atom.arity();
  if (node->input_dim <= 0) throw DimensionMismatch("atom arity must be positive");
  node->atom = std::move(atom);
  return Expr(std::move(node));
}

namespace {

Eigen::Index common_input_dim(const std::vector<Expr>& children, const char* kind) {
  if (children.empty()) throw std::invalid_argument(std::string(kind) + ": needs at least one child");
  const Eigen::Index dim = children.front().input_dim();
  for (const auto& c : children) {
    if (c.input_dim() != dim) throw DimensionMismatch(std::string(kind) + ": children disagree on input dimension");
  }
  return dim;
}

}  // namespace

Expr Expr::sum(std::vector<Expr> children) {
  auto node = std::make_shared<ExprNode>();
  node->kind = NodeKind::sum;
  node->input_dim = common_input_dim(children, "sum");
  node->children = std::move(children);
  return Expr(std::move(node));
}

Expr Expr::scale(double factor, Expr child) {
  if (!(factor >= 0.0) || !std::isfinite(factor)) {
    throw std::invalid_argument("scale: factor must be finite and nonnegative");
  }
  auto node = std::make_shared<ExprNode>();
  node->kind = NodeKind::scale;
  node->input_dim = child.input_dim();
  node->factor = factor;
  node->children.push_back(std::move(child));
  return Expr(std::move(node));
}

Expr Expr::neg(Expr child) {
  auto node = std::make_shared<ExprNode>();
  node->kind = NodeKind::neg;
  node->input_dim = child.input_dim();
  node->children.push_back(std::move(child));
  return Expr(std::move(node));
}

Expr Expr::max(std::vector<Expr> children) {
  auto node = std::make_shared<ExprNode>();
  node->kind = NodeKind::max;
  node->input_dim = common_input_dim(children, "max");
  node->children = std::move(children);
  return Expr(std::move(node));
}

Expr Expr::min(std::vector<Expr> children) {
  auto node = std::make_shared<ExprNode>();
  node->kind = NodeKind::min;
  node->input_dim = common_input_dim(children, "min");
  node->children = std::move(children);
  return Expr(std::move(node));
}

Expr Expr::abs(Expr child) {
  auto node = std::make_shared<ExprNode>();
  node->kind = NodeKind::abs;
  node->input_dim = child.input_dim();
  node->children.push_back(std::move(child));
  return Expr(std::move(node));
}

Expr Expr::bind(Expr child, Eigen::Index offset, Eigen::VectorXd values) {
  if (offset < 0 || values.size() == 0 || offset + values.size() > child.input_dim()) {
    throw DimensionMismatch("bind: block lies outside the child's input");
  }
  if (values.size() == child.input_dim()) {
    throw DimensionMismatch("bind: cannot bind every coordinate");
  }
  auto node = std::make_shared<ExprNode>();
  node->kind = NodeKind::bind;
  node->input_dim = child.input_dim() - values.size();
  node->offset = offset;
  node->values = std::move(values);
  node->children.push_back(std::move(child));
  return Expr(std::move(node));
}

Expr Expr::select(Expr child, std::vector<Eigen::Index> indices, Eigen::Index input_dim) {
  if (static_cast<Eigen::Index>(indices.size()) != child.input_dim()) {
    throw DimensionMismatch("select: index count must equal the child's input dimension");
  }
  std::set<Eigen::Index> seen;
  for (auto i : indices) {
    if (i < 0 || i >= input_dim) throw DimensionMismatch("select: index out of range");
    if (!seen.insert(i).second) throw std::invalid_argument("select: duplicate index");
  }
  auto node = std::make_shared<ExprNode>();
  node->kind = NodeKind::select;
  node->input_dim = input_dim;
  node->indices = std::move(indices);
  node->children.push_back(std::move(child));
  return Expr(std::move(node));
}

Eigen::Index Expr::input_dim() const { return node_->input_dim; }
NodeKind Expr::kind() const { return node_->kind; }
const std::vector<Expr>& Expr::children() const { return node_->children; }

double Expr::evaluate(const Eigen::VectorXd& point) const {
  require_dim(point, node_->input_dim, "evaluate");
  const ExprNode& n = *node_;
  switch (n.kind) {
    case NodeKind::atom:
      return n.atom->eval(point);
    case NodeKind::sum: {
      double total = 0.0;
      for (const auto& c : n.children) total += c.evaluate(point);
      return total;
    }
    case NodeKind::scale:
      return n.factor * n.children[0].evaluate(point);
    case NodeKind::neg:
      return -n.children[0].evaluate(point);
    case NodeKind::max: {
      double best = -kInf;
      for (const auto& c : n.children) best = std::max(best, c.evaluate(point));
      return best;
    }
    case NodeKind::min: {
      double best = kInf;
      for (const auto& c : n.children) best = std::min(best, c.evaluate(point));
      return best;
    }
    case NodeKind::abs:
      return std::abs(n.children[0].evaluate(point));
    case NodeKind::bind: {
      const Expr& child = n.children[0];
      Eigen::VectorXd full(child.input_dim());
      const Eigen::Index k = n.values.size();
      full.head(n.offset) = point.head(n.offset);
      full.segment(n.offset, k) = n.values;
      full.tail(child.input_dim() - n.offset - k) = point.tail(point.size() - n.offset);
      return child.evaluate(full);
    }
    case NodeKind::select: {
      Eigen::VectorXd inner(static_cast<Eigen::Index>(n.indices.size()));
      for (std::size_t i = 0; i < n.indices.size(); ++i) inner(static_cast<Eigen::Index>(i)) = point(n.indices[i]);
      return n.children[0].evaluate(inner);
    }
  }
  return 0.0;
}

Expr affine(Eigen::VectorXd a, double b) { return Expr::atom(SmoothAtom(Affine{std::move(a), b})); }

Expr quadratic(Eigen::MatrixXd Q, Eigen::VectorXd a, double c) {
  return Expr::atom(SmoothAtom(QuadraticForm{std::move(Q), std::move(a), c}));
}

Expr exp_affine(Eigen::VectorXd a, double b) { return Expr::atom(SmoothAtom(ExpAffine{std::move(a), b})); }

Expr norm_squared(Eigen::VectorXd center) { return Expr::atom(SmoothAtom(NormSquared{std::move(center)})); }

Expr coordinate(Eigen::Index dim, Eigen::Index i) {
  Eigen::VectorXd a = Eigen::VectorXd::Zero(dim);
  a(i) = 1.0;
  return affine(std::move(a));
}

Expr constant(Eigen::Index dim, double value) { return affine(Eigen::VectorXd::Zero(dim), value); }

bool structurally_equal(const Expr& a, const Expr& b) {
  if (a.identity() == b.identity()) return true;
  const ExprNode& x = a.node();
  const ExprNode& y = b.node();
  if (x.kind != y.kind || x.input_dim != y.input_dim || x.children.size() != y.children.size()) {
    return false;
  }
  switch (x.kind) {
    case NodeKind::atom:
      return *x.atom == *y.atom;
    case NodeKind::scale:
      if (x.factor != y.factor) return false;
      break;
    case NodeKind::bind:
      if (x.offset != y.offset || x.values != y.values) return false;
      break;
    case NodeKind::select:
      if (x.indices != y.indices) return false;
      break;
    default:
      break;
  }
  for (std::size_t i = 0; i < x.children.size(); ++i) {
    if (!structurally_equal(x.children[i], y.children[i])) return false;
  }
  return true;
}

double lipschitz_bound(const Expr& expr, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  require_dim(lower, expr.input_dim(), "lipschitz_bound");
  require_dim(upper, expr.input_dim(), "lipschitz_bound");
  const ExprNode& n = expr.node();
  switch (n.kind) {
    case NodeKind::atom:
      return n.atom->lipschitz_bound(lower, upper);
    case NodeKind::sum: {
      double total = 0.0;
      for (const auto& c : n.children) total += lipschitz_bound(c, lower, upper);
      return total;
    }
    case NodeKind::scale:
      return n.factor * lipschitz_bound(n.children[0], lower, upper);
    case NodeKind::neg:
    case NodeKind::abs:
      return lipschitz_bound(n.children[0], lower, upper);
    case NodeKind::max:
    case NodeKind::min: {
      double best = 0.0;
      for (const auto& c : n.children) best = std::max(best, lipschitz_bound(c, lower, upper));
      return best;
    }
    case NodeKind::bind: {
      const Expr& child = n.children[0];
      const Eigen::Index k = n.values.size();
      const Eigen::Index rest = child.input_dim() - n.offset - k;
      Eigen::VectorXd lo(child.input_dim()), hi(child.input_dim());
      lo.head(n.offset) = lower.head(n.offset);
      hi.head(n.offset) = upper.head(n.offset);
      lo.segment(n.offset, k) = n.values;
      hi.segment(n.offset, k) = n.values;
      lo.tail(rest) = lower.tail(rest);
      hi.tail(rest) = upper.tail(rest);
      return lipschitz_bound(child, lo, hi);
    }
    case NodeKind::select: {
      Eigen::VectorXd lo(static_cast<Eigen::Index>(n.indices.size()));
      Eigen::VectorXd hi(lo.size());
      for (std::size_t i = 0; i < n.indices.size(); ++i) {
        lo(static_cast<Eigen::Index>(i)) = lower(n.indices[i]);
        hi(static_cast<Eigen::Index>(i)) = upper(n.indices[i]);
      }
      return lipschitz_bound(n.children[0], lo, hi);
    }
  }
  return kInf;
}

}  // namespace nsdp
