#include "nsdp/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "nsdp/errors.hpp"

namespace nsdp::io {

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ModelError((where.empty() ? std::string("/") : where) + ": " + what);
}

std::string child(const std::string& where, const std::string& key) { return where + "/" + key; }
std::string child(const std::string& where, std::size_t i) { return where + "/" + std::to_string(i); }

void require_object(const Json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(where, "expected an object");
  std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!keys.count(key)) fail(where, "unknown key '" + key + "'");
  }
}

const Json& field(const Json& j, const std::string& where, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) fail(where, std::string("missing key '") + key + "'");
  return *it;
}

double number(const Json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  return j.get<double>();
}

double number_or(const Json& j, const std::string& where, const char* key, double fallback) {
  return j.contains(key) ? number(j.at(key), child(where, key)) : fallback;
}

std::size_t count(const Json& j, const std::string& where) {
  if (!j.is_number_integer() || j.get<long long>() < 0) fail(where, "expected a nonnegative integer");
  return j.get<std::size_t>();
}

std::string text(const Json& j, const std::string& where) {
  if (!j.is_string()) fail(where, "expected a string");
  return j.get<std::string>();
}

const Json& array(const Json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array");
  return j;
}

Eigen::VectorXd vector(const Json& j, const std::string& where) {
  array(j, where);
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], child(where, i));
  return v;
}

// Row-major matrix; `cols` is used when there are no rows.
Eigen::MatrixXd matrix(const Json& j, const std::string& where, Eigen::Index cols = -1) {
  array(j, where);
  if (j.empty()) return Eigen::MatrixXd(0, std::max<Eigen::Index>(cols, 0));
  const Eigen::Index c = static_cast<Eigen::Index>(array(j[0], child(where, 0)).size());
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), c);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Eigen::VectorXd row = vector(j[i], child(where, i));
    if (row.size() != c) fail(child(where, i), "ragged matrix row");
    m.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return m;
}

std::vector<Expr> expr_list(const Json& j, const std::string& where) {
  array(j, where);
  std::vector<Expr> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(expr_from_json(j[i], child(where, i)));
  return out;
}

// Rebinds library exceptions raised while building objects to the location.
template <class F>
auto at(const std::string& where, F&& build) -> decltype(build()) {
  try {
    return build();
  } catch (const ModelError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    fail(where, e.what());
  } catch (const std::domain_error& e) {
    fail(where, e.what());
  }
}

Json matrix_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vector_json(m.row(i).transpose()));
  return rows;
}

BoundSequence bounds_from_json(const Json& j, const std::string& where) {
  require_object(j, where, {"terms"});
  const std::string w = child(where, "terms");
  const Json& terms = array(field(j, where, "terms"), w);
  std::vector<BoundTerm> out;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const std::string wi = child(w, i);
    require_object(terms[i], wi, {"prefix", "ratio"});
    out.push_back({number(field(terms[i], wi, "prefix"), child(wi, "prefix")),
                   number(field(terms[i], wi, "ratio"), child(wi, "ratio"))});
  }
  return BoundSequence(std::move(out));
}

Horizon horizon_from_json(const Json& j, const std::string& where) {
  require_object(j, where, {"mode", "epsilon"});
  Horizon h;
  const std::string mode = text(field(j, where, "mode"), child(where, "mode"));
  if (mode == "finite") {
    h.mode = HorizonMode::finite;
  } else if (mode == "truncated") {
    h.mode = HorizonMode::truncated;
  } else {
    fail(child(where, "mode"), "unknown horizon mode '" + mode + "'");
  }
  h.epsilon = number_or(j, where, "epsilon", h.epsilon);
  if (!(h.epsilon > 0.0)) fail(child(where, "epsilon"), "epsilon must be positive");
  return h;
}

std::optional<TailExtension> tail_from_json(const Json& j, const std::string& where) {
  if (!j.contains("tail")) return std::nullopt;
  const std::string w = child(where, "tail");
  require_object(j.at("tail"), w, {"discount"});
  const double d = number(field(j.at("tail"), w, "discount"), child(w, "discount"));
  if (!(d >= 0.0) || !std::isfinite(d)) fail(child(w, "discount"), "discount must be finite and nonnegative");
  return TailExtension{d};
}

DPModel deterministic_from_json(const Json& j) {
  require_object(j, "", {"kind", "horizon", "tail", "stages", "terminal_grid", "bounds"});
  DPModel m;
  if (j.contains("horizon")) m.horizon = horizon_from_json(j.at("horizon"), "/horizon");
  m.tail = tail_from_json(j, "");
  const Json& stages = array(field(j, "", "stages"), "/stages");
  for (std::size_t t = 0; t < stages.size(); ++t) {
    const std::string w = child("/stages", t);
    require_object(stages[t], w, {"grid", "cost", "feasibility"});
    m.stages.push_back(Stage{grid_from_json(field(stages[t], w, "grid"), child(w, "grid")),
                             set_from_json(field(stages[t], w, "feasibility"), child(w, "feasibility")),
                             expr_from_json(field(stages[t], w, "cost"), child(w, "cost"))});
  }
  if (j.contains("terminal_grid")) m.terminal_grid = grid_from_json(j.at("terminal_grid"), "/terminal_grid");
  if (j.contains("bounds")) m.bounds = bounds_from_json(j.at("bounds"), "/bounds");
  at("/", [&] {
    validate_model(m);
    return 0;
  });
  return m;
}

StochasticDPModel stochastic_from_json(const Json& j) {
  require_object(j, "", {"kind", "horizon", "tail", "atoms", "filtration", "stages", "terminal_grid", "bounds"});
  StochasticDPModel m;
  if (j.contains("horizon")) m.horizon = horizon_from_json(j.at("horizon"), "/horizon");
  m.tail = tail_from_json(j, "");
  const Eigen::VectorXd mu = vector(field(j, "", "atoms"), "/atoms");
  m.tree.probabilities.assign(mu.data(), mu.data() + mu.size());
  const Json& filtration = array(field(j, "", "filtration"), "/filtration");
  for (std::size_t t = 0; t < filtration.size(); ++t) {
    const std::string w = child("/filtration", t);
    Partition p;
    for (std::size_t c = 0; c < array(filtration[t], w).size(); ++c) {
      const std::string wc = child(w, c);
      Cell cell;
      for (std::size_t k = 0; k < array(filtration[t][c], wc).size(); ++k) {
        cell.push_back(count(filtration[t][c][k], child(wc, k)));
      }
      p.push_back(std::move(cell));
    }
    m.tree.partitions.push_back(std::move(p));
  }
  const Json& stages = array(field(j, "", "stages"), "/stages");
  for (std::size_t t = 0; t < stages.size(); ++t) {
    const std::string w = child("/stages", t);
    require_object(stages[t], w, {"grid", "costs", "feasibility"});
    StochasticStage s{grid_from_json(field(stages[t], w, "grid"), child(w, "grid")),
                      expr_list(field(stages[t], w, "costs"), child(w, "costs")),
                      {}};
    const std::string wf = child(w, "feasibility");
    const Json& sets = array(field(stages[t], w, "feasibility"), wf);
    for (std::size_t a = 0; a < sets.size(); ++a) s.feasibility.push_back(set_from_json(sets[a], child(wf, a)));
    m.stages.push_back(std::move(s));
  }
  if (j.contains("terminal_grid")) m.terminal_grid = grid_from_json(j.at("terminal_grid"), "/terminal_grid");
  if (j.contains("bounds")) {
    const Json& b = j.at("bounds");
    require_object(b, "/bounds", {"per_atom", "alpha", "lipschitz", "p"});
    if (b.contains("per_atom")) {
      const Json& per = array(b.at("per_atom"), "/bounds/per_atom");
      for (std::size_t a = 0; a < per.size(); ++a) {
        m.atom_bounds.push_back(bounds_from_json(per[a], child("/bounds/per_atom", a)));
      }
    }
    if (b.contains("alpha")) {
      const Eigen::VectorXd alpha = vector(b.at("alpha"), "/bounds/alpha");
      m.alpha.assign(alpha.data(), alpha.data() + alpha.size());
    }
    if (b.contains("lipschitz")) {
      const Json& rows = array(b.at("lipschitz"), "/bounds/lipschitz");
      for (std::size_t t = 0; t < rows.size(); ++t) {
        const Eigen::VectorXd k = vector(rows[t], child("/bounds/lipschitz", t));
        m.lipschitz.emplace_back(k.data(), k.data() + k.size());
      }
    }
    if (b.contains("p")) {
      const Json& p = b.at("p");
      if (p.is_string() && p.get<std::string>() == "inf") {
        m.p = std::numeric_limits<double>::infinity();
      } else {
        m.p = number(p, "/bounds/p");
      }
    }
  }
  return m;
}

}  // namespace

Json parse_json(const std::string& source) {
  try {
    return Json::parse(source);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1, column = 1;
    const std::size_t end = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, source.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (source[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    std::string message = e.what();
    const auto pos = message.find("syntax error");
    if (pos != std::string::npos) message = message.substr(pos);
    throw ParseError("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message, line,
                     column);
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

Expr expr_from_json(const Json& j, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an expression object");
  const std::string kind = text(field(j, where, "kind"), child(where, "kind"));
  if (kind == "atom") {
    const std::string name = text(field(j, where, "name"), child(where, "name"));
    if (name == "affine") {
      require_object(j, where, {"kind", "name", "a", "b"});
      const Eigen::VectorXd a = vector(field(j, where, "a"), child(where, "a"));
      return affine(a, number_or(j, where, "b", 0.0));
    }
    if (name == "quadratic") {
      require_object(j, where, {"kind", "name", "Q", "a", "c"});
      const Eigen::MatrixXd Q = matrix(field(j, where, "Q"), child(where, "Q"));
      if (Q.rows() != Q.cols()) fail(child(where, "Q"), "Q must be square");
      const Eigen::VectorXd a =
          j.contains("a") ? vector(j.at("a"), child(where, "a")) : Eigen::VectorXd::Zero(Q.rows());
      return at(where, [&] { return quadratic(Q, a, number_or(j, where, "c", 0.0)); });
    }
    if (name == "exp_affine") {
      require_object(j, where, {"kind", "name", "a", "b"});
      return exp_affine(vector(field(j, where, "a"), child(where, "a")), number_or(j, where, "b", 0.0));
    }
    if (name == "norm_squared") {
      require_object(j, where, {"kind", "name", "center"});
      return norm_squared(vector(field(j, where, "center"), child(where, "center")));
    }
    fail(child(where, "name"), "unknown atom '" + name + "'");
  }
  if (kind == "sum" || kind == "max" || kind == "min") {
    require_object(j, where, {"kind", "children"});
    auto children = expr_list(field(j, where, "children"), child(where, "children"));
    return at(where, [&] {
      if (kind == "sum") return Expr::sum(std::move(children));
      if (kind == "max") return Expr::max(std::move(children));
      return Expr::min(std::move(children));
    });
  }
  if (kind == "neg" || kind == "abs") {
    require_object(j, where, {"kind", "child"});
    Expr c = expr_from_json(field(j, where, "child"), child(where, "child"));
    return kind == "neg" ? Expr::neg(std::move(c)) : Expr::abs(std::move(c));
  }
  if (kind == "scale") {
    require_object(j, where, {"kind", "factor", "child"});
    const double f = number(field(j, where, "factor"), child(where, "factor"));
    Expr c = expr_from_json(field(j, where, "child"), child(where, "child"));
    return at(where, [&] { return Expr::scale(f, std::move(c)); });
  }
  if (kind == "bind") {
    require_object(j, where, {"kind", "child", "offset", "values"});
    Expr c = expr_from_json(field(j, where, "child"), child(where, "child"));
    const auto offset = static_cast<Eigen::Index>(count(field(j, where, "offset"), child(where, "offset")));
    const Eigen::VectorXd values = vector(field(j, where, "values"), child(where, "values"));
    return at(where, [&] { return Expr::bind(std::move(c), offset, values); });
  }
  if (kind == "select") {
    require_object(j, where, {"kind", "child", "indices", "input_dim"});
    Expr c = expr_from_json(field(j, where, "child"), child(where, "child"));
    const std::string wi = child(where, "indices");
    std::vector<Eigen::Index> indices;
    for (std::size_t i = 0; i < array(field(j, where, "indices"), wi).size(); ++i) {
      indices.push_back(static_cast<Eigen::Index>(count(j.at("indices")[i], child(wi, i))));
    }
    const auto dim = static_cast<Eigen::Index>(count(field(j, where, "input_dim"), child(where, "input_dim")));
    return at(where, [&] { return Expr::select(std::move(c), std::move(indices), dim); });
  }
  fail(child(where, "kind"), "unknown expression kind '" + kind + "'");
}

FeasibilitySet set_from_json(const Json& j, const std::string& where) {
  if (!j.is_object()) fail(where, "expected a feasibility set object");
  const std::string kind = text(field(j, where, "kind"), child(where, "kind"));
  if (kind == "box") {
    require_object(j, where, {"kind", "lower", "upper", "state_dim"});
    const Eigen::VectorXd lo = vector(field(j, where, "lower"), child(where, "lower"));
    const Eigen::VectorXd hi = vector(field(j, where, "upper"), child(where, "upper"));
    const auto n = static_cast<Eigen::Index>(count(field(j, where, "state_dim"), child(where, "state_dim")));
    return at(where, [&] { return FeasibilitySet::box(lo, hi, n); });
  }
  if (kind == "polyhedral") {
    require_object(j, where, {"kind", "A", "b", "C", "state_dim", "action_dim"});
    const Eigen::Index m = j.contains("action_dim")
                               ? static_cast<Eigen::Index>(count(j.at("action_dim"), child(where, "action_dim")))
                               : -1;
    const Eigen::MatrixXd A = matrix(field(j, where, "A"), child(where, "A"), m);
    const Eigen::VectorXd b = vector(field(j, where, "b"), child(where, "b"));
    Eigen::MatrixXd C;
    if (j.contains("C")) {
      const Eigen::Index n =
          j.contains("state_dim") ? static_cast<Eigen::Index>(count(j.at("state_dim"), child(where, "state_dim"))) : -1;
      C = matrix(j.at("C"), child(where, "C"), n);
    } else {
      const auto n = static_cast<Eigen::Index>(count(field(j, where, "state_dim"), child(where, "state_dim")));
      C = Eigen::MatrixXd::Zero(A.rows(), n);
    }
    if (m >= 0 && A.cols() != m) fail(child(where, "A"), "column count differs from action_dim");
    return at(where, [&] { return FeasibilitySet::polyhedral(A, b, C); });
  }
  fail(child(where, "kind"), "unknown feasibility kind '" + kind + "'");
}

Grid grid_from_json(const Json& j, const std::string& where) {
  if (!j.is_object()) fail(where, "expected a grid object");
  if (j.contains("axes")) {
    require_object(j, where, {"axes"});
    const std::string w = child(where, "axes");
    std::vector<std::vector<double>> axes;
    for (std::size_t d = 0; d < array(j.at("axes"), w).size(); ++d) {
      const Eigen::VectorXd axis = vector(j.at("axes")[d], child(w, d));
      axes.emplace_back(axis.data(), axis.data() + axis.size());
    }
    return at(where, [&] { return Grid(std::move(axes)); });
  }
  require_object(j, where, {"dim", "lower", "upper", "points"});
  const auto dim = static_cast<Eigen::Index>(count(field(j, where, "dim"), child(where, "dim")));
  const double lo = number(field(j, where, "lower"), child(where, "lower"));
  const double hi = number(field(j, where, "upper"), child(where, "upper"));
  const std::size_t points = count(field(j, where, "points"), child(where, "points"));
  return at(where, [&] { return Grid::uniform(dim, lo, hi, points); });
}

ModelFile parse_model(const std::string& source) {
  const Json j = parse_json(source);
  if (!j.is_object()) fail("", "expected a model object");
  const std::string kind = j.contains("kind") ? text(j.at("kind"), "/kind") : std::string("deterministic");
  ModelFile out;
  if (kind == "deterministic") {
    out.deterministic = deterministic_from_json(j);
  } else if (kind == "stochastic") {
    out.stochastic = stochastic_from_json(j);
  } else {
    fail("/kind", "unknown model kind '" + kind + "'");
  }
  return out;
}

ProgramFile parse_program(const std::string& source) {
  const Json j = parse_json(source);
  if (!j.is_object()) fail("", "expected a program object");
  const std::string kind = j.contains("kind") ? text(j.at("kind"), "/kind") : std::string("deterministic");
  ProgramFile out;
  if (kind == "deterministic") {
    require_object(j, "", {"kind", "states"});
    const Json& states = array(field(j, "", "states"), "/states");
    for (std::size_t t = 0; t < states.size(); ++t) out.states.push_back(vector(states[t], child("/states", t)));
  } else if (kind == "stochastic") {
    require_object(j, "", {"kind", "process"});
    out.stochastic = true;
    const Json& process = array(field(j, "", "process"), "/process");
    for (std::size_t t = 0; t < process.size(); ++t) {
      const std::string w = child("/process", t);
      std::vector<Eigen::VectorXd> stage;
      for (std::size_t a = 0; a < array(process[t], w).size(); ++a) stage.push_back(vector(process[t][a], child(w, a)));
      out.process.push_back(std::move(stage));
    }
  } else {
    fail("/kind", "unknown program kind '" + kind + "'");
  }
  return out;
}

Json vector_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Json to_json(const Expr& e) {
  const ExprNode& n = e.node();
  Json out;
  out["kind"] = to_string(n.kind);
  switch (n.kind) {
    case NodeKind::atom: {
      const SmoothAtom& atom = *n.atom;
      if (const auto* a = std::get_if<Affine>(&atom.data())) {
        out["name"] = "affine";
        out["a"] = vector_json(a->a);
        out["b"] = a->b;
      } else if (const auto* q = std::get_if<QuadraticForm>(&atom.data())) {
        out["name"] = "quadratic";
        out["Q"] = matrix_json(q->Q);
        out["a"] = vector_json(q->a);
        out["c"] = q->c;
      } else if (const auto* x = std::get_if<ExpAffine>(&atom.data())) {
        out["name"] = "exp_affine";
        out["a"] = vector_json(x->a);
        out["b"] = x->b;
      } else if (const auto* s = std::get_if<NormSquared>(&atom.data())) {
        out["name"] = "norm_squared";
        out["center"] = vector_json(s->center);
      } else {
        throw ModelError("custom atom '" + atom.name() + "' cannot be serialized");
      }
      break;
    }
    case NodeKind::sum:
    case NodeKind::max:
    case NodeKind::min: {
      Json children = Json::array();
      for (const auto& c : n.children) children.push_back(to_json(c));
      out["children"] = std::move(children);
      break;
    }
    case NodeKind::scale:
      out["factor"] = n.factor;
      out["child"] = to_json(n.children.front());
      break;
    case NodeKind::neg:
    case NodeKind::abs:
      out["child"] = to_json(n.children.front());
      break;
    case NodeKind::bind:
      out["child"] = to_json(n.children.front());
      out["offset"] = n.offset;
      out["values"] = vector_json(n.values);
      break;
    case NodeKind::select:
      out["child"] = to_json(n.children.front());
      out["indices"] = n.indices;
      out["input_dim"] = n.input_dim;
      break;
  }
  return out;
}

Json to_json(const FeasibilitySet& s) {
  Json out;
  if (s.kind() == SetKind::box) {
    out["kind"] = "box";
    out["lower"] = vector_json(s.lower());
    out["upper"] = vector_json(s.upper());
    out["state_dim"] = s.state_dim();
  } else {
    out["kind"] = "polyhedral";
    out["A"] = matrix_json(s.A());
    out["b"] = vector_json(s.b());
    out["C"] = matrix_json(s.C());
    out["state_dim"] = s.state_dim();
    out["action_dim"] = s.action_dim();
  }
  return out;
}

Json to_json(const Grid& g) {
  Json axes = Json::array();
  for (const auto& axis : g.axes()) axes.push_back(axis);
  return Json{{"axes", std::move(axes)}};
}

Json to_json(const BoundSequence& b) {
  Json terms = Json::array();
  for (const auto& t : b.terms()) terms.push_back(Json{{"prefix", t.prefix}, {"ratio", t.ratio}});
  return Json{{"terms", std::move(terms)}};
}

namespace {

Json horizon_json(const Horizon& h) {
  Json out{{"mode", h.mode == HorizonMode::finite ? "finite" : "truncated"}};
  if (h.mode == HorizonMode::truncated) out["epsilon"] = h.epsilon;
  return out;
}

}  // namespace

Json to_json(const DPModel& m) {
  Json out{{"kind", "deterministic"}, {"horizon", horizon_json(m.horizon)}};
  if (m.tail) out["tail"] = Json{{"discount", m.tail->discount}};
  Json stages = Json::array();
  for (const auto& s : m.stages) {
    stages.push_back(Json{{"grid", to_json(s.grid)}, {"cost", to_json(s.cost)}, {"feasibility", to_json(s.feasibility)}});
  }
  out["stages"] = std::move(stages);
  if (m.terminal_grid) out["terminal_grid"] = to_json(*m.terminal_grid);
  if (m.bounds) out["bounds"] = to_json(*m.bounds);
  return out;
}

Json to_json(const StochasticDPModel& m) {
  Json out{{"kind", "stochastic"}, {"horizon", horizon_json(m.horizon)}};
  if (m.tail) out["tail"] = Json{{"discount", m.tail->discount}};
  out["atoms"] = m.tree.probabilities;
  out["filtration"] = m.tree.partitions;
  Json stages = Json::array();
  for (const auto& s : m.stages) {
    Json costs = Json::array(), sets = Json::array();
    for (const auto& c : s.costs) costs.push_back(to_json(c));
    for (const auto& f : s.feasibility) sets.push_back(to_json(f));
    stages.push_back(Json{{"grid", to_json(s.grid)}, {"costs", std::move(costs)}, {"feasibility", std::move(sets)}});
  }
  out["stages"] = std::move(stages);
  if (m.terminal_grid) out["terminal_grid"] = to_json(*m.terminal_grid);
  Json bounds = Json::object();
  if (!m.atom_bounds.empty()) {
    Json per = Json::array();
    for (const auto& b : m.atom_bounds) per.push_back(to_json(b));
    bounds["per_atom"] = std::move(per);
  }
  if (!m.alpha.empty()) bounds["alpha"] = m.alpha;
  if (!m.lipschitz.empty()) bounds["lipschitz"] = m.lipschitz;
  if (std::isinf(m.p)) {
    bounds["p"] = "inf";
  } else {
    bounds["p"] = m.p;
  }
  out["bounds"] = std::move(bounds);
  return out;
}

Json to_json(const Polytope& p) {
  Json gens = Json::array();
  for (const auto& g : p.generators()) gens.push_back(vector_json(g));
  return gens;
}

Json to_json(const PolyhedralCone& c) {
  Json rays = Json::array();
  for (const auto& r : c.rays()) rays.push_back(vector_json(r));
  return rays;
}

Json to_json(const MembershipCertificate& c) {
  Json out{{"verdict", c.is_member() ? "member" : "non_member"}, {"residual", c.residual}};
  if (c.is_member()) {
    Json weights = Json::array();
    for (const auto& w : c.weights) weights.push_back(vector_json(w));
    out["weights"] = std::move(weights);
    out["cone_weights"] = vector_json(c.cone_weights);
  } else {
    out["separator"] = c.separator ? vector_json(*c.separator) : Json();
    out["margin"] = c.margin;
  }
  return out;
}

Json to_json(const ViabilityReport& r) {
  Json out{{"kind", to_string(r.kind)},
           {"radius", r.radius},
           {"samples", r.samples},
           {"verdict", to_string(r.verdict)}};
  if (r.violating_pair) {
    out["violating_pair"] = Json::array({vector_json(r.violating_pair->first), vector_json(r.violating_pair->second)});
  }
  return out;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string export_table(const ValueTable& table) {
  std::ostringstream out;
  out << "# horizon\t" << table.horizon << "\n";
  out << "# tail_error\t" << format_double(table.tail_error) << "\n";
  out << "# columns\tstage\tnode\tcoordinates\tvalue\tpolicy\n";
  for (std::size_t t = 0; t < table.values.size(); ++t) {
    const Grid& grid = table.grids[t];
    for (std::size_t i = 0; i < grid.size(); ++i) {
      out << t << '\t' << i << '\t';
      const Eigen::VectorXd x = grid.node(i);
      for (Eigen::Index d = 0; d < x.size(); ++d) out << (d ? "," : "") << format_double(x(d));
      const StageValue& v = table.values[t][i];
      out << '\t' << (v.is_finite() ? format_double(v.value()) : std::string("inf")) << '\t';
      if (t < table.policies.size()) {
        const auto& candidates = table.policies[t][i];
        for (std::size_t k = 0; k < candidates.size(); ++k) {
          if (k) out << ';';
          for (Eigen::Index d = 0; d < candidates[k].size(); ++d) {
            out << (d ? "," : "") << format_double(candidates[k](d));
          }
        }
      }
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace nsdp::io
