#include <gtest/gtest.h>

#include <sstream>

#include "nsdp/errors.hpp"
#include "nsdp/io.hpp"
#include "support/random_models.hpp"

using namespace nsdp;
using io::Json;

namespace {

std::string data(const std::string& name) { return io::read_file(std::string(NSDP_TEST_DATA_DIR) + "/" + name); }

std::string model_error(const std::string& text) {
  try {
    io::parse_model(text);
  } catch (const ModelError& e) {
    return e.what();
  }
  return "";
}

const char* kSmallModel = R"({
  "kind": "deterministic",
  "stages": [{
    "grid": {"dim": 1, "lower": 0, "upper": 1, "points": 3},
    "cost": {"kind": "abs", "child": {"kind": "atom", "name": "affine", "a": [1, -1], "b": 0}},
    "feasibility": {"kind": "box", "lower": [0], "upper": [1], "state_dim": 1}
  }]
})";

}  // namespace

TEST(Parse, SyntaxErrorHasLineAndColumn) {
  try {
    io::parse_model(data("bad_syntax.json"));
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4u);
    EXPECT_EQ(e.column(), 33u);
    EXPECT_NE(std::string(e.what()).find("line 4, column 33"), std::string::npos);
  }
}

TEST(Parse, SmallModel) {
  const io::ModelFile f = io::parse_model(kSmallModel);
  ASSERT_FALSE(f.is_stochastic());
  const DPModel& m = *f.deterministic;
  EXPECT_EQ(m.grid(0).size(), 3u);
  EXPECT_EQ(m.stage(0).cost.evaluate(Eigen::Vector2d(0.25, 0.75)), 0.5);
}

TEST(Parse, UnknownKeysRejectedWithPointer) {
  std::string text = kSmallModel;
  text.replace(text.find("\"points\""), 8, "\"pointz\"");
  const std::string err = model_error(text);
  EXPECT_NE(err.find("/stages/0/grid"), std::string::npos) << err;
  EXPECT_NE(err.find("unknown key 'pointz'"), std::string::npos) << err;
}

TEST(Parse, SemanticErrorsUseJsonPointers) {
  std::string text = kSmallModel;
  text.replace(text.find("\"affine\""), 8, "\"cosine\"");
  EXPECT_NE(model_error(text).find("/stages/0/cost/child/name: unknown atom 'cosine'"), std::string::npos);
  std::string bad_kind = kSmallModel;
  bad_kind.replace(bad_kind.find("\"deterministic\""), 15, "\"quantum\"");
  EXPECT_NE(model_error(bad_kind).find("/kind"), std::string::npos);
}

TEST(Parse, DimensionMismatchIsModelError) {
  std::string text = kSmallModel;
  text.replace(text.find("[1, -1]"), 7, "[1, -1, 2]");
  EXPECT_FALSE(model_error(text).empty());
}

TEST(Parse, DataFiles) {
  EXPECT_FALSE(io::parse_model(data("det_quadratic.json")).is_stochastic());
  const io::ModelFile geometric = io::parse_model(data("det_geometric.json"));
  EXPECT_EQ(geometric.deterministic->horizon.mode, HorizonMode::truncated);
  EXPECT_EQ(geometric.deterministic->tail->discount, 0.5);
  const io::ModelFile stochastic = io::parse_model(data("stoch_two_atom.json"));
  ASSERT_TRUE(stochastic.is_stochastic());
  EXPECT_EQ(stochastic.stochastic->tree.atoms(), 2u);
  EXPECT_EQ(stochastic.stochastic->p, 2.0);
  const io::ProgramFile program = io::parse_program(data("stoch_optimal_program.json"));
  ASSERT_TRUE(program.stochastic);
  EXPECT_EQ(program.process.size(), 3u);
  EXPECT_EQ(program.process[2][1](0), 0.4);
  const io::ProgramFile det = io::parse_program(data("det_optimal_program.json"));
  EXPECT_FALSE(det.stochastic);
  EXPECT_EQ(det.states.size(), 3u);
}

TEST(Parse, InfiniteExponent) {
  std::string text = data("stoch_two_atom.json");
  const std::size_t at = text.find("\"p\": 2");
  ASSERT_NE(at, std::string::npos);
  text.replace(at, 6, "\"p\": \"inf\"");
  EXPECT_EQ(io::parse_model(text).stochastic->p, std::numeric_limits<double>::infinity());
}

TEST(Expressions, RoundTripThroughJson) {
  Rng rng(61);
  for (int i = 0; i < 50; ++i) {
    const Expr e = testing_support::random_exact_class(rng, 3);
    const Expr back = io::expr_from_json(io::parse_json(io::to_json(e).dump()));
    EXPECT_TRUE(structurally_equal(e, back));
    const Eigen::VectorXd x = rng.uniform_vector(3, -1, 1);
    EXPECT_EQ(e.evaluate(x), back.evaluate(x));
  }
  const Expr bound = Expr::bind(affine(Eigen::Vector3d(1, 2, 3)), 1, Eigen::VectorXd::Constant(1, 2.0));
  EXPECT_TRUE(structurally_equal(bound, io::expr_from_json(io::to_json(bound))));
  const Expr selected = Expr::select(norm_squared(Eigen::Vector2d(1, 0)), {2, 0}, 3);
  EXPECT_TRUE(structurally_equal(selected, io::expr_from_json(io::to_json(selected))));
}

TEST(Expressions, CustomAtomsCannotBeSerialized) {
  auto atom = std::make_shared<CustomAtom>();
  atom->name = "mine";
  atom->arity = 1;
  atom->eval = [](const Eigen::VectorXd& x) { return x(0); };
  atom->grad = [](const Eigen::VectorXd&) { return Eigen::VectorXd::Ones(1); };
  EXPECT_THROW(io::to_json(Expr::atom(SmoothAtom(std::shared_ptr<const CustomAtom>(atom)))), ModelError);
}

TEST(Models, DeterministicRoundTrip) {
  const io::ModelFile f = io::parse_model(data("det_geometric.json"));
  const io::ModelFile g = io::parse_model(io::to_json(*f.deterministic).dump());
  EXPECT_EQ(io::to_json(*f.deterministic).dump(), io::to_json(*g.deterministic).dump());
}

TEST(Models, StochasticRoundTrip) {
  const io::ModelFile f = io::parse_model(data("stoch_two_atom.json"));
  const io::ModelFile g = io::parse_model(io::to_json(*f.stochastic).dump());
  EXPECT_EQ(io::to_json(*f.stochastic).dump(), io::to_json(*g.stochastic).dump());
}

TEST(Sets, RoundTrip) {
  Eigen::MatrixXd A(2, 1), C(2, 1);
  A << 1, -1;
  C << 1, 0;
  const FeasibilitySet S = FeasibilitySet::polyhedral(A, Eigen::Vector2d(0.5, 1), C);
  EXPECT_EQ(io::set_from_json(io::to_json(S)), S);
  const FeasibilitySet B = FeasibilitySet::box(Eigen::Vector2d(0, -1), Eigen::Vector2d(1, 1), 3);
  EXPECT_EQ(io::set_from_json(io::to_json(B)), B);
}

TEST(Grids, UniformAndAxes) {
  const Grid g = io::grid_from_json(io::parse_json(R"({"dim": 2, "lower": -1, "upper": 1, "points": 3})"));
  EXPECT_EQ(g.size(), 9u);
  EXPECT_EQ(g.axes()[1][1], 0.0);
  const Grid h = io::grid_from_json(io::parse_json(R"({"axes": [[0, 0.25, 1]]})"));
  EXPECT_EQ(io::grid_from_json(io::to_json(h)), h);
  EXPECT_THROW(io::grid_from_json(io::parse_json(R"({"axes": [[1, 0]]})")), ModelError);
}

TEST(Table, ExportFormat) {
  const io::ModelFile f = io::parse_model(kSmallModel);
  const ValueTable table = solve_value(*f.deterministic);
  const std::string text = io::export_table(table);
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "# horizon\t0");
  std::getline(in, line);
  EXPECT_EQ(line, "# tail_error\t0");
  std::getline(in, line);
  EXPECT_EQ(line, "# columns\tstage\tnode\tcoordinates\tvalue\tpolicy");
  std::getline(in, line);
  // |x - y| with y in [0, 1] is minimized at y = x.
  EXPECT_EQ(line, "0\t0\t0\t0\t0");
  std::size_t rows = 1;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 6u);  // 3 nodes at stage 0 and 3 terminal nodes
}

TEST(Format, Doubles) {
  EXPECT_EQ(io::format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(io::format_double(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(io::format_double(2.0), "2");
}

TEST(Certificates, JsonViews) {
  const std::vector<Polytope> parts{Polytope({Eigen::VectorXd::Constant(1, 2.0), Eigen::VectorXd::Constant(1, 3.0)})};
  const MembershipCertificate c = contains_zero(parts, PolyhedralCone(1, {Eigen::VectorXd::Ones(1)}));
  const Json j = io::to_json(c);
  EXPECT_EQ(j.at("verdict"), "non_member");
  EXPECT_EQ(j.at("separator"), Json::array({-1.0}));
}
