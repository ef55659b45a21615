#pragma once

// Stochastic DP on finite scenario trees: filtrations as nested partitions,
// adapted processes, the reduction to a deterministic DPModel, and the
// per-atom integral-functional and Euler-inclusion checks.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nsdp/dp.hpp"

namespace nsdp {

using Cell = std::vector<std::size_t>;
using Partition = std::vector<Cell>;

struct ScenarioTree {
  std::vector<double> probabilities;
  // partitions[t] is the information available after stage t decisions;
  // partition(-1) is partition(0) and stages past the list reuse the last.
  std::vector<Partition> partitions;

  std::size_t atoms() const { return probabilities.size(); }
  const Partition& partition(long t) const;
  // Index of the cell of partition(t) containing `atom`.
  std::size_t cell_of(long t, std::size_t atom) const;
};

struct Diagnostics {
  std::vector<std::string> messages;
  bool ok() const { return messages.empty(); }
};

Diagnostics validate_tree(const ScenarioTree& tree);

// values[t][atom] in E_t; stage t must be constant on cells of partition(t-1).
using AdaptedProcess = std::vector<std::vector<Eigen::VectorXd>>;

struct AdaptednessResult {
  bool ok = true;
  std::size_t stage = 0;
  Cell cell;
  std::size_t first_atom = 0, second_atom = 0;
  Eigen::VectorXd first_value, second_value;
  std::string message;
};

// Exact (bitwise) cell-constancy of every stage.
AdaptednessResult validate_adapted(const AdaptedProcess& process, const ScenarioTree& tree);
// One stage of a process against partition(information_stage).
AdaptednessResult check_measurable(const std::vector<Eigen::VectorXd>& values, const ScenarioTree& tree,
                                   long information_stage, std::size_t stage_label);

struct StochasticStage {
  Grid grid;                                // grid of E_t
  std::vector<Expr> costs;                  // phi_t(., ., omega) over E_t x E_{t+1}
  std::vector<FeasibilitySet> feasibility;  // Phi_t(., omega)
};

struct StochasticDPModel {
  ScenarioTree tree;
  std::vector<StochasticStage> stages;
  std::optional<Grid> terminal_grid;
  Horizon horizon;
  std::optional<TailExtension> tail;
  // Per-atom sup bounds of |phi_t(., ., omega)| over t; empty when absent.
  std::vector<BoundSequence> atom_bounds;
  // Per-atom summable envelope.
  std::vector<double> alpha;
  // Declared Lipschitz data k_t(omega), lipschitz[t][atom]; may be empty.
  std::vector<std::vector<double>> lipschitz;
  // Nominal integrability exponent; recorded, no computational effect.
  double p = 2.0;

  const Grid& grid(std::size_t t) const;
};

// Structural checks of the model data (shapes, tree, cell-constancy of costs
// and sets on partition(t)). Empty diagnostics mean the model is usable.
Diagnostics validate_stochastic_model(const StochasticDPModel& model);

// State block per cell of partition(t-1), action block per cell of
// partition(t); feasibility is the block-diagonal product of cell copies and
// the cost is sum_omega mu(omega) phi_t composed with the block selection.
// Throws ModelError when validate_stochastic_model reports problems.
DPModel reduce_to_deterministic(const StochasticDPModel& model);

// Per-cell stacking of a stage-t process (cells of partition(t-1)) and back.
Eigen::VectorXd flatten(const StochasticDPModel& model, std::size_t t, const std::vector<Eigen::VectorXd>& values);
std::vector<Eigen::VectorXd> unflatten(const StochasticDPModel& model, std::size_t t, const Eigen::VectorXd& flat);

// sum_omega mu(omega) phi_t(f(omega), g(omega), omega). f must be measurable
// for partition(t-1), g for partition(t).
double integral_cost(const StochasticDPModel& model, std::size_t t, const std::vector<Eigen::VectorXd>& f,
                     const std::vector<Eigen::VectorXd>& g);

// Objective of the stochastic problem on an adapted process
// (process[t] for t = 0 .. K), summed over the K transitions.
double stochastic_objective(const StochasticDPModel& model, const AdaptedProcess& process);

enum class Block { x, y };

struct IntegralAudit {
  std::vector<std::pair<double, double>> samples;  // (finite difference, weighted support)
  double max_error = 0.0;
  bool ok = false;
};

struct IntegralSubdiff {
  std::vector<GradientPolytope> per_atom;
  IntegralAudit audit;
};

struct StochasticCheckOptions {
  CheckOptions base;
  std::size_t audit_directions = 8;
  std::uint64_t seed = 7;
};

// Per-atom partial Clarke gradients of phi_t. Premise "regularity" per atom.
// The audit compares one-sided finite differences of the reduced cost along
// random adapted directions with the mu-weighted support sum.
IntegralSubdiff integral_subdiff(const StochasticDPModel& model, std::size_t t,
                                 const std::vector<Eigen::VectorXd>& f, const std::vector<Eigen::VectorXd>& g,
                                 Block block, const StochasticCheckOptions& options = {});

struct SelectionNormals {
  std::vector<PolyhedralCone> per_atom;
  bool audit_ok = false;  // agreement with the reduced block-diagonal cone
};

SelectionNormals selection_normal_cone(const StochasticDPModel& model, std::size_t t,
                                       const std::vector<Eigen::VectorXd>& f,
                                       const std::vector<Eigen::VectorXd>& g,
                                       const StochasticCheckOptions& options = {});

struct StochasticSubdiff {
  std::vector<GradientPolytope> per_atom;
  // Present when every per-atom polytope is a singleton.
  std::optional<std::vector<Eigen::VectorXd>> strict;
  // Euclidean gradient of the reduced table at the flattened state and its
  // tolerance, filled with `strict`.
  Eigen::VectorXd table_gradient;
  double tolerance = 0.0;
  bool audit_ok = true;
  ViabilityReport viability;
};

// `reduced` and `table` must come from reduce_to_deterministic(model) and
// solve_value on it.
StochasticSubdiff stochastic_value_subdiff(const StochasticDPModel& model, const DPModel& reduced,
                                           const ValueTable& table, std::size_t t,
                                           const std::vector<Eigen::VectorXd>& f,
                                           const std::vector<Eigen::VectorXd>& g,
                                           const StochasticCheckOptions& options = {});

struct AtomEuler {
  std::size_t atom = 0;
  GradientPolytope cost_y;
  GradientPolytope next_cost_x;
  PolyhedralCone normal;
  MembershipCertificate membership;
  double residual_l1 = 0.0;
};

struct StochasticEuler {
  std::size_t stage = 0;
  std::vector<AtomEuler> atoms;
  bool y_on_policy = false;
  std::vector<ViabilityReport> viability;

  bool member() const;
};

// Per-atom 0 in d_y phi_t + d_x phi_{t+1} + N(g(omega); Phi_t(f(omega))).
// Throws AdaptednessViolation for non-adapted inputs and PremiseViolation
// ("feasibility", "regularity", "next_policy_point", "upper_viability").
StochasticEuler stochastic_euler_check(const StochasticDPModel& model, const DPModel& reduced,
                                       const ValueTable& table, std::size_t t,
                                       const std::vector<Eigen::VectorXd>& f,
                                       const std::vector<Eigen::VectorXd>& g,
                                       const std::vector<Eigen::VectorXd>& next,
                                       const StochasticCheckOptions& options = {});

struct LipschitzEstimate {
  std::size_t stage = 0;
  std::size_t atom = 0;
  double estimated_at_least = 0.0;
  std::optional<double> declared;
  bool falsified = false;  // estimate exceeds the declared constant
};

struct AssumptionReport {
  std::vector<double> bound_sums;  // sum_t b_t(omega) per atom
  std::vector<bool> envelope_ok;   // bound_sums <= alpha
  std::vector<LipschitzEstimate> lipschitz;
  Diagnostics structure;
  bool ok = false;
  std::vector<std::string> messages;  // failures
  std::vector<std::string> notes;     // checks skipped for missing data
};

AssumptionReport check_assumptions(const StochasticDPModel& model, std::uint64_t seed = 11,
                                   std::size_t samples = 64);

}  // namespace nsdp
