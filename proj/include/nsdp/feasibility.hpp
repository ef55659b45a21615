#pragma once

// Parametrized polyhedral sets S(x) = {y : A y <= b + C x}, their cones, and
// sampled viability diagnostics for policy multifunctions.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "nsdp/convex.hpp"

namespace nsdp {

enum class SetKind { box, polyhedral };

class FeasibilitySet {
 public:
  // lower <= y <= upper for every state. Bounds must be finite.
  static FeasibilitySet box(Eigen::VectorXd lower, Eigen::VectorXd upper, Eigen::Index state_dim);
  static FeasibilitySet polyhedral(Eigen::MatrixXd A, Eigen::VectorXd b, Eigen::MatrixXd C);

  SetKind kind() const { return kind_; }
  Eigen::Index state_dim() const { return C_.cols(); }
  Eigen::Index action_dim() const { return A_.cols(); }
  Eigen::Index rows() const { return A_.rows(); }
  const Eigen::MatrixXd& A() const { return A_; }
  const Eigen::VectorXd& b() const { return b_; }
  const Eigen::MatrixXd& C() const { return C_; }
  // Box kind only.
  const Eigen::VectorXd& lower() const { return lower_; }
  const Eigen::VectorXd& upper() const { return upper_; }
  bool state_independent() const { return C_.isZero(0.0); }

  // b + C x
  Eigen::VectorXd rhs(const Eigen::VectorXd& x) const;
  // A y - b - C x
  Eigen::VectorXd slack(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;

  bool operator==(const FeasibilitySet& other) const;

 private:
  SetKind kind_ = SetKind::polyhedral;
  Eigen::MatrixXd A_;
  Eigen::VectorXd b_;
  Eigen::MatrixXd C_;
  Eigen::VectorXd lower_;
  Eigen::VectorXd upper_;
};

constexpr double kDefaultFaceTol = 1e-8;

bool feasible(const FeasibilitySet& S, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
              double tol = 1e-9);

// Rows i with A_i y - b_i - C_i x >= -active_tol |A_i|. Throws InfeasiblePoint
// when y violates S(x) by more than the same scaled tolerance.
PolyhedralCone normal_cone(const FeasibilitySet& S, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                           double active_tol = kDefaultFaceTol);

// {h : A_i h <= 0 for active i}, returned with state_dim 0.
FeasibilitySet tangent_cone(const FeasibilitySet& S, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                            double active_tol = kDefaultFaceTol);

// l1 distance from `point` to S(x); nullopt when S(x) is empty.
std::optional<double> distance_l1(const FeasibilitySet& S, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& point);
// An l1-nearest point of S(x); clamping for boxes. nullopt when S(x) is empty.
std::optional<Eigen::VectorXd> project_l1(const FeasibilitySet& S, const Eigen::VectorXd& x,
                                          const Eigen::VectorXd& point);
bool is_empty(const FeasibilitySet& S, const Eigen::VectorXd& x);

// min over theta of d(y + theta h, S(x)) / theta <= 1e-6.
bool contingent_probe(const FeasibilitySet& S, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& h,
                      const std::vector<double>& theta_grid = {1e-1, 1e-2, 1e-3, 1e-4});

// Block-diagonal assembly: block k constrains action coordinates
// [action_offset, action_offset + set.action_dim()) using state coordinates
// [state_offset, state_offset + set.state_dim()). The result is a box when
// every block is a box and the blocks tile the action space exactly.
struct SetBlock {
  FeasibilitySet set;
  Eigen::Index state_offset = 0;
  Eigen::Index action_offset = 0;
};
FeasibilitySet assemble_blocks(Eigen::Index state_dim, Eigen::Index action_dim,
                               const std::vector<SetBlock>& blocks);

// x -> G(x); nullopt signals an empty policy set.
using PolicyMap = std::function<std::optional<Polytope>(const Eigen::VectorXd&)>;

enum class ViabilityKind { lower, upper };
enum class ViabilityVerdict { holds_on_samples, violated };

struct ViabilityReport {
  ViabilityKind kind = ViabilityKind::lower;
  double radius = 0.0;
  std::size_t samples = 0;
  ViabilityVerdict verdict = ViabilityVerdict::holds_on_samples;
  std::optional<std::pair<Eigen::VectorXd, Eigen::VectorXd>> violating_pair;

  bool holds() const { return verdict == ViabilityVerdict::holds_on_samples; }
};

struct ViabilityOptions {
  double radius = 1e-2;
  std::size_t samples = 64;
  std::uint64_t seed = 1;
  double tol = 1e-9;
};

// Pairs (x, x') are drawn from the sup-norm ball around x_bar; the first pair
// is always (x_bar, x_bar). Radius 0 tests that pair only. Throws
// EmptyPolicySet when the policy map returns nothing at a sampled x.
ViabilityReport check_lower_viability(const PolicyMap& policy, const FeasibilitySet& S,
                                      const Eigen::VectorXd& x_bar, const ViabilityOptions& options = {});
ViabilityReport check_upper_viability(const PolicyMap& policy, const FeasibilitySet& S,
                                      const Eigen::VectorXd& x_bar, const ViabilityOptions& options = {});

const char* to_string(ViabilityKind kind);
const char* to_string(ViabilityVerdict verdict);

}  // namespace nsdp
