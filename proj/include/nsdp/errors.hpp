#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nsdp {

// Input vectors or matrices whose sizes do not agree with the object they are
// applied to.
class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A smooth atom produced a non-finite gradient at the requested point.
class UndefinedGradient : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Geometry input with generator norms beyond what the LP tolerances can
// resolve.
class IllConditioned : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class InfeasiblePoint : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A policy map returned no actions at a sampled state.
class EmptyPolicySet : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// No grid node of some stage admits a feasible continuation.
class AllInfeasibleStage : public std::runtime_error {
 public:
  AllInfeasibleStage(std::size_t stage, const std::string& what)
      : std::runtime_error(what), stage_(stage) {}
  std::size_t stage() const { return stage_; }

 private:
  std::size_t stage_;
};

// A theorem-backed check refused to run because one of its hypotheses was not
// certified. `premise()` names the hypothesis.
class PremiseViolation : public std::runtime_error {
 public:
  PremiseViolation(std::string premise, const std::string& detail)
      : std::runtime_error(premise + ": " + detail), premise_(std::move(premise)) {}
  const std::string& premise() const { return premise_; }

 private:
  std::string premise_;
};

class InadmissibleProgram : public std::runtime_error {
 public:
  InadmissibleProgram(std::size_t stage, const std::string& what)
      : std::runtime_error(what), stage_(stage) {}
  std::size_t stage() const { return stage_; }

 private:
  std::size_t stage_;
};

class AdaptednessViolation : public std::runtime_error {
 public:
  AdaptednessViolation(std::size_t stage, const std::string& what)
      : std::runtime_error(what), stage_(stage) {}
  std::size_t stage() const { return stage_; }

 private:
  std::size_t stage_;
};

// Model data that violates a structural invariant (shapes, refinement,
// probabilities, cell-constancy).
class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : std::runtime_error(what), line_(line), column_(column) {}
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace nsdp
