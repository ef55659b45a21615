#pragma once

// Reproducible sampling. std::mt19937_64's output sequence is fixed by the
// standard; the conversions to doubles are done here instead of through
// <random> distributions, whose results vary between standard libraries.

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <vector>

namespace nsdp {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : engine_() % n; }
  std::uint64_t next() { return engine_(); }

  Eigen::VectorXd uniform_vector(Eigen::Index dim, double lo, double hi);

 private:
  std::mt19937_64 engine_;
};

// Halton points in [0,1)^dim with a Cranley-Patterson rotation drawn from
// `seed`. Seed 0 gives the unrotated sequence.
class HaltonSequence {
 public:
  HaltonSequence(std::size_t dim, std::uint64_t seed);
  Eigen::VectorXd next();

 private:
  std::vector<unsigned> bases_;
  Eigen::VectorXd shift_;
  std::uint64_t index_ = 1;
};

// `count` points of the sup-norm ball of `radius` around `center`, mapped from
// a rotated Halton sequence. The first point is always the center.
std::vector<Eigen::VectorXd> sample_ball(const Eigen::VectorXd& center, double radius,
                                         std::size_t count, std::uint64_t seed);

}  // namespace nsdp
