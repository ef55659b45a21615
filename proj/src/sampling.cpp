#include "nsdp/sampling.hpp"

#include <cmath>

namespace nsdp {

Eigen::VectorXd Rng::uniform_vector(Eigen::Index dim, double lo, double hi) {
  Eigen::VectorXd v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = uniform(lo, hi);
  return v;
}

namespace {

std::vector<unsigned> first_primes(std::size_t count) {
  std::vector<unsigned> primes;
  for (unsigned candidate = 2; primes.size() < count; ++candidate) {
    bool prime = true;
    for (unsigned p : primes) {
      if (p * p > candidate) break;
      if (candidate % p == 0) {
        prime = false;
        break;
      }
    }
    if (prime) primes.push_back(candidate);
  }
  return primes;
}

double radical_inverse(std::uint64_t index, unsigned base) {
  double result = 0.0;
  double scale = 1.0 / base;
  while (index > 0) {
    result += static_cast<double>(index % base) * scale;
    index /= base;
    scale /= base;
  }
  return result;
}

}  // namespace

HaltonSequence::HaltonSequence(std::size_t dim, std::uint64_t seed)
    : bases_(first_primes(dim)), shift_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim))) {
  if (seed != 0) {
    Rng rng(seed);
    for (Eigen::Index i = 0; i < shift_.size(); ++i) shift_(i) = rng.uniform();
  }
}

Eigen::VectorXd HaltonSequence::next() {
  Eigen::VectorXd point(shift_.size());
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    double u = radical_inverse(index_, bases_[static_cast<std::size_t>(i)]) + shift_(i);
    point(i) = u - std::floor(u);
  }
  ++index_;
  return point;
}

std::vector<Eigen::VectorXd> sample_ball(const Eigen::VectorXd& center, double radius,
                                         std::size_t count, std::uint64_t seed) {
  std::vector<Eigen::VectorXd> points;
  if (count == 0) return points;
  points.reserve(count);
  points.push_back(center);
  HaltonSequence halton(static_cast<std::size_t>(center.size()), seed);
  while (points.size() < count) {
    Eigen::VectorXd u = halton.next();
    points.push_back(center + radius * (2.0 * u.array() - 1.0).matrix());
  }
  return points;
}

}  // namespace nsdp
