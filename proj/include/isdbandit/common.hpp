#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace isdbandit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Engine = std::mt19937_64;

/// Raised when an argument violates an operation's precondition.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a factorization or eigensolver cannot produce a usable result.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what, double condition = 0.0)
      : std::runtime_error(what), condition_(condition) {}
  double condition() const { return condition_; }

 private:
  double condition_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// splitmix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives a child seed from a parent and an ordered list of counters.
/// Each step re-mixes, so (a, b) and (b, a) give different children.
template <typename... Counters>
constexpr std::uint64_t derive_seed(std::uint64_t parent, Counters... counters) {
  std::uint64_t s = mix64(parent);
  ((s = mix64(s ^ mix64(static_cast<std::uint64_t>(counters) + 0x632be59bd9b4e019ULL))), ...);
  return s;
}

inline Engine make_engine(std::uint64_t seed) { return Engine(seed); }

}  // namespace isdbandit
