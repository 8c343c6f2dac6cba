#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace ogdlb {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Rejected input: a precondition or construction invariant does not hold.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An iterative routine stopped before meeting its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, Vec best, double residual)
      : std::runtime_error(what), best_(std::move(best)), residual_(residual) {}

  const Vec& best_iterate() const noexcept { return best_; }
  double residual() const noexcept { return residual_; }

 private:
  Vec best_;
  double residual_;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidArgument(msg);
}

}  // namespace ogdlb
