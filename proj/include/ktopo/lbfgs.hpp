#pragma once

#include <functional>
#include <limits>
#include <string_view>

#include <Eigen/Core>

namespace ktopo {

/// Returns f(x) and writes grad f(x) into the second argument.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct LbfgsSettings {
  double grad_tol = 1e-7;
  int max_iterations = 20000;
  int history = 10;
  double c1 = 1e-4;  ///< sufficient decrease
  double c2 = 0.9;   ///< curvature (strong Wolfe)
  int max_line_search = 40;
  /// Cap on max_i |step_i| for any trial point.
  double max_displacement = std::numeric_limits<double>::infinity();
  /// Max displacement of the first trial step along a steepest-descent direction.
  double initial_displacement = 1e-3;
  /// Norm used for the convergence test; defaults to the Euclidean norm.
  std::function<double(const Eigen::VectorXd&)> grad_norm;
  /// Optional symmetric positive definite M^-1 applied in place; the initial inverse Hessian of
  /// the recursion becomes gamma M^-1 with gamma = s.y / y.M^-1 y, and steepest steps use -M^-1 g.
  std::function<void(Eigen::VectorXd&)> precondition;
};

enum class LbfgsStatus { Converged, MaxIterations, LineSearchFailed, NonFinite };
std::string_view to_string(LbfgsStatus s);

struct LbfgsStep {
  int iteration = 0;
  double f = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;  ///< accepted line-search parameter
};

struct LbfgsResult {
  Eigen::VectorXd x;
  Eigen::VectorXd g;
  double f = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  int evaluations = 0;
  int steepest_fallbacks = 0;
  LbfgsStatus status = LbfgsStatus::MaxIterations;
  bool converged() const { return status == LbfgsStatus::Converged; }
};

/// Limited-memory BFGS (two-loop recursion) with a strong-Wolfe line search. Every accepted step
/// satisfies sufficient decrease, so the sequence of accepted f is nonincreasing. A failed line
/// search along the quasi-Newton direction resets the history and retries once along -g.
/// `on_accept` (optional) sees the starting point as iteration 0 and each accepted iterate.
LbfgsResult minimize_lbfgs(const Objective& objective, Eigen::VectorXd x0,
                           const LbfgsSettings& settings,
                           const std::function<void(const LbfgsStep&, const Eigen::VectorXd&)>&
                               on_accept = {});

}  // namespace ktopo
