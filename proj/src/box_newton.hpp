#pragma once

#include <functional>

#include <Eigen/Dense>

namespace riskmpc::detail {

/// f(z, grad, hess) returns the value; grad and hess are filled when
/// non-null. hess is a positive semidefinite model of the curvature.
using NewtonObjective =
    std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*, Eigen::MatrixXd*)>;

struct NewtonResult {
  double value = 0.0;
  double reduced_grad_norm = 0.0;  // infinity norm
  int iterations = 0;
  bool converged = false;
};

/// Gradient with the components of variables held at a bound by an outward
/// push zeroed.
Eigen::VectorXd reduced_gradient(const Eigen::VectorXd& z, const Eigen::VectorXd& g,
                                 const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);

/// Projected Newton on a box: Levenberg-damped Newton steps on the free
/// variables, Armijo backtracking along the projection arc. z is updated in
/// place and must start inside [lo, hi]. Converged when the reduced gradient
/// falls to tol * (1 + |f|).
NewtonResult minimize_box_newton(const NewtonObjective& f, Eigen::VectorXd& z,
                                 const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                 int max_iter, double tol);

}  // namespace riskmpc::detail
