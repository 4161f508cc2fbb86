#pragma once

#include <Eigen/Dense>
#include <functional>

namespace lscp {

struct OptimizerConfig {
    int max_iterations = 300;
    double grad_tol = 1e-6;
    double param_tol = 1e-11;
    int multistart = 3;
    double fd_step = 1e-6;
};

struct OptimResult {
    Eigen::VectorXd x;
    double value = 0.0;
    bool converged = false;
    int iterations = 0;
    double gradient_norm = 0.0;
};

// Maximize a smooth objective with BFGS and Armijo backtracking. The
// objective may return -inf for infeasible points; the line search backs
// off until it re-enters the feasible region. Fully deterministic.
OptimResult maximize(const std::function<double(const Eigen::VectorXd&)>& value,
                     const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& gradient,
                     const Eigen::VectorXd& x0, const OptimizerConfig& config);

}  // namespace lscp
