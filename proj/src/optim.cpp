#include "lscp/optim.hpp"

#include <cmath>
#include <stdexcept>

#include "lscp/common.hpp"

namespace lscp {

OptimResult maximize(const std::function<double(const Eigen::VectorXd&)>& value,
                     const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& gradient,
                     const Eigen::VectorXd& x0, const OptimizerConfig& config) {
    const long n = x0.size();
    OptimResult res;
    res.x = x0;
    res.value = value(x0);
    if (!std::isfinite(res.value))
        throw std::runtime_error("maximize: infeasible starting point");

    Eigen::VectorXd g = gradient(res.x);
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);  // inverse-Hessian approx
    const double c1 = 1e-4;

    for (int it = 0; it < config.max_iterations; ++it) {
        res.iterations = it;
        res.gradient_norm = g.lpNorm<Eigen::Infinity>();
        if (res.gradient_norm < config.grad_tol * std::max(1.0, std::abs(res.value))) {
            res.converged = true;
            return res;
        }

        Eigen::VectorXd d = H * g;  // ascent direction
        double slope = g.dot(d);
        if (!(slope > 0.0)) {  // H lost positive definiteness; reset
            H.setIdentity();
            d = g;
            slope = g.dot(g);
            if (!(slope > 0.0)) {
                res.converged = true;
                return res;
            }
        }

        double alpha = 1.0;
        double f_new = kNegInf;
        Eigen::VectorXd x_new;
        while (alpha > 1e-16) {
            x_new = res.x + alpha * d;
            f_new = value(x_new);
            if (std::isfinite(f_new) && f_new >= res.value + c1 * alpha * slope) break;
            alpha *= 0.5;
        }
        if (!(alpha > 1e-16)) {
            // No admissible step along this direction; treat as converged to
            // the achievable precision.
            res.converged = res.gradient_norm < 1e-3 * std::max(1.0, std::abs(res.value));
            return res;
        }

        Eigen::VectorXd g_new = gradient(x_new);
        Eigen::VectorXd s = x_new - res.x;
        Eigen::VectorXd y = g - g_new;  // gradient of -f increases along s
        double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            Eigen::VectorXd Hy = H * y;
            double yHy = y.dot(Hy);
            H += ((sy + yHy) / (sy * sy)) * (s * s.transpose()) -
                 (Hy * s.transpose() + s * Hy.transpose()) / sy;
        }

        double step = s.lpNorm<Eigen::Infinity>();
        res.x = x_new;
        res.value = f_new;
        g = g_new;
        if (step < config.param_tol * std::max(1.0, res.x.lpNorm<Eigen::Infinity>())) {
            res.gradient_norm = g.lpNorm<Eigen::Infinity>();
            res.converged = true;
            return res;
        }
    }
    res.iterations = config.max_iterations;
    res.gradient_norm = g.lpNorm<Eigen::Infinity>();
    res.converged = res.gradient_norm < config.grad_tol * std::max(1.0, std::abs(res.value));
    return res;
}

}  // namespace lscp
