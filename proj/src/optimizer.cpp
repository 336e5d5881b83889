#include "hjweave/optimizer.hpp"

#include <cmath>
#include <deque>
#include <limits>

namespace hjweave {

namespace {

struct Pair {
    Eigen::VectorXd s;
    Eigen::VectorXd y;
    double rho;
};

Eigen::VectorXd two_loop(const std::deque<Pair>& memory, const Eigen::VectorXd& grad,
                         const Preconditioner* pre) {
    Eigen::VectorXd q = grad;
    std::vector<double> alpha(memory.size());
    for (std::size_t k = memory.size(); k-- > 0;) {
        alpha[k] = memory[k].rho * memory[k].s.dot(q);
        q -= alpha[k] * memory[k].y;
    }
    Eigen::VectorXd r;
    if (pre && pre->apply) {
        r = pre->apply(q);
        if (!memory.empty()) {
            const Pair& last = memory.back();
            const Eigen::VectorXd hy = pre->apply(last.y);
            const double denom = last.y.dot(hy);
            if (denom > 0.0) r *= last.s.dot(last.y) / denom;
        }
    } else {
        r = q;
        if (!memory.empty()) {
            const Pair& last = memory.back();
            r *= last.s.dot(last.y) / last.y.squaredNorm();
        }
    }
    for (std::size_t k = 0; k < memory.size(); ++k) {
        const double beta = memory[k].rho * memory[k].y.dot(r);
        r += (alpha[k] - beta) * memory[k].s;
    }
    return r;
}

}  // namespace

LbfgsReport lbfgs(const Objective& objective, Eigen::VectorXd& x, const LbfgsOptions& options,
                  const Preconditioner* pre) {
    LbfgsReport report;
    Eigen::VectorXd grad(x.size());
    double value = objective(x, grad);
    report.history.push_back(value);
    if (!std::isfinite(value) || !grad.allFinite()) {
        report.value = value;
        report.gradient_norm = std::numeric_limits<double>::infinity();
        report.message = "objective not finite at the initial point";
        return report;
    }

    std::deque<Pair> memory;
    Eigen::VectorXd trial(x.size()), trial_grad(x.size());
    bool fresh_restart = false;

    for (int iter = 0;; ++iter) {
        report.iterations = iter;
        report.value = value;
        report.gradient_norm = grad.size() ? grad.cwiseAbs().maxCoeff() : 0.0;
        if (report.gradient_norm <= options.gradient_tolerance) {
            report.converged = true;
            report.message = "gradient below tolerance";
            return report;
        }
        if (iter >= options.max_iterations) {
            report.message = "iteration limit reached";
            return report;
        }
        if (pre && pre->rebuild && pre->refresh > 0 && iter % pre->refresh == 0) pre->rebuild(x);

        Eigen::VectorXd direction = -two_loop(memory, grad, pre);
        double slope = grad.dot(direction);
        if (!(slope < 0.0)) {
            memory.clear();
            direction = -two_loop(memory, grad, pre);
            slope = grad.dot(direction);
            if (!(slope < 0.0)) {
                direction = -grad;
                slope = -grad.squaredNorm();
            }
        }

        // Once the predicted decrease is below the rounding level of f, Armijo
        // compares noise; the approximate Wolfe test of Hager and Zhang uses
        // the directional derivative instead.
        const double noise = 1e-12 * (1.0 + std::abs(value));
        const bool noisy = -slope < noise;
        const double rounding = 4.0 * std::numeric_limits<double>::epsilon() * std::abs(value);
        double step = 1.0;
        bool accepted = false;
        double trial_value = value;
        for (int k = 0; k < options.max_backtracks; ++k) {
            trial = x + step * direction;
            trial_value = objective(trial, trial_grad);
            if (std::isfinite(trial_value) && trial_grad.allFinite()) {
                const double trial_slope = trial_grad.dot(direction);
                const bool armijo = trial_value <= value + options.armijo * step * slope;
                const bool approximate_wolfe = trial_value <= value + rounding &&
                                               trial_slope >= 0.9 * slope &&
                                               trial_slope <= -0.8 * slope;
                if (noisy ? approximate_wolfe : armijo) {
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (!memory.empty() && !fresh_restart) {
                // Retry once with the memory dropped before declaring stagnation.
                memory.clear();
                fresh_restart = true;
                --iter;
                continue;
            }
            report.message = "line search failed to decrease the objective";
            return report;
        }
        fresh_restart = false;

        Pair pair{trial - x, trial_grad - grad, 0.0};
        const double sy = pair.s.dot(pair.y);
        x = trial;
        grad = trial_grad;
        value = trial_value;
        report.history.push_back(value);
        if (sy > 1e-16 * pair.s.norm() * pair.y.norm()) {
            pair.rho = 1.0 / sy;
            memory.push_back(std::move(pair));
            if (static_cast<int>(memory.size()) > options.memory) memory.pop_front();
        }
    }
}

}  // namespace hjweave
