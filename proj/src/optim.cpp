#include "smom/optim.hpp"

#include <cmath>
#include <deque>

namespace smom {

namespace {

struct LbfgsMemory {
    std::deque<VectorXd> s, y;
    std::deque<double> rho;
    int cap;

    explicit LbfgsMemory(int m) : cap(m) {}

    void push(const VectorXd& si, const VectorXd& yi) {
        const double sy = si.dot(yi);
        if (sy <= 1e-14 * si.norm() * yi.norm()) return;  // curvature guard
        s.push_back(si);
        y.push_back(yi);
        rho.push_back(1.0 / sy);
        if (static_cast<int>(s.size()) > cap) {
            s.pop_front();
            y.pop_front();
            rho.pop_front();
        }
    }

    VectorXd direction(const VectorXd& grad) const {
        VectorXd q = grad;
        const int k = static_cast<int>(s.size());
        std::vector<double> alpha(static_cast<std::size_t>(k));
        for (int i = k - 1; i >= 0; --i) {
            alpha[static_cast<std::size_t>(i)] =
                rho[static_cast<std::size_t>(i)] * s[static_cast<std::size_t>(i)].dot(q);
            q -= alpha[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(i)];
        }
        if (k > 0) {
            const double gamma = s.back().dot(y.back()) / y.back().squaredNorm();
            q *= gamma;
        }
        for (int i = 0; i < k; ++i) {
            const double beta =
                rho[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(i)].dot(q);
            q += (alpha[static_cast<std::size_t>(i)] - beta) * s[static_cast<std::size_t>(i)];
        }
        return -q;
    }
};

struct InnerResult {
    double cost;
    int iterations;
    bool converged;
    bool line_search_failed;
};

// L-BFGS with a backtracking/extending Wolfe-ish line search.
InnerResult lbfgs_minimize(const CostGradFn& f, VectorXd& x, const OptimOptions& opts,
                           int iter_budget, std::vector<double>* trace) {
    LbfgsMemory mem(opts.memory);
    VectorXd grad(x.size()), gnew(x.size());
    double cost = f(x, grad);
    if (trace) trace->push_back(cost);
    int it = 0;
    for (; it < iter_budget; ++it) {
        if (!std::isfinite(cost)) throw OptimizerError("optimizer: non-finite cost");
        VectorXd dir = mem.direction(grad);
        double d0 = dir.dot(grad);
        if (d0 >= 0.0) {  // fall back to steepest descent
            dir = -grad;
            d0 = dir.dot(grad);
        }
        if (-d0 <= 1e-18 * std::max(1.0, std::abs(cost)))
            return {cost, it, true, false};

        const double c1 = 1e-4;
        double step = 1.0;
        double best_step = 0.0, best_cost = cost;
        VectorXd xt;
        bool accepted = false;
        for (int ls = 0; ls < 30; ++ls) {
            xt = x + step * dir;
            const double ct = f(xt, gnew);
            if (std::isfinite(ct) && ct <= cost + c1 * step * d0) {
                accepted = true;
                best_step = step;
                best_cost = ct;
                break;
            }
            if (std::isfinite(ct) && ct < best_cost) {
                best_cost = ct;
                best_step = step;
            }
            // quadratic interpolation with safeguards
            const double denom = 2.0 * (ct - cost - step * d0);
            double snew = (std::isfinite(ct) && denom > 0) ? -d0 * step * step / denom : 0.5 * step;
            if (!(snew > 0.05 * step && snew < 0.95 * step)) snew = 0.5 * step;
            step = snew;
        }
        if (!accepted) {
            if (best_step <= 0.0)
                return {cost, it, false, true};  // line-search collapse
            xt = x + best_step * dir;
            best_cost = f(xt, gnew);
        }

        const double prev = cost;
        mem.push(xt - x, gnew - grad);
        x = xt;
        grad = gnew;
        cost = best_cost;
        if (trace) trace->push_back(cost);
        if (std::abs(prev - cost) <= opts.ftol * std::max(1.0, std::abs(prev)))
            return {cost, it + 1, true, false};
    }
    return {cost, it, false, false};
}

}  // namespace

OptimResult minimize_constrained(const CostGradFn& f, VectorXd x0, const MatrixXd& a,
                                 const VectorXd& c, const OptimOptions& opts) {
    OptimResult res;
    res.x = std::move(x0);
    const Eigen::Index ncon = a.rows();
    require_shape(ncon == c.size(), "minimize_constrained: A rows must match c");
    if (ncon > 0)
        require_shape(a.cols() == res.x.size(), "minimize_constrained: A cols must match x");

    if (ncon == 0) {
        const InnerResult inner = lbfgs_minimize(f, res.x, opts, opts.maxiter, &res.cost_trace);
        res.cost = inner.cost;
        res.iterations = inner.iterations;
        res.converged = inner.converged;
        res.status = inner.line_search_failed ? "line-search collapse"
                                              : (inner.converged ? "converged" : "iteration cap");
        if (inner.line_search_failed && !inner.converged)
            throw OptimizerError("optimizer: line-search collapse at cost " +
                                 std::to_string(inner.cost));
        return res;
    }

    VectorXd mult = VectorXd::Zero(ncon);
    double rho = opts.penalty0;
    int used = 0;
    double prev_violation = std::numeric_limits<double>::infinity();
    double outer_cost = 0.0;
    bool outer_ok = false;
    for (int round = 0; round < opts.max_outer && used < opts.maxiter; ++round) {
        auto aug = [&](const VectorXd& x, VectorXd& grad) {
            double cost = f(x, grad);
            const VectorXd cons = a * x + c;
            for (Eigen::Index i = 0; i < ncon; ++i) {
                const double t = mult(i) - rho * cons(i);
                if (t > 0.0) {
                    cost += (t * t - mult(i) * mult(i)) / (2.0 * rho);
                    grad -= t * a.row(i).transpose();
                }
            }
            return cost;
        };
        const InnerResult inner =
            lbfgs_minimize(aug, res.x, opts, opts.maxiter - used, &res.cost_trace);
        used += std::max(inner.iterations, 1);
        const VectorXd cons = a * res.x + c;
        double violation = 0.0;
        for (Eigen::Index i = 0; i < ncon; ++i) violation = std::max(violation, -cons(i));
        for (Eigen::Index i = 0; i < ncon; ++i) mult(i) = std::max(0.0, mult(i) - rho * cons(i));
        VectorXd dummy(res.x.size());
        outer_cost = f(res.x, dummy);
        if (inner.converged && violation <= opts.constraint_tol) {
            outer_ok = true;
            break;
        }
        if (violation > 0.25 * prev_violation) rho *= 10.0;
        prev_violation = violation;
    }
    res.cost = outer_cost;
    res.iterations = used;
    res.converged = outer_ok;
    res.status = outer_ok ? "converged" : "iteration cap";
    return res;
}

}  // namespace smom
