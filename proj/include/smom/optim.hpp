#pragma once

#include <functional>
#include <string>
#include <vector>

#include "smom/common.hpp"

namespace smom {

struct OptimOptions {
    double ftol = 1e-8;       // relative cost-change tolerance
    int maxiter = 1000;       // total inner iteration cap
    int memory = 10;          // L-BFGS history
    double constraint_tol = 1e-8;
    int max_outer = 20;       // augmented-Lagrangian rounds
    double penalty0 = 10.0;
};

struct OptimResult {
    VectorXd x;
    double cost = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string status;
    std::vector<double> cost_trace;
};

using CostGradFn = std::function<double(const VectorXd& x, VectorXd& grad)>;

// Minimizes f(x) subject to A x + c >= 0 by an augmented Lagrangian over an
// L-BFGS inner loop; with no constraint rows this is plain L-BFGS.
OptimResult minimize_constrained(const CostGradFn& f, VectorXd x0, const MatrixXd& a,
                                 const VectorXd& c, const OptimOptions& opts);

}  // namespace smom
