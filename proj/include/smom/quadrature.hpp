#pragma once

#include <vector>

#include "smom/common.hpp"
#include "smom/specfun.hpp"

namespace smom {

// Gauss-Legendre nodes/weights on [-1, 1].
void gauss_legendre(int n, VectorXd& nodes, VectorXd& weights);

struct SphereRule {
    VectorXd theta;  // polar angles
    VectorXd phi;    // azimuths
    VectorXd weights;
    int certified_order = -1;

    Eigen::Index size() const { return weights.size(); }
};

struct SO3Rule {
    std::vector<EulerAngles> nodes;
    VectorXd weights;  // Haar-normalized: sum = 1
    int certified_order = -1;
    double measured_error = 0.0;  // certify() result when under-budgeted
    bool inexact = false;

    Eigen::Index size() const { return weights.size(); }
};

// Gauss-Legendre x trapezoid product rule integrating all Y_l^m, l <= order,
// against sin(theta) dtheta dphi.
SphereRule sphere_rule(int order);

// sphere_rule(order) x trapezoid in gamma, Haar-normalized; integrates all
// D^p_{u,v} with p <= order exactly.
SO3Rule so3_rule(int order);

// Largest-order rule whose node count fits the budget. When the budget
// forces a lower order, the rule is marked inexact and carries the measured
// integration error at the requested order.
SO3Rule so3_rule_with_budget(int order, Eigen::Index max_nodes);

Eigen::Index so3_rule_node_count(int order);

// Worst-case |quadrature - exact| over every D^p_{u,v} with p <= order.
double certify(const SO3Rule& rule, int order);

// Same exhaustive check, reported per degree p = 0..order.
std::vector<double> certify_per_order(const SO3Rule& rule, int order);

// Same exhaustive check for a sphere rule over Y_l^m, l <= order.
double certify_sphere(const SphereRule& rule, int order);

// Fibonacci lattice on the sphere; used as a collocation point set.
SphereRule fibonacci_sphere(int count);

}  // namespace smom
