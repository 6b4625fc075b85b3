#include "smom/quadrature.hpp"

#include <cmath>

namespace smom {

void gauss_legendre(int n, VectorXd& nodes, VectorXd& weights) {
    require(n >= 1, "gauss_legendre: n >= 1 required");
    nodes.resize(n);
    weights.resize(n);
    for (int i = 0; i < n; ++i) {
        // Newton iteration from the Chebyshev-style initial guess
        double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            if (n == 1) p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            const double pn = (n == 1) ? x : p1;
            const double pnm1 = (n == 1) ? 1.0 : p0;
            dp = n * (x * pn - pnm1) / (x * x - 1.0);
            const double dx = pn / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        nodes(n - 1 - i) = x;
        weights(n - 1 - i) = 2.0 / ((1.0 - x * x) * dp * dp);
    }
}

SphereRule sphere_rule(int order) {
    require(order >= 0, "sphere_rule: order >= 0 required");
    const int nb = (order + 2) / 2;  // ceil((order+1)/2)
    const int na = order + 1;
    VectorXd x, w;
    gauss_legendre(nb, x, w);
    SphereRule rule;
    rule.theta.resize(nb * na);
    rule.phi.resize(nb * na);
    rule.weights.resize(nb * na);
    const double wa = kTwoPi / na;
    Eigen::Index at = 0;
    for (int ib = 0; ib < nb; ++ib) {
        const double th = std::acos(x(ib));
        for (int ia = 0; ia < na; ++ia, ++at) {
            rule.theta(at) = th;
            rule.phi(at) = kTwoPi * ia / na;
            rule.weights(at) = w(ib) * wa;
        }
    }
    rule.certified_order = order;
    return rule;
}

SO3Rule so3_rule(int order) {
    require(order >= 0, "so3_rule: order >= 0 required");
    const SphereRule sph = sphere_rule(order);
    const int ng = order + 1;
    const double wg = kTwoPi / ng;
    SO3Rule rule;
    rule.nodes.resize(static_cast<std::size_t>(sph.size() * ng));
    rule.weights.resize(sph.size() * ng);
    Eigen::Index at = 0;
    for (Eigen::Index i = 0; i < sph.size(); ++i) {
        for (int ig = 0; ig < ng; ++ig, ++at) {
            // the sphere angles play the role of (alpha, beta)
            rule.nodes[static_cast<std::size_t>(at)] =
                EulerAngles{sph.phi(i), sph.theta(i), kTwoPi * ig / ng};
            rule.weights(at) = sph.weights(i) * wg / (8.0 * kPi * kPi);
        }
    }
    rule.certified_order = order;
    return rule;
}

Eigen::Index so3_rule_node_count(int order) {
    return static_cast<Eigen::Index>((order + 2) / 2) * (order + 1) * (order + 1);
}

SO3Rule so3_rule_with_budget(int order, Eigen::Index max_nodes) {
    require(max_nodes >= 1, "so3_rule_with_budget: positive budget required");
    int q = order;
    while (q > 0 && so3_rule_node_count(q) > max_nodes) --q;
    SO3Rule rule = so3_rule(q);
    if (q < order) {
        rule.inexact = true;
        rule.certified_order = q;
        rule.measured_error = certify(rule, order);
    }
    return rule;
}

std::vector<double> certify_per_order(const SO3Rule& rule, int order) {
    require(order >= 0, "certify: order >= 0 required");
    // sums over all (p,u,v); exact value is 1 at (0,0,0) and 0 elsewhere
    std::vector<MatrixXcd> acc(static_cast<std::size_t>(order) + 1);
    for (int p = 0; p <= order; ++p)
        acc[static_cast<std::size_t>(p)] = MatrixXcd::Zero(2 * p + 1, 2 * p + 1);
    std::vector<cplx> ea(static_cast<std::size_t>(2 * order + 1));
    std::vector<cplx> eg(static_cast<std::size_t>(2 * order + 1));
    for (Eigen::Index i = 0; i < rule.size(); ++i) {
        const EulerAngles& r = rule.nodes[static_cast<std::size_t>(i)];
        const double w = rule.weights(i);
        const auto d = wigner_d_tables(order, r.beta);
        for (int u = -order; u <= order; ++u) {
            ea[static_cast<std::size_t>(u + order)] =
                cplx(std::cos(u * r.alpha), -std::sin(u * r.alpha));
            eg[static_cast<std::size_t>(u + order)] =
                cplx(std::cos(u * r.gamma), -std::sin(u * r.gamma));
        }
        for (int p = 0; p <= order; ++p)
            for (int u = -p; u <= p; ++u)
                for (int v = -p; v <= p; ++v)
                    acc[static_cast<std::size_t>(p)](u + p, v + p) +=
                        w * d[static_cast<std::size_t>(p)](u + p, v + p) *
                        ea[static_cast<std::size_t>(u + order)] *
                        eg[static_cast<std::size_t>(v + order)];
    }
    std::vector<double> worst(static_cast<std::size_t>(order) + 1, 0.0);
    for (int p = 0; p <= order; ++p)
        for (int u = -p; u <= p; ++u)
            for (int v = -p; v <= p; ++v) {
                const cplx exact = (p == 0) ? cplx(1, 0) : cplx(0, 0);
                worst[static_cast<std::size_t>(p)] =
                    std::max(worst[static_cast<std::size_t>(p)],
                             std::abs(acc[static_cast<std::size_t>(p)](u + p, v + p) - exact));
            }
    return worst;
}

double certify(const SO3Rule& rule, int order) {
    const std::vector<double> per = certify_per_order(rule, order);
    double worst = 0.0;
    for (double v : per) worst = std::max(worst, v);
    return worst;
}

double certify_sphere(const SphereRule& rule, int order) {
    const Eigen::Index nsh = static_cast<Eigen::Index>(order + 1) * (order + 1);
    VectorXcd acc = VectorXcd::Zero(nsh);
    std::vector<cplx> buf(static_cast<std::size_t>(nsh));
    for (Eigen::Index i = 0; i < rule.size(); ++i) {
        sph_harm_upto(order, rule.theta(i), rule.phi(i), buf.data());
        for (Eigen::Index k = 0; k < nsh; ++k) acc(k) += rule.weights(i) * buf[static_cast<std::size_t>(k)];
    }
    double worst = 0.0;
    for (int l = 0; l <= order; ++l)
        for (int m = -l; m <= l; ++m) {
            const cplx exact = (l == 0) ? cplx(std::sqrt(kFourPi), 0) : cplx(0, 0);
            worst = std::max(worst, std::abs(acc(l * (l + 1) + m) - exact));
        }
    return worst;
}

SphereRule fibonacci_sphere(int count) {
    require(count >= 1, "fibonacci_sphere: count >= 1 required");
    SphereRule rule;
    rule.theta.resize(count);
    rule.phi.resize(count);
    rule.weights = VectorXd::Constant(count, kFourPi / count);
    const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
    for (int i = 0; i < count; ++i) {
        const double z = 1.0 - (2.0 * i + 1.0) / count;
        rule.theta(i) = std::acos(z);
        rule.phi(i) = std::fmod(kTwoPi * i / golden, kTwoPi);
    }
    rule.certified_order = -1;  // collocation set, not a certified rule
    return rule;
}

}  // namespace smom
