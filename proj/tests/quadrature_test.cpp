#include <doctest.h>

#include <cmath>

#include "smom/quadrature.hpp"
#include "smom/rng.hpp"

using namespace smom;

TEST_CASE("sphere rule integrates constants and kills higher harmonics") {
    const SphereRule rule = sphere_rule(6);
    CHECK(rule.weights.sum() == doctest::Approx(kFourPi).epsilon(1e-12));
    CHECK(rule.weights.minCoeff() > 0.0);
    cplx y00(0, 0);
    for (Eigen::Index i = 0; i < rule.size(); ++i)
        y00 += rule.weights(i) * sph_harmonic(0, 0, rule.theta(i), rule.phi(i));
    CHECK(std::abs(y00 - cplx(std::sqrt(kFourPi), 0)) < 1e-12);
    for (int l = 1; l <= 6; ++l)
        for (int m = -l; m <= l; ++m) {
            cplx acc(0, 0);
            for (Eigen::Index i = 0; i < rule.size(); ++i)
                acc += rule.weights(i) * sph_harmonic(l, m, rule.theta(i), rule.phi(i));
            CHECK(std::abs(acc) < 1e-12);
        }
}

TEST_CASE("sphere rule is exact on harmonic products up to its order") {
    const SphereRule rule = sphere_rule(6);
    for (int l = 0; l <= 3; ++l)
        for (int l2 = 0; l2 + l <= 6; ++l2)
            for (int m = -l; m <= l; ++m)
                for (int m2 = -l2; m2 <= l2; ++m2) {
                    cplx acc(0, 0);
                    for (Eigen::Index i = 0; i < rule.size(); ++i)
                        acc += rule.weights(i) * sph_harmonic(l, m, rule.theta(i), rule.phi(i)) *
                               std::conj(sph_harmonic(l2, m2, rule.theta(i), rule.phi(i)));
                    const double want = (l == l2 && m == m2) ? 1.0 : 0.0;
                    CHECK(std::abs(acc - cplx(want, 0)) < 1e-12);
                }
}

TEST_CASE("so3 rule basics") {
    const SO3Rule rule = so3_rule(5);
    CHECK(rule.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rule.weights.minCoeff() > 0.0);
    cplx d0(0, 0);
    for (Eigen::Index i = 0; i < rule.size(); ++i)
        d0 += rule.weights(i) * wigner_D(0, 0, 0, rule.nodes[static_cast<std::size_t>(i)]);
    CHECK(std::abs(d0 - cplx(1, 0)) < 1e-12);
    for (int p = 1; p <= 5; ++p)
        for (int u = -p; u <= p; ++u)
            for (int v = -p; v <= p; ++v) {
                cplx acc(0, 0);
                for (Eigen::Index i = 0; i < rule.size(); ++i)
                    acc += rule.weights(i) *
                           wigner_D(p, u, v, rule.nodes[static_cast<std::size_t>(i)]);
                CHECK(std::abs(acc) < 1e-12);
            }
}

namespace {

// random band-limited Wigner sum of maximal degree `order`
struct RandomWignerSum {
    std::vector<double> coef_re, coef_im;
    int order;

    RandomWignerSum(int ord, std::uint64_t seed) : order(ord) {
        Rng rng(seed);
        int count = 0;
        for (int p = 0; p <= order; ++p) count += (2 * p + 1) * (2 * p + 1);
        for (int i = 0; i < count; ++i) {
            coef_re.push_back(rng.normal());
            coef_im.push_back(rng.normal());
        }
    }

    cplx eval(const EulerAngles& r) const {
        cplx acc(0, 0);
        std::size_t at = 0;
        for (int p = 0; p <= order; ++p)
            for (int u = -p; u <= p; ++u)
                for (int v = -p; v <= p; ++v, ++at)
                    acc += cplx(coef_re[at], coef_im[at]) * wigner_D(p, u, v, r);
        return acc;
    }
};

}  // namespace

TEST_CASE("moment-order bookkeeping: order 3L+P integrates third-moment products") {
    const int L = 2, P = 2;
    // third-moment integrands are triple products of degree-L sums times a
    // degree-P density term, so their Wigner order is at most 3L+P
    const RandomWignerSum f1(L, 1), f2(L, 2), f3(L, 3), dens(P, 4);
    const SO3Rule exact = so3_rule(3 * L + P);
    const SO3Rule finer = so3_rule(3 * L + P + 2);
    auto integrate = [&](const SO3Rule& rule) {
        cplx acc(0, 0);
        for (Eigen::Index i = 0; i < rule.size(); ++i) {
            const EulerAngles& r = rule.nodes[static_cast<std::size_t>(i)];
            acc += rule.weights(i) * f1.eval(r) * f2.eval(r) * f3.eval(r) * dens.eval(r);
        }
        return acc;
    };
    const cplx a = integrate(exact);
    const cplx b = integrate(finer);
    CHECK(std::abs(a - b) < 1e-10 * std::max(1.0, std::abs(b)));
}

TEST_CASE("certifier detects exact and under-resolved rules") {
    CHECK(certify(so3_rule(8), 8) <= 1e-10);
    CHECK(certify(so3_rule(4), 8) > 1e-3);
    const SO3Rule rule = so3_rule(3);
    CHECK(certify(rule, 0) == doctest::Approx(std::abs(rule.weights.sum() - 1.0)));
}

TEST_CASE("rule exactness is monotone in the certified order") {
    const SO3Rule rule = so3_rule(6);
    for (int p = 0; p <= 6; ++p) CHECK(certify(rule, p) <= 1e-10);
}

TEST_CASE("budgeted rule reports measured inexactness") {
    const SO3Rule full = so3_rule(8);
    const SO3Rule cheap = so3_rule_with_budget(8, full.size() / 4);
    CHECK(cheap.inexact);
    CHECK(cheap.certified_order < 8);
    CHECK(cheap.measured_error > 1e-10);
    CHECK(cheap.measured_error == doctest::Approx(certify(cheap, 8)));
    const SO3Rule fine = so3_rule_with_budget(8, full.size());
    CHECK(!fine.inexact);
}

TEST_CASE("node count formula") {
    CHECK(so3_rule(5).size() == so3_rule_node_count(5));
    CHECK(so3_rule_node_count(11) == static_cast<Eigen::Index>((11 + 2) / 2) * 12 * 12);
}

TEST_CASE("fibonacci collocation set") {
    const SphereRule pts = fibonacci_sphere(322);
    CHECK(pts.size() == 322);
    for (Eigen::Index i = 0; i < pts.size(); ++i) {
        CHECK(pts.theta(i) >= 0.0);
        CHECK(pts.theta(i) <= kPi);
    }
}
