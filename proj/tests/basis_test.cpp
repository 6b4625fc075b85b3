#include <doctest.h>

#include <cmath>

#include "smom/basis.hpp"
#include "smom/quadrature.hpp"
#include "smom/rng.hpp"

using namespace smom;

TEST_CASE("radial truncation examples") {
    const SphBesselZeros zeros(4, 40);
    const auto s32 = radial_truncation(0, 32.0, zeros);
    CHECK(s32[0] == 31);
    const auto s1 = radial_truncation(0, 1.0, zeros);
    CHECK(s1[0] == 0);
    const auto table = radial_truncation(4, 8.0, zeros);
    for (int l = 0; l < 4; ++l) CHECK(table[static_cast<std::size_t>(l)] >=
                                      table[static_cast<std::size_t>(l + 1)]);
}

TEST_CASE("parameter counts match the constructed vectors") {
    const VolumeBasis vb(3, 8.0);
    Eigen::Index count = 0;
    for (int l = 0; l <= 3; ++l) count += static_cast<Eigen::Index>(vb.radial_count(l)) * (2 * l + 1);
    CHECK(vb.size() == count);

    const DensityBasis all(3, false);
    CHECK(all.size() == 1 + 3 + 5 + 7);
    const DensityBasis even(4, true);
    CHECK(even.size() == 1 + 5 + 9);
    CHECK(even.degrees() == std::vector<int>{0, 2, 4});
}

TEST_CASE("volume basis is orthonormal on the ball") {
    const VolumeBasis vb(2, 4.0);
    // radial Gauss-Legendre on [0, 1/2] x sphere rule as the oracle
    VectorXd x, w;
    gauss_legendre(80, x, w);
    const SphereRule sph = sphere_rule(2 * vb.lmax() + 1);
    MatrixXcd gram = MatrixXcd::Zero(vb.size(), vb.size());
    std::vector<cplx> vals(static_cast<std::size_t>(vb.size()));
    for (int i = 0; i < 80; ++i) {
        const double kap = 0.25 * (x(i) + 1.0);  // map [-1,1] -> [0, 1/2]
        const double wk = 0.25 * w(i) * kap * kap;
        for (Eigen::Index q = 0; q < sph.size(); ++q) {
            const double st = std::sin(sph.theta(q));
            vb.eval_point(kap * st * std::cos(sph.phi(q)), kap * st * std::sin(sph.phi(q)),
                          kap * std::cos(sph.theta(q)), vals.data());
            const double weight = wk * sph.weights(q);
            for (Eigen::Index a = 0; a < vb.size(); ++a)
                for (Eigen::Index b = 0; b <= a; ++b)
                    gram(a, b) += weight * vals[static_cast<std::size_t>(a)] *
                                  std::conj(vals[static_cast<std::size_t>(b)]);
        }
    }
    for (Eigen::Index a = 0; a < vb.size(); ++a)
        for (Eigen::Index b = 0; b <= a; ++b) {
            const double want = (a == b) ? 1.0 : 0.0;
            CHECK(std::abs(gram(a, b) - cplx(want, 0)) < 1e-8);
        }
}

TEST_CASE("volume realness map enforces the conjugation condition") {
    const VolumeBasis vb(3, 6.0);
    Rng rng(5);
    VectorXd re(vb.size());
    for (Eigen::Index i = 0; i < re.size(); ++i) re(i) = rng.normal();
    const VectorXcd a = vb.lift_real(re);
    for (int l = 0; l <= 3; ++l)
        for (int s = 1; s <= vb.radial_count(l); ++s)
            for (int m = -l; m <= l; ++m) {
                const cplx lhs = std::conj(a(vb.index(l, s, m))) * ((m % 2 == 0) ? 1.0 : -1.0);
                const cplx rhs = a(vb.index(l, s, -m)) * ((l % 2 == 0) ? 1.0 : -1.0);
                CHECK(std::abs(lhs - rhs) < 1e-15);
            }
    // exact inverse
    double resid = 0.0;
    const VectorXd back = vb.project_real(a, &resid);
    CHECK(resid < 1e-14);
    CHECK((back - re).norm() < 1e-13);
}

TEST_CASE("density realness map and fixed normalization") {
    const DensityBasis db(3, false);
    Rng rng(6);
    VectorXd re(db.free_size());
    for (Eigen::Index i = 0; i < re.size(); ++i) re(i) = rng.normal();
    const VectorXcd b = db.lift_real(re);
    CHECK(b(0) == cplx(1, 0));
    for (int p : db.degrees())
        for (int u = -p; u <= p; ++u) {
            const cplx lhs = b(db.index(p, u));
            const cplx rhs = ((u % 2 == 0) ? 1.0 : -1.0) * std::conj(b(db.index(p, -u)));
            CHECK(std::abs(lhs - rhs) < 1e-15);
        }
    double resid = 0.0;
    const VectorXd back = db.project_real(b, &resid);
    CHECK(resid < 1e-14);
    CHECK((back - re).norm() < 1e-13);
}

TEST_CASE("realness pushbacks match finite differences") {
    const VolumeBasis vb(2, 5.0);
    const DensityBasis db(2, false);
    Rng rng(7);
    VectorXcd tv(vb.size());
    for (Eigen::Index i = 0; i < tv.size(); ++i) tv(i) = rng.cnormal();
    VectorXcd td(db.size());
    for (Eigen::Index i = 0; i < td.size(); ++i) td(i) = rng.cnormal();

    auto volume_cost = [&](const VectorXd& re) { return (vb.lift_real(re) - tv).squaredNorm(); };
    auto density_cost = [&](const VectorXd& re) { return (db.lift_real(re) - td).squaredNorm(); };

    VectorXd re(vb.size());
    for (Eigen::Index i = 0; i < re.size(); ++i) re(i) = rng.normal();
    const VectorXd grad = vb.pushback_real(vb.lift_real(re) - tv);
    const double h = 1e-6;
    for (Eigen::Index t = 0; t < std::min<Eigen::Index>(re.size(), 20); ++t) {
        VectorXd hi = re, lo = re;
        hi(t) += h;
        lo(t) -= h;
        const double fd = (volume_cost(hi) - volume_cost(lo)) / (2 * h);
        CHECK(grad(t) == doctest::Approx(fd).epsilon(1e-6));
    }

    VectorXd rd(db.free_size());
    for (Eigen::Index i = 0; i < rd.size(); ++i) rd(i) = rng.normal();
    const VectorXd gradd = db.pushback_real(db.lift_real(rd) - td);
    for (Eigen::Index t = 0; t < rd.size(); ++t) {
        VectorXd hi = rd, lo = rd;
        hi(t) += h;
        lo(t) -= h;
        const double fd = (density_cost(hi) - density_cost(lo)) / (2 * h);
        CHECK(gradd(t) == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("density eval row is gamma-free and matches wigner_D") {
    const DensityBasis db(3, false);
    Rng rng(8);
    for (int t = 0; t < 5; ++t) {
        const double alpha = kTwoPi * rng.uniform();
        const double beta = kPi * rng.uniform();
        std::vector<cplx> row(static_cast<std::size_t>(db.size()));
        db.eval_row(alpha, beta, row.data());
        for (int p : db.degrees())
            for (int u = -p; u <= p; ++u) {
                const cplx want = wigner_D(p, u, 0, EulerAngles{alpha, beta, 1.234});
                CHECK(std::abs(row[static_cast<std::size_t>(db.index(p, u))] - want) < 1e-12);
            }
    }
}
