#include <doctest.h>

#include <cmath>

#include "smom/quadrature.hpp"
#include "smom/rng.hpp"
#include "smom/specfun.hpp"

using namespace smom;

namespace {

// closed-form j_1 used as an independent oracle
double j1_closed(double x) { return std::sin(x) / (x * x) - std::cos(x) / x; }

double bisect(double (*f)(double), double lo, double hi) {
    double flo = f(lo);
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if ((flo >= 0) == (fm >= 0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

EulerAngles random_rotation(Rng& rng) {
    return EulerAngles{kTwoPi * rng.uniform(), std::acos(1 - 2 * rng.uniform()),
                       kTwoPi * rng.uniform()};
}

}  // namespace

TEST_CASE("spherical Bessel closed forms and limits") {
    CHECK(sph_bessel(0, kPi) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(sph_bessel(0, 0.0) == doctest::Approx(1.0));
    for (int l = 1; l <= 6; ++l) CHECK(sph_bessel(l, 0.0) == doctest::Approx(0.0));
    for (double x : {0.3, 1.7, 4.0, 9.5, 40.0})
        CHECK(sph_bessel(1, x) == doctest::Approx(j1_closed(x)).epsilon(1e-12));
}

TEST_CASE("first zero of j_1 from an independent bisection") {
    const double zero = bisect(j1_closed, 3.5, 5.5);
    CHECK(zero == doctest::Approx(4.493409457909064).epsilon(1e-12));
    CHECK(std::abs(sph_bessel(1, zero)) < 1e-13);
}

TEST_CASE("bessel zero table") {
    const SphBesselZeros zeros(6, 10);
    for (int s = 1; s <= 10; ++s) CHECK(zeros.zero(0, s) == doctest::Approx(s * kPi));
    CHECK(zeros.zero(1, 1) == doctest::Approx(4.493409457909064).epsilon(1e-10));
    for (int l = 0; l <= 6; ++l)
        for (int s = 1; s <= 10; ++s) CHECK(std::abs(sph_bessel(l, zeros.zero(l, s))) <= 1e-12);
    // interlacing across degrees
    for (int l = 0; l < 6; ++l)
        for (int s = 1; s <= 9; ++s) {
            CHECK(zeros.zero(l, s) < zeros.zero(l + 1, s));
            CHECK(zeros.zero(l + 1, s) < zeros.zero(l, s + 1));
        }
}

TEST_CASE("Y00 is constant") {
    Rng rng(2);
    for (int t = 0; t < 5; ++t) {
        const double theta = kPi * rng.uniform();
        const double phi = kTwoPi * rng.uniform();
        const cplx v = sph_harmonic(0, 0, theta, phi);
        CHECK(v.real() == doctest::Approx(1.0 / std::sqrt(kFourPi)));
        CHECK(v.imag() == doctest::Approx(0.0));
    }
}

TEST_CASE("spherical harmonics are orthonormal under quadrature") {
    // Gauss-Legendre x trapezoid oracle built directly here
    VectorXd x, w;
    gauss_legendre(16, x, w);
    const int na = 32;
    for (int l = 0; l <= 4; ++l)
        for (int m = -l; m <= l; ++m) {
            double norm = 0.0;
            for (int i = 0; i < 16; ++i)
                for (int a = 0; a < na; ++a) {
                    const double theta = std::acos(x(i));
                    const double phi = kTwoPi * a / na;
                    norm += w(i) * (kTwoPi / na) * std::norm(sph_harmonic(l, m, theta, phi));
                }
            CHECK(norm == doctest::Approx(1.0).epsilon(1e-10));
        }
}

TEST_CASE("conjugation symmetry of spherical harmonics") {
    Rng rng(9);
    for (int t = 0; t < 10; ++t) {
        const double theta = kPi * rng.uniform();
        const double phi = kTwoPi * rng.uniform();
        for (int l = 0; l <= 5; ++l)
            for (int m = 1; m <= l; ++m) {
                const cplx lhs = sph_harmonic(l, -m, theta, phi);
                const cplx rhs =
                    ((m % 2 == 0) ? 1.0 : -1.0) * std::conj(sph_harmonic(l, m, theta, phi));
                CHECK(std::abs(lhs - rhs) < 1e-13);
            }
    }
}

TEST_CASE("wigner d at beta = 0 is the identity") {
    for (int p = 0; p <= 6; ++p)
        for (int u = -p; u <= p; ++u)
            for (int v = -p; v <= p; ++v)
                CHECK(wigner_d(p, u, v, 0.0) == doctest::Approx(u == v ? 1.0 : 0.0));
}

TEST_CASE("wigner d recurrence matches the factorial form") {
    Rng rng(4);
    for (int trial = 0; trial < 4; ++trial) {
        const double beta = kPi * rng.uniform();
        for (int p = 0; p <= 20; p += 5)
            for (int u = -p; u <= p; u += std::max(1, p / 3))
                for (int v = -p; v <= p; v += std::max(1, p / 3)) {
                    const double a = wigner_d(p, u, v, beta);
                    const double b = wigner_d_factorial(p, u, v, beta);
                    // |d| <= 1; the factorial sum itself cancels at ~1e-10
                    CHECK(std::abs(a - b) < 2e-9);
                }
    }
}

TEST_CASE("wigner d tables agree with scalar evaluation") {
    const double beta = 1.1;
    const auto tables = wigner_d_tables(8, beta);
    for (int p = 0; p <= 8; ++p)
        for (int u = -p; u <= p; ++u)
            for (int v = -p; v <= p; ++v)
                CHECK(tables[static_cast<std::size_t>(p)](u + p, v + p) ==
                      doctest::Approx(wigner_d(p, u, v, beta)).epsilon(1e-12));
}

TEST_CASE("trivial D and unitarity of the D matrices") {
    Rng rng(6);
    for (int t = 0; t < 100; ++t) {
        const EulerAngles r = random_rotation(rng);
        CHECK(std::abs(wigner_D(0, 0, 0, r) - cplx(1, 0)) < 1e-14);
        for (int p = 1; p <= 4; ++p) {
            MatrixXcd d(2 * p + 1, 2 * p + 1);
            for (int u = -p; u <= p; ++u)
                for (int v = -p; v <= p; ++v) d(u + p, v + p) = wigner_D(p, u, v, r);
            CHECK((d * d.adjoint() - MatrixXcd::Identity(2 * p + 1, 2 * p + 1))
                      .cwiseAbs()
                      .maxCoeff() < 1e-10);
        }
    }
}

TEST_CASE("D^p_{u,0} is proportional to a conjugated spherical harmonic") {
    Rng rng(14);
    for (int t = 0; t < 20; ++t) {
        const EulerAngles r = random_rotation(rng);
        for (int p = 0; p <= 5; ++p)
            for (int u = -p; u <= p; ++u) {
                const cplx lhs = wigner_D(p, u, 0, r);
                const cplx rhs = std::sqrt(kFourPi / (2 * p + 1)) *
                                 std::conj(sph_harmonic(p, u, r.beta, r.alpha));
                CHECK(std::abs(lhs - rhs) < 1e-10);
            }
    }
}

TEST_CASE("Schur orthogonality under a product quadrature oracle") {
    // oracle rule built inline: GL(8) x trapezoid(9) x trapezoid(9)
    VectorXd x, w;
    gauss_legendre(8, x, w);
    const int na = 9;
    Rng rng(31);
    for (int trial = 0; trial < 12; ++trial) {
        const int p = static_cast<int>(rng.uniform() * 3.999);
        const int q = static_cast<int>(rng.uniform() * 3.999);
        const int u = p ? static_cast<int>(rng.uniform() * (2 * p + 1)) - p : 0;
        const int v = p ? static_cast<int>(rng.uniform() * (2 * p + 1)) - p : 0;
        const int u2 = q ? static_cast<int>(rng.uniform() * (2 * q + 1)) - q : 0;
        const int v2 = q ? static_cast<int>(rng.uniform() * (2 * q + 1)) - q : 0;
        cplx acc(0, 0);
        for (int i = 0; i < 8; ++i)
            for (int a = 0; a < na; ++a)
                for (int g = 0; g < na; ++g) {
                    const EulerAngles r{kTwoPi * a / na, std::acos(x(i)), kTwoPi * g / na};
                    const double weight = w(i) * (kTwoPi / na) * (kTwoPi / na) / (8.0 * kPi * kPi);
                    acc += weight * wigner_D(p, u, v, r) * std::conj(wigner_D(q, u2, v2, r));
                }
        const double want = (p == q && u == u2 && v == v2) ? 1.0 / (2.0 * p + 1.0) : 0.0;
        CHECK(std::abs(acc - cplx(want, 0)) < 1e-10);
    }
}

TEST_CASE("rotating a spherical harmonic through the D matrix") {
    Rng rng(77);
    for (int trial = 0; trial < 6; ++trial) {
        const EulerAngles rot = random_rotation(rng);
        const Eigen::Matrix3d rm = rot.matrix();
        const double theta = std::acos(1 - 2 * rng.uniform());
        const double phi = kTwoPi * rng.uniform();
        const Eigen::Vector3d pt(std::sin(theta) * std::cos(phi),
                                 std::sin(theta) * std::sin(phi), std::cos(theta));
        const Eigen::Vector3d rx = rm * pt;
        const double theta2 = std::acos(std::clamp(rx.z(), -1.0, 1.0));
        const double phi2 = std::atan2(rx.y(), rx.x());
        for (int l = 0; l <= 4; ++l)
            for (int m = -l; m <= l; ++m) {
                // (R^{-1} o Y_l^m)(x) = Y_l^m(R x) = sum_m' conj(D^l_{m,m'}(R)) Y_l^{m'}(x)
                const cplx lhs = sph_harmonic(l, m, theta2, phi2);
                cplx rhs(0, 0);
                for (int m2 = -l; m2 <= l; ++m2)
                    rhs += std::conj(wigner_D(l, m, m2, rot)) * sph_harmonic(l, m2, theta, phi);
                CHECK(std::abs(lhs - rhs) < 1e-9);
            }
    }
}

TEST_CASE("euler angle extraction round trip") {
    Rng rng(91);
    for (int t = 0; t < 30; ++t) {
        const EulerAngles r = random_rotation(rng);
        const EulerAngles back = euler_from_matrix(r.matrix());
        CHECK((back.matrix() - r.matrix()).norm() < 1e-12);
    }
}
