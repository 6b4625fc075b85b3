#include <doctest.h>

#include "smom/tensor.hpp"

using namespace smom;

namespace {

Tensor3 iota_tensor(Eigen::Index d1, Eigen::Index d2, Eigen::Index d3) {
    Tensor3 t(d1, d2, d3);
    double v = 1.0;
    for (Eigen::Index i = 0; i < d1; ++i)
        for (Eigen::Index j = 0; j < d2; ++j)
            for (Eigen::Index k = 0; k < d3; ++k) t(i, j, k) = v++;
    return t;
}

Tensor3 random_tensor(Eigen::Index d1, Eigen::Index d2, Eigen::Index d3, std::uint64_t seed) {
    Rng rng(seed);
    Tensor3 t(d1, d2, d3);
    for (Eigen::Index i = 0; i < d1; ++i)
        for (Eigen::Index j = 0; j < d2; ++j)
            for (Eigen::Index k = 0; k < d3; ++k) t(i, j, k) = rng.cnormal();
    return t;
}

// brute-force mode contraction straight from the defining sum
Tensor3 contract_oracle(const Tensor3& t, const MatrixXcd& u, int mode) {
    std::array<Eigen::Index, 3> dims = t.dims();
    dims[static_cast<std::size_t>(mode - 1)] = u.cols();
    Tensor3 out(dims[0], dims[1], dims[2]);
    for (Eigen::Index i = 0; i < dims[0]; ++i)
        for (Eigen::Index j = 0; j < dims[1]; ++j)
            for (Eigen::Index k = 0; k < dims[2]; ++k) {
                cplx acc(0, 0);
                for (Eigen::Index s = 0; s < t.dim(mode - 1); ++s) {
                    if (mode == 1) acc += t(s, j, k) * u(s, i);
                    if (mode == 2) acc += t(i, s, k) * u(s, j);
                    if (mode == 3) acc += t(i, j, s) * u(s, k);
                }
                out(i, j, k) = acc;
            }
    return out;
}

double subspace_gap(const MatrixXcd& u1, const MatrixXcd& u2) {
    return (u1 * u1.adjoint() - u2 * u2.adjoint()).norm();
}

}  // namespace

TEST_CASE("mode_contract identity leaves tensor unchanged") {
    const Tensor3 t = random_tensor(2, 2, 2, 7);
    const Tensor3 out = mode_contract(t, MatrixXcd::Identity(2, 2), 1);
    Tensor3 diff = out;
    diff -= t;
    CHECK(diff.norm() == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("mode_contract all-ones against vector of ones") {
    Tensor3 t(2, 2, 2);
    for (Eigen::Index i = 0; i < 2; ++i)
        for (Eigen::Index j = 0; j < 2; ++j)
            for (Eigen::Index k = 0; k < 2; ++k) t(i, j, k) = 1.0;
    MatrixXcd u = MatrixXcd::Ones(2, 1);
    const Tensor3 out = mode_contract(t, u, 2);
    CHECK(out.dim(0) == 2);
    CHECK(out.dim(1) == 1);
    CHECK(out.dim(2) == 2);
    const Tensor3 oracle = contract_oracle(t, u, 2);
    for (Eigen::Index i = 0; i < 2; ++i)
        for (Eigen::Index k = 0; k < 2; ++k) {
            CHECK(out(i, 0, k).real() == doctest::Approx(2.0));
            CHECK(std::abs(out(i, 0, k) - oracle(i, 0, k)) < 1e-14);
        }
}

TEST_CASE("mode_contract zero matrix gives zero tensor") {
    const Tensor3 t = random_tensor(3, 4, 2, 11);
    const Tensor3 out = mode_contract(t, MatrixXcd::Zero(4, 2), 2);
    CHECK(out.norm() == 0.0);
}

TEST_CASE("mode_contract shape error") {
    const Tensor3 t = random_tensor(3, 4, 2, 1);
    CHECK_THROWS_AS(mode_contract(t, MatrixXcd::Zero(5, 2), 2), ShapeError);
}

TEST_CASE("mode_contract agrees with brute force on random input") {
    const Tensor3 t = random_tensor(3, 4, 5, 23);
    Rng rng(5);
    for (int mode = 1; mode <= 3; ++mode) {
        MatrixXcd u(t.dim(mode - 1), 2);
        for (Eigen::Index i = 0; i < u.rows(); ++i)
            for (Eigen::Index j = 0; j < u.cols(); ++j) u(i, j) = rng.cnormal();
        const Tensor3 got = mode_contract(t, u, mode);
        const Tensor3 want = contract_oracle(t, u, mode);
        Tensor3 diff = got;
        diff -= want;
        CHECK(diff.norm() < 1e-12 * want.norm());
    }
}

TEST_CASE("unfold follows the column index map") {
    const Tensor3 t = iota_tensor(2, 2, 2);
    const MatrixXcd m = unfold(t, 1);
    REQUIRE(m.rows() == 2);
    REQUIRE(m.cols() == 4);
    // oracle: enumerate the map col = (i2) + (i3)*d2 with 0-based indices
    for (Eigen::Index i1 = 0; i1 < 2; ++i1)
        for (Eigen::Index i2 = 0; i2 < 2; ++i2)
            for (Eigen::Index i3 = 0; i3 < 2; ++i3)
                CHECK(std::abs(m(i1, i2 + i3 * 2) - t(i1, i2, i3)) < 1e-15);
}

TEST_CASE("unfold then refold is the identity") {
    const Tensor3 t = random_tensor(3, 4, 5, 17);
    for (int mode = 1; mode <= 3; ++mode) {
        const Tensor3 back = refold(unfold(t, mode), mode, t.dims());
        Tensor3 diff = back;
        diff -= t;
        CHECK(diff.norm() == 0.0);
    }
}

TEST_CASE("symmetric tensor has identical unfoldings") {
    Tensor3 t = random_tensor(4, 4, 4, 19);
    t = t.symmetrized();
    const MatrixXcd m1 = unfold(t, 1);
    const MatrixXcd m2 = unfold(t, 2);
    const MatrixXcd m3 = unfold(t, 3);
    CHECK((m1 - m2).norm() < 1e-12 * m1.norm());
    CHECK((m1 - m3).norm() < 1e-12 * m1.norm());
}

TEST_CASE("projection is nonexpansive for orthonormal bases") {
    const Tensor3 t = random_tensor(6, 6, 6, 29);
    const MatrixXcd g = gaussian_matrix(6, 3, 3);
    const Eigen::HouseholderQR<MatrixXcd> qr(g);
    const MatrixXcd u = qr.householderQ() * MatrixXcd::Identity(6, 3);
    for (int mode = 1; mode <= 3; ++mode)
        CHECK(mode_contract(t, u.conjugate(), mode).norm() <= t.norm() * (1 + 1e-12));
}

TEST_CASE("tucker round trip is exact on tensors in the subspace") {
    const MatrixXcd g = gaussian_matrix(8, 3, 37);
    const Eigen::HouseholderQR<MatrixXcd> qr(g);
    const MatrixXcd u = qr.householderQ() * MatrixXcd::Identity(8, 3);
    const Tensor3 core = random_tensor(3, 3, 3, 41);
    const Tensor3 full = tucker_lift(core, u);
    const Tensor3 again = tucker_lift(tucker_project(full, u), u);
    Tensor3 diff = again;
    diff -= full;
    CHECK(diff.norm() < 1e-10 * full.norm());
}

TEST_CASE("randomized_range recovers a rank-1 matrix") {
    Rng rng(3);
    const Eigen::Index d = 20, m = 15;
    VectorXcd u(d), v(m);
    for (Eigen::Index i = 0; i < d; ++i) u(i) = rng.cnormal();
    for (Eigen::Index i = 0; i < m; ++i) v(i) = rng.cnormal();
    const MatrixXcd a = u * v.adjoint();
    SketchConfig cfg{5, 99, 1e-8, -1};
    const RangeResult res = randomized_range(m, [&](const MatrixXcd& s) { return a * s; }, cfg);
    REQUIRE(res.rank == 1);
    const MatrixXcd uu = u.normalized();
    CHECK(subspace_gap(res.basis, uu) < 1e-10);
}

TEST_CASE("randomized_range flags the zero matrix") {
    SketchConfig cfg{4, 1, 1e-8, -1};
    const RangeResult res = randomized_range(
        6, [&](const MatrixXcd& s) { return MatrixXcd::Zero(8, s.cols()); }, cfg);
    CHECK(res.rank == 0);
    CHECK(res.rank_zero);
}

TEST_CASE("randomized_range captures the identity exactly") {
    SketchConfig cfg{10, 5, 1e-12, -1};
    const RangeResult res = randomized_range(
        10, [&](const MatrixXcd& s) { return MatrixXcd(MatrixXcd::Identity(10, 10) * s); }, cfg);
    CHECK(res.rank == 10);
    const double energy = res.svals.squaredNorm();
    double captured = 0;
    for (int i = 0; i < res.rank; ++i) captured += res.svals(i) * res.svals(i);
    CHECK(captured == doctest::Approx(energy));
}

TEST_CASE("randomized_range reproduces an exact rank subspace") {
    Rng rng(77);
    const Eigen::Index d = 30, m = 25, rank = 4;
    MatrixXcd u(d, rank), v(m, rank);
    for (Eigen::Index i = 0; i < u.size(); ++i) u.data()[i] = rng.cnormal();
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = rng.cnormal();
    const MatrixXcd a = u * v.adjoint();
    SketchConfig cfg{static_cast<int>(rank) + 5, 7, 1e-10, -1};
    const RangeResult res = randomized_range(m, [&](const MatrixXcd& s) { return a * s; }, cfg);
    REQUIRE(res.rank == rank);
    Eigen::JacobiSVD<MatrixXcd> svd(a, Eigen::ComputeThinU);
    const MatrixXcd uref = svd.matrixU().leftCols(rank);
    CHECK(subspace_gap(res.basis, uref) < 1e-8);
}

TEST_CASE("face_split_apply identity case") {
    Rng rng(13);
    VectorXcd x(4), y(4);
    for (int i = 0; i < 4; ++i) {
        x(i) = rng.cnormal();
        y(i) = rng.cnormal();
    }
    const VectorXcd got = face_split_apply(MatrixXcd::Identity(4, 4), MatrixXcd::Identity(4, 4),
                                           x, y);
    CHECK((got - x.cwiseProduct(y)).norm() < 1e-15);
}

TEST_CASE("face_split_apply on basis vectors picks column products") {
    const MatrixXcd g1 = gaussian_matrix(3, 4, 5);
    const MatrixXcd g2 = gaussian_matrix(3, 4, 6);
    VectorXcd ei = VectorXcd::Zero(4), ej = VectorXcd::Zero(4);
    ei(1) = 1;
    ej(3) = 1;
    const VectorXcd got = face_split_apply(g1, g2, ei, ej);
    CHECK((got - g1.col(1).cwiseProduct(g2.col(3))).norm() < 1e-15);
}

TEST_CASE("face_split_apply matches the materialized face-splitting matrix") {
    const Eigen::Index s = 3, d = 4;
    const MatrixXcd g1 = gaussian_matrix(s, d, 15);
    const MatrixXcd g2 = gaussian_matrix(s, d, 16);
    // explicit s x d^2 face-splitting matrix: row i is kron(g1.row(i), g2.row(i))
    MatrixXcd fs(s, d * d);
    for (Eigen::Index i = 0; i < s; ++i)
        for (Eigen::Index a = 0; a < d; ++a)
            for (Eigen::Index b = 0; b < d; ++b) fs(i, a * d + b) = g1(i, a) * g2(i, b);
    Rng rng(17);
    for (int trial = 0; trial < 5; ++trial) {
        VectorXcd x(d), y(d);
        for (Eigen::Index i = 0; i < d; ++i) {
            x(i) = rng.cnormal();
            y(i) = rng.cnormal();
        }
        VectorXcd kron(d * d);
        for (Eigen::Index a = 0; a < d; ++a)
            for (Eigen::Index b = 0; b < d; ++b) kron(a * d + b) = x(a) * y(b);
        const VectorXcd got = face_split_apply(g1, g2, x, y);
        const VectorXcd want = fs * kron;
        CHECK((got - want).norm() < 1e-12 * want.norm());
    }
}

TEST_CASE("cur_matrix reconstructs a diagonal matrix from its support") {
    MatrixXcd a = MatrixXcd::Zero(4, 4);
    a(0, 0) = 3;
    a(1, 1) = 2;
    a(2, 2) = 1;
    const auto fetch = [&](Eigen::Index c) { return VectorXcd(a.col(c)); };
    const TuckerFactor f = cur_matrix(4, fetch, {0, 1, 2}, true, 1e-5, 1e-12, -1);
    REQUIRE(f.rank() == 3);
    CHECK((f.lift() - a).norm() < 1e-12);
}

TEST_CASE("cur_matrix recovers a rank-1 PSD matrix from one index") {
    Rng rng(8);
    VectorXcd v(5);
    for (int i = 0; i < 5; ++i) v(i) = rng.cnormal();
    const MatrixXcd a = v * v.adjoint();
    const auto fetch = [&](Eigen::Index c) { return VectorXcd(a.col(c)); };
    const TuckerFactor f = cur_matrix(5, fetch, {2}, true, 1e-5, 1e-12, -1);
    REQUIRE(f.rank() == 1);
    CHECK((f.lift() - a).norm() < 1e-10 * a.norm());
}

TEST_CASE("cur_matrix with all indices recovers the identity") {
    const MatrixXcd a = MatrixXcd::Identity(5, 5);
    const auto fetch = [&](Eigen::Index c) { return VectorXcd(a.col(c)); };
    const TuckerFactor f = cur_matrix(5, fetch, {0, 1, 2, 3, 4}, true, 1e-5, 1e-12, -1);
    REQUIRE(f.rank() == 5);
    CHECK((f.lift() - a).norm() < 1e-10);
}

TEST_CASE("cur_matrix keeps Hermitian structure on PSD input") {
    Rng rng(55);
    MatrixXcd b(6, 3);
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = rng.cnormal();
    const MatrixXcd a = b * b.adjoint();
    const auto fetch = [&](Eigen::Index c) { return VectorXcd(a.col(c)); };
    const TuckerFactor f = cur_matrix(6, fetch, {0, 2, 4, 5}, true, 1e-5, 1e-12, -1);
    const MatrixXcd lifted = f.lift();
    CHECK((lifted - lifted.adjoint()).norm() <= 1e-10);
}

TEST_CASE("cur_matrix flags fully singular W") {
    const auto fetch = [&](Eigen::Index) { return VectorXcd(VectorXcd::Zero(4)); };
    const TuckerFactor f = cur_matrix(4, fetch, {0, 1}, true, 1e-5, 1e-12, -1);
    CHECK(f.rank_zero);
}

TEST_CASE("norm_weighted_sample trivial cases") {
    VectorXd w(3);
    w << 1, 0, 0;
    const auto got = norm_weighted_sample(w, 1, 5);
    REQUIRE(got.size() == 1);
    CHECK(got[0] == 0);

    VectorXd uni = VectorXd::Ones(6);
    auto all = norm_weighted_sample(uni, 6, 9);
    std::sort(all.begin(), all.end());
    for (Eigen::Index i = 0; i < 6; ++i) CHECK(all[static_cast<std::size_t>(i)] == i);
}

TEST_CASE("norm_weighted_sample empirical frequencies") {
    VectorXd w(2);
    w << 4, 1;
    int hits = 0;
    const int trials = 100000;
    for (int t = 0; t < trials; ++t)
        if (norm_weighted_sample(w, 1, 1000 + static_cast<std::uint64_t>(t))[0] == 0) ++hits;
    const double p = static_cast<double>(hits) / trials;
    CHECK(p == doctest::Approx(0.8).epsilon(0.025));
}

TEST_CASE("norm_weighted_sample rejects oversized draws") {
    VectorXd w(3);
    w << 1, 0, 2;
    CHECK_THROWS_AS(norm_weighted_sample(w, 3, 1), ArgumentError);
}
