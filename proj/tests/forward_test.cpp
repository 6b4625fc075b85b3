#include <doctest.h>

#include <cmath>

#include <map>

#include "smom/forward.hpp"

using namespace smom;

namespace {

std::shared_ptr<VolumeBasis> small_vbasis(int lmax = 2, double radius = 4.0) {
    return std::make_shared<VolumeBasis>(lmax, radius);
}

VolumeCoeffs random_volume(std::shared_ptr<VolumeBasis> vb, std::uint64_t seed) {
    Rng rng(seed);
    VectorXd re(vb->size());
    for (Eigen::Index i = 0; i < re.size(); ++i) re(i) = rng.normal();
    VectorXcd a = vb->lift_real(re);
    return VolumeCoeffs{std::move(vb), std::move(a)};
}

DensityCoeffs example_density(int pmax, bool refl, double kappa = 3.0) {
    auto db = std::make_shared<DensityBasis>(pmax, refl);
    std::vector<Eigen::Vector3d> centers{Eigen::Vector3d(0, 0, 1),
                                         Eigen::Vector3d(1, 0, 0).normalized()};
    VectorXd w(2);
    w << 0.6, 0.4;
    return vmf_mixture_density(centers, w, kappa, db);
}

}  // namespace

TEST_CASE("frequency grid geometry") {
    const FreqGrid grid(8);
    CHECK(grid.dim() == 64);
    double fx, fy;
    grid.freq(static_cast<Eigen::Index>(4) * 8 + 4, fx, fy);  // DC
    CHECK(fx == 0.0);
    CHECK(fy == 0.0);
    // conj_index is an involution pairing k with -k
    for (Eigen::Index idx = 0; idx < grid.dim(); ++idx) {
        const Eigen::Index c = grid.conj_index(idx);
        CHECK(grid.conj_index(c) == idx);
        double ax, ay, bx, by;
        grid.freq(idx, ax, ay);
        grid.freq(c, bx, by);
        if (std::abs(ax) < 0.49 && std::abs(ay) < 0.49) {
            CHECK(bx == doctest::Approx(-ax));
            CHECK(by == doctest::Approx(-ay));
        }
    }
    for (Eigen::Index idx : grid.active_indices()) {
        grid.freq(idx, fx, fy);
        CHECK(fx * fx + fy * fy <= 0.25 + 1e-12);
    }
}

TEST_CASE("ctf formula anchors") {
    CtfDescriptor d;  // alpha = 0.1, B = 0
    CHECK(ctf_eval(d, 0.0) == doctest::Approx(-std::sin(0.1)).epsilon(1e-12));
    CHECK(ctf_eval(d, 0.0) == doctest::Approx(-0.09983341664682815).epsilon(1e-10));
    // B = 0 leaves no envelope decay relative to the oscillation
    CtfDescriptor blur = d;
    blur.bfactor = 100.0;
    const double k = 0.02;
    CHECK(std::abs(ctf_eval(blur, k) / ctf_eval(d, k)) ==
          doctest::Approx(std::exp(-100.0 * k * k / 4)).epsilon(1e-10));
}

TEST_CASE("first CTF zero moves down as defocus grows") {
    auto first_zero = [](double defocus) {
        CtfDescriptor d;
        d.defocus = defocus;
        double prev = ctf_eval(d, 1e-5);
        for (double k = 1e-4; k < 0.2; k += 1e-5) {
            const double cur = ctf_eval(d, k);
            if ((prev > 0) != (cur > 0)) return k;
            prev = cur;
        }
        return 0.2;
    };
    CHECK(first_zero(2e4) < first_zero(1e4));
}

TEST_CASE("electron wavelength at 300 keV") {
    CHECK(electron_wavelength(300.0) == doctest::Approx(0.019687).epsilon(1e-3));
}

TEST_CASE("phi matrix identity-rotation l=0 column is radial") {
    auto vb = small_vbasis();
    const FreqGrid grid(12);
    const MatrixXcd phi = phi_matrix(EulerAngles{}, grid, *vb);
    const Eigen::Index col = vb->index(0, 1, 0);
    std::map<long long, cplx> by_radius;
    for (Eigen::Index idx : grid.active_indices()) {
        double fx, fy;
        grid.freq(idx, fx, fy);
        const long long key = std::llround(1e9 * (fx * fx + fy * fy));
        if (by_radius.count(key))
            CHECK(std::abs(by_radius[key] - phi(idx, col)) < 1e-12);
        else
            by_radius[key] = phi(idx, col);
    }
    // rows outside the active disc are zero
    for (Eigen::Index idx = 0; idx < grid.dim(); ++idx)
        if (!grid.active(idx)) CHECK(phi.row(idx).norm() == 0.0);
}

TEST_CASE("z-rotation multiplies columns by a pure phase in m") {
    auto vb = small_vbasis();
    const FreqGrid grid(12);
    const double alpha = 0.7;
    const MatrixXcd phi0 = phi_matrix(EulerAngles{}, grid, *vb);
    const MatrixXcd phia = phi_matrix(EulerAngles{alpha, 0, 0}, grid, *vb);
    for (int l = 0; l <= vb->lmax(); ++l)
        for (int s = 1; s <= vb->radial_count(l); ++s)
            for (int m = -l; m <= l; ++m) {
                const Eigen::Index col = vb->index(l, s, m);
                const cplx phase(std::cos(m * alpha), std::sin(m * alpha));
                CHECK((phia.col(col) - phase * phi0.col(col)).norm() <
                      1e-12 * std::max(1.0, phi0.col(col).norm()));
            }
}

TEST_CASE("clean slices satisfy the Fourier realness symmetry") {
    auto vb = small_vbasis(3, 6.0);
    const VolumeCoeffs vc = random_volume(vb, 3);
    const FreqGrid grid(16);
    Rng rng(4);
    for (int t = 0; t < 3; ++t) {
        const EulerAngles rot{kTwoPi * rng.uniform(), std::acos(1 - 2 * rng.uniform()),
                              kTwoPi * rng.uniform()};
        const VectorXcd img = clean_slice(rot, grid, vc);
        for (Eigen::Index idx = 0; idx < grid.dim(); ++idx)
            CHECK(std::abs(img(idx) - std::conj(img(grid.conj_index(idx)))) < 1e-10);
    }
}

TEST_CASE("clean slice has a real inverse 2-D transform") {
    auto vb = small_vbasis(2, 5.0);
    const VolumeCoeffs vc = random_volume(vb, 9);
    const FreqGrid grid(16);
    const VectorXcd img = clean_slice(EulerAngles{0.3, 1.0, 2.1}, grid, vc);
    // direct centered inverse DFT oracle
    const int m = grid.m();
    double max_imag = 0.0, max_abs = 0.0;
    for (int x = -m / 2; x < m / 2; ++x)
        for (int y = -m / 2; y < m / 2; ++y) {
            cplx acc(0, 0);
            for (Eigen::Index idx = 0; idx < grid.dim(); ++idx) {
                double fx, fy;
                grid.freq(idx, fx, fy);
                const double ph = kTwoPi * (fx * x + fy * y);
                acc += img(idx) * cplx(std::cos(ph), std::sin(ph));
            }
            max_imag = std::max(max_imag, std::abs(acc.imag()));
            max_abs = std::max(max_abs, std::abs(acc));
        }
    CHECK(max_imag <= 1e-9 * std::max(max_abs, 1e-30));
}

TEST_CASE("psi row of the uniform density is one") {
    const DensityBasis db(3, false);
    VectorXcd b = VectorXcd::Zero(db.size());
    b(0) = 1.0;
    Rng rng(5);
    for (int t = 0; t < 5; ++t) {
        const EulerAngles rot{kTwoPi * rng.uniform(), kPi * rng.uniform(), kTwoPi * rng.uniform()};
        const Eigen::RowVectorXcd row = psi_row(rot, db);
        CHECK(std::abs((row * b).value() - cplx(1, 0)) < 1e-14);
    }
}

TEST_CASE("density integrates to b00 under an SO(3) rule") {
    const DensityCoeffs dc = example_density(3, false);
    const SO3Rule rule = so3_rule(dc.basis->pmax());
    cplx acc(0, 0);
    for (Eigen::Index i = 0; i < rule.size(); ++i) {
        const Eigen::RowVectorXcd row = psi_row(rule.nodes[static_cast<std::size_t>(i)],
                                                *dc.basis);
        acc += rule.weights(i) * (row * dc.b).value();
    }
    CHECK(std::abs(acc - dc.b(0)) < 1e-10);
}

TEST_CASE("vmf mixture basics") {
    CHECK_THROWS_AS(example_density(2, false, -1.0), ArgumentError);

    // near-zero concentration approaches the uniform density
    const DensityCoeffs flat = example_density(3, false, 1e-6);
    for (Eigen::Index i = 1; i < flat.b.size(); ++i) CHECK(std::abs(flat.b(i)) < 1e-6);

    // the mixture density integrates to one on the sphere
    const DensityCoeffs dc = example_density(4, false, 6.0);
    const SphereRule rule = sphere_rule(12);
    double mass = 0.0;
    for (Eigen::Index i = 0; i < rule.size(); ++i)
        mass += rule.weights(i) * density_value(dc, rule.phi(i), rule.theta(i));
    // nu integrates to 8 pi^2 over the sphere x in-plane circle normalization
    CHECK(mass == doctest::Approx(8 * kPi * kPi).epsilon(1e-6));
}

TEST_CASE("antipodally symmetric mixtures lose their odd degrees") {
    auto db = std::make_shared<DensityBasis>(4, false);
    const Eigen::Vector3d mu = Eigen::Vector3d(0.3, -0.5, 0.8).normalized();
    std::vector<Eigen::Vector3d> centers{mu, -mu};
    VectorXd w(2);
    w << 0.5, 0.5;
    const DensityCoeffs dc = vmf_mixture_density(centers, w, 5.0, db);
    for (int p : db->degrees()) {
        if (p % 2 == 0) continue;
        for (int u = -p; u <= p; ++u) CHECK(std::abs(dc.b(db->index(p, u))) < 1e-10);
    }
}

TEST_CASE("simulated noiseless image is the central slice at its rotation") {
    auto vb = small_vbasis(2, 4.0);
    const VolumeCoeffs vc = random_volume(vb, 17);
    const DensityCoeffs dc = example_density(2, true);
    const FreqGrid grid(8);
    SimConfig cfg;
    cfg.count = 1;
    cfg.seed = 5;
    MatrixXd rotations;
    const ImageStack stack = simulate(vc, dc, grid, cfg, &rotations);
    SimSource src(vc, dc, grid, cfg);
    const EulerAngles rot = src.rotation(0);
    CHECK(rotations(0, 0) == doctest::Approx(rot.alpha));
    const VectorXcd want = clean_slice(rot, grid, vc);
    CHECK((stack.data.col(0) - want).norm() < 1e-12 * want.norm());
}

TEST_CASE("snr calibration holds on a fresh batch") {
    auto vb = small_vbasis(2, 4.0);
    const VolumeCoeffs vc = random_volume(vb, 23);
    const DensityCoeffs dc = example_density(2, true);
    const FreqGrid grid(8);
    SimConfig cfg;
    cfg.count = 500;
    cfg.seed = 77;
    const double target = 0.5;
    const double sigma2 = calibrate_noise_variance(vc, dc, grid, cfg, target, 1000);
    // fresh clean batch at another seed
    SimConfig fresh = cfg;
    fresh.seed = 78;
    fresh.sigma2 = 0.0;
    const ImageStack clean = simulate(vc, dc, grid, fresh);
    const double signal = clean.data.squaredNorm() / clean.count();
    const double snr = signal / (sigma2 * static_cast<double>(grid.dim()));
    CHECK(snr == doctest::Approx(target).epsilon(0.1));
}

TEST_CASE("uniform density produces sin-beta distributed tilt angles") {
    auto vb = small_vbasis(1, 3.0);
    VolumeCoeffs vc{vb, VectorXcd::Zero(vb->size())};
    auto db = std::make_shared<DensityBasis>(2, true);
    VectorXcd b = VectorXcd::Zero(db->size());
    b(0) = 1.0;
    const DensityCoeffs dc{db, b};
    const FreqGrid grid(8);
    SimConfig cfg;
    cfg.count = 100000;
    cfg.seed = 3;
    SimSource src(vc, dc, grid, cfg);
    std::vector<double> betas(static_cast<std::size_t>(cfg.count));
    for (Eigen::Index j = 0; j < cfg.count; ++j)
        betas[static_cast<std::size_t>(j)] = src.rotation(j).beta;
    std::sort(betas.begin(), betas.end());
    // Kolmogorov-Smirnov against CDF(beta) = (1 - cos beta) / 2
    double ks = 0.0;
    for (std::size_t i = 0; i < betas.size(); ++i) {
        const double cdf = 0.5 * (1 - std::cos(betas[i]));
        const double emp_hi = static_cast<double>(i + 1) / betas.size();
        const double emp_lo = static_cast<double>(i) / betas.size();
        ks = std::max({ks, std::abs(cdf - emp_hi), std::abs(cdf - emp_lo)});
    }
    // p > 0.01 corresponds to KS < 1.63 / sqrt(n)
    CHECK(ks < 1.63 / std::sqrt(static_cast<double>(cfg.count)));
}

TEST_CASE("negative densities are rejected by the simulator") {
    auto vb = small_vbasis(1, 3.0);
    VolumeCoeffs vc{vb, VectorXcd::Zero(vb->size())};
    auto db = std::make_shared<DensityBasis>(2, true);
    VectorXcd b = VectorXcd::Zero(db->size());
    b(0) = 1.0;
    b(db->index(2, 0)) = 5.0;  // strongly negative lobes
    const DensityCoeffs dc{db, b};
    const FreqGrid grid(8);
    SimConfig cfg;
    cfg.count = 1;
    CHECK_THROWS_AS(SimSource(vc, dc, grid, cfg), SimulationError);
}

TEST_CASE("example densities are nonnegative on the collocation grid") {
    const SphereRule colloc = fibonacci_sphere(322);
    for (double kappa : {1.0, 3.0, 5.0}) {
        const DensityCoeffs dc = example_density(4, true, kappa);
        for (Eigen::Index i = 0; i < colloc.size(); ++i)
            CHECK(density_value(dc, colloc.phi(i), colloc.theta(i)) >= -1e-8);
    }
}

TEST_CASE("round-robin defocus groups and ctf application") {
    auto vb = small_vbasis(2, 4.0);
    const VolumeCoeffs vc = random_volume(vb, 31);
    const DensityCoeffs dc = example_density(2, true);
    const FreqGrid grid(8);
    SimConfig cfg;
    cfg.count = 6;
    cfg.ctf_groups = 3;
    cfg.seed = 9;
    const ImageStack stack = simulate(vc, dc, grid, cfg);
    REQUIRE(stack.ctf_table.size() == 3);
    for (Eigen::Index j = 0; j < 6; ++j)
        CHECK(stack.ctf_index[static_cast<std::size_t>(j)] == static_cast<int>(j % 3));
    // images are the slice times the group CTF
    SimSource src(vc, dc, grid, cfg);
    const MatrixXd h = src.ctf_grid_values();
    const EulerAngles rot = src.rotation(1);
    const VectorXcd slice = clean_slice(rot, grid, vc);
    const VectorXcd want = slice.cwiseProduct(h.col(1).cast<cplx>());
    CHECK((stack.data.col(1) - want).norm() < 1e-12 * want.norm());
}

TEST_CASE("gaussian shifts enter as phase factors") {
    auto vb = small_vbasis(2, 4.0);
    const VolumeCoeffs vc = random_volume(vb, 37);
    const DensityCoeffs dc = example_density(2, true);
    const FreqGrid grid(8);
    SimConfig with, without;
    with.count = without.count = 3;
    with.seed = without.seed = 13;
    with.shift_sigma = 1.5;
    const ImageStack a = simulate(vc, dc, grid, with);
    const ImageStack b = simulate(vc, dc, grid, without);
    for (Eigen::Index j = 0; j < 3; ++j)
        for (Eigen::Index idx : grid.active_indices()) {
            const double ma = std::abs(a.data(idx, j));
            const double mb = std::abs(b.data(idx, j));
            CHECK(ma == doctest::Approx(mb).epsilon(1e-10));  // modulus preserved
        }
}
