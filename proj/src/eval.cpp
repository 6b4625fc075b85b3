#include "smom/eval.hpp"

#include <cmath>

#include <fftw3.h>

#include "smom/quadrature.hpp"
#include "smom/specfun.hpp"

namespace smom {

namespace {

// centered <-> standard FFT layout; integer shifts keep phases exact
inline int to_std(int c, int n) { return (c + n / 2 + n) % n; }

void idft3_centered(std::vector<cplx>& a, int n) {
    std::vector<cplx> buf(a.size());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                buf[static_cast<std::size_t>((to_std(i - n / 2, n) * n + to_std(j - n / 2, n)) * n +
                                             to_std(k - n / 2, n))] =
                    a[static_cast<std::size_t>((i * n + j) * n + k)];
    fftw_plan plan = fftw_plan_dft_3d(n, n, n, reinterpret_cast<fftw_complex*>(buf.data()),
                                      reinterpret_cast<fftw_complex*>(buf.data()), FFTW_BACKWARD,
                                      FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
    const double scale = 1.0 / (static_cast<double>(n) * n * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                a[static_cast<std::size_t>((i * n + j) * n + k)] =
                    scale * buf[static_cast<std::size_t>(
                                (to_std(i - n / 2, n) * n + to_std(j - n / 2, n)) * n +
                                to_std(k - n / 2, n))];
}

void dft3_centered(std::vector<cplx>& a, int n) {
    std::vector<cplx> buf(a.size());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                buf[static_cast<std::size_t>((to_std(i - n / 2, n) * n + to_std(j - n / 2, n)) * n +
                                             to_std(k - n / 2, n))] =
                    a[static_cast<std::size_t>((i * n + j) * n + k)];
    fftw_plan plan = fftw_plan_dft_3d(n, n, n, reinterpret_cast<fftw_complex*>(buf.data()),
                                      reinterpret_cast<fftw_complex*>(buf.data()), FFTW_FORWARD,
                                      FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                a[static_cast<std::size_t>((i * n + j) * n + k)] =
                    buf[static_cast<std::size_t>((to_std(i - n / 2, n) * n +
                                                  to_std(j - n / 2, n)) *
                                                     n +
                                                 to_std(k - n / 2, n))];
}

}  // namespace

double RealVolume::norm() const {
    double s = 0.0;
    for (double v : data) s += v * v;
    return std::sqrt(s);
}

RealVolume render(const VolumeCoeffs& vc, int n, double voxel_size, double* imag_residual,
                  double imag_tol) {
    require(n >= 2 && n % 2 == 0, "render: even n required");
    std::vector<cplx> grid(static_cast<std::size_t>(n) * n * n, cplx(0, 0));
    std::vector<cplx> basis(static_cast<std::size_t>(vc.basis->size()));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                const double fx = static_cast<double>(i - n / 2) / n;
                const double fy = static_cast<double>(j - n / 2) / n;
                const double fz = static_cast<double>(k - n / 2) / n;
                if (fx * fx + fy * fy + fz * fz > kBandLimit * kBandLimit) continue;
                vc.basis->eval_point(fx, fy, fz, basis.data());
                cplx v(0, 0);
                for (Eigen::Index t = 0; t < vc.a.size(); ++t)
                    v += basis[static_cast<std::size_t>(t)] * vc.a(t);
                // volume array is indexed (x, y, z) with z fastest
                grid[static_cast<std::size_t>((i * n + j) * n + k)] = v;
            }
    idft3_centered(grid, n);
    double norm2 = 0.0, imag2 = 0.0;
    for (const cplx& v : grid) {
        norm2 += std::norm(v);
        imag2 += v.imag() * v.imag();
    }
    const double residual = (norm2 > 0) ? std::sqrt(imag2 / norm2) : 0.0;
    if (imag_residual) *imag_residual = residual;
    if (residual > imag_tol)
        throw ArgumentError("render: imaginary residue " + std::to_string(residual) +
                            " exceeds tolerance; coefficients violate realness");
    RealVolume out;
    out.n = n;
    out.voxel_size = voxel_size;
    out.data.resize(grid.size());
    for (std::size_t t = 0; t < grid.size(); ++t) out.data[t] = grid[t].real();
    return out;
}

RealVolume rotate_volume(const RealVolume& v, const EulerAngles& rot, bool reflect) {
    RealVolume out;
    out.n = v.n;
    out.voxel_size = v.voxel_size;
    out.data.assign(v.data.size(), 0.0);
    const Eigen::Matrix3d rinv = rot.matrix().transpose();
    const int n = v.n;
    const double c = n / 2;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                Eigen::Vector3d x(i - c, j - c, k - c);
                if (reflect) x = -x;
                const Eigen::Vector3d y = rinv * x;
                const double px = y.x() + c, py = y.y() + c, pz = y.z() + c;
                const int ix = static_cast<int>(std::floor(px));
                const int iy = static_cast<int>(std::floor(py));
                const int iz = static_cast<int>(std::floor(pz));
                if (ix < 0 || iy < 0 || iz < 0 || ix >= n - 1 || iy >= n - 1 || iz >= n - 1)
                    continue;
                const double tx = px - ix, ty = py - iy, tz = pz - iz;
                double acc = 0.0;
                for (int dx = 0; dx <= 1; ++dx)
                    for (int dy = 0; dy <= 1; ++dy)
                        for (int dz = 0; dz <= 1; ++dz)
                            acc += v.at(ix + dx, iy + dy, iz + dz) *
                                   (dx ? tx : 1 - tx) * (dy ? ty : 1 - ty) * (dz ? tz : 1 - tz);
                out.at(i, j, k) = acc;
            }
    return out;
}

namespace {

double masked_correlation(const RealVolume& a, const RealVolume& b) {
    const int n = a.n;
    const double c = n / 2;
    const double rmax2 = (c - 1.0) * (c - 1.0);
    double sab = 0, saa = 0, sbb = 0, sa = 0, sb = 0;
    Eigen::Index cnt = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                const double r2 = (i - c) * (i - c) + (j - c) * (j - c) + (k - c) * (k - c);
                if (r2 > rmax2) continue;
                const double va = a.at(i, j, k), vb = b.at(i, j, k);
                sab += va * vb;
                saa += va * va;
                sbb += vb * vb;
                sa += va;
                sb += vb;
                ++cnt;
            }
    const double num = sab - sa * sb / cnt;
    const double den =
        std::sqrt(std::max(saa - sa * sa / cnt, 0.0) * std::max(sbb - sb * sb / cnt, 0.0));
    return (den > 0) ? num / den : 0.0;
}

}  // namespace

AlignResult align(const RealVolume& candidate, const RealVolume& reference, double grid_step_deg,
                  int refine_levels) {
    require(candidate.n == reference.n, "align: grid mismatch");
    const double req_step = grid_step_deg * kPi / 180.0;
    // exhaustive pass at a coarse-enough step, then local descent to the
    // requested step and beyond
    double base_step = req_step;
    while (kTwoPi / base_step * (kPi / base_step) * (kTwoPi / base_step) > 30000.0)
        base_step *= 2.0;

    AlignResult best;
    best.correlation = -2.0;
    for (int refl = 0; refl <= 1; ++refl) {
        for (double alpha = 0; alpha < kTwoPi - 1e-9; alpha += base_step)
            for (double beta = 0; beta <= kPi + 1e-9; beta += base_step)
                for (double gamma = 0; gamma < kTwoPi - 1e-9; gamma += base_step) {
                    const EulerAngles rot{alpha, std::min(beta, kPi), gamma};
                    const double corr =
                        masked_correlation(rotate_volume(candidate, rot, refl != 0), reference);
                    if (corr > best.correlation) {
                        best.correlation = corr;
                        best.rotation = rot;
                        best.reflected = (refl != 0);
                    }
                }
    }
    // local refinement: halve the step down to the requested one, then
    // refine_levels more halvings
    double step = base_step / 2.0;
    int extra = refine_levels;
    while (step > req_step / 2.0 || extra-- > 0) {
        bool improved = true;
        while (improved) {
            improved = false;
            for (int da = -1; da <= 1; ++da)
                for (int db = -1; db <= 1; ++db)
                    for (int dg = -1; dg <= 1; ++dg) {
                        if (!da && !db && !dg) continue;
                        EulerAngles rot{best.rotation.alpha + da * step,
                                        std::clamp(best.rotation.beta + db * step, 0.0, kPi),
                                        best.rotation.gamma + dg * step};
                        const double corr = masked_correlation(
                            rotate_volume(candidate, rot, best.reflected), reference);
                        if (corr > best.correlation) {
                            best.correlation = corr;
                            best.rotation = rot;
                            improved = true;
                        }
                    }
        }
        if (step <= req_step / 2.0 && extra <= 0) break;
        step /= 2.0;
    }
    best.aligned = rotate_volume(candidate, best.rotation, best.reflected);
    return best;
}

FscCurve fsc(const RealVolume& v1, const RealVolume& v2, double cutoff) {
    require(v1.n == v2.n, "fsc: grid mismatch");
    const int n = v1.n;
    std::vector<cplx> f1(v1.data.begin(), v1.data.end());
    std::vector<cplx> f2(v2.data.begin(), v2.data.end());
    dft3_centered(f1, n);
    dft3_centered(f2, n);

    const int nshell = n / 2 + 1;
    VectorXcd num = VectorXcd::Zero(nshell);
    VectorXd d1 = VectorXd::Zero(nshell), d2 = VectorXd::Zero(nshell);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                const double rr = std::sqrt(static_cast<double>((i - n / 2) * (i - n / 2) +
                                                                (j - n / 2) * (j - n / 2) +
                                                                (k - n / 2) * (k - n / 2)));
                const int shell = static_cast<int>(std::lround(rr));
                if (shell >= nshell) continue;
                const cplx a = f1[static_cast<std::size_t>((i * n + j) * n + k)];
                const cplx b = f2[static_cast<std::size_t>((i * n + j) * n + k)];
                num(shell) += a * std::conj(b);
                d1(shell) += std::norm(a);
                d2(shell) += std::norm(b);
            }

    FscCurve curve;
    curve.cutoff = cutoff;
    curve.shell_freq.resize(nshell);
    curve.values.resize(nshell);
    for (int s = 0; s < nshell; ++s) {
        curve.shell_freq(s) = static_cast<double>(s) / (n * v1.voxel_size);
        const double den = std::sqrt(d1(s) * d2(s));
        if (den <= 0.0) {
            curve.values(s) = cplx(0, 0);
            curve.skipped_shells.push_back(s);
        } else {
            curve.values(s) = num(s) / den;
        }
    }
    curve.resolution = 2.0 * v1.voxel_size;  // Nyquist unless a crossing is found
    for (int s = 1; s < nshell; ++s) {
        if (std::find(curve.skipped_shells.begin(), curve.skipped_shells.end(), s) !=
            curve.skipped_shells.end())
            continue;
        if (curve.values(s).real() < cutoff) {
            curve.resolution = 1.0 / curve.shell_freq(s);
            break;
        }
    }
    return curve;
}

double density_error(const DensityCoeffs& est, const DensityCoeffs& truth) {
    const int order = 2 * std::max(est.basis->pmax(), truth.basis->pmax()) + 4;
    const SphereRule rule = sphere_rule(order);
    std::vector<cplx> re(static_cast<std::size_t>(est.basis->size()));
    std::vector<cplx> rt(static_cast<std::size_t>(truth.basis->size()));
    double num = 0.0, den = 0.0;
    for (Eigen::Index i = 0; i < rule.size(); ++i) {
        est.basis->eval_nu_row(rule.phi(i), rule.theta(i), re.data());
        truth.basis->eval_nu_row(rule.phi(i), rule.theta(i), rt.data());
        cplx ve(0, 0), vt(0, 0);
        for (Eigen::Index t = 0; t < est.b.size(); ++t) ve += re[static_cast<std::size_t>(t)] * est.b(t);
        for (Eigen::Index t = 0; t < truth.b.size(); ++t)
            vt += rt[static_cast<std::size_t>(t)] * truth.b(t);
        num += rule.weights(i) * std::norm(ve - vt);
        den += rule.weights(i) * std::norm(vt);
    }
    require(den > 0.0, "density_error: zero truth density");
    return std::sqrt(num / den);
}

DensityCoeffs rotate_density(const DensityCoeffs& dc, const EulerAngles& q) {
    const EulerAngles qinv = euler_from_matrix(q.matrix().transpose());
    DensityCoeffs out;
    out.basis = dc.basis;
    out.b = VectorXcd::Zero(dc.b.size());
    for (int p : dc.basis->degrees()) {
        for (int u2 = -p; u2 <= p; ++u2) {
            cplx acc(0, 0);
            for (int u = -p; u <= p; ++u)
                acc += wigner_D(p, u, u2, qinv) * dc.b(dc.basis->index(p, u));
            out.b(out.basis->index(p, u2)) = acc;
        }
    }
    return out;
}

}  // namespace smom
