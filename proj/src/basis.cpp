#include "smom/basis.hpp"

#include <algorithm>
#include <cmath>

namespace smom {

std::vector<int> radial_truncation(int lmax, double radius, const SphBesselZeros& zeros) {
    require(lmax >= 0 && radius > 0.0, "radial_truncation: L >= 0 and A > 0 required");
    std::vector<int> s_count(static_cast<std::size_t>(lmax) + 1, 0);
    for (int l = 0; l <= lmax; ++l) {
        // largest s with rho_{l,s+1}/pi <= A
        int fitting = 0;
        while (fitting + 1 <= zeros.smax() && zeros.zero(l, fitting + 1) / kPi <= radius)
            ++fitting;
        s_count[static_cast<std::size_t>(l)] = std::max(0, fitting - 1);
    }
    return s_count;
}

VolumeBasis::VolumeBasis(int lmax, double radius)
    : lmax_(lmax),
      radius_(radius),
      zeros_(lmax, std::max(4, static_cast<int>(std::ceil(radius)) + 2)) {
    s_count_ = radial_truncation(lmax, radius, zeros_);
    offset_.resize(static_cast<std::size_t>(lmax_) + 1);
    norm_.resize(static_cast<std::size_t>(lmax_) + 1);
    Eigen::Index at = 0;
    const double c = kBandLimit;
    for (int l = 0; l <= lmax_; ++l) {
        offset_[static_cast<std::size_t>(l)] = at;
        const int sc = s_count_[static_cast<std::size_t>(l)];
        at += static_cast<Eigen::Index>(sc) * (2 * l + 1);
        norm_[static_cast<std::size_t>(l)].resize(static_cast<std::size_t>(sc));
        for (int s = 1; s <= sc; ++s) {
            // 1 / sqrt( int_0^c j_l(rho k/c)^2 k^2 dk ) = sqrt(2/c^3) / |j_{l+1}(rho)|
            const double rho = zeros_.zero(l, s);
            const double jl1 = sph_bessel(l + 1, rho);
            norm_[static_cast<std::size_t>(l)][static_cast<std::size_t>(s - 1)] =
                std::sqrt(2.0 / (c * c * c)) / std::abs(jl1);
        }
    }
    size_ = at;
}

void VolumeBasis::eval_point(double fx, double fy, double fz, cplx* out) const {
    const double c = kBandLimit;
    const double kap = std::sqrt(fx * fx + fy * fy + fz * fz);
    if (kap > c) {
        for (Eigen::Index i = 0; i < size_; ++i) out[i] = cplx(0, 0);
        return;
    }
    const double theta = (kap > 0.0) ? std::acos(std::clamp(fz / kap, -1.0, 1.0)) : 0.0;
    const double phi = std::atan2(fy, fx);
    // spherical harmonics for all (l,m)
    cplx ybuf[64 * 64];
    sph_harm_upto(lmax_, theta, phi, ybuf);
    Eigen::Index at = 0;
    for (int l = 0; l <= lmax_; ++l) {
        const int sc = s_count_[static_cast<std::size_t>(l)];
        for (int s = 1; s <= sc; ++s) {
            const double radial =
                normalization(l, s) * sph_bessel(l, zeros_.zero(l, s) * kap / c);
            for (int m = -l; m <= l; ++m, ++at)
                out[at] = radial * ybuf[static_cast<std::size_t>(l * (l + 1) + m)];
        }
    }
}

VectorXcd VolumeBasis::lift_real(const VectorXd& re) const {
    require_shape(re.size() == size_, "VolumeBasis::lift_real: size mismatch");
    VectorXcd a(size_);
    const cplx iu(0, 1);
    for (int l = 0; l <= lmax_; ++l) {
        const cplx il = std::pow(iu, l);
        for (int s = 1; s <= s_count_[static_cast<std::size_t>(l)]; ++s) {
            a(index(l, s, 0)) = il * re(index(l, s, 0));
            for (int m = 1; m <= l; ++m) {
                const double sg = ((l + m) % 2 == 0) ? 1.0 : -1.0;
                const double rp = re(index(l, s, m));
                const double rm = re(index(l, s, -m));
                a(index(l, s, m)) = cplx(rp, 0) - sg * iu * rm;
                a(index(l, s, -m)) = iu * rm + sg * cplx(rp, 0);
            }
        }
    }
    return a;
}

VectorXd VolumeBasis::project_real(const VectorXcd& a, double* max_residual) const {
    require_shape(a.size() == size_, "VolumeBasis::project_real: size mismatch");
    VectorXd re(size_);
    const cplx iu(0, 1);
    double worst = 0.0;
    for (int l = 0; l <= lmax_; ++l) {
        const cplx il_inv = std::pow(-iu, l);
        for (int s = 1; s <= s_count_[static_cast<std::size_t>(l)]; ++s) {
            const cplx t0 = il_inv * a(index(l, s, 0));
            re(index(l, s, 0)) = t0.real();
            worst = std::max(worst, std::abs(t0.imag()));
            for (int m = 1; m <= l; ++m) {
                const double sg = ((l + m) % 2 == 0) ? 1.0 : -1.0;
                const cplx ap = a(index(l, s, m));
                const cplx am = a(index(l, s, -m));
                const cplx rm = (am - sg * ap) / (2.0 * iu);
                const cplx rp = ap + sg * iu * rm;
                re(index(l, s, m)) = rp.real();
                re(index(l, s, -m)) = rm.real();
                worst = std::max({worst, std::abs(rp.imag()), std::abs(rm.imag())});
            }
        }
    }
    if (max_residual) *max_residual = worst;
    return re;
}

VectorXd VolumeBasis::pushback_real(const VectorXcd& gbar) const {
    require_shape(gbar.size() == size_, "VolumeBasis::pushback_real: size mismatch");
    VectorXd grad(size_);
    const cplx iu(0, 1);
    for (int l = 0; l <= lmax_; ++l) {
        const cplx il_conj = std::conj(std::pow(iu, l));
        for (int s = 1; s <= s_count_[static_cast<std::size_t>(l)]; ++s) {
            grad(index(l, s, 0)) = 2.0 * (gbar(index(l, s, 0)) * il_conj).real();
            for (int m = 1; m <= l; ++m) {
                const double sg = ((l + m) % 2 == 0) ? 1.0 : -1.0;
                const cplx gp = gbar(index(l, s, m));
                const cplx gm = gbar(index(l, s, -m));
                grad(index(l, s, m)) = 2.0 * (gp + sg * gm).real();
                grad(index(l, s, -m)) = 2.0 * (sg * iu * gp - iu * gm).real();
            }
        }
    }
    return grad;
}

DensityBasis::DensityBasis(int pmax, bool reflection_invariant)
    : pmax_(pmax), reflection_invariant_(reflection_invariant) {
    require(pmax >= 0, "DensityBasis: P >= 0 required");
    degrees_.push_back(0);
    for (int p = 1; p <= pmax; ++p)
        if (!reflection_invariant_ || p % 2 == 0) degrees_.push_back(p);
    size_ = 0;
    for (int p : degrees_) size_ += 2 * p + 1;
}

Eigen::Index DensityBasis::index(int p, int u) const {
    Eigen::Index at = 0;
    for (int q : degrees_) {
        if (q == p) return at + (u + p);
        at += 2 * q + 1;
    }
    throw ArgumentError("DensityBasis::index: degree not in basis");
}

void DensityBasis::eval_row(double alpha, double beta, cplx* out) const {
    // D^p_{u,0}(R) = sqrt(4pi/(2p+1)) conj(Y_p^u(beta, alpha))
    cplx ybuf[64 * 64];
    sph_harm_upto(pmax_, beta, alpha, ybuf);
    Eigen::Index at = 0;
    for (int p : degrees_) {
        const double scale = std::sqrt(kFourPi / (2.0 * p + 1.0));
        for (int u = -p; u <= p; ++u, ++at)
            out[at] = scale * std::conj(ybuf[static_cast<std::size_t>(p * (p + 1) + u)]);
    }
}

void DensityBasis::eval_nu_row(double alpha, double beta, cplx* out) const {
    eval_row(alpha, beta, out);
    for (Eigen::Index i = 0; i < size_; ++i) out[i] *= kTwoPi;
}

VectorXcd DensityBasis::lift_real(const VectorXd& re) const {
    require_shape(re.size() == free_size(), "DensityBasis::lift_real: size mismatch");
    VectorXcd b(size_);
    b(0) = cplx(1, 0);  // fixed normalization
    const cplx iu(0, 1);
    for (int p : degrees_) {
        if (p == 0) continue;
        b(index(p, 0)) = cplx(re(index(p, 0) - 1), 0);
        for (int u = 1; u <= p; ++u) {
            const double sg = (u % 2 == 0) ? 1.0 : -1.0;
            const double rp = re(index(p, u) - 1);
            const double rm = re(index(p, -u) - 1);
            b(index(p, u)) = cplx(rp, 0) + sg * iu * rm;
            b(index(p, -u)) = -iu * rm + sg * cplx(rp, 0);
        }
    }
    return b;
}

VectorXd DensityBasis::project_real(const VectorXcd& b, double* max_residual) const {
    require_shape(b.size() == size_, "DensityBasis::project_real: size mismatch");
    VectorXd re(free_size());
    const cplx iu(0, 1);
    double worst = std::abs(b(0) - cplx(1, 0));
    for (int p : degrees_) {
        if (p == 0) continue;
        re(index(p, 0) - 1) = b(index(p, 0)).real();
        worst = std::max(worst, std::abs(b(index(p, 0)).imag()));
        for (int u = 1; u <= p; ++u) {
            const double sg = (u % 2 == 0) ? 1.0 : -1.0;
            const cplx bp = b(index(p, u));
            const cplx bm = b(index(p, -u));
            const cplx rm = (sg * bp - bm) / (2.0 * iu);
            const cplx rp = bp - sg * iu * rm;
            re(index(p, u) - 1) = rp.real();
            re(index(p, -u) - 1) = rm.real();
            worst = std::max({worst, std::abs(rp.imag()), std::abs(rm.imag())});
        }
    }
    if (max_residual) *max_residual = worst;
    return re;
}

VectorXd DensityBasis::pushback_real(const VectorXcd& gbar) const {
    require_shape(gbar.size() == size_, "DensityBasis::pushback_real: size mismatch");
    VectorXd grad(free_size());
    const cplx iu(0, 1);
    for (int p : degrees_) {
        if (p == 0) continue;
        grad(index(p, 0) - 1) = 2.0 * gbar(index(p, 0)).real();
        for (int u = 1; u <= p; ++u) {
            const double sg = (u % 2 == 0) ? 1.0 : -1.0;
            const cplx gp = gbar(index(p, u));
            const cplx gm = gbar(index(p, -u));
            grad(index(p, u) - 1) = 2.0 * (gp + sg * gm).real();
            grad(index(p, -u) - 1) = 2.0 * (-sg * iu * gp + iu * gm).real();
        }
    }
    return grad;
}

}  // namespace smom
