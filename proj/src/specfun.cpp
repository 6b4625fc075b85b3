#include "smom/specfun.hpp"

#include <cmath>
#include <vector>

namespace smom {

Eigen::Matrix3d EulerAngles::matrix() const {
    auto rz = [](double a) {
        Eigen::Matrix3d m;
        m << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
        return m;
    };
    auto ry = [](double a) {
        Eigen::Matrix3d m;
        m << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
        return m;
    };
    return rz(alpha) * ry(beta) * rz(gamma);
}

EulerAngles euler_from_matrix(const Eigen::Matrix3d& r) {
    EulerAngles e;
    e.beta = std::acos(std::clamp(r(2, 2), -1.0, 1.0));
    if (std::abs(r(2, 2)) > 1.0 - 1e-12) {
        // gimbal case: fold everything into alpha
        e.gamma = 0.0;
        e.alpha = std::atan2(r(1, 0), r(0, 0));
        if (r(2, 2) < 0) e.alpha = -e.alpha;
    } else {
        e.alpha = std::atan2(r(1, 2), r(0, 2));
        e.gamma = std::atan2(r(2, 1), -r(2, 0));
    }
    if (e.alpha < 0) e.alpha += kTwoPi;
    if (e.gamma < 0) e.gamma += kTwoPi;
    return e;
}

void sph_bessel_upto(int lmax, double x, double* out) {
    require(lmax >= 0 && x >= 0.0, "sph_bessel: l >= 0 and x >= 0 required");
    if (x < 1e-6) {
        // series limit j_l(x) ~ x^l / (2l+1)!!
        double dfact = 1.0;  // (2l+1)!!
        double xp = 1.0;
        for (int l = 0; l <= lmax; ++l) {
            if (l > 0) {
                dfact *= 2 * l + 1;
                xp *= x;
            }
            const double lead = xp / dfact;
            out[l] = (l == 0) ? 1.0 - x * x / 6.0 : lead * (1.0 - x * x / (2.0 * (2 * l + 3)));
        }
        return;
    }
    const double j0 = std::sin(x) / x;
    if (lmax == 0) {
        out[0] = j0;
        return;
    }
    const double j1 = std::sin(x) / (x * x) - std::cos(x) / x;
    if (x > lmax + 2) {
        // upward recurrence is stable for l < x
        out[0] = j0;
        out[1] = j1;
        for (int l = 1; l < lmax; ++l) out[l + 1] = (2 * l + 1) / x * out[l] - out[l - 1];
        return;
    }
    // downward (Miller) recurrence, normalized against j_0
    const int start = lmax + 16 + static_cast<int>(x);
    double fp = 0.0;       // f_{l+1}
    double fc = 1e-280;    // f_l
    for (int l = 0; l <= lmax; ++l) out[l] = 0.0;
    for (int l = start; l >= 1; --l) {
        const double fm = (2 * l + 1) / x * fc - fp;
        fp = fc;
        fc = fm;
        if (l - 1 <= lmax) out[l - 1] = fc;
        if (std::abs(fc) > 1e250) {
            const double s = 1e-250;
            fc *= s;
            fp *= s;
            if (l - 1 <= lmax)
                for (int m = l - 1; m <= lmax; ++m) out[m] *= s;
        }
    }
    const double scale = j0 / out[0];
    for (int l = 0; l <= lmax; ++l) out[l] *= scale;
}

double sph_bessel(int l, double x) {
    if (l < 128) {
        double buf[128];
        sph_bessel_upto(l, x, buf);
        return buf[l];
    }
    std::vector<double> buf(static_cast<std::size_t>(l) + 1);
    sph_bessel_upto(l, x, buf.data());
    return buf[static_cast<std::size_t>(l)];
}

namespace {

double bisect_bessel_zero(int l, double lo, double hi) {
    double flo = sph_bessel(l, lo);
    for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = sph_bessel(l, mid);
        if ((flo >= 0) == (fm >= 0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace

SphBesselZeros::SphBesselZeros(int lmax, int smax) : smax_(smax) {
    require(lmax >= 0 && smax >= 1, "SphBesselZeros: L >= 0 and S >= 1 required");
    table_.resize(static_cast<std::size_t>(lmax) + 1);
    // row 0 is exact; rows above come from interlacing brackets, so each row
    // needs one more zero than the row above it.
    std::vector<double> prev(static_cast<std::size_t>(smax + lmax));
    for (int s = 1; s <= smax + lmax; ++s) prev[static_cast<std::size_t>(s - 1)] = s * kPi;
    table_[0].assign(prev.begin(), prev.begin() + smax);
    for (int l = 1; l <= lmax; ++l) {
        const int count = smax + lmax - l;
        std::vector<double> cur(static_cast<std::size_t>(count));
        for (int s = 1; s <= count; ++s) {
            const double lo = prev[static_cast<std::size_t>(s - 1)];
            const double hi = prev[static_cast<std::size_t>(s)];
            cur[static_cast<std::size_t>(s - 1)] = bisect_bessel_zero(l, lo, hi);
        }
        table_[static_cast<std::size_t>(l)].assign(cur.begin(), cur.begin() + smax);
        prev = std::move(cur);
    }
}

void sph_harm_upto(int lmax, double theta, double phi, cplx* out) {
    // normalized associated Legendre with Condon-Shortley phase, recurrence
    // over (l, m); Y_l^m = P^_l^m e^{i m phi}, Y_l^{-m} = (-1)^m conj(Y_l^m)
    require(lmax >= 0 && lmax <= 62, "sph_harm_upto: lmax must be in [0, 62]");
    const double x = std::cos(theta);
    const double s = std::sin(theta);
    double p[2016];  // (62+1)(62+2)/2
    auto pidx = [](int l, int m) { return static_cast<std::size_t>(l * (l + 1) / 2 + m); };
    p[pidx(0, 0)] = 1.0 / std::sqrt(kFourPi);
    for (int m = 1; m <= lmax; ++m)
        p[pidx(m, m)] = -std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * s * p[pidx(m - 1, m - 1)];
    for (int m = 0; m < lmax; ++m)
        p[pidx(m + 1, m)] = std::sqrt(2.0 * m + 3.0) * x * p[pidx(m, m)];
    for (int m = 0; m <= lmax; ++m)
        for (int l = m + 2; l <= lmax; ++l) {
            const double a = std::sqrt((4.0 * l * l - 1.0) / (static_cast<double>(l) * l - m * m));
            const double b = std::sqrt((static_cast<double>(l - 1) * (l - 1) - m * m) /
                                       (4.0 * static_cast<double>(l - 1) * (l - 1) - 1.0));
            p[pidx(l, m)] = a * (x * p[pidx(l - 1, m)] - b * p[pidx(l - 2, m)]);
        }
    auto yidx = [](int l, int m) { return static_cast<std::size_t>(l * (l + 1) + m); };
    for (int l = 0; l <= lmax; ++l) {
        out[yidx(l, 0)] = cplx(p[pidx(l, 0)], 0.0);
        for (int m = 1; m <= l; ++m) {
            const cplx e(std::cos(m * phi), std::sin(m * phi));
            const cplx v = p[pidx(l, m)] * e;
            out[yidx(l, m)] = v;
            out[yidx(l, -m)] = (m % 2 == 0) ? std::conj(v) : -std::conj(v);
        }
    }
}

cplx sph_harmonic(int l, int m, double theta, double phi) {
    require(std::abs(m) <= l, "sph_harmonic: |m| <= l required");
    std::vector<cplx> buf(static_cast<std::size_t>((l + 1) * (l + 1)));
    sph_harm_upto(l, theta, phi, buf.data());
    return buf[static_cast<std::size_t>(l * (l + 1) + m)];
}

namespace {

// d^p_{p,v}(beta) = (-1)^{p-v} sqrt(binom(2p, p+v)) cos(b/2)^{p+v} sin(b/2)^{p-v}
double wigner_d_top_row(int p, int v, double beta) {
    const double c = std::cos(0.5 * beta);
    const double s = std::sin(0.5 * beta);
    const double lbinom =
        std::lgamma(2.0 * p + 1.0) - std::lgamma(p + v + 1.0) - std::lgamma(p - v + 1.0);
    const double mag = std::exp(0.5 * lbinom) * std::pow(c, p + v) * std::pow(s, p - v);
    return ((p - v) % 2 == 0) ? mag : -mag;
}

// single-term closed form at p = max(|u|,|v|); the corner symmetries
// d_{u,v} = (-1)^{u-v} d_{v,u} = d_{-v,-u} map every case onto the top row
double wigner_d_seed(int p, int u, int v, double beta) {
    if (u == p) return wigner_d_top_row(p, v, beta);
    if (u == -p) {
        const double val = wigner_d_top_row(p, -v, beta);
        return ((p + v) % 2 == 0) ? val : -val;
    }
    if (v == p) {
        const double val = wigner_d_top_row(p, u, beta);
        return ((p + u) % 2 == 0) ? val : -val;
    }
    return wigner_d_top_row(p, -u, beta);  // v == -p
}

}  // namespace

double wigner_d(int p, int u, int v, double beta) {
    require(std::abs(u) <= p && std::abs(v) <= p, "wigner_d: |u|,|v| <= p required");
    const int j0 = std::max(std::abs(u), std::abs(v));
    double dprev = 0.0;  // d^{j-1}
    double dcur = wigner_d_seed(j0, u, v, beta);
    if (p == j0) return dcur;
    const double x = std::cos(beta);
    for (int j = j0; j < p; ++j) {
        double dnext;
        if (j == 0) {
            dnext = x * dcur;  // d^1_{00} = cos(beta)
        } else {
            const double denom =
                j * std::sqrt((static_cast<double>(j + 1) * (j + 1) - u * u) *
                              (static_cast<double>(j + 1) * (j + 1) - v * v));
            const double t1 = (2.0 * j + 1.0) *
                              (static_cast<double>(j) * (j + 1) * x - static_cast<double>(u) * v);
            const double t2 = (j + 1.0) * std::sqrt((static_cast<double>(j) * j - u * u) *
                                                    (static_cast<double>(j) * j - v * v));
            dnext = (t1 * dcur - t2 * dprev) / denom;
        }
        dprev = dcur;
        dcur = dnext;
    }
    return dcur;
}

double wigner_d_factorial(int p, int u, int v, double beta) {
    require(std::abs(u) <= p && std::abs(v) <= p, "wigner_d: |u|,|v| <= p required");
    const double c = std::cos(0.5 * beta);
    const double s = std::sin(0.5 * beta);
    const double lpref = 0.5 * (std::lgamma(p + u + 1.0) + std::lgamma(p - u + 1.0) +
                                std::lgamma(p + v + 1.0) + std::lgamma(p - v + 1.0));
    const int kmin = std::max(0, v - u);
    const int kmax = std::min(p + v, p - u);
    double sum = 0.0;
    for (int k = kmin; k <= kmax; ++k) {
        const double lden = std::lgamma(p + v - k + 1.0) + std::lgamma(k + 1.0) +
                            std::lgamma(p - u - k + 1.0) + std::lgamma(u - v + k + 1.0);
        const int pc = 2 * p + v - u - 2 * k;
        const int ps = u - v + 2 * k;
        double term = std::exp(lpref - lden);
        term *= (pc == 0) ? 1.0 : std::pow(c, pc);
        term *= (ps == 0) ? 1.0 : std::pow(s, ps);
        if ((u - v + k) % 2 != 0) term = -term;
        sum += term;
    }
    return sum;
}

cplx wigner_D(int p, int u, int v, const EulerAngles& r) {
    const double d = wigner_d(p, u, v, r.beta);
    const double ph = -u * r.alpha - v * r.gamma;
    return d * cplx(std::cos(ph), std::sin(ph));
}

std::vector<MatrixXd> wigner_d_tables(int pmax, double beta) {
    std::vector<MatrixXd> tables(static_cast<std::size_t>(pmax) + 1);
    for (int p = 0; p <= pmax; ++p)
        tables[static_cast<std::size_t>(p)] = MatrixXd::Zero(2 * p + 1, 2 * p + 1);
    const double x = std::cos(beta);
    for (int u = -pmax; u <= pmax; ++u)
        for (int v = -pmax; v <= pmax; ++v) {
            const int j0 = std::max(std::abs(u), std::abs(v));
            double dprev = 0.0;
            double dcur = wigner_d_seed(j0, u, v, beta);
            tables[static_cast<std::size_t>(j0)](u + j0, v + j0) = dcur;
            for (int j = j0; j < pmax; ++j) {
                double dnext;
                if (j == 0) {
                    dnext = x * dcur;
                } else {
                    const double denom =
                        j * std::sqrt((static_cast<double>(j + 1) * (j + 1) - u * u) *
                                      (static_cast<double>(j + 1) * (j + 1) - v * v));
                    const double t1 =
                        (2.0 * j + 1.0) *
                        (static_cast<double>(j) * (j + 1) * x - static_cast<double>(u) * v);
                    const double t2 =
                        (j + 1.0) * std::sqrt((static_cast<double>(j) * j - u * u) *
                                              (static_cast<double>(j) * j - v * v));
                    dnext = (t1 * dcur - t2 * dprev) / denom;
                }
                dprev = dcur;
                dcur = dnext;
                tables[static_cast<std::size_t>(j + 1)](u + j + 1, v + j + 1) = dcur;
            }
        }
    return tables;
}

}  // namespace smom
