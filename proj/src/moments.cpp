#include "smom/moments.hpp"

#include <cmath>
#include <unordered_map>

namespace smom {

namespace {

constexpr Eigen::Index kOuterChunk = 64;  // images per Khatri-Rao buffer

std::uint64_t derive(std::uint64_t seed, int which) { return mix_seed(seed, 1000 + which); }

void track(StreamStats* stats, std::int64_t bytes) {
    if (stats) stats->track_alloc(bytes);
}
void untrack(StreamStats* stats, std::int64_t bytes) {
    if (stats) stats->track_free(bytes);
}
void add_flops(StreamStats* stats, double f) {
    if (stats) stats->flops += f;
}

// element-wise division with starvation masking
template <typename NumT, typename DenT>
Eigen::Index masked_divide(NumT& num, const DenT& den, double floor_val) {
    Eigen::Index masked = 0;
    for (Eigen::Index j = 0; j < num.cols(); ++j)
        for (Eigen::Index i = 0; i < num.rows(); ++i) {
            const double d = std::abs(den(i, j));
            if (d < floor_val) {
                num(i, j) = cplx(0, 0);
                ++masked;
            } else {
                num(i, j) /= d;
            }
        }
    return masked;
}

struct GroupSums {
    std::vector<double> counts;  // per group
    MatrixXd h;                  // d x G (CTF values, 1 for no-CTF)
};

}  // namespace

SketchResult sketch_m2(ImageSource& src, const SketchConfig& cfg, StreamStats* stats,
                       Eigen::Index batch) {
    cfg.validate();
    require(!src.has_ctf(), "sketch_m2: CTF stacks use the CUR path");
    require(src.count() >= 1, "sketch_m2: empty stack");
    const Eigen::Index d = static_cast<Eigen::Index>(src.grid_size()) * src.grid_size();
    const Eigen::Index s = cfg.sample_size;

    const MatrixXcd g = gaussian_matrix(d, s, derive(cfg.seed, 1));
    track(stats, 16 * d * s);
    MatrixXcd y = MatrixXcd::Zero(d, s);
    track(stats, 16 * d * s);

    src.reset();
    MatrixXcd block;
    std::vector<int> gid;
    bool tracked_block = false;
    while (Eigen::Index n = src.read(block, gid, batch)) {
        if (!tracked_block) {
            track(stats, 16 * d * batch);
            tracked_block = true;
        }
        y.noalias() += block * (block.adjoint() * g);
        if (stats) stats->images += n;
        add_flops(stats, 16.0 * static_cast<double>(n) * d * s);
    }
    y /= static_cast<double>(src.count());
    const RangeResult range = range_from_sketch(y, cfg);
    untrack(stats, 16 * d * s * 2 + (tracked_block ? 16 * d * batch : 0));
    return SketchResult{range.basis, range.svals, range.rank_zero};
}

SketchResult sketch_m3(ImageSource& src, const SketchConfig& cfg, StreamStats* stats,
                       Eigen::Index batch) {
    cfg.validate();
    require(!src.has_ctf(), "sketch_m3: CTF stacks use the CUR path");
    require(src.count() >= 1, "sketch_m3: empty stack");
    const Eigen::Index d = static_cast<Eigen::Index>(src.grid_size()) * src.grid_size();
    const Eigen::Index s = cfg.sample_size;

    const MatrixXcd g1 = gaussian_matrix(s, d, derive(cfg.seed, 2));
    const MatrixXcd g2 = gaussian_matrix(s, d, derive(cfg.seed, 3));
    track(stats, 2 * 16 * d * s);
    MatrixXcd y = MatrixXcd::Zero(d, s);
    track(stats, 16 * d * s);

    src.reset();
    MatrixXcd block;
    std::vector<int> gid;
    bool tracked_block = false;
    while (Eigen::Index n = src.read(block, gid, batch)) {
        if (!tracked_block) {
            track(stats, 16 * d * batch);
            tracked_block = true;
        }
        const MatrixXcd h = (g1 * block).cwiseProduct(g2 * block);  // s x n
        y.noalias() += block * h.transpose();
        if (stats) stats->images += n;
        add_flops(stats, 24.0 * static_cast<double>(n) * d * s);
    }
    y /= static_cast<double>(src.count());
    const RangeResult range = range_from_sketch(y, cfg);
    untrack(stats, 16 * d * s * 3 + (tracked_block ? 16 * d * batch : 0));
    return SketchResult{range.basis, range.svals, range.rank_zero};
}

SubspaceMoments project_moments(ImageSource& src, const MatrixXcd& u1, const MatrixXcd& u2,
                                const MatrixXcd& u3, bool debias, std::optional<double> sigma2,
                                StreamStats* stats, Eigen::Index batch) {
    require(!src.has_ctf(), "project_moments: CTF stacks use cur_moments");
    require(src.count() >= 1, "project_moments: empty stack");
    require(!debias || sigma2.has_value(), "project_moments: debias requires sigma2");
    const Eigen::Index d = static_cast<Eigen::Index>(src.grid_size()) * src.grid_size();
    require_shape(u1.rows() == d && u2.rows() == d && u3.rows() == d,
                  "project_moments: basis row count must equal pixel count");
    const Eigen::Index r1 = u1.cols(), r2 = u2.cols(), r3 = u3.cols();

    VectorXcd m1full = VectorXcd::Zero(d);
    MatrixXcd m2 = MatrixXcd::Zero(r2, r2);
    MatrixXcd m3u = MatrixXcd::Zero(r3, r3 * r3);  // mode-1 unfolding
    MatrixXcd kr(r3 * r3, kOuterChunk);
    track(stats, 16 * (d + r2 * r2 + 2 * r3 * r3 * r3 + r3 * r3 * kOuterChunk));

    src.reset();
    MatrixXcd block;
    std::vector<int> gid;
    while (Eigen::Index n = src.read(block, gid, batch)) {
        m1full += block.rowwise().sum();
        const MatrixXcd w2 = u2.adjoint() * block;
        m2.noalias() += w2 * w2.adjoint();
        const MatrixXcd w3 = u3.adjoint() * block;
        for (Eigen::Index base = 0; base < n; base += kOuterChunk) {
            const Eigen::Index c = std::min(kOuterChunk, n - base);
            for (Eigen::Index t = 0; t < c; ++t) {
                const MatrixXcd outer = w3.col(base + t) * w3.col(base + t).transpose();
                kr.col(t) = Eigen::Map<const VectorXcd>(outer.data(), r3 * r3);
            }
            m3u.noalias() += w3.middleCols(base, c) * kr.leftCols(c).transpose();
        }
        if (stats) stats->images += n;
        add_flops(stats, 8.0 * n * d * (r2 + r3) + 8.0 * n * r3 * r3 * r3);
    }

    const double num_images = static_cast<double>(src.count());
    m1full /= num_images;
    m2 /= num_images;
    m3u /= num_images;

    SubspaceMoments sm;
    sm.u1 = u1;
    sm.u2 = u2;
    sm.u3 = u3;
    sm.m1 = u1.adjoint() * m1full;
    sm.m2 = m2;
    sm.m3 = refold(m3u, 1, {r3, r3, r3});

    if (debias) {
        const double s2 = *sigma2;
        sm.m2 -= s2 * (u2.adjoint() * u2);
        // Fourier noise from a real field satisfies E[eps eps^T] = sigma2 P
        const FreqGrid grid(src.grid_size());
        MatrixXcd pu(d, r3);  // P * conj(U3)
        for (Eigen::Index i = 0; i < d; ++i) pu.row(i) = u3.row(grid.conj_index(i)).conjugate();
        const MatrixXcd q = u3.adjoint() * pu;  // r3 x r3
        const VectorXcd w1 = u3.adjoint() * m1full;
        for (Eigen::Index a = 0; a < r3; ++a)
            for (Eigen::Index b = 0; b < r3; ++b)
                for (Eigen::Index c = 0; c < r3; ++c)
                    sm.m3(a, b, c) -= s2 * (w1(a) * q(b, c) + w1(b) * q(a, c) + w1(c) * q(a, b));
    }
    sm.m3 = sm.m3.symmetrized();

    sm.prov.n_images = src.count();
    sm.prov.debias = debias;
    sm.prov.sigma2 = sigma2.value_or(0.0);
    sm.prov.path = "gaussian";
    untrack(stats, 16 * (d + r2 * r2 + 2 * r3 * r3 * r3 + r3 * r3 * kOuterChunk));
    return sm;
}

namespace {

// sum_g n_g prod of CTF powers at given pixels
double group_sum3(const GroupSums& gs, Eigen::Index sq_idx, Eigen::Index a, Eigen::Index b) {
    double acc = 0.0;
    for (std::size_t g = 0; g < gs.counts.size(); ++g) {
        const double hq = gs.h(sq_idx, static_cast<Eigen::Index>(g));
        acc += gs.counts[g] * hq * hq * gs.h(a, static_cast<Eigen::Index>(g)) *
               gs.h(b, static_cast<Eigen::Index>(g));
    }
    return acc;
}

// subtract the sampled third-moment noise bias from a materialized tensor
// over the index set `idx`; `m1` is the CTF-corrected first moment estimate
void subtract_b3_sampled(Tensor3& t, const std::vector<Eigen::Index>& idx, const FreqGrid& grid,
                         const GroupSums& gs, const VectorXcd& m1, double s2) {
    const Eigen::Index n = static_cast<Eigen::Index>(idx.size());
    std::unordered_map<Eigen::Index, Eigen::Index> pos;
    for (Eigen::Index t2 = 0; t2 < n; ++t2) pos[idx[static_cast<std::size_t>(t2)]] = t2;
    for (Eigen::Index a = 0; a < n; ++a) {
        const Eigen::Index ca_pix = grid.conj_index(idx[static_cast<std::size_t>(a)]);
        const auto it = pos.find(ca_pix);
        if (it == pos.end()) continue;
        const Eigen::Index ca = it->second;
        for (Eigen::Index f = 0; f < n; ++f) {
            const double gsum = group_sum3(gs, idx[static_cast<std::size_t>(f)],
                                           idx[static_cast<std::size_t>(a)], ca_pix);
            const cplx val = s2 * gsum * m1(idx[static_cast<std::size_t>(f)]);
            t(f, a, ca) -= val;
            t(a, f, ca) -= val;
            t(a, ca, f) -= val;
        }
    }
}

}  // namespace

SubspaceMoments cur_moments(ImageSource& src, const CurParams& prm, bool debias,
                            std::optional<double> sigma2, StreamStats* stats,
                            Eigen::Index batch) {
    require(src.count() >= 1, "cur_moments: empty stack");
    require(!debias || sigma2.has_value(), "cur_moments: debias requires sigma2");
    require(!prm.j2.empty() && !prm.s3.empty() && !prm.j3a.empty() && !prm.j3b.empty(),
            "cur_moments: index sets must be nonempty");
    const FreqGrid grid(src.grid_size());
    const Eigen::Index d = grid.dim();
    const Eigen::Index nj = static_cast<Eigen::Index>(prm.j2.size());
    const Eigen::Index ns = static_cast<Eigen::Index>(prm.s3.size());
    const Eigen::Index na = static_cast<Eigen::Index>(prm.j3a.size());
    const Eigen::Index nb = static_cast<Eigen::Index>(prm.j3b.size());
    const Eigen::Index njt = na * nb;

    GroupSums gs;
    gs.h = src.ctf_grid_values();
    const Eigen::Index ngroups = gs.h.cols();
    gs.counts.assign(static_cast<std::size_t>(ngroups), 0.0);

    VectorXcd sum1 = VectorXcd::Zero(d);
    MatrixXcd c2num = MatrixXcd::Zero(d, nj);
    MatrixXcd w3num = MatrixXcd::Zero(d, njt);
    Tensor3 ynum(ns, ns, ns);
    MatrixXcd kr(njt, kOuterChunk);
    MatrixXcd kr2(ns * ns, kOuterChunk);
    track(stats, 16 * (d + d * nj + d * njt + ns * ns * ns + njt * kOuterChunk +
                       ns * ns * kOuterChunk));
    MatrixXcd ynum_u = MatrixXcd::Zero(ns, ns * ns);

    auto rows_of = [](const MatrixXcd& x, const std::vector<Eigen::Index>& idx) {
        MatrixXcd out(static_cast<Eigen::Index>(idx.size()), x.cols());
        for (Eigen::Index i = 0; i < out.rows(); ++i)
            out.row(i) = x.row(idx[static_cast<std::size_t>(i)]);
        return out;
    };

    src.reset();
    MatrixXcd block;
    std::vector<int> gid;
    while (Eigen::Index n = src.read(block, gid, batch)) {
        // scale each image by its CTF: numerators accumulate H ⊙ I^H
        for (Eigen::Index j = 0; j < n; ++j) {
            block.col(j).array() *= gs.h.col(gid[static_cast<std::size_t>(j)]).array();
            gs.counts[static_cast<std::size_t>(gid[static_cast<std::size_t>(j)])] += 1.0;
        }
        sum1 += block.rowwise().sum();
        const MatrixXcd xj = rows_of(block, prm.j2);
        c2num.noalias() += block * xj.adjoint();
        const MatrixXcd xa = rows_of(block, prm.j3a);
        const MatrixXcd xb = rows_of(block, prm.j3b);
        const MatrixXcd xs = rows_of(block, prm.s3);
        for (Eigen::Index base = 0; base < n; base += kOuterChunk) {
            const Eigen::Index c = std::min(kOuterChunk, n - base);
            for (Eigen::Index t = 0; t < c; ++t) {
                const MatrixXcd outer = xa.col(base + t) * xb.col(base + t).transpose();
                kr.col(t) = Eigen::Map<const VectorXcd>(outer.data(), njt);
                const MatrixXcd outer2 = xs.col(base + t) * xs.col(base + t).transpose();
                kr2.col(t) = Eigen::Map<const VectorXcd>(outer2.data(), ns * ns);
            }
            w3num.noalias() += block.middleCols(base, c) * kr.leftCols(c).transpose();
            ynum_u.noalias() += xs.middleCols(base, c) * kr2.leftCols(c).transpose();
        }
        if (stats) stats->images += n;
        add_flops(stats, 8.0 * n * d * (nj + njt + 1) + 8.0 * n * ns * ns * ns);
    }
    ynum = refold(ynum_u, 1, {ns, ns, ns});

    // denominator sums from the defocus groups
    VectorXd den1 = VectorXd::Zero(d);
    for (Eigen::Index g = 0; g < ngroups; ++g)
        den1 += gs.counts[static_cast<std::size_t>(g)] * gs.h.col(g).cwiseAbs2();
    MatrixXd c2den = MatrixXd::Zero(d, nj);
    MatrixXd w3den = MatrixXd::Zero(d, njt);
    Tensor3 yden(ns, ns, ns);
    for (Eigen::Index g = 0; g < ngroups; ++g) {
        const VectorXd h2 = gs.h.col(g).cwiseAbs2();
        const double cnt = gs.counts[static_cast<std::size_t>(g)];
        VectorXd h2j(nj), h2a(na), h2b(nb), h2s(ns);
        for (Eigen::Index t = 0; t < nj; ++t) h2j(t) = h2(prm.j2[static_cast<std::size_t>(t)]);
        for (Eigen::Index t = 0; t < na; ++t) h2a(t) = h2(prm.j3a[static_cast<std::size_t>(t)]);
        for (Eigen::Index t = 0; t < nb; ++t) h2b(t) = h2(prm.j3b[static_cast<std::size_t>(t)]);
        for (Eigen::Index t = 0; t < ns; ++t) h2s(t) = h2(prm.s3[static_cast<std::size_t>(t)]);
        c2den.noalias() += cnt * h2 * h2j.transpose();
        for (Eigen::Index tb = 0; tb < nb; ++tb)
            for (Eigen::Index ta = 0; ta < na; ++ta)
                w3den.col(ta + tb * na) += cnt * h2a(ta) * h2b(tb) * h2;
        for (Eigen::Index q = 0; q < ns; ++q)
            for (Eigen::Index r = 0; r < ns; ++r)
                for (Eigen::Index t = 0; t < ns; ++t)
                    yden(q, r, t) += cnt * h2s(q) * h2s(r) * h2s(t);
    }

    // CTF-corrected first moment (unbiased; used inside the bias terms)
    VectorXcd m1full = sum1;
    Eigen::Index masked = 0;
    for (Eigen::Index i = 0; i < d; ++i) {
        if (den1(i) < prm.denom_floor) {
            m1full(i) = cplx(0, 0);
            ++masked;
        } else {
            m1full(i) /= den1(i);
        }
    }

    if (debias) {
        const double s2 = *sigma2;
        // B2 restricted to the sampled columns: sigma2 * diag(sum_j H_j^2)
        for (Eigen::Index t = 0; t < nj; ++t) {
            const Eigen::Index col = prm.j2[static_cast<std::size_t>(t)];
            c2num(col, t) -= s2 * den1(col);
        }
        // B3 on the sampled W3 entries and on the core fiber set
        for (Eigen::Index tb = 0; tb < nb; ++tb)
            for (Eigen::Index ta = 0; ta < na; ++ta) {
                const Eigen::Index a = prm.j3a[static_cast<std::size_t>(ta)];
                const Eigen::Index b = prm.j3b[static_cast<std::size_t>(tb)];
                const Eigen::Index col = ta + tb * na;
                if (grid.conj_index(a) == b) {
                    VectorXd habs = VectorXd::Zero(d);
                    for (Eigen::Index g = 0; g < ngroups; ++g)
                        habs += gs.counts[static_cast<std::size_t>(g)] * gs.h(a, g) *
                                gs.h(b, g) * gs.h.col(g).cwiseAbs2();
                    w3num.col(col) -= s2 * habs.cast<cplx>().cwiseProduct(m1full);
                }
                const Eigen::Index i0 = grid.conj_index(b);
                w3num(i0, col) -= s2 * group_sum3(gs, a, i0, b) * m1full(a);
                const Eigen::Index i1 = grid.conj_index(a);
                w3num(i1, col) -= s2 * group_sum3(gs, b, i1, a) * m1full(b);
            }
        subtract_b3_sampled(ynum, prm.s3, grid, gs, m1full, s2);
    }

    masked += masked_divide(c2num, c2den, prm.denom_floor);
    masked += masked_divide(w3num, w3den, prm.denom_floor);
    for (Eigen::Index q = 0; q < ns; ++q)
        for (Eigen::Index r = 0; r < ns; ++r)
            for (Eigen::Index t = 0; t < ns; ++t) {
                if (std::abs(yden(q, r, t)) < prm.denom_floor) {
                    ynum(q, r, t) = cplx(0, 0);
                    ++masked;
                } else {
                    ynum(q, r, t) /= yden(q, r, t).real();
                }
            }

    SubspaceMoments sm;
    sm.masked_entries = masked;

    // second moment: Hermitian CUR, trimmed
    MatrixXcd w2(nj, nj);
    for (Eigen::Index t = 0; t < nj; ++t) w2.row(t) = c2num.row(prm.j2[static_cast<std::size_t>(t)]);
    const TuckerFactor f2 = cur_trim(c2num, w2, true, prm.eps, prm.tau2, prm.cap2);
    sm.u2 = f2.basis;
    sm.u1 = f2.basis;
    sm.m2 = f2.core;
    sm.svals2 = f2.svals;
    sm.m1 = sm.u1.adjoint() * m1full;

    // third moment: mode-wise CUR with shared fiber set
    MatrixXcd c3(ns, njt);
    for (Eigen::Index t = 0; t < ns; ++t) c3.row(t) = w3num.row(prm.s3[static_cast<std::size_t>(t)]);
    const MatrixXcd lift = w3num * pinv_svd(c3, prm.eps);  // d x |S~|
    Eigen::HouseholderQR<MatrixXcd> qr(lift);
    const MatrixXcd q3 = qr.householderQ() * MatrixXcd::Identity(d, ns);
    const MatrixXcd r3m = qr.matrixQR().topRows(ns).template triangularView<Eigen::Upper>();
    Tensor3 x = mode_apply(ynum, r3m, 1);
    x = mode_apply(x, r3m, 2);
    x = mode_apply(x, r3m, 3);
    Eigen::JacobiSVD<MatrixXcd> svd(unfold(x, 1), Eigen::ComputeThinU);
    const VectorXd sv = svd.singularValues();
    int r3 = rank_by_energy(sv, prm.tau3, prm.cap3);
    if (sv.size() == 0 || sv(0) <= 0.0) r3 = 0;
    const MatrixXcd ut = svd.matrixU().leftCols(r3);
    sm.u3 = q3 * ut;
    sm.m3 = tucker_project(x, ut, ut, ut).symmetrized();
    sm.svals3 = sv.head(r3);

    sm.prov.n_images = src.count();
    sm.prov.debias = debias;
    sm.prov.sigma2 = sigma2.value_or(0.0);
    sm.prov.path = "cur";
    untrack(stats, 16 * (d + d * nj + d * njt + ns * ns * ns + njt * kOuterChunk +
                         ns * ns * kOuterChunk));
    return sm;
}

std::vector<Eigen::Index> sample_freq_indices(const FreqGrid& grid, int count,
                                              std::uint64_t seed) {
    const auto& active = grid.active_indices();
    require(count >= 1 && count <= static_cast<int>(active.size()),
            "sample_freq_indices: count must be in [1, active pixel count]");
    const Eigen::Index dc = (static_cast<Eigen::Index>(grid.m() / 2)) * grid.m() + grid.m() / 2;
    std::vector<Eigen::Index> out{dc};
    if (count == 1) return out;

    VectorXd weights = VectorXd::Zero(static_cast<Eigen::Index>(active.size()));
    for (std::size_t t = 0; t < active.size(); ++t) {
        if (active[t] == dc) continue;  // always included, never re-drawn
        double fx, fy;
        grid.freq(active[t], fx, fy);
        weights(static_cast<Eigen::Index>(t)) = 1.0 / (fx * fx + fy * fy);
    }
    const auto picked = norm_weighted_sample(weights, count - 1, seed);
    for (Eigen::Index t : picked) out.push_back(active[static_cast<std::size_t>(t)]);
    return out;
}

MomentProbe probe_error(ImageSource& src, const SubspaceMoments& sm,
                        const std::vector<Eigen::Index>& j, Eigen::Index batch) {
    require(!j.empty(), "probe_error: empty probe set");
    const Eigen::Index nj = static_cast<Eigen::Index>(j.size());
    const FreqGrid grid(src.grid_size());
    const bool ctf = src.has_ctf();

    GroupSums gs;
    gs.h = src.ctf_grid_values();
    const Eigen::Index ngroups = gs.h.cols();
    gs.counts.assign(static_cast<std::size_t>(ngroups), 0.0);

    MatrixXcd num2 = MatrixXcd::Zero(nj, nj);
    Tensor3 num3(nj, nj, nj);
    VectorXcd sum1 = VectorXcd::Zero(grid.dim());

    src.reset();
    MatrixXcd block;
    std::vector<int> gid;
    while (Eigen::Index n = src.read(block, gid, batch)) {
        for (Eigen::Index t = 0; t < n; ++t) {
            if (ctf) block.col(t).array() *= gs.h.col(gid[static_cast<std::size_t>(t)]).array();
            gs.counts[static_cast<std::size_t>(gid[static_cast<std::size_t>(t)])] += 1.0;
        }
        sum1 += block.rowwise().sum();
        MatrixXcd xj(nj, n);
        for (Eigen::Index t = 0; t < nj; ++t) xj.row(t) = block.row(j[static_cast<std::size_t>(t)]);
        num2.noalias() += xj * xj.adjoint();
        for (Eigen::Index im = 0; im < n; ++im)
            for (Eigen::Index a = 0; a < nj; ++a)
                for (Eigen::Index b = 0; b < nj; ++b) {
                    const cplx ab = xj(a, im) * xj(b, im);
                    for (Eigen::Index c = 0; c < nj; ++c) num3(a, b, c) += ab * xj(c, im);
                }
    }

    const double n_total = static_cast<double>(src.count());
    VectorXd den1 = VectorXd::Zero(grid.dim());
    for (Eigen::Index g = 0; g < ngroups; ++g)
        den1 += gs.counts[static_cast<std::size_t>(g)] * gs.h.col(g).cwiseAbs2();
    VectorXcd m1full = sum1;
    for (Eigen::Index i = 0; i < grid.dim(); ++i)
        m1full(i) = (den1(i) < 1e-12) ? cplx(0, 0) : m1full(i) / den1(i);

    if (sm.prov.debias) {
        const double s2 = sm.prov.sigma2;
        for (Eigen::Index t = 0; t < nj; ++t)
            num2(t, t) -= s2 * den1(j[static_cast<std::size_t>(t)]);
        subtract_b3_sampled(num3, j, grid, gs, m1full, s2);
    }

    // divide by the CTF denominators (all-ones handles the no-CTF case)
    MatrixXd den2 = MatrixXd::Zero(nj, nj);
    Tensor3 den3(nj, nj, nj);
    for (Eigen::Index g = 0; g < ngroups; ++g) {
        const double cnt = gs.counts[static_cast<std::size_t>(g)];
        VectorXd h2j(nj);
        for (Eigen::Index t = 0; t < nj; ++t)
            h2j(t) = gs.h(j[static_cast<std::size_t>(t)], g) * gs.h(j[static_cast<std::size_t>(t)], g);
        den2.noalias() += cnt * h2j * h2j.transpose();
        for (Eigen::Index a = 0; a < nj; ++a)
            for (Eigen::Index b = 0; b < nj; ++b)
                for (Eigen::Index c = 0; c < nj; ++c) den3(a, b, c) += cnt * h2j(a) * h2j(b) * h2j(c);
    }
    if (ctf) {
        masked_divide(num2, den2, 1e-12);
        for (Eigen::Index a = 0; a < nj; ++a)
            for (Eigen::Index b = 0; b < nj; ++b)
                for (Eigen::Index c = 0; c < nj; ++c) {
                    if (std::abs(den3(a, b, c)) < 1e-12)
                        num3(a, b, c) = cplx(0, 0);
                    else
                        num3(a, b, c) /= den3(a, b, c).real();
                }
    } else {
        num2 /= n_total;
        num3 *= cplx(1.0 / n_total, 0.0);
    }

    // lift the compressed moments onto the probe set
    MatrixXcd u2j(nj, sm.u2.cols()), u3j(nj, sm.u3.cols());
    for (Eigen::Index t = 0; t < nj; ++t) {
        u2j.row(t) = sm.u2.row(j[static_cast<std::size_t>(t)]);
        u3j.row(t) = sm.u3.row(j[static_cast<std::size_t>(t)]);
    }
    const MatrixXcd lift2 = u2j * sm.m2 * u2j.adjoint();
    Tensor3 lift3 = mode_apply(sm.m3, u3j, 1);
    lift3 = mode_apply(lift3, u3j, 2);
    lift3 = mode_apply(lift3, u3j, 3);

    MomentProbe probe;
    probe.j = j;
    probe.e2 = (num2 - lift2).norm() / std::max(num2.norm(), 1e-300);
    Tensor3 diff = num3;
    diff -= lift3;
    probe.e3 = diff.norm() / std::max(num3.norm(), 1e-300);
    return probe;
}

}  // namespace smom
