#include "smom/recon.hpp"

#include <chrono>
#include <cmath>
#include <thread>

#include "smom/forward.hpp"

namespace smom {

StageWeights StageWeights::from_targets(const SubspaceMoments& targets) {
    StageWeights w;
    const double n1 = targets.m1.squaredNorm();
    const double n2 = targets.m2.squaredNorm();
    const double n3 = targets.m3.norm() * targets.m3.norm();
    w.lambda1 = (n1 > 0.0) ? 1.0 / n1 : 1.0;
    w.lambda2 = (n2 > 0.0) ? 1.0 / n2 : 1.0;
    w.lambda3 = (n3 > 0.0) ? 1.0 / n3 : 1.0;
    return w;
}

MomentCache::MomentCache(const SO3Rule& rule, const MatrixXcd& u, const FreqGrid& grid,
                         const VolumeBasis& vbasis, const DensityBasis& dbasis,
                         bool single_precision, std::size_t max_bytes, int threads)
    : rule_(rule), single_(single_precision) {
    rank_ = u.cols();
    nbasis_ = vbasis.size();
    const Eigen::Index q = nodes();
    const std::size_t per = static_cast<std::size_t>(rank_) * static_cast<std::size_t>(nbasis_) *
                            (single_ ? sizeof(std::complex<float>) : sizeof(cplx));
    bytes_ = per * static_cast<std::size_t>(q) +
             static_cast<std::size_t>(q) * static_cast<std::size_t>(dbasis.size()) * sizeof(cplx);
    if (max_bytes > 0 && bytes_ > max_bytes)
        throw ArgumentError("precompute: cache requires " + std::to_string(bytes_) +
                            " bytes, exceeding the budget of " + std::to_string(max_bytes));

    if (single_)
        blocks_f_.resize(static_cast<std::size_t>(q));
    else
        blocks_d_.resize(static_cast<std::size_t>(q));
    psi_.resize(q, dbasis.size());

    const int nthreads = std::max(1, threads);
    auto work = [&](Eigen::Index begin, Eigen::Index end) {
        std::vector<cplx> psirow(static_cast<std::size_t>(dbasis.size()));
        for (Eigen::Index i = begin; i < end; ++i) {
            const EulerAngles& r = rule_.nodes[static_cast<std::size_t>(i)];
            const MatrixXcd phi = phi_matrix(r, grid, vbasis);
            const MatrixXcd block = u.adjoint() * phi;
            if (single_)
                blocks_f_[static_cast<std::size_t>(i)] = block.cast<std::complex<float>>();
            else
                blocks_d_[static_cast<std::size_t>(i)] = block;
            dbasis.eval_row(r.alpha, r.beta, psirow.data());
            for (Eigen::Index j = 0; j < dbasis.size(); ++j)
                psi_(i, j) = psirow[static_cast<std::size_t>(j)];
        }
    };
    if (nthreads == 1) {
        work(0, q);
    } else {
        std::vector<std::thread> pool;
        const Eigen::Index step = (q + nthreads - 1) / nthreads;
        for (int t = 0; t < nthreads; ++t) {
            const Eigen::Index b = std::min<Eigen::Index>(t * step, q);
            const Eigen::Index e = std::min<Eigen::Index>(b + step, q);
            if (b < e) pool.emplace_back(work, b, e);
        }
        for (auto& th : pool) th.join();
    }
}

void MomentCache::apply(Eigen::Index node, const VectorXcd& a, VectorXcd& v) const {
    if (single_) {
        const Eigen::VectorXcf af = a.cast<std::complex<float>>();
        v = (blocks_f_[static_cast<std::size_t>(node)] * af).cast<cplx>();
    } else {
        v.noalias() = blocks_d_[static_cast<std::size_t>(node)] * a;
    }
}

void MomentCache::apply_adjoint_accum(Eigen::Index node, const VectorXcd& x, cplx w,
                                      VectorXcd& out) const {
    if (single_) {
        const Eigen::VectorXcf xf = x.cast<std::complex<float>>();
        out += w * (blocks_f_[static_cast<std::size_t>(node)].adjoint() * xf).cast<cplx>();
    } else {
        out += w * (blocks_d_[static_cast<std::size_t>(node)].adjoint() * x);
    }
}

void ReconProblem::finalize_targets() {
    targets.m2 = 0.5 * (targets.m2 + targets.m2.adjoint()).eval();
    if (targets.m3.size() > 0) targets.m3 = targets.m3.symmetrized();
    weights = StageWeights::from_targets(targets);
}

namespace {

// model values and per-node slices shared between cost and gradient
struct MomentEval {
    MatrixXcd v;    // r x Q
    VectorXcd mu;   // Q
    VectorXd w;     // node weights
};

MomentEval eval_nodes(const MomentCache& cache, const VectorXcd& a, const VectorXcd& b) {
    MomentEval ev;
    const Eigen::Index q = cache.nodes();
    ev.v.resize(cache.rank(), q);
    ev.mu = cache.psi() * b;
    ev.w = cache.rule().weights;
    VectorXcd col(cache.rank());
    for (Eigen::Index i = 0; i < q; ++i) {
        cache.apply(i, a, col);
        ev.v.col(i) = col;
    }
    return ev;
}

VectorXcd model_m1(const MomentEval& ev) {
    return ev.v * ev.w.cast<cplx>().cwiseProduct(ev.mu);
}

MatrixXcd model_m2(const MomentEval& ev) {
    const VectorXcd scale = ev.w.cast<cplx>().cwiseProduct(ev.mu);
    return ev.v * scale.asDiagonal() * ev.v.adjoint();
}

Tensor3 model_m3(const MomentEval& ev) {
    const Eigen::Index r = ev.v.rows();
    const Eigen::Index q = ev.v.cols();
    const VectorXcd scale = ev.w.cast<cplx>().cwiseProduct(ev.mu);
    const MatrixXcd vs = ev.v * scale.asDiagonal();
    MatrixXcd m3u = MatrixXcd::Zero(r, r * r);
    const Eigen::Index chunk =
        std::max<Eigen::Index>(1, (16 << 20) / std::max<Eigen::Index>(1, 16 * r * r));
    MatrixXcd k(r * r, std::min(chunk, q));
    for (Eigen::Index c0 = 0; c0 < q; c0 += chunk) {
        const Eigen::Index cn = std::min(chunk, q - c0);
        for (Eigen::Index t = 0; t < cn; ++t) {
            const MatrixXcd outer = ev.v.col(c0 + t) * ev.v.col(c0 + t).transpose();
            k.col(t) = Eigen::Map<const VectorXcd>(outer.data(), r * r);
        }
        m3u.noalias() += vs.middleCols(c0, cn) * k.leftCols(cn).transpose();
    }
    return refold(m3u, 1, {r, r, r});
}

}  // namespace

void subspace_moments_model(const MomentCache* c1, const MomentCache* c2, const MomentCache* c3,
                            const VectorXcd& a, const VectorXcd& b, int stage, VectorXcd* m1,
                            MatrixXcd* m2, Tensor3* m3) {
    require(stage >= 1 && stage <= 3, "subspace_moments_model: stage in {1,2,3}");
    if (m1 && stage >= 1) {
        require(c1 != nullptr, "subspace_moments_model: missing first-moment cache");
        *m1 = model_m1(eval_nodes(*c1, a, b));
    }
    if (m2 && stage >= 2) {
        require(c2 != nullptr, "subspace_moments_model: missing second-moment cache");
        *m2 = model_m2(eval_nodes(*c2, a, b));
    }
    if (m3 && stage >= 3) {
        require(c3 != nullptr, "subspace_moments_model: missing third-moment cache");
        *m3 = model_m3(eval_nodes(*c3, a, b));
    }
}

double cost_grad(const ReconProblem& prob, const VectorXd& x, int stage, VectorXd* grad) {
    require(stage >= 1 && stage <= 3, "cost_grad: stage in {1,2,3}");
    const Eigen::Index nv = prob.nvol();
    const Eigen::Index nd = prob.ndens();
    require_shape(x.size() == nv + nd, "cost_grad: parameter size mismatch");
    const VectorXcd a = prob.vbasis->lift_real(x.head(nv));
    const VectorXcd b = prob.dbasis->lift_real(x.tail(nd));

    double cost = 0.0;
    VectorXcd gabar = VectorXcd::Zero(nv);
    VectorXcd hbar = VectorXcd::Zero(prob.dbasis->size());

    // first moment
    {
        const MomentCache& cache = *prob.c1;
        const MomentEval ev = eval_nodes(cache, a, b);
        const VectorXcd r1 = model_m1(ev) - prob.targets.m1;
        const double lam = prob.weights.lambda1;
        cost += lam * r1.squaredNorm();
        if (grad) {
            for (Eigen::Index i = 0; i < cache.nodes(); ++i) {
                cache.apply_adjoint_accum(i, r1, lam * ev.w(i) * std::conj(ev.mu(i)), gabar);
                hbar += lam * ev.w(i) * ev.v.col(i).dot(r1) * cache.psi().row(i).adjoint();
            }
        }
    }
    if (stage >= 2) {
        const MomentCache& cache = *prob.c2;
        const MomentEval ev = eval_nodes(cache, a, b);
        const MatrixXcd r2 = model_m2(ev) - prob.targets.m2;
        const double lam = prob.weights.lambda2;
        cost += lam * r2.squaredNorm();
        if (grad) {
            const MatrixXcd rv = r2 * ev.v;            // r x Q
            const MatrixXcd rhv = r2.adjoint() * ev.v; // r x Q
            for (Eigen::Index i = 0; i < cache.nodes(); ++i) {
                cache.apply_adjoint_accum(i, rv.col(i), lam * ev.w(i) * std::conj(ev.mu(i)),
                                          gabar);
                cache.apply_adjoint_accum(i, rhv.col(i), lam * ev.w(i) * ev.mu(i), gabar);
                hbar += lam * ev.w(i) * ev.v.col(i).dot(rv.col(i)) * cache.psi().row(i).adjoint();
            }
        }
    }
    if (stage >= 3) {
        const MomentCache& cache = *prob.c3;
        const MomentEval ev = eval_nodes(cache, a, b);
        Tensor3 r3t = model_m3(ev);
        r3t -= prob.targets.m3;
        const double lam = prob.weights.lambda3;
        cost += lam * r3t.norm() * r3t.norm();
        if (grad) {
            const Eigen::Index r = ev.v.rows();
            const Eigen::Index q = ev.v.cols();
            const MatrixXcd r3u = unfold(r3t, 1);  // r x r^2
            const Eigen::Index chunk =
                std::max<Eigen::Index>(1, (16 << 20) / std::max<Eigen::Index>(1, 16 * r * r));
            MatrixXcd k(r * r, std::min(chunk, q));
            for (Eigen::Index c0 = 0; c0 < q; c0 += chunk) {
                const Eigen::Index cn = std::min(chunk, q - c0);
                for (Eigen::Index t = 0; t < cn; ++t) {
                    const MatrixXcd outer = ev.v.col(c0 + t) * ev.v.col(c0 + t).transpose();
                    k.col(t) = Eigen::Map<const VectorXcd>(outer.data(), r * r);
                }
                const MatrixXcd y = r3u * k.leftCols(cn).conjugate();  // r x cn
                for (Eigen::Index t = 0; t < cn; ++t) {
                    const Eigen::Index i = c0 + t;
                    cache.apply_adjoint_accum(i, y.col(t),
                                              3.0 * lam * ev.w(i) * std::conj(ev.mu(i)), gabar);
                    const cplx s = ev.v.col(i).dot(y.col(t));
                    hbar += lam * ev.w(i) * s * cache.psi().row(i).adjoint();
                }
            }
        }
    }

    if (grad) {
        grad->resize(nv + nd);
        grad->head(nv) = prob.vbasis->pushback_real(gabar);
        grad->tail(nd) = prob.dbasis->pushback_real(hbar);
    }
    return cost;
}

void density_constraints(const DensityBasis& dbasis, const SphereRule& colloc, MatrixXd& a,
                         VectorXd& c) {
    require(colloc.size() >= 1, "density_constraints: empty collocation set");
    const Eigen::Index npts = colloc.size();
    const Eigen::Index nfree = dbasis.free_size();
    MatrixXcd zeta(npts, dbasis.size());
    std::vector<cplx> row(static_cast<std::size_t>(dbasis.size()));
    for (Eigen::Index i = 0; i < npts; ++i) {
        dbasis.eval_nu_row(colloc.phi(i), colloc.theta(i), row.data());
        for (Eigen::Index j = 0; j < dbasis.size(); ++j) zeta(i, j) = row[static_cast<std::size_t>(j)];
    }
    const VectorXcd b0 = dbasis.lift_real(VectorXd::Zero(nfree));
    c = (zeta * b0).real();
    a.resize(npts, nfree);
    for (Eigen::Index t = 0; t < nfree; ++t) {
        VectorXd e = VectorXd::Zero(nfree);
        e(t) = 1.0;
        a.col(t) = (zeta * (dbasis.lift_real(e) - b0)).real();
    }
}

VectorXd density_constraint_values(const DensityBasis& dbasis, const SphereRule& colloc,
                                   const VectorXd& dens) {
    MatrixXd a;
    VectorXd c;
    density_constraints(dbasis, colloc, a, c);
    return a * dens + c;
}

RealParams random_init(const ReconProblem& prob, std::uint64_t seed) {
    RealParams init;
    // volume scale tied to the first-moment magnitude
    const double sigma = prob.targets.m1.norm() / std::sqrt(static_cast<double>(prob.nvol()));
    Rng rng(mix_seed(seed, 11));
    init.vol.resize(prob.nvol());
    for (Eigen::Index i = 0; i < prob.nvol(); ++i)
        init.vol(i) = (sigma > 0 ? sigma : 1.0) * rng.normal();

    // density from a random von Mises-Fisher mixture
    std::vector<Eigen::Vector3d> centers;
    VectorXd weights(3);
    for (int j = 0; j < 3; ++j) {
        const double z = 1.0 - 2.0 * rng.uniform();
        const double phi = kTwoPi * rng.uniform();
        const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
        centers.emplace_back(s * std::cos(phi), s * std::sin(phi), z);
        weights(j) = 0.1 + rng.uniform();
    }
    weights /= weights.sum();
    const double kappa = 2.0 + 3.0 * rng.uniform();
    auto dc = vmf_mixture_density(centers, weights, kappa,
                                  std::shared_ptr<const DensityBasis>(prob.dbasis));
    init.dens = prob.dbasis->project_real(dc.b);
    return init;
}

SolveResult solve_sequential(const ReconProblem& prob, const SolveOptions& opts) {
    require(prob.c1 != nullptr, "solve_sequential: missing stage-1 cache");
    require(opts.start_stage >= 1 && opts.end_stage <= 3 && opts.start_stage <= opts.end_stage,
            "solve_sequential: bad stage range");

    RealParams cur = opts.have_warm ? opts.warm : random_init(prob, opts.init_seed);
    require_shape(cur.vol.size() == prob.nvol() && cur.dens.size() == prob.ndens(),
                  "solve_sequential: warm start size mismatch");

    SolveResult result;
    VectorXd x(prob.nparams());
    x << cur.vol, cur.dens;

    // constraints act on the density block only
    MatrixXd acon = MatrixXd::Zero(prob.con_a.rows(), prob.nparams());
    if (prob.con_a.rows() > 0) acon.rightCols(prob.ndens()) = prob.con_a;

    for (int stage = opts.start_stage; stage <= opts.end_stage; ++stage) {
        StageDiagnostics diag;
        diag.stage = stage;
        auto fn = [&prob, stage](const VectorXd& xx, VectorXd& gg) {
            return cost_grad(prob, xx, stage, &gg);
        };
        diag.entry_cost = cost_grad(prob, x, stage, nullptr);
        const auto t0 = std::chrono::steady_clock::now();
        OptimResult r = minimize_constrained(fn, x, acon, prob.con_c, opts.optim);
        const auto t1 = std::chrono::steady_clock::now();
        x = r.x;
        diag.exit_cost = r.cost;
        diag.iterations = r.iterations;
        diag.converged = r.converged;
        diag.status = r.status;
        diag.seconds = std::chrono::duration<double>(t1 - t0).count();
        diag.trace = std::move(r.cost_trace);
        result.stages.push_back(std::move(diag));
    }
    result.params.vol = x.head(prob.nvol());
    result.params.dens = x.tail(prob.ndens());
    return result;
}

}  // namespace smom
