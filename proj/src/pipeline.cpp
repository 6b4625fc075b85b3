#include "smom/pipeline.hpp"

#include <cmath>
#include <sstream>

namespace smom {

VectorXd random_volume_params(const VolumeBasis& vbasis, std::uint64_t seed) {
    Rng rng(mix_seed(seed, 21));
    VectorXd re(vbasis.size());
    const double rmax = kPi * vbasis.radius();
    for (int l = 0; l <= vbasis.lmax(); ++l)
        for (int s = 1; s <= vbasis.radial_count(l); ++s) {
            // smooth spectral decay in the radial frequency of each mode
            const double frac = vbasis.zero(l, s) / rmax;
            const double scale = std::exp(-2.0 * frac * frac);
            for (int mm = -l; mm <= l; ++mm)
                re(vbasis.index(l, s, mm)) = scale * rng.normal();
        }
    return re;
}

DensityCoeffs config_density(const RunConfig& cfg, std::shared_ptr<const DensityBasis> basis) {
    Rng rng(mix_seed(cfg.seed, 22));
    std::vector<Eigen::Vector3d> centers;
    VectorXd weights(cfg.density_centers);
    for (int j = 0; j < cfg.density_centers; ++j) {
        const double z = 1.0 - 2.0 * rng.uniform();
        const double phi = kTwoPi * rng.uniform();
        const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
        centers.emplace_back(s * std::cos(phi), s * std::sin(phi), z);
        weights(j) = 1.0;
    }
    weights /= weights.sum();
    return vmf_mixture_density(centers, weights, cfg.density_kappa, std::move(basis));
}

SubspaceMoments sketch_dispatch(ImageSource& src, const RunConfig& cfg, StreamStats* stats) {
    const FreqGrid grid(src.grid_size());
    const bool debias = cfg.debias && src.sigma2() > 0.0;
    SubspaceMoments sm;
    if (src.has_ctf()) {
        CurParams prm;
        prm.j2 = sample_freq_indices(grid, cfg.cur_j, mix_seed(cfg.seed, 31));
        prm.s3 = sample_freq_indices(grid, cfg.cur_s, mix_seed(cfg.seed, 32));
        prm.j3a = sample_freq_indices(grid, cfg.cur_j1, mix_seed(cfg.seed, 33));
        prm.j3b = sample_freq_indices(grid, cfg.cur_j2, mix_seed(cfg.seed, 34));
        prm.eps = cfg.cur_eps;
        prm.tau2 = cfg.tau2;
        prm.tau3 = cfg.tau3;
        prm.cap2 = cfg.rank_cap_r2;
        prm.cap3 = cfg.rank_cap_r3;
        sm = cur_moments(src, prm, debias, src.sigma2(), stats, cfg.batch);
    } else {
        SketchConfig c2{cfg.sketch_s, cfg.seed, cfg.tau2, cfg.rank_cap_r2};
        SketchConfig c3{cfg.sketch_s, cfg.seed, cfg.tau3, cfg.rank_cap_r3};
        const SketchResult s2 = sketch_m2(src, c2, stats, cfg.batch);
        const SketchResult s3 = sketch_m3(src, c3, stats, cfg.batch);
        // the first moment is compressed with the second-moment basis
        sm = project_moments(src, s2.basis, s2.basis, s3.basis, debias, src.sigma2(), stats,
                             cfg.batch);
        sm.svals2 = s2.svals;
        sm.svals3 = s3.svals;
    }
    sm.prov.seed = cfg.seed;
    sm.prov.tau2 = cfg.tau2;
    sm.prov.tau3 = cfg.tau3;
    sm.prov.sample_size = cfg.sketch_s;
    sm.prov.cap2 = cfg.rank_cap_r2;
    sm.prov.cap3 = cfg.rank_cap_r3;
    return sm;
}

void save_params(const std::string& path, const ParamsFile& pf) {
    Container c(ContainerKind::kParams);
    c.set_meta("m", static_cast<std::int64_t>(pf.m));
    c.set_meta("L", static_cast<std::int64_t>(pf.L));
    c.set_meta("P", static_cast<std::int64_t>(pf.P));
    c.set_meta("A", pf.A);
    c.set_meta("pixel_size", pf.pixel_size);
    c.set_meta("reflection_invariant", static_cast<std::int64_t>(pf.reflection_invariant ? 1 : 0));
    c.set_meta("stage", static_cast<std::int64_t>(pf.stage));
    c.add("vol", pf.params.vol);
    c.add("dens", pf.params.dens);
    c.add("a", pf.a);
    c.add("b", pf.b);
    if (pf.rotations.size() > 0) c.add("rotations", pf.rotations);
    c.set_meta("n_stages", static_cast<std::int64_t>(pf.stages.size()));
    for (std::size_t i = 0; i < pf.stages.size(); ++i) {
        const auto& st = pf.stages[i];
        const std::string tag = "stage" + std::to_string(st.stage);
        c.set_meta(tag + "_entry_cost", st.entry_cost);
        c.set_meta(tag + "_exit_cost", st.exit_cost);
        c.set_meta(tag + "_iterations", static_cast<std::int64_t>(st.iterations));
        c.set_meta(tag + "_converged", static_cast<std::int64_t>(st.converged ? 1 : 0));
        c.set_meta(tag + "_status", st.status);
        c.set_meta(tag + "_seconds", st.seconds);
        VectorXd trace(static_cast<Eigen::Index>(st.trace.size()));
        for (Eigen::Index t = 0; t < trace.size(); ++t)
            trace(t) = st.trace[static_cast<std::size_t>(t)];
        c.add(tag + "_trace", trace);
    }
    c.write(path);
}

ParamsFile load_params(const std::string& path) {
    const Container c = Container::read(path);
    require(c.kind() == ContainerKind::kParams, "load_params: wrong container kind");
    ParamsFile pf;
    pf.m = static_cast<int>(c.meta_int("m"));
    pf.L = static_cast<int>(c.meta_int("L"));
    pf.P = static_cast<int>(c.meta_int("P"));
    pf.A = c.meta_num("A");
    pf.pixel_size = c.meta_num("pixel_size");
    pf.reflection_invariant = c.meta_int("reflection_invariant") != 0;
    pf.stage = static_cast<int>(c.meta_int("stage"));
    pf.params.vol = c.vector("vol");
    pf.params.dens = c.vector("dens");
    pf.a = c.cvector("a");
    pf.b = c.cvector("b");
    if (c.has("rotations")) pf.rotations = c.matrix("rotations");
    return pf;
}

ReconProblem build_problem(const SubspaceMoments& sm, int m_grid, const RunConfig& cfg,
                           std::string* quad_log) {
    ReconProblem prob;
    prob.vbasis = std::make_shared<VolumeBasis>(cfg.L, cfg.radius());
    prob.dbasis = std::make_shared<DensityBasis>(cfg.P, cfg.reflection_invariant);
    const FreqGrid grid(m_grid);

    const Eigen::Index budget =
        (cfg.quad_max_nodes > 0) ? cfg.quad_max_nodes : std::numeric_limits<Eigen::Index>::max();
    const SO3Rule rule2 = so3_rule_with_budget(cfg.order2(), budget);
    const SO3Rule rule1 = (cfg.order1() == cfg.order2())
                              ? rule2
                              : so3_rule_with_budget(cfg.order1(), budget);
    const SO3Rule rule3 = so3_rule_with_budget(cfg.order3(), budget);

    std::ostringstream log;
    auto describe = [&](const char* tag, const SO3Rule& r, int requested) {
        log << tag << ": order " << r.certified_order << " (" << r.size() << " nodes)";
        if (r.inexact)
            log << " inexact for requested order " << requested << ", measured error "
                << r.measured_error;
        log << "\n";
    };
    describe("rule1", rule1, cfg.order1());
    describe("rule2", rule2, cfg.order2());
    describe("rule3", rule3, cfg.order3());
    if (quad_log) *quad_log = log.str();

    prob.c2 = std::make_shared<MomentCache>(rule2, sm.u2, grid, *prob.vbasis, *prob.dbasis,
                                            cfg.cache_single, 0, cfg.threads);
    const bool share = (cfg.order1() == cfg.order2()) && (sm.u1.rows() == sm.u2.rows()) &&
                       (sm.u1.cols() == sm.u2.cols()) && (sm.u1 == sm.u2);
    prob.c1 = share ? prob.c2
                    : std::make_shared<MomentCache>(rule1, sm.u1, grid, *prob.vbasis,
                                                    *prob.dbasis, cfg.cache_single, 0,
                                                    cfg.threads);
    prob.c3 = std::make_shared<MomentCache>(rule3, sm.u3, grid, *prob.vbasis, *prob.dbasis,
                                            cfg.cache_single, 0, cfg.threads);
    prob.targets = sm;
    prob.finalize_targets();

    const SphereRule colloc = fibonacci_sphere(cfg.colloc_count);
    density_constraints(*prob.dbasis, colloc, prob.con_a, prob.con_c);
    return prob;
}

}  // namespace smom
