#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "smom/container.hpp"
#include "smom/eval.hpp"
#include "smom/pipeline.hpp"

namespace {

using namespace smom;

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    RunConfig cfg = RunConfig::from_file(path);
    for (const auto& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos)
            throw ArgumentError("--set expects key=value, got '" + ov + "'");
        cfg.set(ov.substr(0, eq), ov.substr(eq + 1));
    }
    cfg.validate();
    if (cfg.deterministic) cfg.threads = 1;
    return cfg;
}

int cmd_simulate(const RunConfig& cfg, const std::string& out, const std::string& truth_out) {
    cfg.require_keys({"m", "L", "P", "N"});
    auto vbasis = std::make_shared<VolumeBasis>(cfg.L, cfg.radius());
    auto dbasis = std::make_shared<DensityBasis>(cfg.P, cfg.reflection_invariant);
    VolumeCoeffs vc{vbasis, vbasis->lift_real(random_volume_params(*vbasis, cfg.seed))};
    DensityCoeffs dc = config_density(cfg, dbasis);
    const FreqGrid grid(cfg.m);

    SimConfig sim;
    sim.count = cfg.N;
    sim.seed = cfg.seed;
    sim.ctf_groups = cfg.ctf_groups;
    sim.defocus_min = cfg.defocus_min_um * 1e4;
    sim.defocus_max = cfg.defocus_max_um * 1e4;
    sim.voltage_kev = cfg.voltage_kev;
    sim.cs_mm = cfg.cs_mm;
    sim.amplitude_contrast = cfg.amplitude_contrast;
    sim.bfactor = cfg.bfactor;
    sim.pixel_size = cfg.pixel_size;
    sim.shift_sigma = cfg.shift_sigma;
    sim.sigma2 = cfg.sigma2;
    if (cfg.target_snr > 0) {
        sim.sigma2 = calibrate_noise_variance(vc, dc, grid, sim, cfg.target_snr);
        std::printf("calibrated sigma2 = %.8g for target snr %.4g\n", sim.sigma2,
                    cfg.target_snr);
    }

    SimSource src(vc, dc, grid, sim);
    save_stack_streaming(out, src);

    MatrixXd rotations(cfg.N, 3);
    for (Eigen::Index j = 0; j < cfg.N; ++j) {
        const EulerAngles r = src.rotation(j);
        rotations(j, 0) = r.alpha;
        rotations(j, 1) = r.beta;
        rotations(j, 2) = r.gamma;
    }
    ParamsFile truth;
    truth.m = cfg.m;
    truth.L = cfg.L;
    truth.P = cfg.P;
    truth.A = cfg.radius();
    truth.pixel_size = cfg.pixel_size;
    truth.reflection_invariant = cfg.reflection_invariant;
    truth.stage = 0;
    truth.params.vol = vbasis->project_real(vc.a);
    truth.params.dens = dbasis->project_real(dc.b);
    truth.a = vc.a;
    truth.b = dc.b;
    truth.rotations = rotations;
    save_params(truth_out, truth);

    std::printf("wrote %lld images (m=%d, sigma2=%.6g, ctf groups=%d) to %s\n",
                static_cast<long long>(cfg.N), cfg.m, sim.sigma2, cfg.ctf_groups, out.c_str());
    std::printf("wrote ground truth sidecar to %s\n", truth_out.c_str());
    return 0;
}

int cmd_sketch(const RunConfig& cfg, const std::string& stack_path, const std::string& out) {
    FileStackSource src(stack_path);
    std::printf("path: %s\n", src.has_ctf() ? "cur" : "gaussian");
    SubspaceMoments sm = sketch_dispatch(src, cfg);
    std::printf("ranks: r1=%lld r2=%lld r3=%lld\n", static_cast<long long>(sm.u1.cols()),
                static_cast<long long>(sm.u2.cols()), static_cast<long long>(sm.u3.cols()));
    if (sm.masked_entries > 0)
        std::printf("masked denominator entries: %lld\n",
                    static_cast<long long>(sm.masked_entries));
    const FreqGrid grid(src.grid_size());
    const int probe_n =
        std::min<int>(cfg.probe_count, static_cast<int>(grid.active_indices().size()));
    const auto probe_set = sample_freq_indices(grid, probe_n, mix_seed(cfg.seed, 35));
    const MomentProbe probe = probe_error(src, sm, probe_set);
    std::printf("probe (|J|=%d): E2=%.6g E3=%.6g\n", probe_n, probe.e2, probe.e3);
    save_moments(out, sm, src.grid_size());
    std::printf("wrote moments to %s\n", out.c_str());
    return 0;
}

int cmd_reconstruct(const RunConfig& cfg, const std::string& moments_path,
                    const std::string& out, const std::string& resume) {
    int m_grid = 0;
    const SubspaceMoments sm = load_moments(moments_path, &m_grid);
    std::string quad_log;
    ReconProblem prob = build_problem(sm, m_grid, cfg, &quad_log);
    std::fputs(quad_log.c_str(), stdout);

    SolveOptions opts;
    opts.optim.ftol = cfg.ftol;
    opts.optim.maxiter = cfg.maxiter;
    opts.init_seed = cfg.init_seed;

    int start_stage = 1;
    RealParams warm;
    bool have_warm = false;
    if (!resume.empty()) {
        const ParamsFile ckpt = load_params(resume);
        warm = ckpt.params;
        have_warm = true;
        start_stage = ckpt.stage + 1;
        std::printf("resuming after stage %d checkpoint\n", ckpt.stage);
    }

    std::vector<StageDiagnostics> all;
    RealParams cur = warm;
    try {
        for (int stage = start_stage; stage <= 3; ++stage) {
            SolveOptions so = opts;
            so.start_stage = stage;
            so.end_stage = stage;
            so.have_warm = have_warm;
            so.warm = cur;
            SolveResult r = solve_sequential(prob, so);
            cur = r.params;
            have_warm = true;
            all.push_back(r.stages.front());
            const auto& st = all.back();
            std::printf("stage %d: cost %.6e -> %.6e in %d iterations (%s, %.2f s)\n", stage,
                        st.entry_cost, st.exit_cost, st.iterations, st.status.c_str(),
                        st.seconds);
            ParamsFile ckpt;
            ckpt.m = m_grid;
            ckpt.L = cfg.L;
            ckpt.P = cfg.P;
            ckpt.A = cfg.radius();
            ckpt.pixel_size = cfg.pixel_size;
            ckpt.reflection_invariant = cfg.reflection_invariant;
            ckpt.stage = stage;
            ckpt.params = cur;
            ckpt.a = prob.vbasis->lift_real(cur.vol);
            ckpt.b = prob.dbasis->lift_real(cur.dens);
            ckpt.stages = all;
            save_params(stage == 3 ? out : (out + ".stage" + std::to_string(stage)), ckpt);
        }
    } catch (const OptimizerError& e) {
        std::fprintf(stderr, "optimizer failure: %s (last checkpoint retained)\n", e.what());
        return 4;
    }
    std::printf("wrote parameters to %s\n", out.c_str());
    return 0;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& params_path,
                 const std::string& truth_path, const std::string& out) {
    const ParamsFile est = load_params(params_path);
    const ParamsFile truth = load_params(truth_path);
    if (est.m != truth.m) throw ShapeError("evaluate: grid mismatch between params and truth");

    auto make_pair = [](const ParamsFile& pf) {
        auto vb = std::make_shared<VolumeBasis>(pf.L, pf.A);
        auto db = std::make_shared<DensityBasis>(pf.P, pf.reflection_invariant);
        return std::make_pair(VolumeCoeffs{vb, pf.a}, DensityCoeffs{db, pf.b});
    };
    auto [vc_est, dc_est] = make_pair(est);
    auto [vc_truth, dc_truth] = make_pair(truth);

    const int n = cfg.render_n > 0 ? cfg.render_n : est.m;
    const RealVolume v_est = render(vc_est, n, est.pixel_size);
    const RealVolume v_truth = render(vc_truth, n, truth.pixel_size);

    const AlignResult ar = align(v_est, v_truth, cfg.align_step_deg, cfg.align_refine);
    const FscCurve curve = fsc(ar.aligned, v_truth, cfg.fsc_cutoff);
    const DensityCoeffs dc_rot = rotate_density(dc_est, ar.rotation);
    const double derr = density_error(dc_rot, dc_truth);

    std::ofstream rep(out);
    if (!rep) throw IoError("evaluate: cannot open report file '" + out + "'");
    char line[256];
    std::snprintf(line, sizeof(line), "grid: n=%d voxel=%.6g\n", n, truth.pixel_size);
    rep << line;
    std::snprintf(line, sizeof(line),
                  "alignment: alpha=%.6f beta=%.6f gamma=%.6f reflected=%d correlation=%.6f\n",
                  ar.rotation.alpha, ar.rotation.beta, ar.rotation.gamma, ar.reflected ? 1 : 0,
                  ar.correlation);
    rep << line;
    std::snprintf(line, sizeof(line), "resolution: %.6g (cutoff %.4g)\n", curve.resolution,
                  curve.cutoff);
    rep << line;
    std::snprintf(line, sizeof(line), "density_rel_l2: %.6g\n", derr);
    rep << line;
    rep << "fsc:\n  shell_freq      re            abs\n";
    for (Eigen::Index s = 0; s < curve.values.size(); ++s) {
        std::snprintf(line, sizeof(line), "  %-12.6g  %-12.6g  %-12.6g\n", curve.shell_freq(s),
                      curve.values(s).real(), std::abs(curve.values(s)));
        rep << line;
    }
    rep.close();
    std::printf("resolution %.6g, density error %.6g, correlation %.6f -> %s\n",
                curve.resolution, derr, ar.correlation, out.c_str());
    return 0;
}

int cmd_quadrature_check(int order, int target, const std::string& save_path) {
    if (target < 0) target = order;
    const SO3Rule rule = so3_rule(order);
    const std::vector<double> per = certify_per_order(rule, target);
    std::printf("so3 rule order %d: %lld nodes\n", order, static_cast<long long>(rule.size()));
    std::printf("  p     max |error|\n");
    double worst = 0.0;
    for (int p = 0; p <= target; ++p) {
        std::printf("  %-4d  %.3e\n", p, per[static_cast<std::size_t>(p)]);
        worst = std::max(worst, per[static_cast<std::size_t>(p)]);
    }
    std::printf("worst deviation up to order %d: %.3e\n", target, worst);
    if (!save_path.empty()) {
        save_rule(save_path, rule);
        std::printf("wrote rule to %s\n", save_path.c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"subspace method-of-moments pipeline"};
    app.require_subcommand(1);

    std::string config_path, out, truth_out, stack_path, moments_path, params_path, truth_path,
        resume;
    std::vector<std::string> overrides;
    int order = 8, target = -1;
    std::string rule_out;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config_path, "run configuration file")->required();
        sub->add_option("--set", overrides, "override a config key (key=value)");
    };

    CLI::App* sim = app.add_subcommand("simulate", "generate a synthetic image stack");
    add_common(sim);
    sim->add_option("-o,--out", out, "output stack container")->required();
    sim->add_option("--truth", truth_out, "ground-truth sidecar path");

    CLI::App* sk = app.add_subcommand("sketch", "compress moments from a stack");
    add_common(sk);
    sk->add_option("-i,--stack", stack_path, "input stack container")->required();
    sk->add_option("-o,--out", out, "output moments container")->required();

    CLI::App* rc = app.add_subcommand("reconstruct", "sequential moment matching");
    add_common(rc);
    rc->add_option("-i,--moments", moments_path, "input moments container")->required();
    rc->add_option("-o,--out", out, "output parameter container")->required();
    rc->add_option("--resume", resume, "resume from a stage checkpoint");

    CLI::App* ev = app.add_subcommand("evaluate", "compare a reconstruction to ground truth");
    add_common(ev);
    ev->add_option("--params", params_path, "reconstructed parameter container")->required();
    ev->add_option("--truth", truth_path, "ground-truth sidecar")->required();
    ev->add_option("-o,--out", out, "report file")->required();

    CLI::App* qc = app.add_subcommand("quadrature-check", "certify an SO(3) rule");
    qc->add_option("--order", order, "rule construction order")->required();
    qc->add_option("--target", target, "certification order (default: rule order)");
    qc->add_option("--save", rule_out, "write the rule to a container");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(qc)) return cmd_quadrature_check(order, target, rule_out);
        const smom::RunConfig cfg = load_config(config_path, overrides);
        if (app.got_subcommand(sim)) {
            if (truth_out.empty()) truth_out = out + ".truth";
            return cmd_simulate(cfg, out, truth_out);
        }
        if (app.got_subcommand(sk)) return cmd_sketch(cfg, stack_path, out);
        if (app.got_subcommand(rc)) return cmd_reconstruct(cfg, moments_path, out, resume);
        if (app.got_subcommand(ev)) return cmd_evaluate(cfg, params_path, truth_path, out);
    } catch (const smom::SimulationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const smom::ArgumentError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const smom::OptimizerError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    } catch (const smom::ShapeError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 5;
    } catch (const smom::IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
