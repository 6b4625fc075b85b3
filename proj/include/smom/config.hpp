#pragma once

#include <set>
#include <string>
#include <vector>

#include "smom/common.hpp"

namespace smom {

// Plain key = value run configuration; every pipeline stage reads the same
// schema and command-line flags override file values.
struct RunConfig {
    // grid and model
    int m = 32;
    int L = 3;
    int P = 2;
    double A = -1.0;  // <0: m/2
    double pixel_size = 1.0;
    bool reflection_invariant = true;

    // simulation
    std::int64_t N = 1000;
    double sigma2 = 0.0;
    double target_snr = -1.0;  // <0: use sigma2 directly
    std::uint64_t seed = 0;
    int ctf_groups = 0;
    double defocus_min_um = 1.0;
    double defocus_max_um = 3.0;
    double voltage_kev = 300.0;
    double cs_mm = 2.0;
    double amplitude_contrast = 0.1;
    double bfactor = 0.0;
    double shift_sigma = 0.0;
    double density_kappa = 3.0;
    int density_centers = 2;

    // sketching
    int sketch_s = 250;
    double tau2 = 1e-8;
    double tau3 = 1e-6;
    int rank_cap_r2 = 220;
    int rank_cap_r3 = 120;
    std::int64_t batch = 1024;
    bool debias = true;
    int cur_j = 400;
    int cur_s = 400;
    int cur_j1 = 120;
    int cur_j2 = 120;
    double cur_eps = 1e-5;
    int probe_count = 32;

    // reconstruction
    int quad_order_1 = -1;  // <0: L+P
    int quad_order_2 = -1;  // <0: L+P
    int quad_order_3 = -1;  // <0: 2L+P
    bool quad_exact = false;  // per-moment exact orders kL+P
    std::int64_t quad_max_nodes = 0;  // 0: unlimited
    int colloc_count = 322;
    double ftol = 1e-8;
    int maxiter = 1000;
    bool cache_single = false;
    std::uint64_t init_seed = 1;

    // evaluation
    double fsc_cutoff = 0.5;
    int render_n = -1;  // <0: m
    double align_step_deg = 5.0;
    int align_refine = 3;

    // runtime
    int threads = 1;
    bool deterministic = true;

    std::set<std::string> seen;  // keys explicitly provided

    double radius() const { return A < 0 ? m / 2.0 : A; }
    int order1() const { return quad_order_1 >= 0 ? quad_order_1 : L + P; }
    int order2() const { return quad_order_2 >= 0 ? quad_order_2 : (quad_exact ? 2 * L + P : L + P); }
    int order3() const {
        return quad_order_3 >= 0 ? quad_order_3 : (quad_exact ? 3 * L + P : 2 * L + P);
    }

    static RunConfig from_file(const std::string& path);
    void set(const std::string& key, const std::string& value);
    void require_keys(const std::vector<std::string>& keys) const;
    void validate() const;
};

}  // namespace smom
