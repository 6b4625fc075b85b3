#include "smom/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace smom {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ArgumentError("config: key '" + key + "' expects a boolean, got '" + v + "'");
}

}  // namespace

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open '" + path + "'");
    RunConfig cfg;
    if (const char* env = std::getenv("SMOM_THREADS")) cfg.threads = std::atoi(env);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ArgumentError("config: line " + std::to_string(lineno) +
                                " is not of the form key = value");
        cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    auto d = [&] { return std::stod(value); };
    auto i = [&] { return std::stoi(value); };
    auto i64 = [&] { return std::stoll(value); };
    auto u64 = [&] { return static_cast<std::uint64_t>(std::stoull(value)); };
    auto b = [&] { return parse_bool(key, value); };

    if (key == "m") m = i();
    else if (key == "L") L = i();
    else if (key == "P") P = i();
    else if (key == "A") A = d();
    else if (key == "pixel_size") pixel_size = d();
    else if (key == "reflection_invariant") reflection_invariant = b();
    else if (key == "N") N = i64();
    else if (key == "sigma2") sigma2 = d();
    else if (key == "target_snr") target_snr = d();
    else if (key == "seed") seed = u64();
    else if (key == "ctf_groups") ctf_groups = i();
    else if (key == "defocus_min_um") defocus_min_um = d();
    else if (key == "defocus_max_um") defocus_max_um = d();
    else if (key == "voltage_kev") voltage_kev = d();
    else if (key == "cs_mm") cs_mm = d();
    else if (key == "amplitude_contrast") amplitude_contrast = d();
    else if (key == "bfactor") bfactor = d();
    else if (key == "shift_sigma") shift_sigma = d();
    else if (key == "density_kappa") density_kappa = d();
    else if (key == "density_centers") density_centers = i();
    else if (key == "sketch_s") sketch_s = i();
    else if (key == "tau2") tau2 = d();
    else if (key == "tau3") tau3 = d();
    else if (key == "rank_cap_r2") rank_cap_r2 = i();
    else if (key == "rank_cap_r3") rank_cap_r3 = i();
    else if (key == "batch") batch = i64();
    else if (key == "debias") debias = b();
    else if (key == "cur_j") cur_j = i();
    else if (key == "cur_s") cur_s = i();
    else if (key == "cur_j1") cur_j1 = i();
    else if (key == "cur_j2") cur_j2 = i();
    else if (key == "cur_eps") cur_eps = d();
    else if (key == "probe_count") probe_count = i();
    else if (key == "quad_order_1") quad_order_1 = i();
    else if (key == "quad_order_2") quad_order_2 = i();
    else if (key == "quad_order_3") quad_order_3 = i();
    else if (key == "quad_exact") quad_exact = b();
    else if (key == "quad_max_nodes") quad_max_nodes = i64();
    else if (key == "colloc_count") colloc_count = i();
    else if (key == "ftol") ftol = d();
    else if (key == "maxiter") maxiter = i();
    else if (key == "cache_single") cache_single = b();
    else if (key == "init_seed") init_seed = u64();
    else if (key == "fsc_cutoff") fsc_cutoff = d();
    else if (key == "render_n") render_n = i();
    else if (key == "align_step_deg") align_step_deg = d();
    else if (key == "align_refine") align_refine = i();
    else if (key == "threads") threads = i();
    else if (key == "deterministic") deterministic = b();
    else throw ArgumentError("config: unknown key '" + key + "'");
    seen.insert(key);
}

void RunConfig::require_keys(const std::vector<std::string>& keys) const {
    for (const auto& k : keys)
        if (seen.count(k) == 0) throw ArgumentError("config: missing config key '" + k + "'");
}

void RunConfig::validate() const {
    require(m >= 2 && m % 2 == 0, "config: m must be even and >= 2");
    require(L >= 0 && L <= 62, "config: L out of range");
    require(P >= 0 && P <= 62, "config: P out of range");
    require(radius() > 0, "config: A must be positive");
    require(pixel_size > 0, "config: pixel_size must be positive");
    require(N >= 1, "config: N must be >= 1");
    require(sigma2 >= 0, "config: sigma2 must be nonnegative");
    require(ctf_groups >= 0, "config: ctf_groups must be nonnegative");
    require(sketch_s >= 1, "config: sketch_s must be >= 1");
    require(tau2 > 0 && tau3 > 0, "config: thresholds must be positive");
    require(rank_cap_r2 >= 1 && rank_cap_r3 >= 1, "config: rank caps must be >= 1");
    require(batch >= 1, "config: batch must be >= 1");
    require(cur_eps > 0, "config: cur_eps must be positive");
    require(colloc_count >= 1, "config: colloc_count must be >= 1");
    require(ftol > 0, "config: ftol must be positive");
    require(maxiter >= 1, "config: maxiter must be >= 1");
    require(threads >= 1, "config: threads must be >= 1");
    require(density_kappa > 0, "config: density_kappa must be positive");
    require(density_centers >= 1, "config: density_centers must be >= 1");
    require(fsc_cutoff > 0 && fsc_cutoff < 1, "config: fsc_cutoff must be in (0,1)");
}

}  // namespace smom
