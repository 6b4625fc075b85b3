#pragma once

#include <memory>
#include <string>

#include "smom/config.hpp"
#include "smom/container.hpp"
#include "smom/recon.hpp"

namespace smom {

// Seeded ground-truth volume parameters with a decaying radial spectrum.
VectorXd random_volume_params(const VolumeBasis& vbasis, std::uint64_t seed);

// Ground-truth viewing density from the configured vMF mixture.
DensityCoeffs config_density(const RunConfig& cfg, std::shared_ptr<const DensityBasis> basis);

// Gaussian-sketch or CUR path depending on CTF presence; fills provenance.
SubspaceMoments sketch_dispatch(ImageSource& src, const RunConfig& cfg,
                                StreamStats* stats = nullptr);

struct ParamsFile {
    int m = 0;
    int L = 0;
    int P = 0;
    double A = 0.0;
    double pixel_size = 1.0;
    bool reflection_invariant = true;
    int stage = 0;
    RealParams params;
    VectorXcd a, b;          // lifted coefficients
    MatrixXd rotations;      // optional ground-truth rotations (N x 3)
    std::vector<StageDiagnostics> stages;
};

void save_params(const std::string& path, const ParamsFile& pf);
ParamsFile load_params(const std::string& path);

// Builds the reconstruction problem for a moments container + config.
ReconProblem build_problem(const SubspaceMoments& sm, int m_grid, const RunConfig& cfg,
                           std::string* quad_log = nullptr);

}  // namespace smom
