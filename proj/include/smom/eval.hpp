#pragma once

#include <vector>

#include "smom/basis.hpp"
#include "smom/common.hpp"

namespace smom {

struct RealVolume {
    int n = 0;
    std::vector<double> data;  // n^3, row-major (z fastest)
    double voxel_size = 1.0;

    double& at(int i, int j, int k) {
        return data[static_cast<std::size_t>((i * n + j) * n + k)];
    }
    double at(int i, int j, int k) const {
        return data[static_cast<std::size_t>((i * n + j) * n + k)];
    }
    double norm() const;
};

struct FscCurve {
    VectorXd shell_freq;  // cycles per physical unit
    VectorXcd values;     // per-shell correlation
    double cutoff = 0.5;
    double resolution = 0.0;  // physical units (first real-part crossing)
    std::vector<int> skipped_shells;
};

// Evaluates the Fourier volume on an n^3 grid (zero outside the band limit)
// and inverse-transforms; the imaginary residue must stay below
// imag_tol * ||V|| for realness-constrained coefficients.
RealVolume render(const VolumeCoeffs& vc, int n, double voxel_size = 1.0,
                  double* imag_residual = nullptr, double imag_tol = 1e-8);

// out(x) = v(R^{-1} x), optionally after point reflection; trilinear.
RealVolume rotate_volume(const RealVolume& v, const EulerAngles& rot, bool reflect);

struct AlignResult {
    EulerAngles rotation;
    bool reflected = false;
    double correlation = 0.0;
    RealVolume aligned;
};

// Exhaustive normalized-cross-correlation search over an SO(3) grid with the
// given angular step, plus optional local refinement, over both hands.
AlignResult align(const RealVolume& candidate, const RealVolume& reference,
                  double grid_step_deg = 5.0, int refine_levels = 3);

FscCurve fsc(const RealVolume& v1, const RealVolume& v2, double cutoff = 0.5);

// Relative L2 error of the viewing-direction densities on the sphere.
double density_error(const DensityCoeffs& est, const DensityCoeffs& truth);

// Coefficients of nu'(x) = nu(Q^{-1} x).
DensityCoeffs rotate_density(const DensityCoeffs& dc, const EulerAngles& q);

}  // namespace smom
