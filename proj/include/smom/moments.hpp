#pragma once

#include <optional>
#include <string>
#include <vector>

#include "smom/forward.hpp"
#include "smom/tensor.hpp"

namespace smom {

// Lightweight instrumentation of the streaming estimators: images touched,
// estimated arithmetic, and peak bytes of estimator-owned workspace.
struct StreamStats {
    Eigen::Index images = 0;
    double flops = 0.0;
    std::int64_t workspace_bytes = 0;
    std::int64_t peak_workspace_bytes = 0;

    void track_alloc(std::int64_t bytes) {
        workspace_bytes += bytes;
        peak_workspace_bytes = std::max(peak_workspace_bytes, workspace_bytes);
    }
    void track_free(std::int64_t bytes) { workspace_bytes -= bytes; }
};

struct MomentsProvenance {
    std::uint64_t seed = 0;
    double tau2 = 1e-8;
    double tau3 = 1e-6;
    int sample_size = 250;
    int cap2 = 220;
    int cap3 = 120;
    Eigen::Index n_images = 0;
    bool debias = false;
    double sigma2 = 0.0;
    std::string path = "gaussian";  // or "cur"
};

struct SubspaceMoments {
    MatrixXcd u1, u2, u3;  // orthonormal columns
    VectorXcd m1;
    MatrixXcd m2;  // Hermitian
    Tensor3 m3;    // symmetric
    VectorXd svals2, svals3;
    Eigen::Index masked_entries = 0;  // CUR denominator starvation count
    MomentsProvenance prov;
};

struct SketchResult {
    MatrixXcd basis;
    VectorXd svals;
    bool rank_zero = false;
    Eigen::Index rank() const { return basis.cols(); }
};

// One-pass Gaussian sketch of the empirical second moment (identity CTFs).
SketchResult sketch_m2(ImageSource& src, const SketchConfig& cfg, StreamStats* stats = nullptr,
                       Eigen::Index batch = 1024);

// One-pass face-splitting sketch of the third-moment unfolding.
SketchResult sketch_m3(ImageSource& src, const SketchConfig& cfg, StreamStats* stats = nullptr,
                       Eigen::Index batch = 1024);

// Streaming compressed moments for identity-CTF stacks, with optional
// white-noise debiasing (sigma2 required when debias is set).
SubspaceMoments project_moments(ImageSource& src, const MatrixXcd& u1, const MatrixXcd& u2,
                                const MatrixXcd& u3, bool debias,
                                std::optional<double> sigma2 = std::nullopt,
                                StreamStats* stats = nullptr, Eigen::Index batch = 1024);

struct CurParams {
    std::vector<Eigen::Index> j2;   // second-moment column set J
    std::vector<Eigen::Index> s3;   // third-moment fiber set S~
    std::vector<Eigen::Index> j3a;  // J1 (J~ = J1 x J2)
    std::vector<Eigen::Index> j3b;  // J2
    double eps = 1e-5;              // pseudoinverse cutoff
    double tau2 = 1e-8;
    double tau3 = 1e-6;
    int cap2 = 220;
    int cap3 = 120;
    double denom_floor = 1e-12;  // CTF zero-crossing starvation threshold
};

// CUR-based compressed moments for CTF stacks (least-squares estimators with
// element-wise division performed only on sampled entries).
SubspaceMoments cur_moments(ImageSource& src, const CurParams& prm, bool debias,
                            std::optional<double> sigma2 = std::nullopt,
                            StreamStats* stats = nullptr, Eigen::Index batch = 1024);

// p(xi) ∝ |xi|^{-2} over active pixels, without replacement; DC is always
// the first index.
std::vector<Eigen::Index> sample_freq_indices(const FreqGrid& grid, int count,
                                              std::uint64_t seed);

struct MomentProbe {
    std::vector<Eigen::Index> j;
    double e2 = 0.0;
    double e3 = 0.0;
};

// Relative error of the compressed moments against explicitly materialized
// sub-moments on the index set J.
MomentProbe probe_error(ImageSource& src, const SubspaceMoments& sm,
                        const std::vector<Eigen::Index>& j, Eigen::Index batch = 1024);

}  // namespace smom
