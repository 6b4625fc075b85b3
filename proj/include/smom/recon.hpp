#pragma once

#include <memory>
#include <string>
#include <vector>

#include "smom/basis.hpp"
#include "smom/moments.hpp"
#include "smom/optim.hpp"
#include "smom/quadrature.hpp"

namespace smom {

struct RealParams {
    VectorXd vol;   // volume parameters (realness map applied on lift)
    VectorXd dens;  // density parameters, excluding the fixed b_{0,0}
};

struct StageWeights {
    double lambda1 = 0.0, lambda2 = 0.0, lambda3 = 0.0;
    // 1 / ||target_k||_F^2 per active moment
    static StageWeights from_targets(const SubspaceMoments& targets);
};

// Per-moment cache of projected basis blocks U^H Phi[R_i] over a quadrature
// rule; optionally stored in single precision.
class MomentCache {
  public:
    MomentCache(const SO3Rule& rule, const MatrixXcd& u, const FreqGrid& grid,
                const VolumeBasis& vbasis, const DensityBasis& dbasis, bool single_precision,
                std::size_t max_bytes = 0, int threads = 1);

    const SO3Rule& rule() const { return rule_; }
    Eigen::Index nodes() const { return static_cast<Eigen::Index>(rule_.nodes.size()); }
    Eigen::Index rank() const { return rank_; }
    Eigen::Index basis_size() const { return nbasis_; }
    bool single_precision() const { return single_; }
    std::size_t bytes() const { return bytes_; }
    const MatrixXcd& psi() const { return psi_; }

    void apply(Eigen::Index node, const VectorXcd& a, VectorXcd& v) const;
    void apply_adjoint_accum(Eigen::Index node, const VectorXcd& x, cplx w, VectorXcd& out) const;

  private:
    SO3Rule rule_;
    bool single_;
    Eigen::Index rank_ = 0, nbasis_ = 0;
    std::size_t bytes_ = 0;
    std::vector<MatrixXcd> blocks_d_;
    std::vector<Eigen::MatrixXcf> blocks_f_;
    MatrixXcd psi_;
};

struct ReconProblem {
    std::shared_ptr<const VolumeBasis> vbasis;
    std::shared_ptr<const DensityBasis> dbasis;
    std::shared_ptr<const MomentCache> c1, c2, c3;
    SubspaceMoments targets;
    StageWeights weights;
    MatrixXd con_a;  // collocation nonnegativity: con_a * dens + con_c >= 0
    VectorXd con_c;

    Eigen::Index nvol() const { return vbasis->size(); }
    Eigen::Index ndens() const { return dbasis->free_size(); }
    Eigen::Index nparams() const { return nvol() + ndens(); }

    void finalize_targets();  // Hermitianize m2, symmetrize m3, set weights
};

// Model moments under the cached quadrature rules; pointers may be null for
// moments beyond `stage`.
void subspace_moments_model(const MomentCache* c1, const MomentCache* c2, const MomentCache* c3,
                            const VectorXcd& a, const VectorXcd& b, int stage, VectorXcd* m1,
                            MatrixXcd* m2, Tensor3* m3);

// Stage-k objective: sum_{j<=k} lambda_j || m_j(x) - target_j ||_F^2 with the
// gradient taken through the realness re-parameterizations.
double cost_grad(const ReconProblem& prob, const VectorXd& x, int stage, VectorXd* grad);

// Affine pieces of the collocation nonnegativity constraints.
void density_constraints(const DensityBasis& dbasis, const SphereRule& colloc, MatrixXd& a,
                         VectorXd& c);
VectorXd density_constraint_values(const DensityBasis& dbasis, const SphereRule& colloc,
                                   const VectorXd& dens);

struct StageDiagnostics {
    int stage = 0;
    double entry_cost = 0.0;
    double exit_cost = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string status;
    double seconds = 0.0;
    std::vector<double> trace;
};

struct SolveResult {
    RealParams params;
    std::vector<StageDiagnostics> stages;
};

struct SolveOptions {
    OptimOptions optim;
    std::uint64_t init_seed = 0;
    int start_stage = 1;
    int end_stage = 3;
    bool have_warm = false;
    RealParams warm;
};

// Sequential moment matching: stage 1 from a random init, stages 2 and 3
// warm-started from the previous stage.
SolveResult solve_sequential(const ReconProblem& prob, const SolveOptions& opts);

// Random initialization used by stage 1 (exposed for tests).
RealParams random_init(const ReconProblem& prob, std::uint64_t seed);

}  // namespace smom
