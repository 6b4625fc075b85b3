#pragma once

#include <array>
#include <functional>
#include <vector>

#include "smom/common.hpp"
#include "smom/rng.hpp"

namespace smom {

// Dense order-3 complex tensor, row-major (last index fastest).
class Tensor3 {
  public:
    Tensor3() : dims_{0, 0, 0} {}
    Tensor3(Eigen::Index d1, Eigen::Index d2, Eigen::Index d3)
        : dims_{d1, d2, d3}, data_(static_cast<std::size_t>(d1 * d2 * d3), cplx(0, 0)) {
        require(d1 >= 0 && d2 >= 0 && d3 >= 0, "Tensor3: negative dimension");
    }

    Eigen::Index dim(int k) const { return dims_[static_cast<std::size_t>(k)]; }
    const std::array<Eigen::Index, 3>& dims() const { return dims_; }
    Eigen::Index size() const { return dims_[0] * dims_[1] * dims_[2]; }

    cplx& operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k) {
        return data_[static_cast<std::size_t>((i * dims_[1] + j) * dims_[2] + k)];
    }
    cplx operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k) const {
        return data_[static_cast<std::size_t>((i * dims_[1] + j) * dims_[2] + k)];
    }

    cplx* data() { return data_.data(); }
    const cplx* data() const { return data_.data(); }

    double norm() const;
    void setZero() { std::fill(data_.begin(), data_.end(), cplx(0, 0)); }

    Tensor3& operator+=(const Tensor3& other);
    Tensor3& operator-=(const Tensor3& other);
    Tensor3& operator*=(cplx scale);

    // Averages over all six index permutations.
    Tensor3 symmetrized() const;
    double max_permutation_asymmetry() const;

  private:
    std::array<Eigen::Index, 3> dims_;
    std::vector<cplx> data_;
};

// Mode-k unfolding, k in {1,2,3}. The column index runs over the remaining
// modes with the first of them varying fastest.
MatrixXcd unfold(const Tensor3& t, int k);

// Inverse of unfold: rebuilds a tensor with mode k of size mat.rows().
Tensor3 refold(const MatrixXcd& mat, int k, std::array<Eigen::Index, 3> dims);

// (M x_k U)_{..j..} = sum_i M_{..i..} U(i, j); U must have dim(k) rows.
Tensor3 mode_contract(const Tensor3& t, const MatrixXcd& u, int k);

// Applies a matrix along mode k: out_{..i..} = sum_j A(i, j) M_{..j..};
// equal to mode_contract(t, A^T, k).
Tensor3 mode_apply(const Tensor3& t, const MatrixXcd& a, int k);

// core = M x_k conj(U) over all modes; the orthonormal-basis Tucker core.
Tensor3 tucker_project(const Tensor3& t, const MatrixXcd& u);
Tensor3 tucker_project(const Tensor3& t, const MatrixXcd& u1, const MatrixXcd& u2,
                       const MatrixXcd& u3);
// lift = core x_k U^T over all modes; inverse map on span(U)^{x3}.
Tensor3 tucker_lift(const Tensor3& core, const MatrixXcd& u);
Tensor3 tucker_lift(const Tensor3& core, const MatrixXcd& u1, const MatrixXcd& u2,
                    const MatrixXcd& u3);

struct SketchConfig {
    int sample_size = 250;
    std::uint64_t seed = 0;
    double threshold = 1e-8;
    int rank_cap = -1;  // <0: uncapped

    void validate() const {
        require(sample_size >= 1, "SketchConfig: sample_size must be >= 1");
        require(threshold > 0.0, "SketchConfig: threshold must be positive");
    }
};

struct TuckerFactor {
    MatrixXcd basis;    // d x r, orthonormal columns
    MatrixXcd core;     // r x r
    VectorXd svals;     // singular values of the trimmed factor
    bool rank_zero = false;

    Eigen::Index rank() const { return basis.cols(); }
    MatrixXcd lift() const { return basis * core * basis.adjoint(); }
};

struct RangeResult {
    MatrixXcd basis;  // d x r
    VectorXd svals;   // all s singular values of the sketch, descending
    int rank = 0;
    bool rank_zero = false;
};

// Smallest r whose squared-singular-value energy exceeds 1 - tau.
int rank_by_energy(const VectorXd& svals, double tau, int cap = -1);

// Orthonormal range basis from an already-computed sketch Y = A*S.
RangeResult range_from_sketch(const MatrixXcd& y, const SketchConfig& cfg);

// Draws S (a_cols x s, complex Gaussian from cfg.seed), asks the black box
// for Y = A*S and extracts the range.
using SketchApply = std::function<MatrixXcd(const MatrixXcd& s)>;
RangeResult randomized_range(Eigen::Index a_cols, const SketchApply& apply,
                             const SketchConfig& cfg);

// (G1 x) ⊙ (G2 y): action of the face-splitting product G1 • G2 on x ⊗ y.
VectorXcd face_split_apply(const MatrixXcd& g1, const MatrixXcd& g2, const VectorXcd& x,
                           const VectorXcd& y);

// SVD pseudoinverse dropping singular values below eps * sigma_max.
MatrixXcd pinv_svd(const MatrixXcd& m, double eps);

// Symmetric-index CUR (S = J) of a d x d matrix available column-wise,
// trimmed to a rank-r factorization. `hermitian` asserts A = A^H, in which
// case the returned core is a real diagonal and basis*core*basis^H is
// Hermitian by construction.
using ColumnFetch = std::function<VectorXcd(Eigen::Index col)>;
TuckerFactor cur_matrix(Eigen::Index dim, const ColumnFetch& fetch,
                        const std::vector<Eigen::Index>& j_set, bool hermitian,
                        double svd_cutoff = 1e-5, double tau = 1e-10, int rank_cap = -1);

// Trim step shared with the streaming CUR estimators: QR of C, truncated
// factorization of R W^+ R^H, rank by tau-thresholding.
TuckerFactor cur_trim(const MatrixXcd& c, const MatrixXcd& w, bool hermitian,
                      double svd_cutoff, double tau, int rank_cap);

// Without-replacement sampling with per-draw probabilities proportional to
// the remaining weights (sequential renormalization).
std::vector<Eigen::Index> norm_weighted_sample(const VectorXd& weights, int count,
                                               std::uint64_t seed);

}  // namespace smom
