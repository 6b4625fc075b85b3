#include "smom/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/SVD>

namespace smom {

double Tensor3::norm() const {
    double s = 0.0;
    for (const cplx& v : data_) s += std::norm(v);
    return std::sqrt(s);
}

Tensor3& Tensor3::operator+=(const Tensor3& other) {
    require_shape(dims_ == other.dims_, "Tensor3 +=: dimension mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Tensor3& Tensor3::operator-=(const Tensor3& other) {
    require_shape(dims_ == other.dims_, "Tensor3 -=: dimension mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

Tensor3& Tensor3::operator*=(cplx scale) {
    for (cplx& v : data_) v *= scale;
    return *this;
}

Tensor3 Tensor3::symmetrized() const {
    require_shape(dims_[0] == dims_[1] && dims_[1] == dims_[2],
                  "symmetrized: tensor must be cubical");
    const Eigen::Index n = dims_[0];
    Tensor3 out(n, n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index k = 0; k < n; ++k) {
                const cplx s = (*this)(i, j, k) + (*this)(i, k, j) + (*this)(j, i, k) +
                               (*this)(j, k, i) + (*this)(k, i, j) + (*this)(k, j, i);
                out(i, j, k) = s / 6.0;
            }
    return out;
}

double Tensor3::max_permutation_asymmetry() const {
    require_shape(dims_[0] == dims_[1] && dims_[1] == dims_[2],
                  "asymmetry: tensor must be cubical");
    const Eigen::Index n = dims_[0];
    double worst = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index k = 0; k < n; ++k) {
                const cplx v = (*this)(i, j, k);
                worst = std::max(worst, std::abs(v - (*this)(i, k, j)));
                worst = std::max(worst, std::abs(v - (*this)(j, i, k)));
                worst = std::max(worst, std::abs(v - (*this)(j, k, i)));
                worst = std::max(worst, std::abs(v - (*this)(k, i, j)));
                worst = std::max(worst, std::abs(v - (*this)(k, j, i)));
            }
    return worst;
}

namespace {

// Column index of the mode-k unfolding for 0-based multi-indices: the first
// non-k mode varies fastest.
inline Eigen::Index unfold_col(int k, Eigen::Index i1, Eigen::Index i2, Eigen::Index i3,
                               const std::array<Eigen::Index, 3>& d) {
    const Eigen::Index idx[3] = {i1, i2, i3};
    Eigen::Index col = 0;
    Eigen::Index stride = 1;
    for (int m = 0; m < 3; ++m) {
        if (m == k) continue;
        col += idx[m] * stride;
        stride *= d[static_cast<std::size_t>(m)];
    }
    return col;
}

}  // namespace

MatrixXcd unfold(const Tensor3& t, int k) {
    require(k >= 1 && k <= 3, "unfold: mode must be 1, 2 or 3");
    const int k0 = k - 1;
    const auto& d = t.dims();
    Eigen::Index cols = 1;
    for (int m = 0; m < 3; ++m)
        if (m != k0) cols *= d[static_cast<std::size_t>(m)];
    MatrixXcd out(d[static_cast<std::size_t>(k0)], cols);
    for (Eigen::Index i = 0; i < d[0]; ++i)
        for (Eigen::Index j = 0; j < d[1]; ++j)
            for (Eigen::Index l = 0; l < d[2]; ++l) {
                const Eigen::Index idx[3] = {i, j, l};
                out(idx[k0], unfold_col(k0, i, j, l, d)) = t(i, j, l);
            }
    return out;
}

Tensor3 refold(const MatrixXcd& mat, int k, std::array<Eigen::Index, 3> dims) {
    require(k >= 1 && k <= 3, "refold: mode must be 1, 2 or 3");
    const int k0 = k - 1;
    dims[static_cast<std::size_t>(k0)] = mat.rows();
    Eigen::Index cols = 1;
    for (int m = 0; m < 3; ++m)
        if (m != k0) cols *= dims[static_cast<std::size_t>(m)];
    require_shape(cols == mat.cols(), "refold: column count inconsistent with dims");
    Tensor3 out(dims[0], dims[1], dims[2]);
    for (Eigen::Index i = 0; i < dims[0]; ++i)
        for (Eigen::Index j = 0; j < dims[1]; ++j)
            for (Eigen::Index l = 0; l < dims[2]; ++l) {
                const Eigen::Index idx[3] = {i, j, l};
                out(i, j, l) = mat(idx[k0], unfold_col(k0, i, j, l, dims));
            }
    return out;
}

Tensor3 mode_contract(const Tensor3& t, const MatrixXcd& u, int k) {
    require(k >= 1 && k <= 3, "mode_contract: mode must be 1, 2 or 3");
    require_shape(u.rows() == t.dim(k - 1), "mode_contract: U row count must match dims[k]");
    const MatrixXcd contracted = u.transpose() * unfold(t, k);
    return refold(contracted, k, t.dims());
}

Tensor3 mode_apply(const Tensor3& t, const MatrixXcd& a, int k) {
    require(k >= 1 && k <= 3, "mode_apply: mode must be 1, 2 or 3");
    require_shape(a.cols() == t.dim(k - 1), "mode_apply: A column count must match dims[k]");
    const MatrixXcd applied = a * unfold(t, k);
    return refold(applied, k, t.dims());
}

Tensor3 tucker_project(const Tensor3& t, const MatrixXcd& u) {
    return tucker_project(t, u, u, u);
}

Tensor3 tucker_project(const Tensor3& t, const MatrixXcd& u1, const MatrixXcd& u2,
                       const MatrixXcd& u3) {
    Tensor3 out = mode_contract(t, u1.conjugate(), 1);
    out = mode_contract(out, u2.conjugate(), 2);
    out = mode_contract(out, u3.conjugate(), 3);
    return out;
}

Tensor3 tucker_lift(const Tensor3& core, const MatrixXcd& u) {
    return tucker_lift(core, u, u, u);
}

Tensor3 tucker_lift(const Tensor3& core, const MatrixXcd& u1, const MatrixXcd& u2,
                    const MatrixXcd& u3) {
    Tensor3 out = mode_contract(core, u1.transpose(), 1);
    out = mode_contract(out, u2.transpose(), 2);
    out = mode_contract(out, u3.transpose(), 3);
    return out;
}

int rank_by_energy(const VectorXd& svals, double tau, int cap) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < svals.size(); ++i) total += svals(i) * svals(i);
    if (total <= 0.0) return 0;
    double acc = 0.0;
    int r = static_cast<int>(svals.size());
    for (Eigen::Index i = 0; i < svals.size(); ++i) {
        acc += svals(i) * svals(i);
        if (acc / total > 1.0 - tau) {
            r = static_cast<int>(i) + 1;
            break;
        }
    }
    if (cap >= 0) r = std::min(r, cap);
    return r;
}

RangeResult range_from_sketch(const MatrixXcd& y, const SketchConfig& cfg) {
    cfg.validate();
    RangeResult res;
    Eigen::JacobiSVD<MatrixXcd> svd;
    if (y.rows() > 4 * y.cols()) {
        // tall sketches: QR first, then a small SVD
        Eigen::HouseholderQR<MatrixXcd> qr(y);
        const MatrixXcd q = qr.householderQ() * MatrixXcd::Identity(y.rows(), y.cols());
        const MatrixXcd r =
            qr.matrixQR().topRows(y.cols()).template triangularView<Eigen::Upper>();
        svd.compute(r, Eigen::ComputeThinU);
        res.svals = svd.singularValues();
        res.rank = rank_by_energy(res.svals, cfg.threshold, cfg.rank_cap);
        res.basis = q * svd.matrixU().leftCols(res.rank);
    } else {
        svd.compute(y, Eigen::ComputeThinU);
        res.svals = svd.singularValues();
        res.rank = rank_by_energy(res.svals, cfg.threshold, cfg.rank_cap);
        res.basis = svd.matrixU().leftCols(res.rank);
    }
    res.rank_zero = (res.rank == 0);
    return res;
}

RangeResult randomized_range(Eigen::Index a_cols, const SketchApply& apply,
                             const SketchConfig& cfg) {
    cfg.validate();
    const MatrixXcd s = gaussian_matrix(a_cols, cfg.sample_size, cfg.seed);
    return range_from_sketch(apply(s), cfg);
}

VectorXcd face_split_apply(const MatrixXcd& g1, const MatrixXcd& g2, const VectorXcd& x,
                           const VectorXcd& y) {
    require_shape(g1.rows() == g2.rows(), "face_split_apply: row counts differ");
    require_shape(g1.cols() == x.size() && g2.cols() == y.size(),
                  "face_split_apply: vector length mismatch");
    return (g1 * x).cwiseProduct(g2 * y);
}

MatrixXcd pinv_svd(const MatrixXcd& m, double eps) {
    require(eps > 0.0, "pinv_svd: eps must be positive");
    Eigen::JacobiSVD<MatrixXcd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const VectorXd& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) <= 0.0) return MatrixXcd::Zero(m.cols(), m.rows());
    const double cutoff = eps * sv(0);
    VectorXd inv = VectorXd::Zero(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) >= cutoff) inv(i) = 1.0 / sv(i);
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
}

TuckerFactor cur_matrix(Eigen::Index dim, const ColumnFetch& fetch,
                        const std::vector<Eigen::Index>& j_set, bool hermitian,
                        double svd_cutoff, double tau, int rank_cap) {
    require(!j_set.empty(), "cur_matrix: index set must be nonempty");
    const Eigen::Index nj = static_cast<Eigen::Index>(j_set.size());

    MatrixXcd c(dim, nj);
    for (Eigen::Index t = 0; t < nj; ++t) {
        require(j_set[static_cast<std::size_t>(t)] >= 0 &&
                    j_set[static_cast<std::size_t>(t)] < dim,
                "cur_matrix: index out of range");
        c.col(t) = fetch(j_set[static_cast<std::size_t>(t)]);
    }
    MatrixXcd w(nj, nj);
    for (Eigen::Index t = 0; t < nj; ++t) w.row(t) = c.row(j_set[static_cast<std::size_t>(t)]);
    return cur_trim(c, w, hermitian, svd_cutoff, tau, rank_cap);
}

TuckerFactor cur_trim(const MatrixXcd& c, const MatrixXcd& w, bool hermitian,
                      double svd_cutoff, double tau, int rank_cap) {
    require(svd_cutoff > 0.0, "cur_trim: svd_cutoff must be positive");
    const Eigen::Index dim = c.rows();
    const Eigen::Index nj = c.cols();
    require_shape(w.rows() == nj && w.cols() == nj, "cur_trim: W must be |J| x |J|");

    Eigen::HouseholderQR<MatrixXcd> qr(c);
    const MatrixXcd q = qr.householderQ() * MatrixXcd::Identity(dim, nj);
    const MatrixXcd r = qr.matrixQR().topRows(nj).template triangularView<Eigen::Upper>();

    const MatrixXcd b = r * pinv_svd(w, svd_cutoff) * r.adjoint();

    TuckerFactor out;
    if (hermitian) {
        const MatrixXcd bh = 0.5 * (b + b.adjoint());
        Eigen::SelfAdjointEigenSolver<MatrixXcd> eig(bh);
        // reorder by decreasing |eigenvalue|; signed values stay in the core
        std::vector<Eigen::Index> order(static_cast<std::size_t>(nj));
        std::iota(order.begin(), order.end(), 0);
        const VectorXd ev = eig.eigenvalues();
        std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index bb) {
            return std::abs(ev(a)) > std::abs(ev(bb));
        });
        VectorXd sv(nj);
        for (Eigen::Index t = 0; t < nj; ++t) sv(t) = std::abs(ev(order[static_cast<std::size_t>(t)]));
        int rank = rank_by_energy(sv, tau, rank_cap);
        if (sv.size() == 0 || sv(0) <= 0.0) rank = 0;
        out.rank_zero = (rank == 0);
        out.svals = sv.head(rank);
        MatrixXcd ut(nj, rank);
        VectorXd core(rank);
        for (int t = 0; t < rank; ++t) {
            ut.col(t) = eig.eigenvectors().col(order[static_cast<std::size_t>(t)]);
            core(t) = ev(order[static_cast<std::size_t>(t)]);
        }
        out.basis = q * ut;
        out.core = core.cast<cplx>().asDiagonal();
    } else {
        Eigen::JacobiSVD<MatrixXcd> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const VectorXd sv = svd.singularValues();
        int rank = rank_by_energy(sv, tau, rank_cap);
        if (sv.size() == 0 || sv(0) <= 0.0) rank = 0;
        out.rank_zero = (rank == 0);
        out.svals = sv.head(rank);
        out.basis = q * svd.matrixU().leftCols(rank);
        // core in the chosen left basis: U^H B
        out.core = svd.matrixU().leftCols(rank).adjoint() * b * svd.matrixU().leftCols(rank);
    }
    return out;
}

std::vector<Eigen::Index> norm_weighted_sample(const VectorXd& weights, int count,
                                               std::uint64_t seed) {
    Eigen::Index support = 0;
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
        require(weights(i) >= 0.0, "norm_weighted_sample: weights must be nonnegative");
        if (weights(i) > 0.0) ++support;
    }
    require(support >= 1, "norm_weighted_sample: need at least one positive weight");
    require(count >= 0 && count <= support,
            "norm_weighted_sample: count exceeds number of positive-weight indices");

    VectorXd w = weights;
    std::vector<Eigen::Index> picked;
    picked.reserve(static_cast<std::size_t>(count));
    Rng rng(seed);
    for (int t = 0; t < count; ++t) {
        const double total = w.sum();
        double u = rng.uniform() * total;
        Eigen::Index choice = -1;
        for (Eigen::Index i = 0; i < w.size(); ++i) {
            if (w(i) <= 0.0) continue;
            u -= w(i);
            choice = i;
            if (u <= 0.0) break;
        }
        picked.push_back(choice);
        w(choice) = 0.0;
    }
    return picked;
}

}  // namespace smom
