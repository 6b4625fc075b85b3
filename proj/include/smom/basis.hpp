#pragma once

#include <memory>
#include <vector>

#include "smom/common.hpp"
#include "smom/specfun.hpp"

namespace smom {

// Radial truncation counts S(l): the largest s with rho_{l,s+1}/pi <= A.
std::vector<int> radial_truncation(int lmax, double radius, const SphBesselZeros& zeros);

// Band-limited spherical Bessel basis phi_{l,m,s} on the ball |xi| <= 1/2.
// Coefficients are packed by degree, then radial index, then order:
// index(l,s,m) = offset[l] + (s-1)(2l+1) + (m+l).
class VolumeBasis {
  public:
    VolumeBasis(int lmax, double radius);

    int lmax() const { return lmax_; }
    double radius() const { return radius_; }
    int radial_count(int l) const { return s_count_[static_cast<std::size_t>(l)]; }
    Eigen::Index size() const { return size_; }

    Eigen::Index index(int l, int s, int m) const {
        return offset_[static_cast<std::size_t>(l)] +
               static_cast<Eigen::Index>(s - 1) * (2 * l + 1) + (m + l);
    }
    double zero(int l, int s) const { return zeros_.zero(l, s); }
    double normalization(int l, int s) const {
        return norm_[static_cast<std::size_t>(l)][static_cast<std::size_t>(s - 1)];
    }

    // All basis values at a 3-D frequency point; zero outside the band limit.
    void eval_point(double fx, double fy, double fz, cplx* out) const;

    // Real parameterization enforcing a^*_{l,m,s} (-1)^m = a_{l,-m,s} (-1)^l.
    VectorXcd lift_real(const VectorXd& re) const;
    VectorXd project_real(const VectorXcd& a, double* max_residual = nullptr) const;
    // grad_re[t] = 2 Re( sum_j gbar_j conj(d a_j / d re_t) )
    VectorXd pushback_real(const VectorXcd& gbar) const;

  private:
    int lmax_;
    double radius_;
    SphBesselZeros zeros_;
    std::vector<int> s_count_;
    std::vector<Eigen::Index> offset_;
    std::vector<std::vector<double>> norm_;
    Eigen::Index size_ = 0;
};

// In-plane uniform rotational density basis D^p_{u,0}; optionally restricted
// to even degrees (reflection invariance). Index 0 is (p,u) = (0,0).
class DensityBasis {
  public:
    DensityBasis(int pmax, bool reflection_invariant);

    int pmax() const { return pmax_; }
    bool reflection_invariant() const { return reflection_invariant_; }
    const std::vector<int>& degrees() const { return degrees_; }
    Eigen::Index size() const { return size_; }
    Eigen::Index free_size() const { return size_ - 1; }  // b_{0,0} is fixed

    Eigen::Index index(int p, int u) const;

    // Row Psi[R]: entries D^p_{u,0}(R); independent of gamma.
    void eval_row(double alpha, double beta, cplx* out) const;

    // nu_b(alpha,beta) = sum b_{p,u} zeta_{p,u}; zeta = 2pi sqrt(4pi/(2p+1)) Y_p^u*
    void eval_nu_row(double alpha, double beta, cplx* out) const;

    // Real parameterization with b_{0,0} = 1 fixed and b_{p,u} = (-1)^u b^*_{p,-u}.
    VectorXcd lift_real(const VectorXd& re) const;
    VectorXd project_real(const VectorXcd& b, double* max_residual = nullptr) const;
    VectorXd pushback_real(const VectorXcd& gbar) const;

  private:
    int pmax_;
    bool reflection_invariant_;
    std::vector<int> degrees_;
    Eigen::Index size_ = 0;
};

struct VolumeCoeffs {
    std::shared_ptr<const VolumeBasis> basis;
    VectorXcd a;
};

struct DensityCoeffs {
    std::shared_ptr<const DensityBasis> basis;
    VectorXcd b;
};

}  // namespace smom
