#pragma once

#include <vector>

#include "smom/common.hpp"

namespace smom {

// ZYZ Euler angles: alpha in [0,2pi), beta in [0,pi], gamma in [0,2pi).
struct EulerAngles {
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;

    Eigen::Matrix3d matrix() const;  // Rz(alpha) * Ry(beta) * Rz(gamma)
};

// ZYZ Euler angles of a rotation matrix.
EulerAngles euler_from_matrix(const Eigen::Matrix3d& r);

// Spherical Bessel function j_l(x); stable near x = 0 via the series limit.
double sph_bessel(int l, double x);

// All of j_0..j_L at one argument.
void sph_bessel_upto(int lmax, double x, double* out);

// Table of zeros rho_{l,s}, l = 0..L, s = 1..S; strictly increasing in s and
// interlacing across degrees.
class SphBesselZeros {
  public:
    SphBesselZeros() = default;
    SphBesselZeros(int lmax, int smax);

    double zero(int l, int s) const {  // s is 1-based
        return table_[static_cast<std::size_t>(l)][static_cast<std::size_t>(s - 1)];
    }
    int lmax() const { return static_cast<int>(table_.size()) - 1; }
    int smax() const { return smax_; }

  private:
    std::vector<std::vector<double>> table_;
    int smax_ = 0;
};

// Orthonormal spherical harmonic Y_l^m(theta, phi) with the Condon-Shortley
// phase; Y_l^{-m} = (-1)^m conj(Y_l^m).
cplx sph_harmonic(int l, int m, double theta, double phi);

// All Y_l^m for l <= lmax at one direction, packed at index l*(l+1) + m.
void sph_harm_upto(int lmax, double theta, double phi, cplx* out);

// Wigner small-d matrix entry d^p_{u,v}(beta) via the three-term recurrence
// in the degree.
double wigner_d(int p, int u, int v, double beta);

// Explicit factorial-sum evaluation; practical for p <= 20, used as an
// independent cross-check of the recurrence.
double wigner_d_factorial(int p, int u, int v, double beta);

// D^p_{u,v}(R) = e^{-i u alpha} d^p_{u,v}(beta) e^{-i v gamma}.
cplx wigner_D(int p, int u, int v, const EulerAngles& r);

// Dense tables d^p(beta) for all p <= pmax; entry (u+p, v+p).
std::vector<MatrixXd> wigner_d_tables(int pmax, double beta);

}  // namespace smom
