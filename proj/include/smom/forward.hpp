#pragma once

#include <memory>
#include <vector>

#include "smom/basis.hpp"
#include "smom/common.hpp"
#include "smom/quadrature.hpp"
#include "smom/rng.hpp"

namespace smom {

// Equispaced Fourier grid xi = k/m, k = -m/2 .. m/2-1, with the active disc
// |xi| <= 1/2. Pixel index = iy*m + ix.
class FreqGrid {
  public:
    explicit FreqGrid(int m);

    int m() const { return m_; }
    Eigen::Index dim() const { return static_cast<Eigen::Index>(m_) * m_; }

    void freq(Eigen::Index idx, double& fx, double& fy) const {
        const int ix = static_cast<int>(idx % m_);
        const int iy = static_cast<int>(idx / m_);
        fx = static_cast<double>(ix - m_ / 2) / m_;
        fy = static_cast<double>(iy - m_ / 2) / m_;
    }
    bool active(Eigen::Index idx) const {
        double fx, fy;
        freq(idx, fx, fy);
        return fx * fx + fy * fy <= kBandLimit * kBandLimit + 1e-15;
    }
    // index of -k (mod m); the permutation FF^T of the unitary DFT
    Eigen::Index conj_index(Eigen::Index idx) const {
        const int ix = static_cast<int>(idx % m_);
        const int iy = static_cast<int>(idx / m_);
        auto neg = [this](int i) {
            const int k = i - m_ / 2;
            int nk = -k;
            if (nk == m_ / 2) nk = -m_ / 2;  // Nyquist wraps onto itself
            return nk + m_ / 2;
        };
        return static_cast<Eigen::Index>(neg(iy)) * m_ + neg(ix);
    }
    const std::vector<Eigen::Index>& active_indices() const { return active_; }

  private:
    int m_;
    std::vector<Eigen::Index> active_;
};

struct CtfDescriptor {
    double wavelength = 0.019687;  // 300 keV, in angstrom
    double defocus = 1e4;          // angstrom
    double cs = 2e7;               // spherical aberration, angstrom
    double amplitude_contrast = 0.1;
    double bfactor = 0.0;

    void validate() const {
        require(amplitude_contrast >= 0.0 && amplitude_contrast <= 1.0,
                "CtfDescriptor: amplitude contrast must be in [0,1]");
        require(bfactor >= 0.0, "CtfDescriptor: B-factor must be nonnegative");
    }
};

// sin(-pi lambda delta k^2 + (pi/2) Cs lambda^3 k^4 - alpha) exp(-B k^2 / 4)
double ctf_eval(const CtfDescriptor& desc, double kappa);

// Relativistic electron wavelength in angstrom from the acceleration voltage.
double electron_wavelength(double voltage_kev);

struct ImageStack {
    int m = 0;
    MatrixXcd data;  // d x N, images as columns
    std::vector<CtfDescriptor> ctf_table;  // per defocus group; empty = no CTF
    std::vector<int> ctf_index;            // per image group id
    double sigma2 = 0.0;
    double pixel_size = 1.0;  // angstrom per pixel

    Eigen::Index count() const { return data.cols(); }
    bool has_ctf() const { return !ctf_table.empty(); }
};

// One-pass image stream; estimators touch each image exactly once per pass.
class ImageSource {
  public:
    virtual ~ImageSource() = default;
    virtual Eigen::Index count() const = 0;
    virtual int grid_size() const = 0;
    virtual double sigma2() const = 0;
    virtual double pixel_size() const = 0;
    virtual const std::vector<CtfDescriptor>& ctf_table() const = 0;
    bool has_ctf() const { return !ctf_table().empty(); }
    virtual void reset() = 0;
    // fills up to maxn columns of out (resized d x n) and group ids; 0 = end
    virtual Eigen::Index read(MatrixXcd& out, std::vector<int>& gid, Eigen::Index maxn) = 0;

    // CTF values per group on the full grid (d x G)
    virtual MatrixXd ctf_grid_values() const;
};

class StackSource final : public ImageSource {
  public:
    explicit StackSource(const ImageStack& stack) : stack_(&stack) {}
    Eigen::Index count() const override { return stack_->count(); }
    int grid_size() const override { return stack_->m; }
    double sigma2() const override { return stack_->sigma2; }
    double pixel_size() const override { return stack_->pixel_size; }
    const std::vector<CtfDescriptor>& ctf_table() const override { return stack_->ctf_table; }
    void reset() override { cursor_ = 0; }
    Eigen::Index read(MatrixXcd& out, std::vector<int>& gid, Eigen::Index maxn) override;

  private:
    const ImageStack* stack_;
    Eigen::Index cursor_ = 0;
};

// Spherical-harmonic expansion of a von Mises-Fisher mixture, normalized so
// that b_{0,0} = 1; odd degrees drop out when the basis is
// reflection-invariant.
DensityCoeffs vmf_mixture_density(const std::vector<Eigen::Vector3d>& centers,
                                  const VectorXd& weights, double concentration,
                                  std::shared_ptr<const DensityBasis> basis);

// nu_b at one direction (real part of the expansion).
double density_value(const DensityCoeffs& dc, double alpha, double beta);

// Basis matrix Phi[R, Xi]: column j evaluates phi_j on the rotated central
// slice; rows outside the active disc are zero.
MatrixXcd phi_matrix(const EulerAngles& rot, const FreqGrid& grid, const VolumeBasis& basis);

// Row Psi[R] of density basis functions.
Eigen::RowVectorXcd psi_row(const EulerAngles& rot, const DensityBasis& basis);

// Central slice Phi[R, Xi] * a without materializing Phi.
VectorXcd clean_slice(const EulerAngles& rot, const FreqGrid& grid, const VolumeCoeffs& vc);

struct SimConfig {
    Eigen::Index count = 0;
    double sigma2 = 0.0;
    int ctf_groups = 0;  // 0 = no CTF
    double defocus_min = 1e4;
    double defocus_max = 3e4;
    double voltage_kev = 300.0;
    double cs_mm = 2.0;
    double amplitude_contrast = 0.1;
    double bfactor = 0.0;
    double pixel_size = 1.0;
    double shift_sigma = 0.0;  // pixels
    std::uint64_t seed = 0;
};

// Streaming simulator: deterministic per-image RNG streams derived from
// (seed, image index), so output does not depend on read block sizes.
class SimSource final : public ImageSource {
  public:
    SimSource(VolumeCoeffs vc, DensityCoeffs dc, const FreqGrid& grid, const SimConfig& cfg);
    ~SimSource() override;

    Eigen::Index count() const override { return cfg_.count; }
    int grid_size() const override { return grid_.m(); }
    double sigma2() const override { return cfg_.sigma2; }
    double pixel_size() const override { return cfg_.pixel_size; }
    const std::vector<CtfDescriptor>& ctf_table() const override { return ctf_table_; }
    void reset() override { cursor_ = 0; }
    Eigen::Index read(MatrixXcd& out, std::vector<int>& gid, Eigen::Index maxn) override;

    EulerAngles rotation(Eigen::Index j) const;  // ground-truth rotation of image j
    void generate(Eigen::Index j, VectorXcd& img, int& group) const;

  private:
    VolumeCoeffs vc_;
    DensityCoeffs dc_;
    FreqGrid grid_;
    SimConfig cfg_;
    std::vector<CtfDescriptor> ctf_table_;
    MatrixXd ctf_values_;  // d x G
    double envelope_ = 0.0;
    bool noise_only_ = false;
    Eigen::Index cursor_ = 0;
    void* fft_plan_ = nullptr;  // fftw_plan
    mutable std::vector<cplx> fft_buf_;
};

// Materializes a simulated stack plus its ground-truth rotations (N x 3).
ImageStack simulate(const VolumeCoeffs& vc, const DensityCoeffs& dc, const FreqGrid& grid,
                    const SimConfig& cfg, MatrixXd* rotations = nullptr);

// Noise variance reaching a target SNR, calibrated on `samples` clean
// projections against unit-variance noise draws.
double calibrate_noise_variance(const VolumeCoeffs& vc, const DensityCoeffs& dc,
                                const FreqGrid& grid, const SimConfig& cfg, double target_snr,
                                int samples = 1000);

}  // namespace smom
