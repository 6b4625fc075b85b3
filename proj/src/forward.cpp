#include "smom/forward.hpp"

#include <cmath>

#include <fftw3.h>

namespace smom {

FreqGrid::FreqGrid(int m) : m_(m) {
    require(m >= 2 && m % 2 == 0, "FreqGrid: even m >= 2 required");
    for (Eigen::Index idx = 0; idx < dim(); ++idx)
        if (active(idx)) active_.push_back(idx);
}

double ctf_eval(const CtfDescriptor& desc, double kappa) {
    require(kappa >= 0.0, "ctf_eval: kappa >= 0 required");
    const double k2 = kappa * kappa;
    const double chi = -kPi * desc.wavelength * desc.defocus * k2 +
                       0.5 * kPi * desc.cs * std::pow(desc.wavelength, 3) * k2 * k2 -
                       desc.amplitude_contrast;
    return std::sin(chi) * std::exp(-desc.bfactor * k2 / 4.0);
}

double electron_wavelength(double voltage_kev) {
    require(voltage_kev > 0.0, "electron_wavelength: positive voltage required");
    const double v = voltage_kev * 1e3;
    return 12.2639 / std::sqrt(v + 0.97845e-6 * v * v);
}

MatrixXd ImageSource::ctf_grid_values() const {
    const auto& table = ctf_table();
    const FreqGrid grid(grid_size());
    MatrixXd h(grid.dim(), std::max<std::size_t>(table.size(), 1));
    if (table.empty()) {
        h.setOnes();
        return h;
    }
    for (std::size_t g = 0; g < table.size(); ++g)
        for (Eigen::Index idx = 0; idx < grid.dim(); ++idx) {
            double fx, fy;
            grid.freq(idx, fx, fy);
            const double kappa = std::sqrt(fx * fx + fy * fy) / pixel_size();
            h(idx, static_cast<Eigen::Index>(g)) = ctf_eval(table[g], kappa);
        }
    return h;
}

Eigen::Index StackSource::read(MatrixXcd& out, std::vector<int>& gid, Eigen::Index maxn) {
    const Eigen::Index n = std::min(maxn, stack_->count() - cursor_);
    if (n <= 0) return 0;
    out = stack_->data.middleCols(cursor_, n);
    gid.resize(static_cast<std::size_t>(n));
    for (Eigen::Index j = 0; j < n; ++j)
        gid[static_cast<std::size_t>(j)] =
            stack_->ctf_index.empty() ? 0 : stack_->ctf_index[static_cast<std::size_t>(cursor_ + j)];
    cursor_ += n;
    return n;
}

DensityCoeffs vmf_mixture_density(const std::vector<Eigen::Vector3d>& centers,
                                  const VectorXd& weights, double concentration,
                                  std::shared_ptr<const DensityBasis> basis) {
    require(concentration > 0.0, "vmf_mixture_density: concentration must be positive");
    require(!centers.empty() && static_cast<Eigen::Index>(centers.size()) == weights.size(),
            "vmf_mixture_density: one weight per center required");
    double wsum = 0.0;
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
        require(weights(i) > 0.0, "vmf_mixture_density: weights must be positive");
        wsum += weights(i);
    }
    require(std::abs(wsum - 1.0) < 1e-8, "vmf_mixture_density: weights must sum to 1");

    const int p = basis->pmax();
    const int order = 2 * p + 16 + static_cast<int>(concentration);
    const SphereRule rule = sphere_rule(order);

    // rho(x) = sum_j w_j kappa exp(kappa (mu_j . x - 1)) / (2 pi (1 - e^{-2 kappa}))
    const double cnorm = concentration / (kTwoPi * (1.0 - std::exp(-2.0 * concentration)));
    VectorXcd b = VectorXcd::Zero(basis->size());
    std::vector<cplx> ybuf(static_cast<std::size_t>((p + 1) * (p + 1)));
    for (Eigen::Index i = 0; i < rule.size(); ++i) {
        const double st = std::sin(rule.theta(i));
        const Eigen::Vector3d x(st * std::cos(rule.phi(i)), st * std::sin(rule.phi(i)),
                                std::cos(rule.theta(i)));
        double rho = 0.0;
        for (std::size_t c = 0; c < centers.size(); ++c)
            rho += weights(static_cast<Eigen::Index>(c)) * cnorm *
                   std::exp(concentration * (centers[c].dot(x) - 1.0));
        sph_harm_upto(p, rule.theta(i), rule.phi(i), ybuf.data());
        Eigen::Index at = 0;
        for (int q : basis->degrees()) {
            const double scale = std::sqrt(kFourPi * (2.0 * q + 1.0));
            for (int u = -q; u <= q; ++u, ++at)
                b(at) += rule.weights(i) * rho * scale *
                         ybuf[static_cast<std::size_t>(q * (q + 1) + u)];
        }
    }
    require(std::abs(b(0)) > 1e-12, "vmf_mixture_density: degenerate normalization");
    b /= b(0).real();
    b(0) = cplx(1, 0);
    return DensityCoeffs{std::move(basis), std::move(b)};
}

double density_value(const DensityCoeffs& dc, double alpha, double beta) {
    std::vector<cplx> row(static_cast<std::size_t>(dc.basis->size()));
    dc.basis->eval_nu_row(alpha, beta, row.data());
    cplx v(0, 0);
    for (Eigen::Index i = 0; i < dc.b.size(); ++i) v += row[static_cast<std::size_t>(i)] * dc.b(i);
    return v.real();
}

MatrixXcd phi_matrix(const EulerAngles& rot, const FreqGrid& grid, const VolumeBasis& basis) {
    MatrixXcd phi = MatrixXcd::Zero(grid.dim(), basis.size());
    const Eigen::Matrix3d r = rot.matrix();
    std::vector<cplx> buf(static_cast<std::size_t>(basis.size()));
    for (Eigen::Index idx : grid.active_indices()) {
        double fx, fy;
        grid.freq(idx, fx, fy);
        const Eigen::Vector3d p = r * Eigen::Vector3d(fx, fy, 0.0);
        basis.eval_point(p.x(), p.y(), p.z(), buf.data());
        for (Eigen::Index j = 0; j < basis.size(); ++j) phi(idx, j) = buf[static_cast<std::size_t>(j)];
    }
    return phi;
}

Eigen::RowVectorXcd psi_row(const EulerAngles& rot, const DensityBasis& basis) {
    Eigen::RowVectorXcd row(basis.size());
    std::vector<cplx> buf(static_cast<std::size_t>(basis.size()));
    basis.eval_row(rot.alpha, rot.beta, buf.data());
    for (Eigen::Index i = 0; i < basis.size(); ++i) row(i) = buf[static_cast<std::size_t>(i)];
    return row;
}

VectorXcd clean_slice(const EulerAngles& rot, const FreqGrid& grid, const VolumeCoeffs& vc) {
    VectorXcd img = VectorXcd::Zero(grid.dim());
    const Eigen::Matrix3d r = rot.matrix();
    std::vector<cplx> buf(static_cast<std::size_t>(vc.basis->size()));
    for (Eigen::Index idx : grid.active_indices()) {
        double fx, fy;
        grid.freq(idx, fx, fy);
        const Eigen::Vector3d p = r * Eigen::Vector3d(fx, fy, 0.0);
        vc.basis->eval_point(p.x(), p.y(), p.z(), buf.data());
        cplx v(0, 0);
        for (Eigen::Index j = 0; j < vc.a.size(); ++j) v += buf[static_cast<std::size_t>(j)] * vc.a(j);
        img(idx) = v;
    }
    return img;
}

SimSource::SimSource(VolumeCoeffs vc, DensityCoeffs dc, const FreqGrid& grid,
                     const SimConfig& cfg)
    : vc_(std::move(vc)), dc_(std::move(dc)), grid_(grid), cfg_(cfg) {
    require(cfg_.count >= 1, "SimSource: N >= 1 required");
    noise_only_ = (vc_.a.size() == 0) || (vc_.a.norm() == 0.0);

    if (cfg_.ctf_groups > 0) {
        const double lambda = electron_wavelength(cfg_.voltage_kev);
        for (int g = 0; g < cfg_.ctf_groups; ++g) {
            CtfDescriptor d;
            d.wavelength = lambda;
            d.defocus = (cfg_.ctf_groups == 1)
                            ? cfg_.defocus_min
                            : cfg_.defocus_min + (cfg_.defocus_max - cfg_.defocus_min) * g /
                                                     (cfg_.ctf_groups - 1);
            d.cs = cfg_.cs_mm * 1e7;
            d.amplitude_contrast = cfg_.amplitude_contrast;
            d.bfactor = cfg_.bfactor;
            d.validate();
            ctf_table_.push_back(d);
        }
    }
    ctf_values_ = ctf_grid_values();

    // rejection envelope for the viewing-direction density
    const SphereRule probe = fibonacci_sphere(16384);
    double top = 0.0, bottom = 0.0;
    for (Eigen::Index i = 0; i < probe.size(); ++i) {
        const double v = density_value(dc_, probe.phi(i), probe.theta(i));
        top = std::max(top, v);
        bottom = std::min(bottom, v);
    }
    if (bottom < -1e-9 * std::max(top, 1.0))
        throw SimulationError("SimSource: viewing density is negative on the envelope grid");
    envelope_ = 1.2 * top;

    fft_buf_.resize(static_cast<std::size_t>(grid_.dim()));
    fft_plan_ = fftw_plan_dft_2d(grid_.m(), grid_.m(),
                                 reinterpret_cast<fftw_complex*>(fft_buf_.data()),
                                 reinterpret_cast<fftw_complex*>(fft_buf_.data()),
                                 FFTW_FORWARD, FFTW_ESTIMATE);
}

SimSource::~SimSource() {
    if (fft_plan_) fftw_destroy_plan(static_cast<fftw_plan>(fft_plan_));
}

EulerAngles SimSource::rotation(Eigen::Index j) const {
    Rng rng(mix_seed(cfg_.seed, static_cast<std::uint64_t>(j)));
    EulerAngles rot;
    for (int tries = 0; tries < 100000; ++tries) {
        const double alpha = kTwoPi * rng.uniform();
        const double cb = 1.0 - 2.0 * rng.uniform();
        const double beta = std::acos(std::clamp(cb, -1.0, 1.0));
        const double u = rng.uniform();
        if (u * envelope_ <= density_value(dc_, alpha, beta)) {
            rot.alpha = alpha;
            rot.beta = beta;
            rot.gamma = kTwoPi * rng.uniform();
            return rot;
        }
    }
    throw SimulationError("SimSource: rejection sampler failed to accept");
}

void SimSource::generate(Eigen::Index j, VectorXcd& img, int& group) const {
    Rng rng(mix_seed(cfg_.seed, static_cast<std::uint64_t>(j)));
    // rotation draws replay the exact sequence used by rotation(j)
    EulerAngles rot;
    bool accepted = false;
    for (int tries = 0; tries < 100000 && !accepted; ++tries) {
        const double alpha = kTwoPi * rng.uniform();
        const double cb = 1.0 - 2.0 * rng.uniform();
        const double beta = std::acos(std::clamp(cb, -1.0, 1.0));
        const double u = rng.uniform();
        if (u * envelope_ <= density_value(dc_, alpha, beta)) {
            rot.alpha = alpha;
            rot.beta = beta;
            rot.gamma = kTwoPi * rng.uniform();
            accepted = true;
        }
    }
    if (!accepted) throw SimulationError("SimSource: rejection sampler failed to accept");

    if (noise_only_) {
        img = VectorXcd::Zero(grid_.dim());
    } else {
        img = clean_slice(rot, grid_, vc_);
    }

    group = ctf_table_.empty() ? 0 : static_cast<int>(j % ctf_table_.size());
    if (!ctf_table_.empty()) img.array() *= ctf_values_.col(group).array();

    if (cfg_.shift_sigma > 0.0) {
        const double t1 = cfg_.shift_sigma * rng.normal();
        const double t2 = cfg_.shift_sigma * rng.normal();
        for (Eigen::Index idx : grid_.active_indices()) {
            double fx, fy;
            grid_.freq(idx, fx, fy);
            const double ph = kTwoPi * (fx * t1 + fy * t2);
            img(idx) *= cplx(std::cos(ph), std::sin(ph));
        }
    }

    if (cfg_.sigma2 > 0.0) {
        // white noise in real space, carried through the unitary DFT
        const double sd = std::sqrt(cfg_.sigma2);
        for (Eigen::Index i = 0; i < grid_.dim(); ++i)
            fft_buf_[static_cast<std::size_t>(i)] = cplx(sd * rng.normal(), 0.0);
        fftw_execute(static_cast<fftw_plan>(fft_plan_));
        const int m = grid_.m();
        const double scale = 1.0 / m;
        for (Eigen::Index idx = 0; idx < grid_.dim(); ++idx) {
            const int ix = static_cast<int>(idx % m);
            const int iy = static_cast<int>(idx / m);
            const int kx = (ix - m / 2 + m) % m;  // centered -> standard layout
            const int ky = (iy - m / 2 + m) % m;
            img(idx) += scale * fft_buf_[static_cast<std::size_t>(ky * m + kx)];
        }
    }
}

Eigen::Index SimSource::read(MatrixXcd& out, std::vector<int>& gid, Eigen::Index maxn) {
    const Eigen::Index n = std::min(maxn, cfg_.count - cursor_);
    if (n <= 0) return 0;
    out.resize(grid_.dim(), n);
    gid.resize(static_cast<std::size_t>(n));
    VectorXcd img;
    for (Eigen::Index j = 0; j < n; ++j) {
        int g = 0;
        generate(cursor_ + j, img, g);
        out.col(j) = img;
        gid[static_cast<std::size_t>(j)] = g;
    }
    cursor_ += n;
    return n;
}

ImageStack simulate(const VolumeCoeffs& vc, const DensityCoeffs& dc, const FreqGrid& grid,
                    const SimConfig& cfg, MatrixXd* rotations) {
    SimSource src(vc, dc, grid, cfg);
    ImageStack stack;
    stack.m = grid.m();
    stack.sigma2 = cfg.sigma2;
    stack.pixel_size = cfg.pixel_size;
    stack.ctf_table = src.ctf_table();
    stack.data.resize(grid.dim(), cfg.count);
    stack.ctf_index.resize(static_cast<std::size_t>(cfg.count));
    if (rotations) rotations->resize(cfg.count, 3);

    MatrixXcd block;
    std::vector<int> gid;
    Eigen::Index at = 0;
    while (Eigen::Index n = src.read(block, gid, 1024)) {
        stack.data.middleCols(at, n) = block;
        for (Eigen::Index j = 0; j < n; ++j) {
            stack.ctf_index[static_cast<std::size_t>(at + j)] = gid[static_cast<std::size_t>(j)];
            if (rotations) {
                const EulerAngles r = src.rotation(at + j);
                (*rotations)(at + j, 0) = r.alpha;
                (*rotations)(at + j, 1) = r.beta;
                (*rotations)(at + j, 2) = r.gamma;
            }
        }
        at += n;
    }
    if (stack.ctf_table.empty()) stack.ctf_index.clear();
    return stack;
}

double calibrate_noise_variance(const VolumeCoeffs& vc, const DensityCoeffs& dc,
                                const FreqGrid& grid, const SimConfig& cfg, double target_snr,
                                int samples) {
    require(target_snr > 0.0, "calibrate_noise_variance: positive SNR required");
    SimConfig clean = cfg;
    clean.sigma2 = 0.0;
    clean.count = samples;
    SimSource src(vc, dc, grid, clean);
    MatrixXcd block;
    std::vector<int> gid;
    double signal = 0.0;
    while (Eigen::Index n = src.read(block, gid, 256)) signal += block.squaredNorm();
    Rng rng(mix_seed(cfg.seed, 0x6e6f697365ull));
    double noise = 0.0;
    for (Eigen::Index i = 0; i < samples * grid.dim(); ++i) {
        const double x = rng.normal();
        noise += x * x;
    }
    return signal / (target_snr * noise);
}

}  // namespace smom
