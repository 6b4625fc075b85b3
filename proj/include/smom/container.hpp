#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "smom/common.hpp"
#include "smom/forward.hpp"
#include "smom/moments.hpp"
#include "smom/quadrature.hpp"

namespace smom {

enum class ContainerKind : std::uint16_t {
    kImageStack = 1,
    kMoments = 2,
    kRule = 3,
    kParams = 4,
    kVolume = 5,
};

enum class DType : std::uint8_t { kF32 = 0, kF64 = 1, kC64 = 2, kC128 = 3 };

std::size_t dtype_size(DType t);

struct Section {
    std::string name;
    DType dtype = DType::kF64;
    std::vector<std::uint64_t> shape;
    std::vector<char> payload;

    std::uint64_t elements() const;
};

// "SMOM" container: magic, version, kind tag, metadata block, then sections
// with little-endian shape headers and CRC32-checked payloads.
class Container {
  public:
    static constexpr std::uint16_t kVersion = 1;

    explicit Container(ContainerKind kind = ContainerKind::kParams) : kind_(kind) {}

    ContainerKind kind() const { return kind_; }
    std::map<std::string, std::string>& meta() { return meta_; }
    const std::map<std::string, std::string>& meta() const { return meta_; }

    void set_meta(const std::string& key, const std::string& value) { meta_[key] = value; }
    void set_meta(const std::string& key, double value);
    void set_meta(const std::string& key, std::int64_t value);
    std::string meta_str(const std::string& key) const;
    double meta_num(const std::string& key) const;
    std::int64_t meta_int(const std::string& key) const;
    bool has_meta(const std::string& key) const { return meta_.count(key) > 0; }

    void add(const std::string& name, const MatrixXcd& m);
    void add(const std::string& name, const VectorXcd& v);
    void add(const std::string& name, const MatrixXd& m);
    void add(const std::string& name, const VectorXd& v);
    void add_c64(const std::string& name, const MatrixXcd& m);
    void add_tensor(const std::string& name, const Tensor3& t);

    bool has(const std::string& name) const;
    const Section& section(const std::string& name) const;
    MatrixXcd cmatrix(const std::string& name) const;
    VectorXcd cvector(const std::string& name) const;
    MatrixXd matrix(const std::string& name) const;
    VectorXd vector(const std::string& name) const;
    Tensor3 tensor(const std::string& name) const;

    void write(const std::string& path) const;
    static Container read(const std::string& path);

  private:
    ContainerKind kind_;
    std::map<std::string, std::string> meta_;
    std::vector<Section> sections_;
};

// --- pipeline object (de)serialization -------------------------------------

void save_stack(const std::string& path, const ImageStack& stack,
                const MatrixXd* rotations = nullptr, bool single_precision = true);

// Streams a source to disk without materializing it.
void save_stack_streaming(const std::string& path, ImageSource& src,
                          bool single_precision = true);

ImageStack load_stack(const std::string& path);

// Streaming reader over a stack container.
class FileStackSource final : public ImageSource {
  public:
    explicit FileStackSource(const std::string& path);
    ~FileStackSource() override;

    Eigen::Index count() const override { return count_; }
    int grid_size() const override { return m_; }
    double sigma2() const override { return sigma2_; }
    double pixel_size() const override { return pixel_size_; }
    const std::vector<CtfDescriptor>& ctf_table() const override { return ctf_table_; }
    void reset() override;
    Eigen::Index read(MatrixXcd& out, std::vector<int>& gid, Eigen::Index maxn) override;

  private:
    void* file_ = nullptr;  // FILE*
    Eigen::Index count_ = 0, cursor_ = 0;
    int m_ = 0;
    double sigma2_ = 0.0, pixel_size_ = 1.0;
    bool single_ = true;
    std::uint64_t data_offset_ = 0;
    std::uint32_t expected_crc_ = 0, running_crc_ = 0;
    bool crc_checked_ = false;
    std::vector<CtfDescriptor> ctf_table_;
    std::vector<int> ctf_index_;
};

void save_moments(const std::string& path, const SubspaceMoments& sm, int m_grid);
SubspaceMoments load_moments(const std::string& path, int* m_grid = nullptr);

void save_rule(const std::string& path, const SO3Rule& rule);
SO3Rule load_rule(const std::string& path);

void save_volume(const std::string& path, const std::vector<double>& data, int n,
                 double voxel_size);

}  // namespace smom
