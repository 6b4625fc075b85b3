#include "smom/container.hpp"

#include <cstdio>
#include <cstring>

#include <zlib.h>

namespace smom {

namespace {

constexpr char kMagic[4] = {'S', 'M', 'O', 'M'};

void put_bytes(std::FILE* f, const void* p, std::size_t n) {
    if (std::fwrite(p, 1, n, f) != n) throw IoError("container: short write");
}
void get_bytes(std::FILE* f, void* p, std::size_t n) {
    if (std::fread(p, 1, n, f) != n) throw IoError("container: short read");
}

template <typename T>
void put_pod(std::FILE* f, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    put_bytes(f, &v, sizeof(T));
}
template <typename T>
T get_pod(std::FILE* f) {
    T v;
    get_bytes(f, &v, sizeof(T));
    return v;
}

void put_string(std::FILE* f, const std::string& s) {
    put_pod<std::uint32_t>(f, static_cast<std::uint32_t>(s.size()));
    put_bytes(f, s.data(), s.size());
}
std::string get_string(std::FILE* f) {
    const auto n = get_pod<std::uint32_t>(f);
    std::string s(n, '\0');
    get_bytes(f, s.data(), n);
    return s;
}

std::uint32_t crc_of(const void* data, std::size_t n) {
    return static_cast<std::uint32_t>(
        crc32(0L, static_cast<const Bytef*>(data), static_cast<uInt>(n)));
}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

std::size_t dtype_size(DType t) {
    switch (t) {
        case DType::kF32: return 4;
        case DType::kF64: return 8;
        case DType::kC64: return 8;
        case DType::kC128: return 16;
    }
    throw IoError("container: unknown dtype");
}

std::uint64_t Section::elements() const {
    std::uint64_t n = 1;
    for (std::uint64_t d : shape) n *= d;
    return n;
}

void Container::set_meta(const std::string& key, double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    meta_[key] = buf;
}

void Container::set_meta(const std::string& key, std::int64_t value) {
    meta_[key] = std::to_string(value);
}

std::string Container::meta_str(const std::string& key) const {
    const auto it = meta_.find(key);
    if (it == meta_.end()) throw IoError("container: missing metadata key '" + key + "'");
    return it->second;
}

double Container::meta_num(const std::string& key) const { return std::stod(meta_str(key)); }

std::int64_t Container::meta_int(const std::string& key) const {
    return std::stoll(meta_str(key));
}

namespace {

Section make_section(const std::string& name, DType dt, std::vector<std::uint64_t> shape,
                     const void* data, std::size_t bytes) {
    Section s;
    s.name = name;
    s.dtype = dt;
    s.shape = std::move(shape);
    s.payload.resize(bytes);
    std::memcpy(s.payload.data(), data, bytes);
    return s;
}

}  // namespace

void Container::add(const std::string& name, const MatrixXcd& m) {
    sections_.push_back(make_section(
        name, DType::kC128,
        {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())}, m.data(),
        static_cast<std::size_t>(m.size()) * sizeof(cplx)));
}

void Container::add(const std::string& name, const VectorXcd& v) {
    sections_.push_back(make_section(name, DType::kC128,
                                     {static_cast<std::uint64_t>(v.size())}, v.data(),
                                     static_cast<std::size_t>(v.size()) * sizeof(cplx)));
}

void Container::add(const std::string& name, const MatrixXd& m) {
    sections_.push_back(make_section(
        name, DType::kF64,
        {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())}, m.data(),
        static_cast<std::size_t>(m.size()) * sizeof(double)));
}

void Container::add(const std::string& name, const VectorXd& v) {
    sections_.push_back(make_section(name, DType::kF64,
                                     {static_cast<std::uint64_t>(v.size())}, v.data(),
                                     static_cast<std::size_t>(v.size()) * sizeof(double)));
}

void Container::add_c64(const std::string& name, const MatrixXcd& m) {
    std::vector<std::complex<float>> buf(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.size(); ++i)
        buf[static_cast<std::size_t>(i)] = static_cast<std::complex<float>>(m.data()[i]);
    sections_.push_back(make_section(
        name, DType::kC64,
        {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())}, buf.data(),
        buf.size() * sizeof(std::complex<float>)));
}

void Container::add_tensor(const std::string& name, const Tensor3& t) {
    sections_.push_back(make_section(name, DType::kC128,
                                     {static_cast<std::uint64_t>(t.dim(0)),
                                      static_cast<std::uint64_t>(t.dim(1)),
                                      static_cast<std::uint64_t>(t.dim(2))},
                                     t.data(), static_cast<std::size_t>(t.size()) * sizeof(cplx)));
}

bool Container::has(const std::string& name) const {
    for (const auto& s : sections_)
        if (s.name == name) return true;
    return false;
}

const Section& Container::section(const std::string& name) const {
    for (const auto& s : sections_)
        if (s.name == name) return s;
    throw IoError("container: missing section '" + name + "'");
}

MatrixXcd Container::cmatrix(const std::string& name) const {
    const Section& s = section(name);
    require(s.shape.size() == 2, "container: section '" + name + "' is not a matrix");
    MatrixXcd m(static_cast<Eigen::Index>(s.shape[0]), static_cast<Eigen::Index>(s.shape[1]));
    if (s.dtype == DType::kC128) {
        std::memcpy(m.data(), s.payload.data(), s.payload.size());
    } else if (s.dtype == DType::kC64) {
        const auto* p = reinterpret_cast<const std::complex<float>*>(s.payload.data());
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<cplx>(p[i]);
    } else {
        throw IoError("container: section '" + name + "' is not complex");
    }
    return m;
}

VectorXcd Container::cvector(const std::string& name) const {
    const Section& s = section(name);
    require(s.shape.size() == 1 && s.dtype == DType::kC128,
            "container: section '" + name + "' is not a complex vector");
    VectorXcd v(static_cast<Eigen::Index>(s.shape[0]));
    std::memcpy(v.data(), s.payload.data(), s.payload.size());
    return v;
}

MatrixXd Container::matrix(const std::string& name) const {
    const Section& s = section(name);
    require(s.shape.size() == 2 && s.dtype == DType::kF64,
            "container: section '" + name + "' is not a real matrix");
    MatrixXd m(static_cast<Eigen::Index>(s.shape[0]), static_cast<Eigen::Index>(s.shape[1]));
    std::memcpy(m.data(), s.payload.data(), s.payload.size());
    return m;
}

VectorXd Container::vector(const std::string& name) const {
    const Section& s = section(name);
    require(s.shape.size() == 1 && s.dtype == DType::kF64,
            "container: section '" + name + "' is not a real vector");
    VectorXd v(static_cast<Eigen::Index>(s.shape[0]));
    std::memcpy(v.data(), s.payload.data(), s.payload.size());
    return v;
}

Tensor3 Container::tensor(const std::string& name) const {
    const Section& s = section(name);
    require(s.shape.size() == 3 && s.dtype == DType::kC128,
            "container: section '" + name + "' is not a complex tensor");
    Tensor3 t(static_cast<Eigen::Index>(s.shape[0]), static_cast<Eigen::Index>(s.shape[1]),
              static_cast<Eigen::Index>(s.shape[2]));
    std::memcpy(t.data(), s.payload.data(), s.payload.size());
    return t;
}

void Container::write(const std::string& path) const {
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw IoError("container: cannot open '" + path + "' for writing");
    put_bytes(f.get(), kMagic, 4);
    put_pod<std::uint16_t>(f.get(), kVersion);
    put_pod<std::uint16_t>(f.get(), static_cast<std::uint16_t>(kind_));
    put_pod<std::uint32_t>(f.get(), static_cast<std::uint32_t>(meta_.size()));
    for (const auto& [k, v] : meta_) {
        put_string(f.get(), k);
        put_string(f.get(), v);
    }
    put_pod<std::uint32_t>(f.get(), static_cast<std::uint32_t>(sections_.size()));
    for (const auto& s : sections_) {
        put_string(f.get(), s.name);
        put_pod<std::uint8_t>(f.get(), static_cast<std::uint8_t>(s.dtype));
        put_pod<std::uint8_t>(f.get(), static_cast<std::uint8_t>(s.shape.size()));
        for (std::uint64_t d : s.shape) put_pod<std::uint64_t>(f.get(), d);
        put_pod<std::uint64_t>(f.get(), static_cast<std::uint64_t>(s.payload.size()));
        put_bytes(f.get(), s.payload.data(), s.payload.size());
        put_pod<std::uint32_t>(f.get(), crc_of(s.payload.data(), s.payload.size()));
    }
}

Container Container::read(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw IoError("container: cannot open '" + path + "'");
    char magic[4];
    get_bytes(f.get(), magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw IoError("container: bad magic");
    const auto version = get_pod<std::uint16_t>(f.get());
    if (version != kVersion)
        throw IoError("container: unsupported format version " + std::to_string(version));
    Container c(static_cast<ContainerKind>(get_pod<std::uint16_t>(f.get())));
    const auto nmeta = get_pod<std::uint32_t>(f.get());
    for (std::uint32_t i = 0; i < nmeta; ++i) {
        const std::string k = get_string(f.get());
        c.meta_[k] = get_string(f.get());
    }
    const auto nsec = get_pod<std::uint32_t>(f.get());
    for (std::uint32_t i = 0; i < nsec; ++i) {
        Section s;
        s.name = get_string(f.get());
        s.dtype = static_cast<DType>(get_pod<std::uint8_t>(f.get()));
        const auto ndim = get_pod<std::uint8_t>(f.get());
        s.shape.resize(ndim);
        for (auto& d : s.shape) d = get_pod<std::uint64_t>(f.get());
        const auto bytes = get_pod<std::uint64_t>(f.get());
        if (bytes != s.elements() * dtype_size(s.dtype))
            throw IoError("container: payload length inconsistent with shape in '" + s.name + "'");
        s.payload.resize(bytes);
        get_bytes(f.get(), s.payload.data(), bytes);
        const auto crc = get_pod<std::uint32_t>(f.get());
        if (crc != crc_of(s.payload.data(), s.payload.size()))
            throw IoError("container: checksum mismatch in section '" + s.name + "'");
        c.sections_.push_back(std::move(s));
    }
    return c;
}

// --- pipeline objects -------------------------------------------------------

namespace {

void add_ctf_meta(Container& c, const std::vector<CtfDescriptor>& table,
                  const std::vector<int>& index) {
    c.set_meta("ctf_groups", static_cast<std::int64_t>(table.size()));
    if (table.empty()) return;
    MatrixXd t(static_cast<Eigen::Index>(table.size()), 5);
    for (std::size_t g = 0; g < table.size(); ++g) {
        t(static_cast<Eigen::Index>(g), 0) = table[g].wavelength;
        t(static_cast<Eigen::Index>(g), 1) = table[g].defocus;
        t(static_cast<Eigen::Index>(g), 2) = table[g].cs;
        t(static_cast<Eigen::Index>(g), 3) = table[g].amplitude_contrast;
        t(static_cast<Eigen::Index>(g), 4) = table[g].bfactor;
    }
    c.add("ctf_table", t);
    VectorXd idx(static_cast<Eigen::Index>(index.size()));
    for (std::size_t j = 0; j < index.size(); ++j)
        idx(static_cast<Eigen::Index>(j)) = static_cast<double>(index[j]);
    c.add("ctf_index", idx);
}

std::vector<CtfDescriptor> ctf_table_from(const Container& c) {
    std::vector<CtfDescriptor> table;
    const auto groups = c.meta_int("ctf_groups");
    if (groups == 0) return table;
    const MatrixXd t = c.matrix("ctf_table");
    for (Eigen::Index g = 0; g < t.rows(); ++g) {
        CtfDescriptor d;
        d.wavelength = t(g, 0);
        d.defocus = t(g, 1);
        d.cs = t(g, 2);
        d.amplitude_contrast = t(g, 3);
        d.bfactor = t(g, 4);
        table.push_back(d);
    }
    return table;
}

}  // namespace

void save_stack(const std::string& path, const ImageStack& stack, const MatrixXd* rotations,
                bool single_precision) {
    Container c(ContainerKind::kImageStack);
    c.set_meta("m", static_cast<std::int64_t>(stack.m));
    c.set_meta("count", static_cast<std::int64_t>(stack.count()));
    c.set_meta("sigma2", stack.sigma2);
    c.set_meta("pixel_size", stack.pixel_size);
    if (single_precision)
        c.add_c64("images", stack.data);
    else
        c.add("images", stack.data);
    add_ctf_meta(c, stack.ctf_table, stack.ctf_index);
    if (rotations) c.add("rotations", *rotations);
    c.write(path);
}

void save_stack_streaming(const std::string& path, ImageSource& src, bool single_precision) {
    // manual layout so the image payload can be streamed block by block
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw IoError("container: cannot open '" + path + "' for writing");
    Container header(ContainerKind::kImageStack);
    header.set_meta("m", static_cast<std::int64_t>(src.grid_size()));
    header.set_meta("count", static_cast<std::int64_t>(src.count()));
    header.set_meta("sigma2", src.sigma2());
    header.set_meta("pixel_size", src.pixel_size());
    header.set_meta("ctf_groups", static_cast<std::int64_t>(src.ctf_table().size()));

    put_bytes(f.get(), kMagic, 4);
    put_pod<std::uint16_t>(f.get(), Container::kVersion);
    put_pod<std::uint16_t>(f.get(), static_cast<std::uint16_t>(ContainerKind::kImageStack));
    put_pod<std::uint32_t>(f.get(), static_cast<std::uint32_t>(header.meta().size()));
    for (const auto& [k, v] : header.meta()) {
        put_string(f.get(), k);
        put_string(f.get(), v);
    }
    const bool has_ctf = !src.ctf_table().empty();
    put_pod<std::uint32_t>(f.get(), has_ctf ? 3u : 1u);  // sections

    const Eigen::Index d = static_cast<Eigen::Index>(src.grid_size()) * src.grid_size();
    const Eigen::Index n = src.count();
    put_string(f.get(), "images");
    put_pod<std::uint8_t>(f.get(),
                          static_cast<std::uint8_t>(single_precision ? DType::kC64 : DType::kC128));
    put_pod<std::uint8_t>(f.get(), 2);
    put_pod<std::uint64_t>(f.get(), static_cast<std::uint64_t>(d));
    put_pod<std::uint64_t>(f.get(), static_cast<std::uint64_t>(n));
    const std::size_t esize = single_precision ? 8 : 16;
    put_pod<std::uint64_t>(f.get(), static_cast<std::uint64_t>(d) * n * esize);

    std::uint32_t crc = static_cast<std::uint32_t>(crc32(0L, Z_NULL, 0));
    src.reset();
    MatrixXcd block;
    std::vector<int> gid;
    std::vector<int> all_gid;
    std::vector<std::complex<float>> fbuf;
    while (Eigen::Index got = src.read(block, gid, 1024)) {
        all_gid.insert(all_gid.end(), gid.begin(), gid.begin() + got);
        if (single_precision) {
            fbuf.resize(static_cast<std::size_t>(block.size()));
            for (Eigen::Index i = 0; i < block.size(); ++i)
                fbuf[static_cast<std::size_t>(i)] =
                    static_cast<std::complex<float>>(block.data()[i]);
            crc = static_cast<std::uint32_t>(crc32(crc, reinterpret_cast<const Bytef*>(fbuf.data()),
                                                   static_cast<uInt>(fbuf.size() * 8)));
            put_bytes(f.get(), fbuf.data(), fbuf.size() * 8);
        } else {
            crc = static_cast<std::uint32_t>(
                crc32(crc, reinterpret_cast<const Bytef*>(block.data()),
                      static_cast<uInt>(static_cast<std::size_t>(block.size()) * 16)));
            put_bytes(f.get(), block.data(), static_cast<std::size_t>(block.size()) * 16);
        }
    }
    put_pod<std::uint32_t>(f.get(), crc);

    if (has_ctf) {
        // small sections written through the normal path
        Container tail(ContainerKind::kImageStack);
        add_ctf_meta(tail, src.ctf_table(), all_gid);
        const Section& t1 = tail.section("ctf_table");
        const Section& t2 = tail.section("ctf_index");
        for (const Section* s : {&t1, &t2}) {
            put_string(f.get(), s->name);
            put_pod<std::uint8_t>(f.get(), static_cast<std::uint8_t>(s->dtype));
            put_pod<std::uint8_t>(f.get(), static_cast<std::uint8_t>(s->shape.size()));
            for (std::uint64_t dd : s->shape) put_pod<std::uint64_t>(f.get(), dd);
            put_pod<std::uint64_t>(f.get(), static_cast<std::uint64_t>(s->payload.size()));
            put_bytes(f.get(), s->payload.data(), s->payload.size());
            put_pod<std::uint32_t>(f.get(), crc_of(s->payload.data(), s->payload.size()));
        }
    }
}

ImageStack load_stack(const std::string& path) {
    const Container c = Container::read(path);
    require(c.kind() == ContainerKind::kImageStack, "load_stack: wrong container kind");
    ImageStack stack;
    stack.m = static_cast<int>(c.meta_int("m"));
    stack.sigma2 = c.meta_num("sigma2");
    stack.pixel_size = c.meta_num("pixel_size");
    stack.data = c.cmatrix("images");
    stack.ctf_table = ctf_table_from(c);
    if (!stack.ctf_table.empty()) {
        const VectorXd idx = c.vector("ctf_index");
        stack.ctf_index.resize(static_cast<std::size_t>(idx.size()));
        for (Eigen::Index j = 0; j < idx.size(); ++j)
            stack.ctf_index[static_cast<std::size_t>(j)] = static_cast<int>(idx(j));
    }
    return stack;
}

FileStackSource::FileStackSource(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw IoError("container: cannot open '" + path + "'");
    file_ = f;
    try {
        char magic[4];
        get_bytes(f, magic, 4);
        if (std::memcmp(magic, kMagic, 4) != 0) throw IoError("container: bad magic");
        if (get_pod<std::uint16_t>(f) != Container::kVersion)
            throw IoError("container: unsupported format version");
        if (static_cast<ContainerKind>(get_pod<std::uint16_t>(f)) != ContainerKind::kImageStack)
            throw IoError("container: not an image stack");
        std::map<std::string, std::string> meta;
        const auto nmeta = get_pod<std::uint32_t>(f);
        for (std::uint32_t i = 0; i < nmeta; ++i) {
            const std::string k = get_string(f);
            meta[k] = get_string(f);
        }
        m_ = std::stoi(meta.at("m"));
        count_ = std::stoll(meta.at("count"));
        sigma2_ = std::stod(meta.at("sigma2"));
        pixel_size_ = std::stod(meta.at("pixel_size"));
        const auto nsec = get_pod<std::uint32_t>(f);
        require(nsec >= 1, "container: stack without sections");
        const std::string name = get_string(f);
        require(name == "images", "container: first stack section must be the images");
        single_ = (static_cast<DType>(get_pod<std::uint8_t>(f)) == DType::kC64);
        const auto ndim = get_pod<std::uint8_t>(f);
        require(ndim == 2, "container: images section must be 2-d");
        const auto rows = get_pod<std::uint64_t>(f);
        const auto cols = get_pod<std::uint64_t>(f);
        require(rows == static_cast<std::uint64_t>(m_) * m_ &&
                    cols == static_cast<std::uint64_t>(count_),
                "container: images shape mismatch");
        get_pod<std::uint64_t>(f);  // payload bytes
        data_offset_ = static_cast<std::uint64_t>(std::ftell(f));

        // the trailing small sections (CRC + CTF) follow the payload
        const std::size_t esize = single_ ? 8 : 16;
        std::fseek(f,
                   static_cast<long>(data_offset_ + rows * cols * esize), SEEK_SET);
        expected_crc_ = get_pod<std::uint32_t>(f);
        // remaining sections via a second full parse when CTF data exists
        if (std::stoll(meta.at("ctf_groups")) > 0) {
            const Container c = Container::read(path);
            ctf_table_ = ctf_table_from(c);
            const VectorXd idx = c.vector("ctf_index");
            ctf_index_.resize(static_cast<std::size_t>(idx.size()));
            for (Eigen::Index j = 0; j < idx.size(); ++j)
                ctf_index_[static_cast<std::size_t>(j)] = static_cast<int>(idx(j));
        }
        reset();
    } catch (...) {
        std::fclose(f);
        file_ = nullptr;
        throw;
    }
}

FileStackSource::~FileStackSource() {
    if (file_) std::fclose(static_cast<std::FILE*>(file_));
}

void FileStackSource::reset() {
    cursor_ = 0;
    running_crc_ = static_cast<std::uint32_t>(crc32(0L, Z_NULL, 0));
    std::fseek(static_cast<std::FILE*>(file_), static_cast<long>(data_offset_), SEEK_SET);
}

Eigen::Index FileStackSource::read(MatrixXcd& out, std::vector<int>& gid, Eigen::Index maxn) {
    std::FILE* f = static_cast<std::FILE*>(file_);
    const Eigen::Index n = std::min(maxn, count_ - cursor_);
    if (n <= 0) return 0;
    const Eigen::Index d = static_cast<Eigen::Index>(m_) * m_;
    out.resize(d, n);
    if (single_) {
        std::vector<std::complex<float>> buf(static_cast<std::size_t>(d * n));
        get_bytes(f, buf.data(), buf.size() * 8);
        running_crc_ = static_cast<std::uint32_t>(crc32(
            running_crc_, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size() * 8)));
        for (Eigen::Index i = 0; i < d * n; ++i)
            out.data()[i] = static_cast<cplx>(buf[static_cast<std::size_t>(i)]);
    } else {
        get_bytes(f, out.data(), static_cast<std::size_t>(d * n) * 16);
        running_crc_ = static_cast<std::uint32_t>(
            crc32(running_crc_, reinterpret_cast<const Bytef*>(out.data()),
                  static_cast<uInt>(static_cast<std::size_t>(d * n) * 16)));
    }
    gid.resize(static_cast<std::size_t>(n));
    for (Eigen::Index j = 0; j < n; ++j)
        gid[static_cast<std::size_t>(j)] =
            ctf_index_.empty() ? 0 : ctf_index_[static_cast<std::size_t>(cursor_ + j)];
    cursor_ += n;
    if (cursor_ == count_ && !crc_checked_) {
        if (running_crc_ != expected_crc_)
            throw IoError("container: checksum mismatch in section 'images'");
        crc_checked_ = true;
    }
    return n;
}

void save_moments(const std::string& path, const SubspaceMoments& sm, int m_grid) {
    Container c(ContainerKind::kMoments);
    c.set_meta("m", static_cast<std::int64_t>(m_grid));
    c.set_meta("seed", static_cast<std::int64_t>(sm.prov.seed));
    c.set_meta("tau2", sm.prov.tau2);
    c.set_meta("tau3", sm.prov.tau3);
    c.set_meta("sample_size", static_cast<std::int64_t>(sm.prov.sample_size));
    c.set_meta("cap2", static_cast<std::int64_t>(sm.prov.cap2));
    c.set_meta("cap3", static_cast<std::int64_t>(sm.prov.cap3));
    c.set_meta("n_images", static_cast<std::int64_t>(sm.prov.n_images));
    c.set_meta("debias", static_cast<std::int64_t>(sm.prov.debias ? 1 : 0));
    c.set_meta("sigma2", sm.prov.sigma2);
    c.set_meta("path", sm.prov.path);
    c.set_meta("masked_entries", static_cast<std::int64_t>(sm.masked_entries));
    c.add("u1", sm.u1);
    c.add("u2", sm.u2);
    c.add("u3", sm.u3);
    c.add("m1", sm.m1);
    c.add("m2", sm.m2);
    c.add_tensor("m3", sm.m3);
    c.add("svals2", sm.svals2);
    c.add("svals3", sm.svals3);
    c.write(path);
}

SubspaceMoments load_moments(const std::string& path, int* m_grid) {
    const Container c = Container::read(path);
    require(c.kind() == ContainerKind::kMoments, "load_moments: wrong container kind");
    SubspaceMoments sm;
    sm.u1 = c.cmatrix("u1");
    sm.u2 = c.cmatrix("u2");
    sm.u3 = c.cmatrix("u3");
    sm.m1 = c.cvector("m1");
    sm.m2 = c.cmatrix("m2");
    sm.m3 = c.tensor("m3");
    sm.svals2 = c.vector("svals2");
    sm.svals3 = c.vector("svals3");
    sm.prov.seed = static_cast<std::uint64_t>(c.meta_int("seed"));
    sm.prov.tau2 = c.meta_num("tau2");
    sm.prov.tau3 = c.meta_num("tau3");
    sm.prov.sample_size = static_cast<int>(c.meta_int("sample_size"));
    sm.prov.cap2 = static_cast<int>(c.meta_int("cap2"));
    sm.prov.cap3 = static_cast<int>(c.meta_int("cap3"));
    sm.prov.n_images = c.meta_int("n_images");
    sm.prov.debias = c.meta_int("debias") != 0;
    sm.prov.sigma2 = c.meta_num("sigma2");
    sm.prov.path = c.meta_str("path");
    sm.masked_entries = c.meta_int("masked_entries");
    if (m_grid) *m_grid = static_cast<int>(c.meta_int("m"));
    return sm;
}

void save_rule(const std::string& path, const SO3Rule& rule) {
    Container c(ContainerKind::kRule);
    MatrixXd nodes(static_cast<Eigen::Index>(rule.nodes.size()), 3);
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        nodes(static_cast<Eigen::Index>(i), 0) = rule.nodes[i].alpha;
        nodes(static_cast<Eigen::Index>(i), 1) = rule.nodes[i].beta;
        nodes(static_cast<Eigen::Index>(i), 2) = rule.nodes[i].gamma;
    }
    c.add("nodes", nodes);
    c.add("weights", rule.weights);
    c.set_meta("certified_order", static_cast<std::int64_t>(rule.certified_order));
    c.set_meta("measured_error", rule.measured_error);
    c.set_meta("inexact", static_cast<std::int64_t>(rule.inexact ? 1 : 0));
    c.write(path);
}

SO3Rule load_rule(const std::string& path) {
    const Container c = Container::read(path);
    require(c.kind() == ContainerKind::kRule, "load_rule: wrong container kind");
    SO3Rule rule;
    const MatrixXd nodes = c.matrix("nodes");
    rule.nodes.resize(static_cast<std::size_t>(nodes.rows()));
    for (Eigen::Index i = 0; i < nodes.rows(); ++i)
        rule.nodes[static_cast<std::size_t>(i)] =
            EulerAngles{nodes(i, 0), nodes(i, 1), nodes(i, 2)};
    rule.weights = c.vector("weights");
    rule.certified_order = static_cast<int>(c.meta_int("certified_order"));
    rule.measured_error = c.meta_num("measured_error");
    rule.inexact = c.meta_int("inexact") != 0;
    return rule;
}

void save_volume(const std::string& path, const std::vector<double>& data, int n,
                 double voxel_size) {
    Container c(ContainerKind::kVolume);
    c.set_meta("n", static_cast<std::int64_t>(n));
    c.set_meta("voxel_size", voxel_size);
    VectorXd v(static_cast<Eigen::Index>(data.size()));
    std::memcpy(v.data(), data.data(), data.size() * sizeof(double));
    c.add("volume", v);
    c.write(path);
}

}  // namespace smom
