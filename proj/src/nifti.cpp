// nifti.cpp

#include "btseg/nifti.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace btseg::nifti {

namespace {

// NIfTI-1 datatypes we accept.
enum : int16_t {
    DT_UINT8 = 2,
    DT_INT16 = 4,
    DT_INT32 = 8,
    DT_FLOAT32 = 16,
    DT_FLOAT64 = 64,
    DT_INT8 = 256,
    DT_UINT16 = 512,
    DT_UINT32 = 768,
};

constexpr size_t kHeaderSize = 348;

template <typename T>
T swap_bytes(T v) {
    T out;
    auto* s = reinterpret_cast<unsigned char*>(&v);
    auto* d = reinterpret_cast<unsigned char*>(&out);
    for (size_t i = 0; i < sizeof(T); ++i) d[i] = s[sizeof(T) - 1 - i];
    return out;
}

template <typename T>
T read_field(const unsigned char* hdr, size_t offset, bool swapped) {
    T v;
    std::memcpy(&v, hdr + offset, sizeof(T));
    return swapped ? swap_bytes(v) : v;
}

std::vector<unsigned char> read_all(const std::string& path) {
    // gzread handles both gzip-compressed and plain files.
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("cannot open " + path);
    gzbuffer(f, 1 << 20);
    std::vector<unsigned char> out;
    unsigned char buf[1 << 16];
    int n;
    while ((n = gzread(f, buf, sizeof(buf))) > 0)
        out.insert(out.end(), buf, buf + n);
    const bool bad = n < 0;
    gzclose(f);
    if (bad) throw std::runtime_error("read error in " + path);
    return out;
}

size_t dtype_size(int16_t dt) {
    switch (dt) {
        case DT_UINT8:
        case DT_INT8: return 1;
        case DT_INT16:
        case DT_UINT16: return 2;
        case DT_INT32:
        case DT_UINT32:
        case DT_FLOAT32: return 4;
        case DT_FLOAT64: return 8;
        default:
            throw std::runtime_error("unsupported NIfTI datatype " +
                                     std::to_string(dt));
    }
}

template <typename T>
void decode(const unsigned char* src, size_t n, bool swapped, float slope,
            float inter, std::vector<float>& out) {
    out.resize(n);
    for (size_t i = 0; i < n; ++i) {
        T v;
        std::memcpy(&v, src + i * sizeof(T), sizeof(T));
        if (swapped) v = swap_bytes(v);
        out[i] = static_cast<float>(v) * slope + inter;
    }
}

struct WriteBuf {
    std::vector<unsigned char> bytes;
    void put(const void* p, size_t n) {
        const auto* s = static_cast<const unsigned char*>(p);
        bytes.insert(bytes.end(), s, s + n);
    }
};

std::vector<unsigned char> make_header(const std::array<int, 4>& dim,
                                       int ndim, int16_t datatype,
                                       int16_t bitpix) {
    std::vector<unsigned char> h(kHeaderSize + 4, 0);  // +4 extension flag
    auto put = [&](size_t off, const auto& v) {
        std::memcpy(h.data() + off, &v, sizeof(v));
    };
    put(0, int32_t{348});
    int16_t d[8] = {static_cast<int16_t>(ndim),
                    static_cast<int16_t>(dim[0]),
                    static_cast<int16_t>(dim[1]),
                    static_cast<int16_t>(dim[2]),
                    static_cast<int16_t>(dim[3]),
                    1,
                    1,
                    1};
    std::memcpy(h.data() + 40, d, sizeof(d));
    put(70, datatype);
    put(72, bitpix);
    float pixdim[8] = {1.f, 1.f, 1.f, 1.f, 1.f, 1.f, 1.f, 1.f};
    std::memcpy(h.data() + 76, pixdim, sizeof(pixdim));
    put(108, float{352});  // vox_offset
    put(112, float{1});    // scl_slope
    put(116, float{0});    // scl_inter
    h[123] = 2;            // xyzt_units: mm
    std::memcpy(h.data() + 148, "btseg", 5);  // descrip
    put(254, int16_t{1});  // sform_code
    float srow[12] = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0};
    std::memcpy(h.data() + 280, srow, sizeof(srow));
    std::memcpy(h.data() + 344, "n+1\0", 4);
    return h;
}

void write_file(const std::string& path,
                const std::vector<unsigned char>& header,
                const unsigned char* payload, size_t payload_bytes) {
    const bool gz = path.size() > 3 && path.compare(path.size() - 3, 3,
                                                    ".gz") == 0;
    if (gz) {
        gzFile f = gzopen(path.c_str(), "wb6");
        if (!f) throw std::runtime_error("cannot open " + path +
                                         " for writing");
        gzbuffer(f, 1 << 20);
        bool ok = gzwrite(f, header.data(),
                          static_cast<unsigned>(header.size())) ==
                  static_cast<int>(header.size());
        for (size_t off = 0; ok && off < payload_bytes;) {
            const unsigned chunk =
                static_cast<unsigned>(std::min<size_t>(payload_bytes - off,
                                                       1 << 24));
            ok = gzwrite(f, payload + off, chunk) == static_cast<int>(chunk);
            off += chunk;
        }
        if (gzclose(f) != Z_OK || !ok)
            throw std::runtime_error("write failed for " + path);
    } else {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open " + path +
                                         " for writing");
        f.write(reinterpret_cast<const char*>(header.data()),
                static_cast<std::streamsize>(header.size()));
        f.write(reinterpret_cast<const char*>(payload),
                static_cast<std::streamsize>(payload_bytes));
        if (!f) throw std::runtime_error("write failed for " + path);
    }
}

}  // namespace

Image read(const std::string& path) {
    const auto bytes = read_all(path);
    if (bytes.size() < kHeaderSize)
        throw std::runtime_error(path + ": truncated NIfTI header");
    const unsigned char* hdr = bytes.data();

    auto magic_ok = [&] {
        return std::memcmp(hdr + 344, "n+1", 3) == 0 ||
               std::memcmp(hdr + 344, "ni1", 3) == 0;
    };
    int32_t szh = read_field<int32_t>(hdr, 0, false);
    bool swapped = false;
    if (szh != 348) {
        if (swap_bytes(szh) != 348 || !magic_ok())
            throw std::runtime_error(path + ": not a NIfTI-1 file");
        swapped = true;
    } else if (!magic_ok()) {
        throw std::runtime_error(path + ": not a NIfTI-1 file");
    }
    if (std::memcmp(hdr + 344, "ni1", 3) == 0)
        throw std::runtime_error(path +
                                 ": two-file (.hdr/.img) NIfTI unsupported");

    int16_t dims[8];
    for (int i = 0; i < 8; ++i)
        dims[i] = read_field<int16_t>(hdr, 40 + 2 * i, swapped);
    const int rank = dims[0];
    if (rank < 3 || rank > 7)
        throw std::runtime_error(path + ": unsupported rank " +
                                 std::to_string(rank));

    Image img;
    img.dim = {dims[1], dims[2], dims[3], rank >= 4 ? dims[4] : 1};
    for (int i = 0; i < 4; ++i)
        if (img.dim[i] < 1)
            throw std::runtime_error(path + ": invalid dimension " +
                                     std::to_string(img.dim[i]));
    // Dims beyond the 4th must be singleton.
    for (int i = 5; i <= rank; ++i)
        if (dims[i] > 1)
            throw std::runtime_error(path + ": >4D payload unsupported");
    img.ndim = img.dim[3] > 1 ? 4 : 3;

    const int16_t datatype = read_field<int16_t>(hdr, 70, swapped);
    float slope = read_field<float>(hdr, 112, swapped);
    float inter = read_field<float>(hdr, 116, swapped);
    if (slope == 0.f) {
        slope = 1.f;
        inter = 0.f;
    }
    const auto vox_offset =
        static_cast<size_t>(read_field<float>(hdr, 108, swapped));
    const size_t n = static_cast<size_t>(img.dim[0]) * img.dim[1] *
                     img.dim[2] * img.dim[3];
    const size_t need = vox_offset + n * dtype_size(datatype);
    if (vox_offset < kHeaderSize || bytes.size() < need)
        throw std::runtime_error(path + ": truncated NIfTI payload");

    const unsigned char* src = bytes.data() + vox_offset;
    switch (datatype) {
        case DT_UINT8: decode<uint8_t>(src, n, swapped, slope, inter,
                                       img.data); break;
        case DT_INT8: decode<int8_t>(src, n, swapped, slope, inter,
                                     img.data); break;
        case DT_INT16: decode<int16_t>(src, n, swapped, slope, inter,
                                       img.data); break;
        case DT_UINT16: decode<uint16_t>(src, n, swapped, slope, inter,
                                         img.data); break;
        case DT_INT32: decode<int32_t>(src, n, swapped, slope, inter,
                                       img.data); break;
        case DT_UINT32: decode<uint32_t>(src, n, swapped, slope, inter,
                                         img.data); break;
        case DT_FLOAT32: decode<float>(src, n, swapped, slope, inter,
                                       img.data); break;
        case DT_FLOAT64: decode<double>(src, n, swapped, slope, inter,
                                        img.data); break;
        default:
            throw std::runtime_error(path + ": unsupported datatype " +
                                     std::to_string(datatype));
    }
    return img;
}

Grid3<float> to_grid3(const Image& img) {
    if (img.ndim != 3)
        throw std::runtime_error("expected 3D volume, file has " +
                                 std::to_string(img.dim[3]) + " frames");
    // File layout (x fastest) equals Grid3 (nz,ny,nx) row-major layout.
    Grid3<float> g(img.dim[2], img.dim[1], img.dim[0]);
    g.data = img.data;
    return g;
}

Grid4<float> to_grid4(const Image& img) {
    if (img.ndim != 4)
        throw std::runtime_error("expected 4D volume");
    Grid4<float> g(img.dim[2], img.dim[1], img.dim[0], img.dim[3]);
    const size_t nvox = g.voxels();
    const int nc = img.dim[3];
    for (int c = 0; c < nc; ++c) {
        const float* src = img.data.data() + static_cast<size_t>(c) * nvox;
        for (size_t v = 0; v < nvox; ++v)
            g.data[v * nc + c] = src[v];
    }
    return g;
}

void write_float3d(const std::string& path, const Grid3<float>& g) {
    const auto hdr = make_header({g.shape[2], g.shape[1], g.shape[0], 1}, 3,
                                 DT_FLOAT32, 32);
    write_file(path, hdr,
               reinterpret_cast<const unsigned char*>(g.data.data()),
               g.data.size() * sizeof(float));
}

void write_uint8_3d(const std::string& path, const Grid3<uint8_t>& g) {
    const auto hdr = make_header({g.shape[2], g.shape[1], g.shape[0], 1}, 3,
                                 DT_UINT8, 8);
    write_file(path, hdr, g.data.data(), g.data.size());
}

void write_float4d(const std::string& path, const Grid4<float>& g) {
    const auto hdr = make_header(
        {g.shape[2], g.shape[1], g.shape[0], g.shape[3]}, 4, DT_FLOAT32, 32);
    const size_t nvox = g.voxels();
    const int nc = g.shape[3];
    std::vector<float> planar(g.data.size());
    for (int c = 0; c < nc; ++c) {
        float* dst = planar.data() + static_cast<size_t>(c) * nvox;
        for (size_t v = 0; v < nvox; ++v)
            dst[v] = g.data[v * nc + c];
    }
    write_file(path, hdr,
               reinterpret_cast<const unsigned char*>(planar.data()),
               planar.size() * sizeof(float));
}

}  // namespace btseg::nifti
