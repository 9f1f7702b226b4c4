// nifti.hpp
// Minimal NIfTI-1 single-file (.nii / .nii.gz) reader and writer.
// Covers what the pipeline needs: 3D/4D grids, the common scalar
// datatypes, scl_slope/scl_inter, and byte-swapped (big-endian) inputs.
// Orientation metadata is ignored; volumes are treated in voxel space.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "btseg/volume.hpp"

namespace btseg::nifti {

// Decoded image: data converted to float in file order (x fastest, then
// y, z, t), with any scl_slope/scl_inter already applied.
struct Image {
    std::array<int, 4> dim{1, 1, 1, 1};  // nx, ny, nz, nt
    int ndim = 3;                        // 3 or 4 after squeezing
    std::vector<float> data;
};

Image read(const std::string& path);

// Writers always emit little-endian .nii (gzip-compressed when the path
// ends in .gz) with unit spacing and an identity sform.
void write_float3d(const std::string& path, const Grid3<float>& g);
void write_uint8_3d(const std::string& path, const Grid3<uint8_t>& g);
// Channel-last Grid4 is transposed to the NIfTI t-slowest layout.
void write_float4d(const std::string& path, const Grid4<float>& g);

// Grid views of a decoded image. Grid3 shape is (nz,ny,nx) so the grid
// memory layout equals the file layout; Grid4 adds channel-last C = nt.
Grid3<float> to_grid3(const Image& img);
Grid4<float> to_grid4(const Image& img);

}  // namespace btseg::nifti
