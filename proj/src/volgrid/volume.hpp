#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "common/geometry.hpp"

namespace vr {

struct Dims {
    int nx = 1;
    int ny = 1;
    int nz = 1;

    std::size_t count() const {
        return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
    }
    bool operator==(const Dims&) const = default;
};

// mm per voxel along each axis.
struct Spacing {
    double sx = 1.0;
    double sy = 1.0;
    double sz = 1.0;

    double min() const { return std::min(sx, std::min(sy, sz)); }
    bool operator==(const Spacing&) const = default;
};

struct VoxelCoord {
    int i = 0;
    int j = 0;
    int k = 0;

    auto operator<=>(const VoxelCoord&) const = default;

    Vec3 vec() const { return {double(i), double(j), double(k)}; }
    VoxelCoord operator+(const VoxelCoord& o) const { return {i + o.i, j + o.j, k + o.k}; }
    VoxelCoord operator-(const VoxelCoord& o) const { return {i - o.i, j - o.j, k - o.k}; }
};

// Chebyshev distance; two coordinates are 26-neighbors when this is 1.
int chebyshev(const VoxelCoord& a, const VoxelCoord& b);
double distance(const VoxelCoord& a, const VoxelCoord& b);

enum class VolumeKind { Intensity, BinaryMask, Probability, Distance };

const char* volume_kind_name(VolumeKind kind);

// 3D scalar grid, x-fastest storage. Values are 32-bit floats regardless of
// the on-disk dtype.
class Volume {
public:
    Volume() = default;
    Volume(Dims dims, Spacing spacing, VolumeKind kind, float fill = 0.0f);
    Volume(Dims dims, Spacing spacing, VolumeKind kind, std::vector<float> data);

    // Same geometry as ref, new kind and constant content.
    static Volume like(const Volume& ref, VolumeKind kind, float fill = 0.0f);

    const Dims& dims() const { return dims_; }
    const Spacing& spacing() const { return spacing_; }
    VolumeKind kind() const { return kind_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::span<const float> data() const { return data_; }
    std::span<float> data() { return data_; }
    const std::vector<float>& values() const { return data_; }

    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(k) * dims_.ny + j) * dims_.nx + i;
    }
    std::size_t index(const VoxelCoord& c) const { return index(c.i, c.j, c.k); }
    VoxelCoord coord(std::size_t idx) const;

    bool contains(int i, int j, int k) const {
        return i >= 0 && j >= 0 && k >= 0 && i < dims_.nx && j < dims_.ny && k < dims_.nz;
    }
    bool contains(const VoxelCoord& c) const { return contains(c.i, c.j, c.k); }

    float operator()(int i, int j, int k) const { return data_[index(i, j, k)]; }
    float& operator()(int i, int j, int k) { return data_[index(i, j, k)]; }
    float at(const VoxelCoord& c) const { return data_[index(c)]; }
    float& at(const VoxelCoord& c) { return data_[index(c)]; }

    // Edge-replicated read.
    float clamped(int i, int j, int k) const;

    // Trilinear interpolation at continuous voxel coordinates; `outside` is
    // returned when the point lies beyond the voxel-center lattice.
    double trilinear(const Vec3& p, double outside) const;

    std::size_t count_nonzero() const;
    float min_value() const;
    float max_value() const;

    // Physical position (mm) of a voxel center.
    Vec3 to_mm(const VoxelCoord& c) const { return {c.i * spacing_.sx, c.j * spacing_.sy, c.k * spacing_.sz}; }

    // Checks the per-kind value invariants; throws on violation.
    void validate() const;

    // Copy retagged as BinaryMask with value = (v > threshold).
    Volume thresholded(float threshold) const;
    Volume with_kind(VolumeKind kind) const;

    bool same_geometry(const Volume& other) const { return dims_ == other.dims_; }

private:
    Dims dims_{};
    Spacing spacing_{};
    VolumeKind kind_ = VolumeKind::Intensity;
    std::vector<float> data_;
};

void require_same_dims(const Volume& a, const Volume& b, const char* what);

struct LabeledComponents {
    Dims dims{};
    std::vector<std::int32_t> labels;  // 0 = background, 1..count
    std::vector<std::size_t> sizes;    // sizes[l - 1], descending

    int count() const { return static_cast<int>(sizes.size()); }
    std::int32_t label_at(std::size_t idx) const { return labels[idx]; }
};

enum class Connectivity { Six = 6, TwentySix = 26 };

// Neighbor offsets (excluding the origin) for the given connectivity.
std::span<const VoxelCoord> neighbor_offsets(Connectivity c);

}  // namespace vr
