#include "volgrid/volume.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "common/error.hpp"

namespace vr {

int chebyshev(const VoxelCoord& a, const VoxelCoord& b) {
    return std::max({std::abs(a.i - b.i), std::abs(a.j - b.j), std::abs(a.k - b.k)});
}

double distance(const VoxelCoord& a, const VoxelCoord& b) { return (a.vec() - b.vec()).norm(); }

const char* volume_kind_name(VolumeKind kind) {
    switch (kind) {
        case VolumeKind::Intensity: return "Intensity";
        case VolumeKind::BinaryMask: return "BinaryMask";
        case VolumeKind::Probability: return "Probability";
        case VolumeKind::Distance: return "Distance";
    }
    return "?";
}

namespace {

void check_geometry(const Dims& d, const Spacing& s) {
    if (d.nx < 1 || d.ny < 1 || d.nz < 1) fail(ErrorCode::InvalidArgument, "volume dims must be >= 1");
    if (!(s.sx > 0.0 && s.sy > 0.0 && s.sz > 0.0)) fail(ErrorCode::InvalidArgument, "volume spacing must be > 0");
}

}  // namespace

Volume::Volume(Dims dims, Spacing spacing, VolumeKind kind, float fill)
    : dims_(dims), spacing_(spacing), kind_(kind) {
    check_geometry(dims, spacing);
    data_.assign(dims.count(), fill);
}

Volume::Volume(Dims dims, Spacing spacing, VolumeKind kind, std::vector<float> data)
    : dims_(dims), spacing_(spacing), kind_(kind), data_(std::move(data)) {
    check_geometry(dims, spacing);
    if (data_.size() != dims.count())
        fail(ErrorCode::SizeMismatch, "volume data length " + std::to_string(data_.size()) + " != " +
                                          std::to_string(dims.count()));
}

Volume Volume::like(const Volume& ref, VolumeKind kind, float fill) {
    return Volume(ref.dims(), ref.spacing(), kind, fill);
}

VoxelCoord Volume::coord(std::size_t idx) const {
    const auto nx = static_cast<std::size_t>(dims_.nx);
    const auto ny = static_cast<std::size_t>(dims_.ny);
    return {static_cast<int>(idx % nx), static_cast<int>((idx / nx) % ny), static_cast<int>(idx / (nx * ny))};
}

float Volume::clamped(int i, int j, int k) const {
    i = std::clamp(i, 0, dims_.nx - 1);
    j = std::clamp(j, 0, dims_.ny - 1);
    k = std::clamp(k, 0, dims_.nz - 1);
    return data_[index(i, j, k)];
}

double Volume::trilinear(const Vec3& p, double outside) const {
    constexpr double eps = 1e-9;
    if (p.x() < -eps || p.y() < -eps || p.z() < -eps || p.x() > dims_.nx - 1 + eps || p.y() > dims_.ny - 1 + eps ||
        p.z() > dims_.nz - 1 + eps)
        return outside;
    const double x = std::clamp(p.x(), 0.0, double(dims_.nx - 1));
    const double y = std::clamp(p.y(), 0.0, double(dims_.ny - 1));
    const double z = std::clamp(p.z(), 0.0, double(dims_.nz - 1));
    const int x0 = std::min(static_cast<int>(x), std::max(dims_.nx - 2, 0));
    const int y0 = std::min(static_cast<int>(y), std::max(dims_.ny - 2, 0));
    const int z0 = std::min(static_cast<int>(z), std::max(dims_.nz - 2, 0));
    const double fx = x - x0, fy = y - y0, fz = z - z0;
    double acc = 0.0;
    for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
                const double w = (dx ? fx : 1 - fx) * (dy ? fy : 1 - fy) * (dz ? fz : 1 - fz);
                if (w == 0.0) continue;
                acc += w * clamped(x0 + dx, y0 + dy, z0 + dz);
            }
    return acc;
}

std::size_t Volume::count_nonzero() const {
    return static_cast<std::size_t>(std::count_if(data_.begin(), data_.end(), [](float v) { return v != 0.0f; }));
}

float Volume::min_value() const { return data_.empty() ? 0.0f : *std::min_element(data_.begin(), data_.end()); }
float Volume::max_value() const { return data_.empty() ? 0.0f : *std::max_element(data_.begin(), data_.end()); }

void Volume::validate() const {
    check_geometry(dims_, spacing_);
    if (data_.size() != dims_.count()) fail(ErrorCode::SizeMismatch, "volume data length mismatch");
    switch (kind_) {
        case VolumeKind::BinaryMask:
            for (float v : data_)
                if (v != 0.0f && v != 1.0f) fail(ErrorCode::InvalidArgument, "binary mask holds a value outside {0,1}");
            break;
        case VolumeKind::Probability:
            for (float v : data_)
                if (!(v >= 0.0f && v <= 1.0f)) fail(ErrorCode::InvalidArgument, "probability outside [0,1]");
            break;
        default: break;
    }
}

Volume Volume::thresholded(float threshold) const {
    Volume out = like(*this, VolumeKind::BinaryMask);
    for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] = data_[i] > threshold ? 1.0f : 0.0f;
    return out;
}

Volume Volume::with_kind(VolumeKind kind) const {
    Volume out = *this;
    out.kind_ = kind;
    return out;
}

void require_same_dims(const Volume& a, const Volume& b, const char* what) {
    if (!(a.dims() == b.dims())) fail(ErrorCode::DimMismatch, std::string(what) + ": volume dims differ");
}

namespace {

std::vector<VoxelCoord> make_offsets(bool full) {
    std::vector<VoxelCoord> out;
    for (int dk = -1; dk <= 1; ++dk)
        for (int dj = -1; dj <= 1; ++dj)
            for (int di = -1; di <= 1; ++di) {
                const int m = std::abs(di) + std::abs(dj) + std::abs(dk);
                if (m == 0) continue;
                if (!full && m != 1) continue;
                out.push_back({di, dj, dk});
            }
    return out;
}

}  // namespace

std::span<const VoxelCoord> neighbor_offsets(Connectivity c) {
    static const std::vector<VoxelCoord> six = make_offsets(false);
    static const std::vector<VoxelCoord> twenty_six = make_offsets(true);
    return c == Connectivity::Six ? std::span<const VoxelCoord>(six) : std::span<const VoxelCoord>(twenty_six);
}

}  // namespace vr
