#pragma once

#include <filesystem>
#include <string>

#include "volgrid/volume.hpp"

namespace vr {

enum class VolumeFormat { Nifti1, RawJson };
enum class DType { U8, I16, F32 };

const char* dtype_name(DType t);
DType dtype_from_name(const std::string& name);

// Picks the format from the extension: ".nii" -> Nifti1, ".json"/".raw"/no
// extension -> RawJson.
VolumeFormat format_for_path(const std::filesystem::path& path);

// RawJson paths may name the .json sidecar, the .raw payload, or the shared
// stem. NIfTI orientation is ignored beyond pixdim[1..3].
Volume load_volume(const std::filesystem::path& path, VolumeFormat format, VolumeKind kind = VolumeKind::Intensity);
Volume load_volume(const std::filesystem::path& path, VolumeKind kind = VolumeKind::Intensity);

// Values are narrowed to dtype with round-to-nearest; f32 is always exact.
void save_volume(const Volume& vol, const std::filesystem::path& path, VolumeFormat format, DType dtype);
void save_volume(const Volume& vol, const std::filesystem::path& path, DType dtype);

// Default on-disk dtype for a volume kind (u8 for masks, f32 otherwise).
DType default_dtype(VolumeKind kind);

}  // namespace vr
