#include "volgrid/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstdlib>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include <nlohmann/json.hpp>

#include "common/error.hpp"

namespace vr {

namespace fs = std::filesystem;
using nlohmann::json;

const char* dtype_name(DType t) {
    switch (t) {
        case DType::U8: return "u8";
        case DType::I16: return "i16";
        case DType::F32: return "f32";
    }
    return "?";
}

DType dtype_from_name(const std::string& name) {
    if (name == "u8") return DType::U8;
    if (name == "i16") return DType::I16;
    if (name == "f32") return DType::F32;
    fail(ErrorCode::UnsupportedDatatype, "unsupported dtype '" + name + "'");
}

DType default_dtype(VolumeKind kind) { return kind == VolumeKind::BinaryMask ? DType::U8 : DType::F32; }

VolumeFormat format_for_path(const fs::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".nii") return VolumeFormat::Nifti1;
    if (ext == ".gz") fail(ErrorCode::UnsupportedDatatype, "compressed NIfTI is not supported: " + path.string());
    return VolumeFormat::RawJson;
}

namespace {

std::size_t dtype_bytes(DType t) {
    switch (t) {
        case DType::U8: return 1;
        case DType::I16: return 2;
        case DType::F32: return 4;
    }
    return 0;
}

std::vector<char> read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

template <typename T>
T read_le(const char* p, bool swap) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    if (swap) {
        auto* b = reinterpret_cast<unsigned char*>(&v);
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    }
    return v;
}

template <typename T>
void write_le(std::vector<char>& buf, std::size_t off, T v) {
    static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");
    std::memcpy(buf.data() + off, &v, sizeof(T));
}

std::vector<float> decode_payload(const char* p, std::size_t count, DType dtype, bool swap) {
    std::vector<float> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        switch (dtype) {
            case DType::U8: out[i] = static_cast<unsigned char>(p[i]); break;
            case DType::I16: out[i] = read_le<std::int16_t>(p + 2 * i, swap); break;
            case DType::F32: out[i] = read_le<float>(p + 4 * i, swap); break;
        }
    }
    return out;
}

std::vector<char> encode_payload(const Volume& vol, DType dtype) {
    const auto values = vol.data();
    std::vector<char> buf(values.size() * dtype_bytes(dtype));
    for (std::size_t i = 0; i < values.size(); ++i) {
        const float v = values[i];
        switch (dtype) {
            case DType::U8: {
                const float r = std::clamp(std::nearbyint(v), 0.0f, 255.0f);
                buf[i] = static_cast<char>(static_cast<unsigned char>(r));
                break;
            }
            case DType::I16: {
                const float r = std::clamp(std::nearbyint(v), -32768.0f, 32767.0f);
                write_le<std::int16_t>(buf, 2 * i, static_cast<std::int16_t>(r));
                break;
            }
            case DType::F32: write_le<float>(buf, 4 * i, v); break;
        }
    }
    return buf;
}

void write_file(const fs::path& path, const std::vector<char>& bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::Io, "short write to " + path.string());
}

struct RawPaths {
    fs::path json;
    fs::path raw;
};

RawPaths raw_paths(const fs::path& path) {
    fs::path stem = path;
    const auto ext = path.extension().string();
    if (ext == ".json" || ext == ".raw") stem.replace_extension();
    fs::path j = stem, r = stem;
    j += ".json";
    r += ".raw";
    return {j, r};
}

Volume load_raw_json(const fs::path& path, VolumeKind kind) {
    const auto paths = raw_paths(path);
    const auto text = read_file(paths.json);
    json meta;
    try {
        meta = json::parse(text.begin(), text.end());
    } catch (const json::exception& e) {
        fail(ErrorCode::HeaderCorrupt, paths.json.string() + ": " + e.what());
    }
    Dims dims;
    Spacing spacing;
    DType dtype;
    try {
        const auto d = meta.at("dims");
        const auto s = meta.at("spacing");
        if (d.size() != 3 || s.size() != 3) fail(ErrorCode::HeaderCorrupt, "dims/spacing must have 3 entries");
        dims = {d[0].get<int>(), d[1].get<int>(), d[2].get<int>()};
        spacing = {s[0].get<double>(), s[1].get<double>(), s[2].get<double>()};
        dtype = dtype_from_name(meta.at("dtype").get<std::string>());
        if (meta.contains("order") && meta["order"].get<std::string>() != "x-fastest")
            fail(ErrorCode::HeaderCorrupt, "only x-fastest order is supported");
    } catch (const json::exception& e) {
        fail(ErrorCode::HeaderCorrupt, paths.json.string() + ": " + e.what());
    }
    if (dims.nx < 1 || dims.ny < 1 || dims.nz < 1 || !(spacing.sx > 0 && spacing.sy > 0 && spacing.sz > 0))
        fail(ErrorCode::HeaderCorrupt, paths.json.string() + ": invalid dims or spacing");
    const auto payload = read_file(paths.raw);
    const std::size_t expected = dims.count() * dtype_bytes(dtype);
    if (payload.size() != expected)
        fail(ErrorCode::SizeMismatch, paths.raw.string() + ": payload has " + std::to_string(payload.size()) +
                                          " bytes, header declares " + std::to_string(expected));
    return Volume(dims, spacing, kind, decode_payload(payload.data(), dims.count(), dtype, false));
}

void save_raw_json(const Volume& vol, const fs::path& path, DType dtype) {
    const auto paths = raw_paths(path);
    const auto& d = vol.dims();
    const auto& s = vol.spacing();
    json meta = {{"dims", {d.nx, d.ny, d.nz}},
                 {"spacing", {s.sx, s.sy, s.sz}},
                 {"dtype", dtype_name(dtype)},
                 {"order", "x-fastest"}};
    const auto text = meta.dump(2) + "\n";
    write_file(paths.json, std::vector<char>(text.begin(), text.end()));
    write_file(paths.raw, encode_payload(vol, dtype));
}

constexpr std::size_t kNiftiHeaderSize = 348;

// pixdim is stored as float32; widen through its shortest decimal form so a
// header written as 0.3 reads back as the double 0.3.
double widen_shortest(float v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    *res.ptr = '\0';
    return std::strtod(buf, nullptr);
}

Volume load_nifti(const fs::path& path, VolumeKind kind) {
    const auto bytes = read_file(path);
    if (bytes.size() < kNiftiHeaderSize) fail(ErrorCode::HeaderCorrupt, path.string() + ": shorter than a NIfTI header");
    const char* h = bytes.data();
    bool swap = false;
    if (read_le<std::int32_t>(h, false) != 348) {
        if (read_le<std::int32_t>(h, true) != 348) fail(ErrorCode::HeaderCorrupt, path.string() + ": sizeof_hdr != 348");
        swap = true;
    }
    if (std::memcmp(h + 344, "n+1\0", 4) != 0)
        fail(ErrorCode::HeaderCorrupt, path.string() + ": magic is not \"n+1\" (single-file NIfTI-1 required)");
    std::array<std::int16_t, 8> dim{};
    for (int i = 0; i < 8; ++i) dim[i] = read_le<std::int16_t>(h + 40 + 2 * i, swap);
    if (dim[0] < 1 || dim[0] > 7) fail(ErrorCode::HeaderCorrupt, path.string() + ": invalid dim[0]");
    for (int i = 4; i <= dim[0]; ++i)
        if (dim[i] > 1) fail(ErrorCode::HeaderCorrupt, path.string() + ": only 3D volumes are supported");
    Dims dims{std::max<int>(1, dim[1]), dim[0] >= 2 ? std::max<int>(1, dim[2]) : 1,
              dim[0] >= 3 ? std::max<int>(1, dim[3]) : 1};
    if (dim[1] < 1 || (dim[0] >= 2 && dim[2] < 1) || (dim[0] >= 3 && dim[3] < 1))
        fail(ErrorCode::HeaderCorrupt, path.string() + ": non-positive dimension");
    const auto datatype = read_le<std::int16_t>(h + 70, swap);
    DType dtype;
    switch (datatype) {
        case 2: dtype = DType::U8; break;
        case 4: dtype = DType::I16; break;
        case 16: dtype = DType::F32; break;
        default: fail(ErrorCode::UnsupportedDatatype, path.string() + ": NIfTI datatype " + std::to_string(datatype));
    }
    std::array<float, 8> pixdim{};
    for (int i = 0; i < 8; ++i) pixdim[i] = read_le<float>(h + 76 + 4 * i, swap);
    Spacing spacing{pixdim[1], pixdim[2], pixdim[3]};
    if (!(spacing.sx > 0)) spacing.sx = 1.0;
    if (!(spacing.sy > 0)) spacing.sy = 1.0;
    if (!(spacing.sz > 0)) spacing.sz = 1.0;
    const float vox_offset = read_le<float>(h + 108, swap);
    if (!(vox_offset >= 0.0f) || vox_offset < float(kNiftiHeaderSize) || vox_offset > float(bytes.size()))
        fail(ErrorCode::HeaderCorrupt, path.string() + ": invalid vox_offset");
    const auto offset = static_cast<std::size_t>(vox_offset);
    const std::size_t expected = dims.count() * dtype_bytes(dtype);
    if (bytes.size() - offset != expected)
        fail(ErrorCode::SizeMismatch, path.string() + ": payload has " + std::to_string(bytes.size() - offset) +
                                          " bytes, header declares " + std::to_string(expected));
    spacing = {widen_shortest(float(spacing.sx)), widen_shortest(float(spacing.sy)), widen_shortest(float(spacing.sz))};
    return Volume(dims, spacing, kind, decode_payload(h + offset, dims.count(), dtype, swap));
}

void save_nifti(const Volume& vol, const fs::path& path, DType dtype) {
    std::vector<char> buf(kNiftiHeaderSize + 4, 0);
    const auto& d = vol.dims();
    const auto& s = vol.spacing();
    write_le<std::int32_t>(buf, 0, 348);
    const std::array<std::int16_t, 8> dim{3, static_cast<std::int16_t>(d.nx), static_cast<std::int16_t>(d.ny),
                                          static_cast<std::int16_t>(d.nz), 1, 1, 1, 1};
    for (int i = 0; i < 8; ++i) write_le<std::int16_t>(buf, 40 + 2 * i, dim[i]);
    std::int16_t datatype = 0, bitpix = 0;
    switch (dtype) {
        case DType::U8: datatype = 2; bitpix = 8; break;
        case DType::I16: datatype = 4; bitpix = 16; break;
        case DType::F32: datatype = 16; bitpix = 32; break;
    }
    write_le<std::int16_t>(buf, 70, datatype);
    write_le<std::int16_t>(buf, 72, bitpix);
    const std::array<float, 8> pixdim{1.0f, float(s.sx), float(s.sy), float(s.sz), 1.0f, 1.0f, 1.0f, 1.0f};
    for (int i = 0; i < 8; ++i) write_le<float>(buf, 76 + 4 * i, pixdim[i]);
    write_le<float>(buf, 108, 352.0f);
    write_le<float>(buf, 112, 1.0f);  // scl_slope
    write_le<std::int16_t>(buf, 252, 0);
    std::memcpy(buf.data() + 344, "n+1\0", 4);
    const auto payload = encode_payload(vol, dtype);
    buf.insert(buf.end(), payload.begin(), payload.end());
    write_file(path, buf);
}

}  // namespace

Volume load_volume(const fs::path& path, VolumeFormat format, VolumeKind kind) {
    Volume v = format == VolumeFormat::Nifti1 ? load_nifti(path, kind) : load_raw_json(path, kind);
    if (kind == VolumeKind::BinaryMask || kind == VolumeKind::Probability) v.validate();
    return v;
}

Volume load_volume(const fs::path& path, VolumeKind kind) { return load_volume(path, format_for_path(path), kind); }

void save_volume(const Volume& vol, const fs::path& path, VolumeFormat format, DType dtype) {
    if (format == VolumeFormat::Nifti1)
        save_nifti(vol, path, dtype);
    else
        save_raw_json(vol, path, dtype);
}

void save_volume(const Volume& vol, const fs::path& path, DType dtype) {
    save_volume(vol, path, format_for_path(path), dtype);
}

}  // namespace vr
