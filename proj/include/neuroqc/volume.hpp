#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <neuroqc/swc.hpp>

namespace neuroqc {

enum class voxel_type: std::uint8_t { u8, u16 };

std::uint32_t max_value(voxel_type t) noexcept;
std::string_view to_string(voxel_type t) noexcept;

struct int3 {
    std::int64_t x = 0, y = 0, z = 0;

    friend bool operator==(const int3&, const int3&) = default;
    friend int3 operator+(int3 a, int3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend int3 operator-(int3 a, int3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
};

struct dims3 {
    std::size_t nx = 0, ny = 0, nz = 0;

    std::size_t count() const noexcept { return nx*ny*nz; }
    bool contains(const int3& v) const noexcept {
        return v.x >= 0 && v.y >= 0 && v.z >= 0
            && static_cast<std::size_t>(v.x) < nx
            && static_cast<std::size_t>(v.y) < ny
            && static_cast<std::size_t>(v.z) < nz;
    }
    // x fastest, then y, then z.
    std::size_t linear(const int3& v) const noexcept {
        return (static_cast<std::size_t>(v.z)*ny + static_cast<std::size_t>(v.y))*nx + static_cast<std::size_t>(v.x);
    }

    friend bool operator==(const dims3&, const dims3&) = default;
};

// Rounds half away from zero, independent of the current FP rounding mode.
std::int64_t round_half_away(double v) noexcept;

// Voxel holding a position given in global (SWC) coordinates.
inline int3 voxel_of(const vec3& p, const int3& origin) noexcept {
    return {round_half_away(p.x - static_cast<double>(origin.x)),
            round_half_away(p.y - static_cast<double>(origin.y)),
            round_half_away(p.z - static_cast<double>(origin.z))};
}

// Dense scalar grid. Voxel (0,0,0) sits at `origin` in SWC coordinates.
// Samples are held as 16-bit regardless of type; u8 volumes only hold values
// up to 255.
class volume {
public:
    volume(dims3 dims, int3 origin, voxel_type type);
    volume(dims3 dims, int3 origin, voxel_type type, std::vector<std::uint16_t> voxels);

    const dims3& dims() const noexcept { return dims_; }
    const int3& origin() const noexcept { return origin_; }
    voxel_type type() const noexcept { return type_; }
    std::uint32_t max_value() const noexcept { return neuroqc::max_value(type_); }

    std::uint16_t at(const int3& local) const noexcept { return voxels_[dims_.linear(local)]; }
    std::uint16_t at(std::int64_t x, std::int64_t y, std::int64_t z) const noexcept { return at(int3{x, y, z}); }
    void set(const int3& local, std::uint16_t v);

    std::span<const std::uint16_t> voxels() const noexcept { return voxels_; }

    const std::string& name() const noexcept { return name_; }
    void set_name(std::string n) { name_ = std::move(n); }

    friend bool operator==(const volume& a, const volume& b) {
        return a.dims_ == b.dims_ && a.origin_ == b.origin_ && a.type_ == b.type_ && a.voxels_ == b.voxels_;
    }

private:
    dims3 dims_;
    int3 origin_;
    voxel_type type_;
    std::vector<std::uint16_t> voxels_;
    std::string name_;
};

// Load either a multi-page grayscale TIFF (.tif/.tiff, 8 or 16 bit, one page
// per z slice) or a raw volume with a JSON sidecar:
//   {"dims":[nx,ny,nz],"dtype":"u8"|"u16","origin":[x0,y0,z0],"endianness":"little"}
// For raw data `path` may name either file: `foo.json` pairs with `foo.raw`
// and any other name pairs with the same stem plus `.json`. A TIFF may also
// have a `.json` sidecar, from which only "origin" is read.
volume load_volume(const std::filesystem::path& path);

// Write `<stem>.raw` (little-endian) and `<stem>.json` next to each other.
// Returns the sidecar path.
std::filesystem::path save_volume_raw(const std::filesystem::path& path, const volume& v);
void save_volume_tiff(const std::filesystem::path& path, const volume& v);

// 0/1 grid sharing a volume's geometry.
class binary_map {
public:
    binary_map(dims3 dims, int3 origin): dims_(dims), origin_(origin), bits_(dims.count(), 0) {}

    const dims3& dims() const noexcept { return dims_; }
    const int3& origin() const noexcept { return origin_; }
    std::uint8_t at(const int3& local) const noexcept { return bits_[dims_.linear(local)]; }
    void set(const int3& local) noexcept { bits_[dims_.linear(local)] = 1; }
    std::span<const std::uint8_t> bits() const noexcept { return bits_; }
    std::size_t count() const noexcept;

    friend bool operator==(const binary_map&, const binary_map&) = default;

private:
    dims3 dims_;
    int3 origin_;
    std::vector<std::uint8_t> bits_;
};

struct raster_result {
    binary_map map;
    std::size_t points_out_of_bounds = 0;
};

// Mark every point's voxel and the straight voxel walk from each point to its
// parent. A segment between voxels a and b (ordered so a < b
// lexicographically) covers a + round((b - a)*k/n) for k = 0..n, where n is
// the largest per-axis extent and rounding is half away from zero; this is a
// 26-connected path. Voxels outside the grid are skipped, and points whose
// own voxel is outside are counted.
raster_result rasterize(const neuron_reconstruction& r, const dims3& dims, const int3& origin);
inline raster_result rasterize(const neuron_reconstruction& r, const volume& v) {
    return rasterize(r, v.dims(), v.origin());
}

} // namespace neuroqc
