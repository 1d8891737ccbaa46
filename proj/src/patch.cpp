#include <algorithm>

#include <neuroqc/error.hpp>
#include <neuroqc/patch.hpp>

namespace neuroqc {

patch crop_patch(const volume& vol, const binary_map& map, const vec3& center, std::size_t size) {
    if (size == 0 || size%2 != 0) throw data_error("patch size must be even and positive");
    if (map.dims() != vol.dims() || map.origin() != vol.origin()) {
        throw data_error("binary map geometry differs from the volume");
    }

    const auto half = static_cast<std::int64_t>(size/2);
    const auto s = static_cast<std::int64_t>(size);
    const auto& d = vol.dims();

    patch out;
    out.size = size;
    out.data.assign(patch_channels*size*size*size, 0.0f);
    out.corner = voxel_of(center, vol.origin()) - int3{half, half, half};
    out.volume_name = vol.name();

    auto clip = [s](std::int64_t corner, std::size_t extent) {
        const auto lo = std::max<std::int64_t>(0, -corner);
        const auto hi = std::min<std::int64_t>(s, static_cast<std::int64_t>(extent) - corner);
        return std::pair{lo, hi};
    };
    const auto [x0, x1] = clip(out.corner.x, d.nx);
    const auto [y0, y1] = clip(out.corner.y, d.ny);
    const auto [z0, z1] = clip(out.corner.z, d.nz);
    if (x0 >= x1 || y0 >= y1 || z0 >= z1) {
        out.degenerate = true;
        return out;
    }

    const double scale = vol.max_value();
    const auto voxels = vol.voxels();
    const auto bits = map.bits();
    for (auto z = z0; z < z1; ++z) {
        for (auto y = y0; y < y1; ++y) {
            const auto src = d.linear(out.corner + int3{x0, y, z});
            auto* intensity = &out.data[out.index(0, z, y, x0)];
            auto* binary = &out.data[out.index(1, z, y, x0)];
            for (std::int64_t i = 0; i < x1 - x0; ++i) {
                intensity[i] = static_cast<float>(voxels[src + i]/scale);
                binary[i] = bits[src + i]? 1.0f: 0.0f;
            }
        }
    }
    return out;
}

} // namespace neuroqc
