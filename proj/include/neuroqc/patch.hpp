#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <neuroqc/volume.hpp>

namespace neuroqc {

inline constexpr std::size_t default_patch_size = 32;
inline constexpr std::size_t patch_channels = 2;

// Two-channel cube cut around a point. Channel 0 is intensity divided by the
// volume's type maximum, channel 1 the binary map. Layout is channel-major,
// then z, y, x (x fastest).
struct patch {
    std::size_t size = default_patch_size;
    std::vector<float> data;
    int3 corner;                // local voxel of element (0,0,0)
    std::string volume_name;
    bool degenerate = false;    // crop window misses the volume entirely

    std::size_t index(std::size_t channel, std::size_t z, std::size_t y, std::size_t x) const noexcept {
        return ((channel*size + z)*size + y)*size + x;
    }
    float at(std::size_t channel, std::size_t z, std::size_t y, std::size_t x) const noexcept {
        return data[index(channel, z, y, x)];
    }

    // Content equality; corner and provenance are not part of it.
    friend bool operator==(const patch& a, const patch& b) {
        return a.size == b.size && a.data == b.data;
    }
};

// Crop a size^3 window whose corner is voxel_of(center) - size/2 on every
// axis. Voxels outside the volume are zero in both channels. `map` must share
// the volume's geometry; size must be even and positive.
patch crop_patch(const volume& vol, const binary_map& map, const vec3& center,
                 std::size_t size = default_patch_size);

} // namespace neuroqc
