#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <neuroqc/swc.hpp>

namespace neuroqc {

struct neighbor {
    point_id id = 0;
    double distance2 = 0;

    friend bool operator==(const neighbor&, const neighbor&) = default;
};

// Ordering used for every nearest-neighbour decision: closer first, then the
// smaller point id.
inline bool closer(const neighbor& a, const neighbor& b) noexcept {
    return a.distance2 < b.distance2 || (a.distance2 == b.distance2 && a.id < b.id);
}

// Exact 3-d tree over point positions.
//
// Results are exact under floating point: a subtree is skipped only when the
// squared distance to its splitting plane already exceeds the best squared
// distance found, and distances use distance2() like every other caller.
class spatial_index {
public:
    struct entry {
        point_id id;
        vec3 pos;
    };

    explicit spatial_index(const neuron_reconstruction& r, std::size_t leaf_size = 8);
    explicit spatial_index(std::vector<entry> entries, std::size_t leaf_size = 8);

    std::size_t size() const noexcept { return entries_.size(); }

    // Nearest point to `q`; ties go to the smaller id.
    neighbor nearest(const vec3& q) const;

    // All points whose Euclidean distance to `q` is strictly below `radius`,
    // sorted by distance then id.
    std::vector<neighbor> within(const vec3& q, double radius) const;

private:
    struct node {
        std::uint32_t begin, end;   // entry range
        std::int32_t left = -1, right = -1;
        std::uint8_t axis = 0;
        double split = 0;
    };

    std::int32_t build(std::uint32_t begin, std::uint32_t end);
    void search_nearest(std::int32_t n, const vec3& q, neighbor& best) const;
    void search_within(std::int32_t n, const vec3& q, double radius, double bound2, std::vector<neighbor>& out) const;

    std::vector<entry> entries_;
    std::vector<node> nodes_;
    std::size_t leaf_size_;
};

} // namespace neuroqc
