#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace neuroqc {

using point_id = std::int64_t;

struct vec3 {
    double x = 0, y = 0, z = 0;

    friend bool operator==(const vec3&, const vec3&) = default;
};

// Squared Euclidean distance, evaluated as (dx*dx + dy*dy) + dz*dz. Every
// distance comparison in the library goes through this one expression.
inline double distance2(const vec3& a, const vec3& b) noexcept {
    const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
    return dx*dx + dy*dy + dz*dz;
}

enum class neurite_kind { soma, axon, dendrite, other };

// SWC type code 1 is soma, 2 axon, 3 (basal) and 4 (apical) dendrite. Any
// other code is kept verbatim and reported as `other`.
neurite_kind kind_of_code(int code) noexcept;
std::string_view to_string(neurite_kind k) noexcept;

struct neuron_point {
    point_id id = 0;
    int type_code = 0;
    vec3 pos;
    double radius = 1.0;
    std::optional<point_id> parent;

    neurite_kind kind() const noexcept { return kind_of_code(type_code); }
    bool is_root() const noexcept { return !parent.has_value(); }

    friend bool operator==(const neuron_point&, const neuron_point&) = default;
};

struct reconstruction_info {
    std::uint64_t neuron_id = 0;
    std::uint64_t reconstruction_id = 0;
    std::string label;
};

// A validated, immutable forest of neuronal points.
//
// Construction checks ids are positive and unique, radii positive, parents
// resolve to another point, the parent graph is acyclic and at least one
// root exists; any violation throws validation_error. Point order is kept
// as given.
class neuron_reconstruction {
public:
    neuron_reconstruction(reconstruction_info info, std::vector<neuron_point> points);

    const reconstruction_info& info() const noexcept { return info_; }
    std::uint64_t neuron_id() const noexcept { return info_.neuron_id; }
    std::uint64_t reconstruction_id() const noexcept { return info_.reconstruction_id; }
    const std::string& label() const noexcept { return info_.label; }

    std::span<const neuron_point> points() const noexcept { return points_; }
    std::size_t size() const noexcept { return points_.size(); }

    bool contains(point_id id) const noexcept;
    // Position of `id` in points(); throws std::out_of_range if unknown.
    std::size_t index_of(point_id id) const;
    const neuron_point& at(point_id id) const { return points_[index_of(id)]; }

    // Child ids of the point at `index`, ascending.
    std::span<const point_id> child_ids_at(std::size_t index) const noexcept { return children_[index]; }
    std::span<const point_id> child_ids(point_id id) const { return children_[index_of(id)]; }
    std::vector<neuron_point> children(point_id id) const;

    std::vector<point_id> roots() const;

private:
    reconstruction_info info_;
    std::vector<neuron_point> points_;
    std::unordered_map<point_id, std::size_t> index_;
    std::vector<std::vector<point_id>> children_;
};

neuron_reconstruction parse_swc(std::istream& in, reconstruction_info info = {});
neuron_reconstruction parse_swc(std::string_view text, reconstruction_info info = {});
neuron_reconstruction load_swc(const std::filesystem::path& path, reconstruction_info info = {});

// Coordinates and radii use the shortest representation that reads back to
// the identical double.
std::string serialize_swc(const neuron_reconstruction& r);
void save_swc(const std::filesystem::path& path, const neuron_reconstruction& r);

} // namespace neuroqc
