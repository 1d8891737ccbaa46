#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include <neuroqc/spatial_index.hpp>
#include <neuroqc/swc.hpp>

namespace neuroqc {

inline constexpr double default_match_threshold = 4.0;

struct match_config {
    double threshold = default_match_threshold;

    // Throws data_error unless threshold > 0 and finite.
    void validate() const;
};

// Two points match when their Euclidean distance is strictly below the
// threshold.
bool within_threshold(double distance2, double threshold) noexcept;

struct match {
    point_id id = 0;
    double distance = 0;

    friend bool operator==(const match&, const match&) = default;
};

// Nearest indexed point strictly closer than cfg.threshold (ties to the
// smaller id), or nothing.
std::optional<match> find_match(const vec3& p, const spatial_index& index, const match_config& cfg);
inline std::optional<match> find_match(const neuron_point& p, const spatial_index& index, const match_config& cfg) {
    return find_match(p.pos, index, cfg);
}

struct match_entry {
    point_id source = 0;
    std::optional<match> target;

    friend bool operator==(const match_entry&, const match_entry&) = default;
};

struct match_map {
    std::uint64_t source_id = 0;
    std::uint64_t target_id = 0;
    double threshold = default_match_threshold;
    std::vector<match_entry> entries;   // one per source point, ascending source id

    const match_entry& entry(point_id source) const;
    std::optional<point_id> target_of(point_id source) const;
    bool matched(point_id source) const { return target_of(source).has_value(); }

    friend bool operator==(const match_map&, const match_map&) = default;
};

// Resolve find_match for every point of `src` against `dst`. Both must be
// reconstructions of the same neuron. The result is identical for any
// worker count.
match_map build_match_map(const neuron_reconstruction& src, const neuron_reconstruction& dst,
                          const match_config& cfg, unsigned workers = 1);
match_map build_match_map(const neuron_reconstruction& src, const spatial_index& dst_index,
                          std::uint64_t dst_reconstruction_id, const match_config& cfg, unsigned workers = 1);

// {source, target, threshold, entries: [{src_id, dst_id|null, distance|null}]}
nlohmann::json to_json(const match_map& m);

} // namespace neuroqc
