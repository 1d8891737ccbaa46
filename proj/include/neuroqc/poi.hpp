#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include <neuroqc/matching.hpp>
#include <neuroqc/swc.hpp>

namespace neuroqc {

// Why a point of the wrong reconstruction starts a tracing error:
//   wrong_child   one of its children has no match in the correct tracing;
//   missing_child one of its match's children has no match in the wrong one;
//   both          both of the above.
enum class poi_reason { wrong_child, missing_child, both };

std::string_view to_string(poi_reason r) noexcept;
poi_reason poi_reason_from_string(std::string_view s);

struct poi_pair {
    point_id poi = 0;       // in the wrong reconstruction, label 1
    point_id control = 0;   // its match in the correct reconstruction, label 0
    poi_reason reason = poi_reason::wrong_child;

    friend bool operator==(const poi_pair&, const poi_pair&) = default;
};

struct poi_label_set {
    std::uint64_t neuron_id = 0;
    std::uint64_t wrong_id = 0;
    std::uint64_t correct_id = 0;
    double threshold = default_match_threshold;
    std::vector<poi_pair> pairs;    // ascending poi id, no duplicates

    std::vector<point_id> pois() const;
    std::vector<point_id> controls() const;
    bool empty() const noexcept { return pairs.empty(); }

    friend bool operator==(const poi_label_set&, const poi_label_set&) = default;
};

// Points of `wrong` where wrong tracing begins, relative to `correct`.
//
// A point p of `wrong` is reported when it has a match q in `correct` and
// either some child of p has no match in `correct`, or some child of q has
// no match in `wrong`. The control of p is q.
poi_label_set label_pois(const neuron_reconstruction& wrong, const neuron_reconstruction& correct,
                         const match_config& cfg, unsigned workers = 1);

nlohmann::json to_json(const poi_label_set& s);
poi_label_set poi_label_set_from_json(const nlohmann::json& j);
void save_poi_label_set(const std::filesystem::path& path, const poi_label_set& s);
poi_label_set load_poi_label_set(const std::filesystem::path& path);

struct point_ref {
    std::uint64_t reconstruction_id = 0;
    point_id point = 0;

    friend auto operator<=>(const point_ref&, const point_ref&) = default;
};

// Draw n distinct points uniformly from all points of `corpus` not listed in
// `exclude`. Deterministic given the seed; throws data_error when fewer than
// n candidates remain.
std::vector<point_ref> sample_controls(std::span<const neuron_reconstruction> corpus, std::size_t n,
                                       const std::set<point_ref>& exclude, std::uint64_t seed);

} // namespace neuroqc
