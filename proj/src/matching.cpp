#include <algorithm>
#include <cmath>

#include <neuroqc/error.hpp>
#include <neuroqc/matching.hpp>
#include <neuroqc/parallel.hpp>

namespace neuroqc {

void match_config::validate() const {
    if (!(threshold > 0) || !std::isfinite(threshold)) {
        throw data_error("match threshold must be a positive finite distance");
    }
}

bool within_threshold(double distance2, double threshold) noexcept {
    return std::sqrt(distance2) < threshold;
}

std::optional<match> find_match(const vec3& p, const spatial_index& index, const match_config& cfg) {
    // The nearest point (by squared distance, then id) is also nearest under
    // sqrt, so if any point is within the threshold this one is.
    auto best = index.nearest(p);
    if (!within_threshold(best.distance2, cfg.threshold)) return std::nullopt;
    return match{best.id, std::sqrt(best.distance2)};
}

const match_entry& match_map::entry(point_id source) const {
    auto it = std::lower_bound(entries.begin(), entries.end(), source,
        [](const match_entry& e, point_id id) { return e.source < id; });
    if (it == entries.end() || it->source != source) {
        throw std::out_of_range("point " + std::to_string(source) + " is not in the match map");
    }
    return *it;
}

std::optional<point_id> match_map::target_of(point_id source) const {
    const auto& e = entry(source);
    if (!e.target) return std::nullopt;
    return e.target->id;
}

match_map build_match_map(const neuron_reconstruction& src, const spatial_index& dst_index,
                          std::uint64_t dst_reconstruction_id, const match_config& cfg, unsigned workers)
{
    cfg.validate();
    match_map out;
    out.source_id = src.reconstruction_id();
    out.target_id = dst_reconstruction_id;
    out.threshold = cfg.threshold;
    out.entries.resize(src.size());

    const auto points = src.points();
    parallel_for(points.size(), workers, [&](std::size_t begin, std::size_t end) {
        for (auto i = begin; i < end; ++i) {
            out.entries[i] = {points[i].id, find_match(points[i].pos, dst_index, cfg)};
        }
    });
    std::sort(out.entries.begin(), out.entries.end(),
        [](const match_entry& a, const match_entry& b) { return a.source < b.source; });
    return out;
}

match_map build_match_map(const neuron_reconstruction& src, const neuron_reconstruction& dst,
                          const match_config& cfg, unsigned workers)
{
    if (src.neuron_id() != dst.neuron_id()) {
        throw data_error("cannot match reconstructions of different neurons ("
            + std::to_string(src.neuron_id()) + " vs " + std::to_string(dst.neuron_id()) + ")");
    }
    spatial_index index(dst);
    return build_match_map(src, index, dst.reconstruction_id(), cfg, workers);
}

nlohmann::json to_json(const match_map& m) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e: m.entries) {
        nlohmann::json j;
        j["src_id"] = e.source;
        if (e.target) {
            j["dst_id"] = e.target->id;
            j["distance"] = e.target->distance;
        }
        else {
            j["dst_id"] = nullptr;
            j["distance"] = nullptr;
        }
        entries.push_back(std::move(j));
    }
    return {
        {"source", m.source_id},
        {"target", m.target_id},
        {"threshold", m.threshold},
        {"coordinate_units", "voxel"},
        {"entries", std::move(entries)},
    };
}

} // namespace neuroqc
