#include <algorithm>
#include <fstream>

#include <neuroqc/error.hpp>
#include <neuroqc/parallel.hpp>
#include <neuroqc/poi.hpp>
#include <neuroqc/rng.hpp>

namespace neuroqc {

std::string_view to_string(poi_reason r) noexcept {
    switch (r) {
    case poi_reason::wrong_child: return "wrong_child";
    case poi_reason::missing_child: return "missing_child";
    case poi_reason::both: break;
    }
    return "both";
}

poi_reason poi_reason_from_string(std::string_view s) {
    if (s == "wrong_child") return poi_reason::wrong_child;
    if (s == "missing_child") return poi_reason::missing_child;
    if (s == "both") return poi_reason::both;
    throw data_error("unknown POI reason '" + std::string(s) + "'");
}

std::vector<point_id> poi_label_set::pois() const {
    std::vector<point_id> out;
    for (const auto& p: pairs) out.push_back(p.poi);
    return out;
}

std::vector<point_id> poi_label_set::controls() const {
    std::vector<point_id> out;
    for (const auto& p: pairs) out.push_back(p.control);
    return out;
}

poi_label_set label_pois(const neuron_reconstruction& wrong, const neuron_reconstruction& correct,
                         const match_config& cfg, unsigned workers)
{
    const auto wrong_to_correct = build_match_map(wrong, correct, cfg, workers);
    const auto correct_to_wrong = build_match_map(correct, wrong, cfg, workers);

    const auto points = wrong.points();
    std::vector<std::optional<poi_pair>> found(points.size());
    parallel_for(points.size(), workers, [&](std::size_t begin, std::size_t end) {
        for (auto i = begin; i < end; ++i) {
            const auto& p = points[i];
            auto q = wrong_to_correct.target_of(p.id);
            if (!q) continue;

            bool wrong_child = false, missing_child = false;
            for (auto c: wrong.child_ids_at(i)) {
                if (!wrong_to_correct.matched(c)) { wrong_child = true; break; }
            }
            for (auto c: correct.child_ids(*q)) {
                if (!correct_to_wrong.matched(c)) { missing_child = true; break; }
            }
            if (wrong_child || missing_child) {
                auto reason = wrong_child && missing_child? poi_reason::both:
                              wrong_child? poi_reason::wrong_child: poi_reason::missing_child;
                found[i] = poi_pair{p.id, *q, reason};
            }
        }
    });

    poi_label_set out;
    out.neuron_id = wrong.neuron_id();
    out.wrong_id = wrong.reconstruction_id();
    out.correct_id = correct.reconstruction_id();
    out.threshold = cfg.threshold;
    for (auto& f: found) {
        if (f) out.pairs.push_back(*f);
    }
    std::sort(out.pairs.begin(), out.pairs.end(), [](const poi_pair& a, const poi_pair& b) { return a.poi < b.poi; });
    return out;
}

nlohmann::json to_json(const poi_label_set& s) {
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& p: s.pairs) {
        pairs.push_back({{"poi_id", p.poi}, {"control_id", p.control}, {"reason", to_string(p.reason)}});
    }
    return {
        {"neuron_id", s.neuron_id},
        {"wrong", s.wrong_id},
        {"correct", s.correct_id},
        {"threshold", s.threshold},
        {"coordinate_units", "voxel"},
        {"pairs", std::move(pairs)},
    };
}

poi_label_set poi_label_set_from_json(const nlohmann::json& j) {
    try {
        poi_label_set s;
        s.neuron_id = j.value("neuron_id", std::uint64_t{0});
        s.wrong_id = j.at("wrong").get<std::uint64_t>();
        s.correct_id = j.at("correct").get<std::uint64_t>();
        s.threshold = j.at("threshold").get<double>();
        for (const auto& p: j.at("pairs")) {
            s.pairs.push_back({p.at("poi_id").get<point_id>(), p.at("control_id").get<point_id>(),
                               poi_reason_from_string(p.at("reason").get<std::string>())});
        }
        std::sort(s.pairs.begin(), s.pairs.end(), [](const poi_pair& a, const poi_pair& b) { return a.poi < b.poi; });
        auto dup = std::adjacent_find(s.pairs.begin(), s.pairs.end(),
            [](const poi_pair& a, const poi_pair& b) { return a.poi == b.poi; });
        if (dup != s.pairs.end()) {
            throw data_error("duplicate POI id " + std::to_string(dup->poi) + " in label set");
        }
        return s;
    }
    catch (const nlohmann::json::exception& e) {
        throw data_error(std::string("malformed label set: ") + e.what());
    }
}

void save_poi_label_set(const std::filesystem::path& path, const poi_label_set& s) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot create " + path.string());
    out << to_json(s).dump(2) << '\n';
    if (!out) throw io_error("write failure on " + path.string());
}

poi_label_set load_poi_label_set(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    }
    catch (const nlohmann::json::exception& e) {
        throw data_error(path.string() + ": " + e.what());
    }
    return poi_label_set_from_json(j);
}

std::vector<point_ref> sample_controls(std::span<const neuron_reconstruction> corpus, std::size_t n,
                                       const std::set<point_ref>& exclude, std::uint64_t seed)
{
    if (n == 0) return {};
    std::vector<point_ref> candidates;
    for (const auto& r: corpus) {
        for (const auto& p: r.points()) {
            point_ref ref{r.reconstruction_id(), p.id};
            if (!exclude.count(ref)) candidates.push_back(ref);
        }
    }
    if (candidates.size() < n) {
        throw data_error("requested " + std::to_string(n) + " control points but only "
            + std::to_string(candidates.size()) + " are available");
    }
    // Partial Fisher-Yates: the first n slots end up a uniform sample.
    rng gen(seed);
    for (std::size_t i = 0; i < n; ++i) {
        auto j = i + static_cast<std::size_t>(gen.below(candidates.size() - i));
        std::swap(candidates[i], candidates[j]);
    }
    candidates.resize(n);
    return candidates;
}

} // namespace neuroqc
