#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <limits>
#include <unordered_map>
#include <unordered_set>

#include <neuroqc/error.hpp>
#include <neuroqc/manifest.hpp>
#include <neuroqc/parallel.hpp>
#include <neuroqc/rng.hpp>
#include <neuroqc/synthetic.hpp>

namespace neuroqc::synth {

void params::validate() const {
    if (dims.nx == 0 || dims.ny == 0 || dims.nz == 0) throw data_error("synthetic volume dims must be positive");
    if (!(spacing > 0) || !(mean_branch_length > 0) || max_points == 0) {
        throw data_error("spacing, mean branch length and max points must be positive");
    }
    if (!(branch_probability >= 0 && branch_probability <= 1)) throw data_error("branch probability must be in [0,1]");
    if (!(margin >= 0) || !(amplitude > 0) || !(blur_sigma >= 0) || !(noise_std >= 0) || !(noise_mean >= 0)) {
        throw data_error("invalid synthetic rendering parameters");
    }
    const double smallest = static_cast<double>(std::min({dims.nx, dims.ny, dims.nz}));
    if (spacing >= smallest - 1 - 2*margin) throw data_error("point spacing does not fit in the volume");
}

namespace {

vec3 operator+(vec3 a, vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
vec3 operator-(vec3 a, vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
vec3 operator*(double s, vec3 a) { return {s*a.x, s*a.y, s*a.z}; }

vec3 normalized(vec3 v) {
    const double n = std::sqrt(v.x*v.x + v.y*v.y + v.z*v.z);
    return n > 0? (1.0/n)*v: vec3{1, 0, 0};
}

vec3 random_unit(rng& g) {
    return normalized({g.normal(), g.normal(), g.normal()});
}

struct bounds_box {
    vec3 lo, hi;

    bool contains(const vec3& v) const {
        return v.x >= lo.x && v.x <= hi.x && v.y >= lo.y && v.y <= hi.y && v.z >= lo.z && v.z <= hi.z;
    }
    vec3 clamp(const vec3& v) const {
        return {std::clamp(v.x, lo.x, hi.x), std::clamp(v.y, lo.y, hi.y), std::clamp(v.z, lo.z, hi.z)};
    }
};

bounds_box box_of(const dims3& dims, const int3& origin, double margin) {
    const vec3 o{static_cast<double>(origin.x), static_cast<double>(origin.y), static_cast<double>(origin.z)};
    return {o + vec3{margin, margin, margin},
            o + vec3{static_cast<double>(dims.nx) - 1 - margin, static_cast<double>(dims.ny) - 1 - margin,
                     static_cast<double>(dims.nz) - 1 - margin}};
}

std::size_t branch_length(rng& g, double mean) {
    if (mean <= 1) return 1;
    // Geometric on {1, 2, ...} with the requested mean.
    const double q = 1.0 - 1.0/mean;
    return 1 + static_cast<std::size_t>(std::floor(std::log(1.0 - g.uniform())/std::log(q)));
}

} // anonymous namespace

neuron_reconstruction generate_neuron(const params& p, std::uint64_t seed, reconstruction_info info,
                                      std::optional<vec3> root)
{
    p.validate();
    rng g(seed);
    const auto box = box_of(p.dims, p.origin, p.margin);
    if (!root) {
        const vec3 span = box.hi - box.lo;
        root = box.lo + vec3{g.uniform(0.25, 0.75)*span.x, g.uniform(0.25, 0.75)*span.y, g.uniform(0.25, 0.75)*span.z};
    }
    const vec3 soma = box.clamp(*root);

    std::vector<neuron_point> points;
    points.push_back({1, 1, soma, 2.0, std::nullopt});

    struct branch {
        point_id parent;
        vec3 pos, dir;
        int type;
    };
    std::deque<branch> pending;
    const std::size_t primaries = p.branch_probability > 0? 1 + static_cast<std::size_t>(g.below(3)): 1;
    for (std::size_t i = 0; i < primaries; ++i) {
        pending.push_back({1, soma, random_unit(g), i == 0? 2: 3});
    }

    const bool branching = p.branch_probability > 0;
    for (std::size_t respawns = 0; points.size() < p.max_points; ) {
        if (pending.empty()) {
            // Small trees get extra branches from random existing points.
            if (!branching || points.size() >= p.min_points || respawns++ >= 64) break;
            const auto& from = points[static_cast<std::size_t>(g.below(points.size()))];
            pending.push_back({from.id, from.pos, random_unit(g), from.id == 1? 3: from.type_code});
        }
        auto b = pending.front();
        pending.pop_front();
        const auto length = branching? branch_length(g, p.mean_branch_length): p.max_points;
        for (std::size_t step = 0; step < length && points.size() < p.max_points; ++step) {
            vec3 next;
            bool placed = false;
            for (int attempt = 0; attempt < 8 && !placed; ++attempt) {
                const double wobble = attempt == 0? 0.3: 1.5;
                const vec3 dir = normalized(b.dir + wobble*vec3{g.normal(), g.normal(), g.normal()});
                next = b.pos + p.spacing*dir;
                if (box.contains(next)) {
                    b.dir = dir;
                    placed = true;
                }
            }
            if (!placed) break;

            const auto id = static_cast<point_id>(points.size() + 1);
            points.push_back({id, b.type, next, 1.0, b.parent});
            b.parent = id;
            b.pos = next;
            if (g.bernoulli(p.branch_probability)) {
                pending.push_back({id, next, normalized(b.dir + vec3{g.normal(), g.normal(), g.normal()}), b.type});
            }
        }
    }
    return neuron_reconstruction(std::move(info), std::move(points));
}

namespace {

void blur_axis(std::vector<double>& field, const dims3& d, const std::vector<double>& kernel, int axis) {
    const auto radius = static_cast<std::int64_t>(kernel.size()/2);
    const std::int64_t n[3] = {static_cast<std::int64_t>(d.nx), static_cast<std::int64_t>(d.ny), static_cast<std::int64_t>(d.nz)};
    const std::int64_t stride[3] = {1, n[0], n[0]*n[1]};
    const auto len = n[axis];
    std::vector<double> line(static_cast<std::size_t>(len));
    const int a1 = (axis + 1)%3, a2 = (axis + 2)%3;
    for (std::int64_t j = 0; j < n[a2]; ++j) {
        for (std::int64_t i = 0; i < n[a1]; ++i) {
            const auto base = i*stride[a1] + j*stride[a2];
            for (std::int64_t k = 0; k < len; ++k) line[k] = field[base + k*stride[axis]];
            for (std::int64_t k = 0; k < len; ++k) {
                double acc = 0;
                for (std::int64_t t = -radius; t <= radius; ++t) {
                    const auto s = k + t;
                    if (s >= 0 && s < len) acc += kernel[t + radius]*line[s];
                }
                field[base + k*stride[axis]] = acc;
            }
        }
    }
}

} // anonymous namespace

volume render_volume(std::span<const neuron_reconstruction> neurons, const params& p, std::uint64_t seed) {
    p.validate();
    std::vector<double> field(p.dims.count(), 0.0);
    for (const auto& n: neurons) {
        const auto map = rasterize(n, p.dims, p.origin).map;
        const auto bits = map.bits();
        for (std::size_t i = 0; i < field.size(); ++i) {
            if (bits[i]) field[i] += p.amplitude;
        }
    }
    if (p.blur_sigma > 0) {
        const auto radius = static_cast<std::int64_t>(std::ceil(3*p.blur_sigma));
        std::vector<double> kernel(static_cast<std::size_t>(2*radius + 1));
        double sum = 0;
        for (std::int64_t t = -radius; t <= radius; ++t) {
            sum += kernel[t + radius] = std::exp(-0.5*static_cast<double>(t*t)/(p.blur_sigma*p.blur_sigma));
        }
        for (auto& k: kernel) k /= sum;
        for (int axis = 0; axis < 3; ++axis) blur_axis(field, p.dims, kernel, axis);
    }

    rng g(seed);
    std::vector<std::uint16_t> voxels(field.size());
    for (std::size_t i = 0; i < field.size(); ++i) {
        const double noise = p.noise_std > 0? g.normal(p.noise_mean, p.noise_std): p.noise_mean;
        const double v = std::clamp(field[i] + noise, 0.0, 65535.0);
        voxels[i] = static_cast<std::uint16_t>(round_half_away(v));
    }
    return volume(p.dims, p.origin, voxel_type::u16, std::move(voxels));
}

std::string_view to_string(error_kind k) noexcept {
    switch (k) {
    case error_kind::truncate_subtree: return "truncate_subtree";
    case error_kind::graft_foreign_branch: return "graft_foreign_branch";
    case error_kind::background_leak: break;
    }
    return "background_leak";
}

error_kind error_kind_from_string(std::string_view s) {
    if (s == "truncate_subtree") return error_kind::truncate_subtree;
    if (s == "graft_foreign_branch") return error_kind::graft_foreign_branch;
    if (s == "background_leak") return error_kind::background_leak;
    throw data_error("unknown error kind '" + std::string(s) + "'");
}

namespace {

struct scan_hit {
    point_id id;
    double d2;
};

// Nearest point of `r` by full scan; ties to the smaller id.
scan_hit scan_nearest(const vec3& q, const neuron_reconstruction& r) {
    scan_hit best{std::numeric_limits<point_id>::max(), std::numeric_limits<double>::infinity()};
    for (const auto& p: r.points()) {
        const double d2 = distance2(q, p.pos);
        if (d2 < best.d2 || (d2 == best.d2 && p.id < best.id)) best = {p.id, d2};
    }
    return best;
}

std::optional<point_id> scan_match(const vec3& q, const neuron_reconstruction& r, double threshold) {
    auto hit = scan_nearest(q, r);
    if (std::sqrt(hit.d2) < threshold) return hit.id;
    return std::nullopt;
}

bool far_from_all(const vec3& q, const neuron_reconstruction& r, double distance) {
    return scan_nearest(q, r).d2 > distance*distance;
}

} // anonymous namespace

poi_label_set exhaustive_poi_truth(const neuron_reconstruction& wrong, const neuron_reconstruction& correct,
                                   double threshold)
{
    poi_label_set out;
    out.neuron_id = wrong.neuron_id();
    out.wrong_id = wrong.reconstruction_id();
    out.correct_id = correct.reconstruction_id();
    out.threshold = threshold;

    const auto wp = wrong.points();
    for (std::size_t i = 0; i < wp.size(); ++i) {
        auto q = scan_match(wp[i].pos, correct, threshold);
        if (!q) continue;
        bool wrong_child = false, missing_child = false;
        for (auto c: wrong.child_ids_at(i)) {
            wrong_child = wrong_child || !scan_match(wrong.at(c).pos, correct, threshold);
        }
        for (auto c: correct.child_ids(*q)) {
            missing_child = missing_child || !scan_match(correct.at(c).pos, wrong, threshold);
        }
        if (wrong_child && missing_child) out.pairs.push_back({wp[i].id, *q, poi_reason::both});
        else if (wrong_child) out.pairs.push_back({wp[i].id, *q, poi_reason::wrong_child});
        else if (missing_child) out.pairs.push_back({wp[i].id, *q, poi_reason::missing_child});
    }
    std::sort(out.pairs.begin(), out.pairs.end(), [](const poi_pair& a, const poi_pair& b) { return a.poi < b.poi; });
    return out;
}

namespace {

class editor {
public:
    explicit editor(const neuron_reconstruction& r): points_(r.points().begin(), r.points().end()) {
        for (const auto& p: points_) {
            original_.insert(p.id);
            next_id_ = std::max(next_id_, p.id + 1);
        }
    }

    std::vector<point_id> attachable(bool non_root) const {
        std::vector<point_id> out;
        for (const auto& p: points_) {
            if (original_.count(p.id) && (!non_root || p.parent)) out.push_back(p.id);
        }
        return out;
    }

    const neuron_point& at(point_id id) const {
        return *std::find_if(points_.begin(), points_.end(), [id](const neuron_point& p) { return p.id == id; });
    }

    std::unordered_set<point_id> subtree(point_id id) const {
        std::unordered_map<point_id, std::vector<point_id>> kids;
        for (const auto& p: points_) {
            if (p.parent) kids[*p.parent].push_back(p.id);
        }
        std::unordered_set<point_id> out;
        std::vector<point_id> stack{id};
        while (!stack.empty()) {
            auto n = stack.back();
            stack.pop_back();
            out.insert(n);
            for (auto c: kids[n]) stack.push_back(c);
        }
        return out;
    }

    // True when no point outside `skip` lies within `threshold` of `pos`.
    bool isolated(const vec3& pos, const std::unordered_set<point_id>& skip, double threshold) const {
        return std::none_of(points_.begin(), points_.end(), [&](const neuron_point& p) {
            return !skip.count(p.id) && std::sqrt(distance2(p.pos, pos)) < threshold;
        });
    }

    // Removes `id` and everything below it; returns the number removed.
    std::size_t remove_subtree(point_id id) {
        const auto doomed = subtree(id);
        std::erase_if(points_, [&](const neuron_point& p) { return doomed.count(p.id) != 0; });
        return doomed.size();
    }

    point_id add(point_id parent, int type, const vec3& pos) {
        const auto id = next_id_++;
        points_.push_back({id, type, pos, 1.0, parent});
        return id;
    }

    std::vector<neuron_point> take() && { return std::move(points_); }

private:
    std::vector<neuron_point> points_;
    std::unordered_set<point_id> original_;
    point_id next_id_ = 1;
};

template <typename T>
const T& pick(rng& g, const std::vector<T>& items) {
    return items[static_cast<std::size_t>(g.below(items.size()))];
}

// Chain of up to n neighbour points starting at the far point nearest to
// `anchor`, following smallest-id children while points stay far from `r`.
std::vector<neuron_point> graft_chain(const vec3& anchor, const neuron_reconstruction& r,
                                      std::span<const neuron_reconstruction> neighbors, double min_disp,
                                      std::size_t n)
{
    const neuron_reconstruction* best_rec = nullptr;
    point_id best_id = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (const auto& nb: neighbors) {
        for (const auto& q: nb.points()) {
            const double d2 = distance2(anchor, q.pos);
            if (d2 < best_d2 && far_from_all(q.pos, r, min_disp)) {
                best_rec = &nb;
                best_id = q.id;
                best_d2 = d2;
            }
        }
    }
    std::vector<neuron_point> chain;
    if (!best_rec) return chain;
    auto current = best_id;
    while (chain.size() < n) {
        chain.push_back(best_rec->at(current));
        auto kids = best_rec->child_ids(current);
        auto next = std::find_if(kids.begin(), kids.end(),
            [&](point_id c) { return far_from_all(best_rec->at(c).pos, r, min_disp); });
        if (next == kids.end()) break;
        current = *next;
    }
    return chain;
}

std::vector<vec3> leak_walk(const vec3& anchor, const neuron_reconstruction& r, const error_spec& spec, rng& g) {
    std::optional<bounds_box> box;
    if (spec.bounds) box = box_of(*spec.bounds, spec.origin, 0.0);
    auto acceptable = [&](const vec3& v) {
        return (!box || box->contains(v)) && far_from_all(v, r, spec.min_displacement);
    };

    std::vector<vec3> walk;
    vec3 dir{};
    for (int attempt = 0; attempt < 100; ++attempt) {
        dir = random_unit(g);
        const vec3 cand = anchor + g.uniform(1.05, 2.0)*spec.min_displacement*dir;
        if (acceptable(cand)) {
            walk.push_back(cand);
            break;
        }
    }
    if (walk.empty()) return walk;
    while (walk.size() < spec.branch_points) {
        bool placed = false;
        for (int attempt = 0; attempt < 20 && !placed; ++attempt) {
            const vec3 d = normalized(dir + 0.5*random_unit(g));
            const vec3 cand = walk.back() + spec.min_displacement*d;
            if (acceptable(cand)) {
                walk.push_back(cand);
                dir = d;
                placed = true;
            }
        }
        if (!placed) break;
    }
    return walk;
}

} // anonymous namespace

injection inject_errors(const neuron_reconstruction& r, std::span<const neuron_reconstruction> neighbors,
                        const error_spec& spec, reconstruction_info wrong_info, const match_config& cfg)
{
    cfg.validate();
    if (!(spec.min_displacement > cfg.threshold)) {
        throw data_error("error displacement must exceed the match threshold");
    }
    if (spec.branch_points == 0) throw data_error("injected branches need at least one point");

    rng g(spec.seed);
    editor ed(r);
    std::vector<injected_error> log;

    for (std::size_t e = 0; e < spec.count; ++e) {
        switch (spec.kind) {
        case error_kind::truncate_subtree: {
            auto candidates = ed.attachable(true);
            if (candidates.empty()) throw data_error("reconstruction has no subtree to truncate");
            // Prefer a subtree whose root has no match once it is gone, so the
            // cut is visible as a POI at its parent.
            auto victim = pick(g, candidates);
            for (int attempt = 1; attempt < 32 && !ed.isolated(ed.at(victim).pos, ed.subtree(victim), cfg.threshold);
                 ++attempt) {
                victim = pick(g, candidates);
            }
            const auto parent = *ed.at(victim).parent;
            log.push_back({spec.kind, parent, ed.remove_subtree(victim)});
            break;
        }
        case error_kind::graft_foreign_branch: {
            if (neighbors.empty()) throw data_error("no neighbouring reconstruction to graft from");
            auto candidates = ed.attachable(false);
            bool done = false;
            for (int attempt = 0; attempt < 32 && !done && !candidates.empty(); ++attempt) {
                const auto attach = pick(g, candidates);
                auto chain = graft_chain(ed.at(attach).pos, r, neighbors, spec.min_displacement, spec.branch_points);
                if (chain.empty()) continue;
                auto parent = attach;
                for (const auto& q: chain) parent = ed.add(parent, q.type_code, q.pos);
                log.push_back({spec.kind, attach, chain.size()});
                done = true;
            }
            if (!done) throw data_error("no neighbour point lies far enough from the reconstruction to graft");
            break;
        }
        case error_kind::background_leak: {
            auto candidates = ed.attachable(false);
            bool done = false;
            for (int attempt = 0; attempt < 32 && !done && !candidates.empty(); ++attempt) {
                const auto attach = pick(g, candidates);
                auto walk = leak_walk(ed.at(attach).pos, r, spec, g);
                if (walk.empty()) continue;
                auto parent = attach;
                for (const auto& v: walk) parent = ed.add(parent, ed.at(attach).type_code, v);
                log.push_back({spec.kind, attach, walk.size()});
                done = true;
            }
            if (!done) throw data_error("could not place a background leak away from the reconstruction");
            break;
        }
        }
    }

    wrong_info.neuron_id = r.neuron_id();
    neuron_reconstruction wrong(std::move(wrong_info), std::move(ed).take());
    auto truth = exhaustive_poi_truth(wrong, r, cfg.threshold);
    return {std::move(wrong), std::move(truth), std::move(log)};
}

std::vector<neuron_entry> generate_corpus(const corpus_params& cp, unsigned workers) {
    cp.neuron.validate();
    const match_config cfg{cp.threshold};
    cfg.validate();
    constexpr error_kind rotation[3] = {error_kind::truncate_subtree, error_kind::graft_foreign_branch,
                                        error_kind::background_leak};

    std::vector<std::optional<neuron_entry>> slots(cp.neurons);
    parallel_for(cp.neurons, workers, [&](std::size_t begin, std::size_t end) {
        for (auto i = begin; i < end; ++i) {
            const auto stream = derive_seed(cp.seed, i);
            const std::uint64_t neuron_id = i + 1, base = 10*neuron_id;

            auto correct = generate_neuron(cp.neuron, derive_seed(stream, 0), {neuron_id, base, "correct"});
            rng g(derive_seed(stream, 1));
            const vec3 droot = correct.points()[0].pos + cp.neuron.neighbor_distance*random_unit(g);
            auto distractor = generate_neuron(cp.neuron, derive_seed(stream, 2),
                                              {1'000'000 + neuron_id, base + 9, "distractor"}, droot);
            const neuron_reconstruction both[2] = {correct, distractor};
            auto image = render_volume(both, cp.neuron, derive_seed(stream, 3));

            std::vector<wrong_entry> wrong;
            const std::size_t rounds = 1 + static_cast<std::size_t>(g.below(2));
            for (std::size_t k = 1; k <= rounds; ++k) {
                error_spec spec;
                spec.kind = rotation[(2*i + k - 1)%3];
                spec.count = cp.errors_per_reconstruction;
                spec.min_displacement = cp.min_displacement;
                spec.branch_points = cp.branch_points;
                spec.seed = derive_seed(stream, 10 + k);
                spec.bounds = cp.neuron.dims;
                spec.origin = cp.neuron.origin;
                reconstruction_info info{neuron_id, base + k, "wrong_" + std::to_string(k)};
                try {
                    auto inj = inject_errors(correct, std::span(&distractor, 1), spec, info, cfg);
                    wrong.push_back({std::move(inj.wrong), std::move(inj.truth), std::move(inj.log)});
                }
                catch (const data_error&) {
                    // A graft needs distractor points clear of the neuron;
                    // fall back to a leak when the two barely separate.
                    spec.kind = error_kind::background_leak;
                    auto inj = inject_errors(correct, std::span(&distractor, 1), spec, info, cfg);
                    wrong.push_back({std::move(inj.wrong), std::move(inj.truth), std::move(inj.log)});
                }
            }
            image.set_name("volume.raw");
            slots[i] = neuron_entry{neuron_id, std::move(correct), std::move(distractor), std::move(wrong), std::move(image)};
        }
    });

    std::vector<neuron_entry> out;
    out.reserve(slots.size());
    for (auto& s: slots) out.push_back(std::move(*s));
    return out;
}

namespace {

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot create " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw io_error("write failure on " + path.string());
}

} // anonymous namespace

void write_corpus(const std::filesystem::path& dir, std::span<const neuron_entry> corpus, const corpus_params& cp) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw io_error("cannot create directory " + dir.string());

    manifest m;
    m.threshold = cp.threshold;
    for (const auto& n: corpus) {
        char name[32];
        std::snprintf(name, sizeof name, "neuron_%04llu", static_cast<unsigned long long>(n.neuron_id));
        const auto sub = dir/name;
        std::filesystem::create_directories(sub, ec);
        if (ec) throw io_error("cannot create directory " + sub.string());

        manifest_neuron mn;
        mn.neuron_id = n.neuron_id;
        mn.volume = save_volume_raw(sub/"volume.raw", n.image);
        save_swc(sub/"correct.swc", n.correct);
        save_swc(sub/"distractor.swc", n.distractor);
        mn.correct = {n.correct.reconstruction_id(), sub/"correct.swc", std::nullopt, std::nullopt};
        for (std::size_t k = 0; k < n.wrong.size(); ++k) {
            const auto& w = n.wrong[k];
            const auto swc = sub/("wrong_" + std::to_string(k + 1) + ".swc");
            const auto truth = sub/("truth_" + std::to_string(k + 1) + ".json");
            save_swc(swc, w.reconstruction);
            auto tj = to_json(w.truth);
            nlohmann::json errors = nlohmann::json::array();
            for (const auto& e: w.log) {
                errors.push_back({{"kind", to_string(e.kind)}, {"attach_id", e.attach}, {"points", e.points}});
            }
            tj["errors"] = std::move(errors);
            write_json(truth, tj);
            mn.wrong.push_back({w.reconstruction.reconstruction_id(), swc, std::nullopt, truth});
        }
        m.neurons.push_back(std::move(mn));
    }
    auto mj = to_json(m, dir);
    mj["seed"] = cp.seed;
    write_json(dir/"manifest.json", mj);
}

} // namespace neuroqc::synth
