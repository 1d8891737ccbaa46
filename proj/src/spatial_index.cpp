#include <algorithm>
#include <cmath>
#include <limits>

#include <neuroqc/error.hpp>
#include <neuroqc/spatial_index.hpp>

namespace neuroqc {

namespace {

double coord(const vec3& v, unsigned axis) noexcept {
    return axis == 0? v.x: axis == 1? v.y: v.z;
}

std::vector<spatial_index::entry> entries_of(const neuron_reconstruction& r) {
    std::vector<spatial_index::entry> out;
    out.reserve(r.size());
    for (const auto& p: r.points()) out.push_back({p.id, p.pos});
    return out;
}

} // anonymous namespace

spatial_index::spatial_index(const neuron_reconstruction& r, std::size_t leaf_size):
    spatial_index(entries_of(r), leaf_size)
{}

spatial_index::spatial_index(std::vector<entry> entries, std::size_t leaf_size):
    entries_(std::move(entries)),
    leaf_size_(std::max<std::size_t>(leaf_size, 1))
{
    if (entries_.empty()) {
        throw data_error("cannot build a spatial index over an empty point set");
    }
    if (entries_.size() > std::numeric_limits<std::uint32_t>::max()) {
        throw data_error("too many points for spatial index");
    }
    nodes_.reserve(2*entries_.size()/leaf_size_ + 1);
    build(0, static_cast<std::uint32_t>(entries_.size()));
}

std::int32_t spatial_index::build(std::uint32_t begin, std::uint32_t end) {
    const auto self = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back({begin, end});
    if (end - begin <= leaf_size_) return self;

    vec3 lo = entries_[begin].pos, hi = lo;
    for (auto i = begin; i < end; ++i) {
        const auto& p = entries_[i].pos;
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
    }
    const double spread[3] = {hi.x - lo.x, hi.y - lo.y, hi.z - lo.z};
    const unsigned axis = static_cast<unsigned>(std::max_element(spread, spread + 3) - spread);
    if (spread[axis] == 0) return self; // all coincident: keep as one leaf

    const auto mid = begin + (end - begin)/2;
    std::nth_element(entries_.begin() + begin, entries_.begin() + mid, entries_.begin() + end,
        [axis](const entry& a, const entry& b) {
            auto ca = coord(a.pos, axis), cb = coord(b.pos, axis);
            return ca < cb || (ca == cb && a.id < b.id);
        });

    // Left holds coordinates <= split, right holds coordinates >= split.
    const double split = coord(entries_[mid].pos, axis);
    const auto left = build(begin, mid);
    const auto right = build(mid, end);
    auto& n = nodes_[self];
    n.axis = static_cast<std::uint8_t>(axis);
    n.split = split;
    n.left = left;
    n.right = right;
    return self;
}

neighbor spatial_index::nearest(const vec3& q) const {
    neighbor best{std::numeric_limits<point_id>::max(), std::numeric_limits<double>::infinity()};
    search_nearest(0, q, best);
    return best;
}

void spatial_index::search_nearest(std::int32_t ni, const vec3& q, neighbor& best) const {
    const auto& n = nodes_[ni];
    if (n.left < 0) {
        for (auto i = n.begin; i < n.end; ++i) {
            neighbor c{entries_[i].id, distance2(q, entries_[i].pos)};
            if (closer(c, best)) best = c;
        }
        return;
    }
    const double diff = coord(q, n.axis) - n.split;
    const auto near = diff < 0? n.left: n.right;
    const auto far = diff < 0? n.right: n.left;
    search_nearest(near, q, best);
    // <= keeps equal-distance candidates with smaller ids reachable.
    if (diff*diff <= best.distance2) search_nearest(far, q, best);
}

std::vector<neighbor> spatial_index::within(const vec3& q, double radius) const {
    std::vector<neighbor> out;
    if (!(radius > 0)) return out;
    search_within(0, q, radius, radius*radius, out);
    std::sort(out.begin(), out.end(), closer);
    return out;
}

void spatial_index::search_within(std::int32_t ni, const vec3& q, double radius, double bound2, std::vector<neighbor>& out) const {
    const auto& n = nodes_[ni];
    if (n.left < 0) {
        for (auto i = n.begin; i < n.end; ++i) {
            auto d2 = distance2(q, entries_[i].pos);
            if (std::sqrt(d2) < radius) out.push_back({entries_[i].id, d2});
        }
        return;
    }
    const double diff = coord(q, n.axis) - n.split;
    // bound2 is only a pruning bound, so compare with slack: sqrt(d2) < radius
    // can hold for d2 marginally above fl(radius*radius).
    const double slack = bound2*(1 + 1e-12);
    if (diff <= 0 || diff*diff <= slack) search_within(n.left, q, radius, bound2, out);
    if (diff >= 0 || diff*diff <= slack) search_within(n.right, q, radius, bound2, out);
}

} // namespace neuroqc
