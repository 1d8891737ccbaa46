#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <neuroqc/error.hpp>
#include <neuroqc/swc.hpp>

namespace neuroqc {

neurite_kind kind_of_code(int code) noexcept {
    switch (code) {
    case 1: return neurite_kind::soma;
    case 2: return neurite_kind::axon;
    case 3:
    case 4: return neurite_kind::dendrite;
    default: return neurite_kind::other;
    }
}

std::string_view to_string(neurite_kind k) noexcept {
    switch (k) {
    case neurite_kind::soma: return "soma";
    case neurite_kind::axon: return "axon";
    case neurite_kind::dendrite: return "dendrite";
    case neurite_kind::other: break;
    }
    return "other";
}

neuron_reconstruction::neuron_reconstruction(reconstruction_info info, std::vector<neuron_point> points):
    info_(std::move(info)),
    points_(std::move(points))
{
    const auto n = points_.size();
    index_.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& p = points_[i];
        if (p.id <= 0) {
            throw validation_error("point id " + std::to_string(p.id) + " is not positive");
        }
        if (!(p.radius > 0)) {
            throw validation_error("point " + std::to_string(p.id) + " has non-positive radius");
        }
        if (!index_.emplace(p.id, i).second) {
            throw validation_error("duplicate point id " + std::to_string(p.id));
        }
    }

    children_.resize(n);
    std::vector<std::size_t> roots;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& p = points_[i];
        if (!p.parent) {
            roots.push_back(i);
            continue;
        }
        if (*p.parent == p.id) {
            throw validation_error("point " + std::to_string(p.id) + " is its own parent");
        }
        auto it = index_.find(*p.parent);
        if (it == index_.end()) {
            throw validation_error("point " + std::to_string(p.id) + " has unknown parent " + std::to_string(*p.parent));
        }
        children_[it->second].push_back(p.id);
    }
    for (auto& c: children_) std::sort(c.begin(), c.end());

    if (roots.empty()) {
        throw validation_error(n? "reconstruction has no root (parent cycle)": "reconstruction has no root (no points)");
    }

    // Every point has at most one parent, so anything unreachable from a root
    // sits on or below a cycle.
    std::vector<std::size_t> stack = roots;
    std::size_t reached = 0;
    while (!stack.empty()) {
        auto i = stack.back();
        stack.pop_back();
        ++reached;
        for (auto c: children_[i]) stack.push_back(index_.at(c));
    }
    if (reached != n) {
        throw validation_error("parent graph contains a cycle (" + std::to_string(n - reached) + " unreachable points)");
    }
}

bool neuron_reconstruction::contains(point_id id) const noexcept {
    return index_.count(id) != 0;
}

std::size_t neuron_reconstruction::index_of(point_id id) const {
    auto it = index_.find(id);
    if (it == index_.end()) {
        throw std::out_of_range("unknown point id " + std::to_string(id));
    }
    return it->second;
}

std::vector<neuron_point> neuron_reconstruction::children(point_id id) const {
    std::vector<neuron_point> out;
    for (auto c: child_ids(id)) out.push_back(at(c));
    return out;
}

std::vector<point_id> neuron_reconstruction::roots() const {
    std::vector<point_id> out;
    for (const auto& p: points_) {
        if (p.is_root()) out.push_back(p.id);
    }
    return out;
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        auto start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
        if (i > start) fields.push_back(line.substr(start, i - start));
    }
    return fields;
}

template <typename T>
T parse_number(std::string_view field, const char* what, std::size_t line) {
    T value{};
    auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || end != field.data() + field.size()) {
        throw parse_error("invalid " + std::string(what) + " '" + std::string(field) + "'", line);
    }
    if constexpr (std::is_floating_point_v<T>) {
        if (!std::isfinite(value)) {
            throw parse_error("non-finite " + std::string(what) + " '" + std::string(field) + "'", line);
        }
    }
    return value;
}

} // anonymous namespace

neuron_reconstruction parse_swc(std::istream& in, reconstruction_info info) {
    std::vector<neuron_point> points;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view view(line);
        if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
        auto first = view.find_first_not_of(" \t");
        if (first == std::string_view::npos || view[first] == '#') continue;

        auto fields = split_fields(view);
        if (fields.size() < 7) {
            throw parse_error("expected 7 fields, found " + std::to_string(fields.size()), lineno);
        }
        neuron_point p;
        p.id = parse_number<point_id>(fields[0], "id", lineno);
        if (p.id <= 0) throw parse_error("id must be a positive integer", lineno);
        p.type_code = parse_number<int>(fields[1], "type", lineno);
        p.pos.x = parse_number<double>(fields[2], "x", lineno);
        p.pos.y = parse_number<double>(fields[3], "y", lineno);
        p.pos.z = parse_number<double>(fields[4], "z", lineno);
        p.radius = parse_number<double>(fields[5], "radius", lineno);
        auto parent = parse_number<point_id>(fields[6], "parent", lineno);
        if (parent != -1) p.parent = parent;
        points.push_back(p);
    }
    if (in.bad()) throw io_error("read failure while parsing SWC");
    return neuron_reconstruction(std::move(info), std::move(points));
}

neuron_reconstruction parse_swc(std::string_view text, reconstruction_info info) {
    std::istringstream in{std::string(text)};
    return parse_swc(in, std::move(info));
}

neuron_reconstruction load_swc(const std::filesystem::path& path, reconstruction_info info) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path.string());
    if (info.label.empty()) info.label = path.filename().string();
    return parse_swc(in, std::move(info));
}

namespace {

void append_double(std::string& out, double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, end);
}

} // anonymous namespace

std::string serialize_swc(const neuron_reconstruction& r) {
    std::string out;
    out.reserve(48*r.size() + 64);
    out += "# neuroqc SWC; coordinates in voxel units\n";
    out += "# id type x y z radius parent\n";
    for (const auto& p: r.points()) {
        out += std::to_string(p.id);
        out += ' ';
        out += std::to_string(p.type_code);
        for (double v: {p.pos.x, p.pos.y, p.pos.z, p.radius}) {
            out += ' ';
            append_double(out, v);
        }
        out += ' ';
        out += p.parent? std::to_string(*p.parent): std::string("-1");
        out += '\n';
    }
    return out;
}

void save_swc(const std::filesystem::path& path, const neuron_reconstruction& r) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot create " + path.string());
    out << serialize_swc(r);
    if (!out) throw io_error("write failure on " + path.string());
}

} // namespace neuroqc
