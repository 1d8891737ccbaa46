#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include <unistd.h>

#include <neuroqc/rng.hpp>
#include <neuroqc/swc.hpp>

namespace testing {

namespace fs = std::filesystem;

// Fresh directory under the system temp dir, removed on destruction.
class temp_dir {
public:
    explicit temp_dir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path()
              / ("neuroqc_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~temp_dir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    temp_dir(const temp_dir&) = delete;
    temp_dir& operator=(const temp_dir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_/name; }

private:
    fs::path path_;
};

inline std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_text(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    out << s;
}

// Relative path -> contents for every regular file below `dir`.
inline std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e: fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) out[fs::relative(e.path(), dir).generic_string()] = read_bytes(e.path());
    }
    return out;
}

inline neuroqc::neuron_point pt(neuroqc::point_id id, double x, double y, double z,
                                std::optional<neuroqc::point_id> parent = std::nullopt, int type = 3) {
    return {id, type, {x, y, z}, 1.0, parent};
}

// Chain 1 -> 2 -> ... -> n along x with the given step.
inline neuroqc::neuron_reconstruction chain(std::size_t n, double step = 10.0, std::uint64_t rid = 0) {
    std::vector<neuroqc::neuron_point> pts;
    for (std::size_t i = 1; i <= n; ++i) {
        const auto id = static_cast<neuroqc::point_id>(i);
        pts.push_back(pt(id, step*static_cast<double>(i), 0, 0, i == 1? std::nullopt: std::optional(id - 1)));
    }
    return neuroqc::neuron_reconstruction({1, rid, "chain"}, std::move(pts));
}

// Random tree: each point hangs off a uniformly chosen earlier one. With
// grid > 0 coordinates are multiples of `grid`, which produces exact ties.
inline neuroqc::neuron_reconstruction random_tree(std::size_t n, std::uint64_t seed, double extent,
                                                  double grid = 0, std::uint64_t rid = 0) {
    neuroqc::rng g(seed);
    auto coord = [&] {
        const double v = g.uniform(0, extent);
        return grid > 0? std::round(v/grid)*grid: v;
    };
    std::vector<neuroqc::neuron_point> pts;
    pts.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::optional<neuroqc::point_id> parent;
        if (i > 0) parent = static_cast<neuroqc::point_id>(1 + g.below(i));
        pts.push_back({static_cast<neuroqc::point_id>(i + 1), 3, {coord(), coord(), coord()}, 1.0, parent});
    }
    return neuroqc::neuron_reconstruction({1, rid, "random"}, std::move(pts));
}

} // namespace testing
