#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <json.hpp>

namespace neuroqc {

// Corpus description consumed by the crop, pool and split commands:
//
//   {"threshold": 4, "coordinate_units": "voxel",
//    "neurons": [{"neuron_id": 1, "volume": "neuron_0001/volume.json",
//                 "correct": {"id": 10, "swc": "neuron_0001/correct.swc"},
//                 "wrong": [{"id": 11, "swc": "neuron_0001/wrong_1.swc",
//                            "labels": "...", "truth": "..."}]}]}
//
// Relative paths are resolved against the manifest's directory. "labels"
// (a precomputed POI label set) and "truth" are optional.
struct manifest_reconstruction {
    std::uint64_t id = 0;
    std::filesystem::path swc;
    std::optional<std::filesystem::path> labels;
    std::optional<std::filesystem::path> truth;
};

struct manifest_neuron {
    std::uint64_t neuron_id = 0;
    std::filesystem::path volume;
    manifest_reconstruction correct;
    std::vector<manifest_reconstruction> wrong;
};

struct manifest {
    double threshold = 4.0;
    std::vector<manifest_neuron> neurons;
};

manifest load_manifest(const std::filesystem::path& path);
manifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& base);
// Paths are written relative to `base` when they lie below it.
nlohmann::json to_json(const manifest& m, const std::filesystem::path& base);

} // namespace neuroqc
