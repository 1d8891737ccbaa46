#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include <neuroqc/matching.hpp>
#include <neuroqc/poi.hpp>
#include <neuroqc/swc.hpp>
#include <neuroqc/volume.hpp>

namespace neuroqc::synth {

struct params {
    dims3 dims{64, 64, 64};
    int3 origin{0, 0, 0};
    double spacing = 5.0;               // distance between consecutive points
    double branch_probability = 0.08;   // per point
    double mean_branch_length = 8.0;    // points
    std::size_t max_points = 200;
    std::size_t min_points = 30;        // branching trees are regrown up to this size
    double margin = 2.0;                // keep points this far inside the volume
    double amplitude = 2000.0;          // tube intensity before blur
    double blur_sigma = 1.0;            // voxels; 0 disables blurring
    double noise_mean = 100.0;
    double noise_std = 10.0;
    double neighbor_distance = 10.0;    // root offset of the distractor neuron

    // Throws data_error on non-positive sizes or a spacing that does not fit.
    void validate() const;
};

// Random branching tree grown inside the volume. Point ids run 1..n, point 1
// is the soma root and consecutive points on a branch are exactly `spacing`
// apart. With branch_probability 0 the result is one unbranched path.
// `root` overrides the randomly placed soma position.
neuron_reconstruction generate_neuron(const params& p, std::uint64_t seed, reconstruction_info info,
                                      std::optional<vec3> root = std::nullopt);

// Gaussian-blurred rasterized tubes scaled by amplitude, plus Gaussian noise,
// clipped and rounded to u16.
volume render_volume(std::span<const neuron_reconstruction> neurons, const params& p, std::uint64_t seed);

enum class error_kind { truncate_subtree, graft_foreign_branch, background_leak };

std::string_view to_string(error_kind k) noexcept;
error_kind error_kind_from_string(std::string_view s);

struct error_spec {
    error_kind kind = error_kind::truncate_subtree;
    std::size_t count = 1;
    double min_displacement = 6.0;      // must exceed the match threshold
    std::size_t branch_points = 4;      // points added by graft / leak
    std::uint64_t seed = 0;
    std::optional<dims3> bounds;        // keep leaked points inside this grid
    int3 origin;
};

struct injected_error {
    error_kind kind;
    point_id attach = 0;                // parent of the removed / added branch
    std::size_t points = 0;             // points removed or added

    friend bool operator==(const injected_error&, const injected_error&) = default;
};

struct injection {
    neuron_reconstruction wrong;
    poi_label_set truth;
    std::vector<injected_error> log;
};

// Apply spec.count errors of spec.kind to a copy of `r`.
//
//   truncate_subtree      drop the subtree below a random non-root point,
//                         preferring one whose root is left without a match;
//   graft_foreign_branch  attach a chain copied from a neighbour, starting at
//                         the neighbour point nearest the attachment that is
//                         farther than min_displacement from all of `r`;
//   background_leak       attach a random walk whose points all lie farther
//                         than min_displacement from `r`.
//
// Attachments are always original points of `r`. `truth` is computed by an
// exhaustive scan of the POI definition against `r`, independent of the
// indexed matcher.
injection inject_errors(const neuron_reconstruction& r, std::span<const neuron_reconstruction> neighbors,
                        const error_spec& spec, reconstruction_info wrong_info,
                        const match_config& cfg = {});

// The POI definition evaluated by exhaustive nearest-point scans.
poi_label_set exhaustive_poi_truth(const neuron_reconstruction& wrong, const neuron_reconstruction& correct,
                                   double threshold);

// --- corpus ---------------------------------------------------------------

struct corpus_params {
    std::size_t neurons = 40;
    std::uint64_t seed = 0;
    params neuron;
    double threshold = default_match_threshold;
    double min_displacement = 6.0;
    std::size_t errors_per_reconstruction = 1;
    std::size_t branch_points = 4;
};

struct wrong_entry {
    neuron_reconstruction reconstruction;
    poi_label_set truth;
    std::vector<injected_error> log;
};

struct neuron_entry {
    std::uint64_t neuron_id = 0;
    neuron_reconstruction correct;
    neuron_reconstruction distractor;   // neighbouring neuron rendered into the same volume
    std::vector<wrong_entry> wrong;     // one or two
    volume image;
};

// Neuron i gets id i+1; its correct reconstruction id is 10*(i+1), wrong
// ones 10*(i+1)+1 and +2, the distractor 10*(i+1)+9. Error kinds rotate over
// the wrong reconstructions so every kind is represented. Each neuron draws
// from its own seed stream, so output does not depend on `workers`.
std::vector<neuron_entry> generate_corpus(const corpus_params& cp, unsigned workers = 1);

// Write the corpus under `dir`:
//   manifest.json, neuron_NNNN/{correct,distractor,wrong_K}.swc,
//   neuron_NNNN/truth_K.json, neuron_NNNN/volume.{raw,json}
void write_corpus(const std::filesystem::path& dir, std::span<const neuron_entry> corpus,
                  const corpus_params& cp);

} // namespace neuroqc::synth
