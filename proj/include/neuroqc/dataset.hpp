#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include <neuroqc/patch.hpp>
#include <neuroqc/poi.hpp>
#include <neuroqc/swc.hpp>
#include <neuroqc/volume.hpp>

namespace neuroqc {

enum class sample_group: std::uint8_t { poi = 0, match_control = 1, random_control = 2 };

std::string_view to_string(sample_group g) noexcept;

struct sample_record {
    std::uint64_t neuron_id = 0;
    std::uint64_t reconstruction_id = 0;
    point_id point = 0;
    std::uint8_t label = 0;     // 1 iff group == poi
    sample_group group = sample_group::match_control;
    patch data;

    friend bool operator==(const sample_record&, const sample_record&) = default;
};

// --- neuron-level folds -------------------------------------------------

struct fold_split {
    unsigned k = 5;
    std::uint64_t seed = 0;
    std::map<std::uint64_t, unsigned> assignment;   // neuron id -> fold

    unsigned fold_of(std::uint64_t neuron_id) const;
    std::vector<std::size_t> fold_sizes() const;
    std::vector<std::uint64_t> neurons_in(unsigned fold) const;

    friend bool operator==(const fold_split&, const fold_split&) = default;
};

// Shuffle the neuron ids with `seed`, then deal them round-robin into k
// folds, so fold sizes differ by at most one. Everything derived from a
// neuron (reconstructions, samples) inherits its fold.
fold_split split_folds(std::span<const std::uint64_t> neuron_ids, unsigned k, std::uint64_t seed);

nlohmann::json to_json(const fold_split& f);
fold_split fold_split_from_json(const nlohmann::json& j);

// --- .nqcd files --------------------------------------------------------
//
// Little-endian throughout.
//   header  "NQCD", u32 version (1), u32 patch_dim (32), u32 channels (2),
//           u64 record count                                     24 bytes
//   record  u64 neuron_id, u64 reconstruction_id, u64 point_id, u8 label,
//           u8 group, 6 zero bytes, 2*32^3 f32 payload (channel, z, y, x),
//           u32 CRC-32 of the payload bytes
// Every record has the same size, so record i starts at
// header_size + i*record_stride.

namespace nqcd {
inline constexpr std::uint32_t version = 1;
inline constexpr std::size_t header_size = 24;
inline constexpr std::size_t record_header_size = 32;
inline constexpr std::size_t payload_floats = patch_channels*default_patch_size*default_patch_size*default_patch_size;
inline constexpr std::size_t payload_size = 4*payload_floats;
inline constexpr std::size_t record_stride = record_header_size + payload_size + 4;
} // namespace nqcd

// Appends records to a new file and patches the count in on close().
class dataset_writer {
public:
    explicit dataset_writer(const std::filesystem::path& path);
    ~dataset_writer();
    dataset_writer(const dataset_writer&) = delete;
    dataset_writer& operator=(const dataset_writer&) = delete;

    void append(const sample_record& r);
    std::uint64_t count() const noexcept { return count_; }
    void close();

private:
    std::filesystem::path path_;
    std::ofstream out_;
    std::uint64_t count_ = 0;
    std::vector<unsigned char> buffer_;
};

// Read-only memory-mapped view of an .nqcd file. The header and file length
// are checked on open; each record's CRC is checked when it is read. read()
// is const and safe to call from concurrent threads.
class dataset_reader {
public:
    explicit dataset_reader(const std::filesystem::path& path);
    ~dataset_reader();
    dataset_reader(const dataset_reader&) = delete;
    dataset_reader& operator=(const dataset_reader&) = delete;

    std::uint64_t size() const noexcept { return count_; }
    sample_record read(std::uint64_t i) const;

private:
    std::filesystem::path path_;
    const unsigned char* base_ = nullptr;
    std::size_t length_ = 0;
    std::uint64_t count_ = 0;
};

void export_dataset(const std::filesystem::path& path, std::span<const sample_record> records);
std::vector<sample_record> import_dataset(const std::filesystem::path& path);

// --- sample assembly ----------------------------------------------------

struct corpus_view {
    std::map<std::uint64_t, const neuron_reconstruction*> reconstructions;  // by reconstruction id
    std::map<std::uint64_t, const volume*> volumes;                         // by neuron id
};

// One poi record (label 1, cropped against the wrong reconstruction's binary
// map) followed by one match_control record (label 0, against the correct
// reconstruction's map) for each pair, in label-set order.
std::vector<sample_record> build_pairs(std::span<const poi_label_set> labelsets, const corpus_view& corpus,
                                       unsigned workers = 1);

// random_control records for the given points.
std::vector<sample_record> build_controls(std::span<const point_ref> points, const corpus_view& corpus,
                                          unsigned workers = 1);

} // namespace neuroqc
