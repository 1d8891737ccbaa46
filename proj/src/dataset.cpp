#include <algorithm>
#include <cstring>
#include <unordered_map>

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>
#include <zlib.h>

#include <neuroqc/dataset.hpp>
#include <neuroqc/error.hpp>
#include <neuroqc/parallel.hpp>
#include <neuroqc/rng.hpp>

namespace neuroqc {

std::string_view to_string(sample_group g) noexcept {
    switch (g) {
    case sample_group::poi: return "poi";
    case sample_group::match_control: return "match_control";
    case sample_group::random_control: break;
    }
    return "random_control";
}

unsigned fold_split::fold_of(std::uint64_t neuron_id) const {
    auto it = assignment.find(neuron_id);
    if (it == assignment.end()) throw data_error("neuron " + std::to_string(neuron_id) + " has no fold");
    return it->second;
}

std::vector<std::size_t> fold_split::fold_sizes() const {
    std::vector<std::size_t> sizes(k, 0);
    for (const auto& [neuron, fold]: assignment) ++sizes.at(fold);
    return sizes;
}

std::vector<std::uint64_t> fold_split::neurons_in(unsigned fold) const {
    std::vector<std::uint64_t> out;
    for (const auto& [neuron, f]: assignment) {
        if (f == fold) out.push_back(neuron);
    }
    return out;
}

fold_split split_folds(std::span<const std::uint64_t> neuron_ids, unsigned k, std::uint64_t seed) {
    if (k < 2) throw data_error("fold count must be at least 2");
    if (neuron_ids.size() < k) {
        throw data_error("need at least " + std::to_string(k) + " neurons for " + std::to_string(k) + " folds");
    }
    std::vector<std::uint64_t> order(neuron_ids.begin(), neuron_ids.end());
    std::sort(order.begin(), order.end());
    if (std::adjacent_find(order.begin(), order.end()) != order.end()) {
        throw data_error("duplicate neuron id in fold split input");
    }
    rng gen(seed);
    gen.shuffle(std::span(order));

    fold_split out;
    out.k = k;
    out.seed = seed;
    for (std::size_t i = 0; i < order.size(); ++i) out.assignment[order[i]] = static_cast<unsigned>(i%k);
    return out;
}

nlohmann::json to_json(const fold_split& f) {
    nlohmann::json assignment = nlohmann::json::object();
    for (const auto& [neuron, fold]: f.assignment) assignment[std::to_string(neuron)] = fold;
    return {{"k", f.k}, {"seed", f.seed}, {"assignment", std::move(assignment)}};
}

fold_split fold_split_from_json(const nlohmann::json& j) {
    try {
        fold_split f;
        f.k = j.at("k").get<unsigned>();
        f.seed = j.at("seed").get<std::uint64_t>();
        if (f.k < 2) throw data_error("fold count must be at least 2");
        for (const auto& [key, value]: j.at("assignment").items()) {
            auto fold = value.get<unsigned>();
            if (fold >= f.k) throw data_error("fold index out of range for neuron " + key);
            f.assignment[std::stoull(key)] = fold;
        }
        return f;
    }
    catch (const nlohmann::json::exception& e) {
        throw data_error(std::string("malformed fold file: ") + e.what());
    }
    catch (const std::logic_error& e) {
        throw data_error(std::string("malformed neuron id in fold file: ") + e.what());
    }
}

namespace {

constexpr unsigned char magic[4] = {'N', 'Q', 'C', 'D'};

void put_u32(unsigned char* p, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) p[i] = static_cast<unsigned char>(v >> (8*i));
}

void put_u64(unsigned char* p, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) p[i] = static_cast<unsigned char>(v >> (8*i));
}

std::uint32_t get_u32(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8*i);
    return v;
}

std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8*i);
    return v;
}

std::uint32_t crc_of(const unsigned char* data, std::size_t n) {
    return static_cast<std::uint32_t>(::crc32(::crc32(0L, Z_NULL, 0), data, static_cast<uInt>(n)));
}

void encode_header(unsigned char* p, std::uint64_t count) {
    std::memcpy(p, magic, 4);
    put_u32(p + 4, nqcd::version);
    put_u32(p + 8, static_cast<std::uint32_t>(default_patch_size));
    put_u32(p + 12, static_cast<std::uint32_t>(patch_channels));
    put_u64(p + 16, count);
}

void check_record(const sample_record& r) {
    if (r.data.size != default_patch_size || r.data.data.size() != nqcd::payload_floats) {
        throw data_error("record for point " + std::to_string(r.point) + " does not hold a 32^3 x 2 patch");
    }
    if ((r.label == 1) != (r.group == sample_group::poi) || r.label > 1) {
        throw data_error("record for point " + std::to_string(r.point) + " has label inconsistent with its group");
    }
}

} // anonymous namespace

dataset_writer::dataset_writer(const std::filesystem::path& path):
    path_(path),
    out_(path, std::ios::binary | std::ios::trunc),
    buffer_(nqcd::record_stride)
{
    if (!out_) throw io_error("cannot create " + path.string());
    unsigned char header[nqcd::header_size];
    encode_header(header, 0);
    out_.write(reinterpret_cast<const char*>(header), sizeof header);
    if (!out_) throw io_error("write failure on " + path_.string());
}

dataset_writer::~dataset_writer() {
    try {
        close();
    }
    catch (...) {}
}

void dataset_writer::append(const sample_record& r) {
    if (!out_.is_open()) throw io_error("append to closed dataset " + path_.string());
    check_record(r);
    auto* p = buffer_.data();
    std::memset(p, 0, nqcd::record_header_size);
    put_u64(p, r.neuron_id);
    put_u64(p + 8, r.reconstruction_id);
    put_u64(p + 16, static_cast<std::uint64_t>(r.point));
    p[24] = r.label;
    p[25] = static_cast<unsigned char>(r.group);
    auto* payload = p + nqcd::record_header_size;
    for (std::size_t i = 0; i < nqcd::payload_floats; ++i) {
        std::uint32_t bits;
        std::memcpy(&bits, &r.data.data[i], 4);
        put_u32(payload + 4*i, bits);
    }
    put_u32(payload + nqcd::payload_size, crc_of(payload, nqcd::payload_size));
    out_.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(buffer_.size()));
    if (!out_) throw io_error("write failure on " + path_.string());
    ++count_;
}

void dataset_writer::close() {
    if (!out_.is_open()) return;
    unsigned char header[nqcd::header_size];
    encode_header(header, count_);
    out_.seekp(0);
    out_.write(reinterpret_cast<const char*>(header), sizeof header);
    out_.close();
    if (!out_) throw io_error("write failure on " + path_.string());
}

dataset_reader::dataset_reader(const std::filesystem::path& path):
    path_(path)
{
    int fd = ::open(path.c_str(), O_RDONLY);
    if (fd < 0) throw io_error("cannot open " + path.string());
    struct stat st{};
    if (::fstat(fd, &st) != 0) {
        ::close(fd);
        throw io_error("cannot stat " + path.string());
    }
    length_ = static_cast<std::size_t>(st.st_size);
    if (length_ > 0) {
        void* m = ::mmap(nullptr, length_, PROT_READ, MAP_PRIVATE, fd, 0);
        if (m == MAP_FAILED) {
            ::close(fd);
            throw io_error("cannot map " + path.string());
        }
        base_ = static_cast<const unsigned char*>(m);
    }
    ::close(fd);

    auto fail = [&](const std::string& msg) {
        if (base_) ::munmap(const_cast<unsigned char*>(base_), length_);
        base_ = nullptr;
        throw data_error(path.string() + ": " + msg);
    };
    if (length_ < nqcd::header_size) fail("truncated header");
    if (std::memcmp(base_, magic, 4) != 0) fail("bad magic, not an .nqcd file");
    if (auto v = get_u32(base_ + 4); v != nqcd::version) fail("unsupported version " + std::to_string(v));
    if (get_u32(base_ + 8) != default_patch_size || get_u32(base_ + 12) != patch_channels) {
        fail("unsupported patch geometry");
    }
    count_ = get_u64(base_ + 16);
    const auto body = length_ - nqcd::header_size;
    if (count_ > body/nqcd::record_stride) {
        fail("truncated: header declares " + std::to_string(count_) + " records, file holds "
             + std::to_string(body/nqcd::record_stride));
    }
    if (body != count_*nqcd::record_stride) {
        fail("record count mismatch: " + std::to_string(body - count_*nqcd::record_stride) + " trailing bytes");
    }
}

dataset_reader::~dataset_reader() {
    if (base_) ::munmap(const_cast<unsigned char*>(base_), length_);
}

sample_record dataset_reader::read(std::uint64_t i) const {
    if (i >= count_) throw std::out_of_range("record index out of range");
    const auto* p = base_ + nqcd::header_size + i*nqcd::record_stride;
    const auto* payload = p + nqcd::record_header_size;
    if (crc_of(payload, nqcd::payload_size) != get_u32(payload + nqcd::payload_size)) {
        throw data_error(path_.string() + ": checksum mismatch in record " + std::to_string(i));
    }
    sample_record r;
    r.neuron_id = get_u64(p);
    r.reconstruction_id = get_u64(p + 8);
    r.point = static_cast<point_id>(get_u64(p + 16));
    r.label = p[24];
    if (p[25] > static_cast<unsigned char>(sample_group::random_control)) {
        throw data_error(path_.string() + ": unknown group code in record " + std::to_string(i));
    }
    r.group = static_cast<sample_group>(p[25]);
    if ((r.label == 1) != (r.group == sample_group::poi) || r.label > 1) {
        throw data_error(path_.string() + ": label inconsistent with group in record " + std::to_string(i));
    }
    r.data.size = default_patch_size;
    r.data.data.resize(nqcd::payload_floats);
    for (std::size_t k = 0; k < nqcd::payload_floats; ++k) {
        auto bits = get_u32(payload + 4*k);
        std::memcpy(&r.data.data[k], &bits, 4);
    }
    return r;
}

void export_dataset(const std::filesystem::path& path, std::span<const sample_record> records) {
    for (const auto& r: records) check_record(r);
    dataset_writer w(path);
    for (const auto& r: records) w.append(r);
    w.close();
}

std::vector<sample_record> import_dataset(const std::filesystem::path& path) {
    dataset_reader reader(path);
    std::vector<sample_record> out;
    out.reserve(reader.size());
    for (std::uint64_t i = 0; i < reader.size(); ++i) out.push_back(reader.read(i));
    return out;
}

namespace {

const neuron_reconstruction& resolve(const corpus_view& corpus, std::uint64_t reconstruction_id) {
    auto it = corpus.reconstructions.find(reconstruction_id);
    if (it == corpus.reconstructions.end() || !it->second) {
        throw data_error("reconstruction " + std::to_string(reconstruction_id) + " is not in the corpus");
    }
    return *it->second;
}

const volume& volume_for(const corpus_view& corpus, std::uint64_t neuron_id) {
    auto it = corpus.volumes.find(neuron_id);
    if (it == corpus.volumes.end() || !it->second) {
        throw data_error("no volume for neuron " + std::to_string(neuron_id));
    }
    return *it->second;
}

struct crop_job {
    const neuron_reconstruction* rec;
    point_id point;
    sample_group group;
};

class map_cache {
public:
    explicit map_cache(const corpus_view& corpus): corpus_(corpus) {}

    const binary_map& get(const neuron_reconstruction& r) {
        auto it = maps_.find(r.reconstruction_id());
        if (it == maps_.end()) {
            const auto& vol = volume_for(corpus_, r.neuron_id());
            it = maps_.emplace(r.reconstruction_id(), rasterize(r, vol).map).first;
        }
        return it->second;
    }

private:
    const corpus_view& corpus_;
    std::unordered_map<std::uint64_t, binary_map> maps_;
};

std::vector<sample_record> run_jobs(const std::vector<crop_job>& jobs, const corpus_view& corpus, unsigned workers) {
    // Rasterize serially up front; cropping then only reads shared state.
    map_cache maps(corpus);
    std::vector<const binary_map*> job_maps;
    for (const auto& j: jobs) {
        if (!j.rec->contains(j.point)) {
            throw data_error("point " + std::to_string(j.point) + " not found in reconstruction "
                + std::to_string(j.rec->reconstruction_id()));
        }
        job_maps.push_back(&maps.get(*j.rec));
    }

    std::vector<sample_record> out(jobs.size());
    parallel_for(jobs.size(), workers, [&](std::size_t begin, std::size_t end) {
        for (auto i = begin; i < end; ++i) {
            const auto& j = jobs[i];
            const auto& vol = volume_for(corpus, j.rec->neuron_id());
            auto& r = out[i];
            r.neuron_id = j.rec->neuron_id();
            r.reconstruction_id = j.rec->reconstruction_id();
            r.point = j.point;
            r.group = j.group;
            r.label = j.group == sample_group::poi? 1: 0;
            r.data = crop_patch(vol, *job_maps[i], j.rec->at(j.point).pos);
        }
    });
    return out;
}

} // anonymous namespace

std::vector<sample_record> build_pairs(std::span<const poi_label_set> labelsets, const corpus_view& corpus,
                                       unsigned workers)
{
    std::vector<crop_job> jobs;
    for (const auto& s: labelsets) {
        const auto& wrong = resolve(corpus, s.wrong_id);
        const auto& correct = resolve(corpus, s.correct_id);
        if (wrong.neuron_id() != correct.neuron_id()) {
            throw data_error("label set pairs reconstructions of different neurons");
        }
        volume_for(corpus, wrong.neuron_id());
        for (const auto& p: s.pairs) {
            jobs.push_back({&wrong, p.poi, sample_group::poi});
            jobs.push_back({&correct, p.control, sample_group::match_control});
        }
    }
    return run_jobs(jobs, corpus, workers);
}

std::vector<sample_record> build_controls(std::span<const point_ref> points, const corpus_view& corpus,
                                          unsigned workers)
{
    std::vector<crop_job> jobs;
    for (const auto& p: points) {
        jobs.push_back({&resolve(corpus, p.reconstruction_id), p.point, sample_group::random_control});
    }
    return run_jobs(jobs, corpus, workers);
}

} // namespace neuroqc
