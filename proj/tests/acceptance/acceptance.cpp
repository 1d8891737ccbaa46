// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <regex>
#include <sstream>

#include <zlib.h>

#include <neuroqc/cli.hpp>
#include <neuroqc/dataset.hpp>
#include <neuroqc/error.hpp>
#include <neuroqc/matching.hpp>
#include <neuroqc/metrics.hpp>
#include <neuroqc/patch.hpp>
#include <neuroqc/poi.hpp>
#include <neuroqc/synthetic.hpp>

#include "oracles.hpp"
#include "support.hpp"

using namespace neuroqc;
namespace fs = std::filesystem;

namespace {

struct outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) {
            pass = false;
            detail = what;
        }
    }
};

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// Random point cloud with random parents. Half the cases snap coordinates to
// a grid so that exact distance ties occur.
neuron_reconstruction cloud(std::size_t n, std::uint64_t seed, std::uint64_t rid, bool snapped) {
    const double extent = 6.0*std::cbrt(static_cast<double>(n));
    return testing::random_tree(n, seed, extent, snapped? 1.0: 0.0, rid);
}

// --- criteria -----------------------------------------------------------

outcome matching_equivalence() {
    outcome o;
    const auto t0 = clock_type::now();
    rng g(2024);
    std::size_t largest = 0, compared = 0;
    for (int i = 0; i < 100; ++i) {
        const std::size_t n = i == 0? 5000: 1 + static_cast<std::size_t>(g.below(5000));
        const std::size_t m = i == 0? 5000: 1 + static_cast<std::size_t>(g.below(5000));
        largest = std::max({largest, n, m});
        const bool snapped = i % 2 == 0;
        auto src = cloud(n, derive_seed(1, static_cast<std::uint64_t>(i)), 1, snapped);
        auto dst = cloud(m, derive_seed(2, static_cast<std::uint64_t>(i)), 2, snapped);
        auto fast = build_match_map(src, dst, {}, 1 + static_cast<unsigned>(i % 4));
        o.require(fast.entries.size() == src.size(), "entry count differs");
        for (std::size_t k = 0; k < src.size() && o.pass; ++k) {
            const auto& p = src.points()[k];
            const auto& e = fast.entry(p.id);
            auto want = oracle::match(dst.points(), p.pos, 4.0);
            const bool same = e.target.has_value() == want.has_value()
                && (!want || (e.target->id == want->id && e.target->distance == std::sqrt(want->d2)));
            o.require(same, fmt("pair %d point %lld differs", i, static_cast<long long>(p.id)));
            ++compared;
        }
    }
    const double secs = seconds_since(t0);
    o.require(secs < 60.0, fmt("took %.1f s", secs));
    if (o.pass) o.detail = fmt("100 pairs, %zu points compared, largest %zu, %.1f s", compared, largest, secs);
    return o;
}

outcome boundary() {
    outcome o;
    auto single = [](vec3 p) {
        return neuron_reconstruction({1, 2, ""}, {{1, 3, p, 1.0, std::nullopt}});
    };
    const vec3 base{100, -20, 7};
    const vec3 dirs[] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    for (const auto& d: dirs) {
        for (double dist: {3.999, 4.0}) {
            const vec3 q{base.x + dist*d.x, base.y + dist*d.y, base.z + dist*d.z};
            const double actual = std::sqrt(oracle::sq(base, q));
            spatial_index idx(single(q));
            const bool matched = find_match(base, idx, {}).has_value();
            const bool expect = actual < 4.0;
            o.require(matched == expect, fmt("distance %.17g matched=%d", actual, matched));
            auto src = neuron_reconstruction({1, 1, ""}, {{1, 3, base, 1.0, std::nullopt}});
            o.require(build_match_map(src, single(q), {}).matched(1) == expect, "match map disagrees");
        }
    }
    spatial_index at_origin(single({4, 0, 0}));
    o.require(!find_match(vec3{0, 0, 0}, at_origin, {}).has_value(), "4.0 matched");
    spatial_index inside(single({3.999, 0, 0}));
    o.require(find_match(vec3{0, 0, 0}, inside, {}).has_value(), "3.999 not matched");
    if (o.pass) o.detail = "3.999 matches, 4.0 does not, on all six axis directions";
    return o;
}

outcome poi_equivalence() {
    outcome o;
    const auto t0 = clock_type::now();
    synth::corpus_params cp;
    cp.neurons = 150;
    cp.seed = 99;
    auto corpus = synth::generate_corpus(cp, 4);
    std::map<synth::error_kind, std::size_t> kinds;
    std::size_t cases = 0, agree = 0, pois = 0;
    for (const auto& n: corpus) {
        for (const auto& w: n.wrong) {
            ++cases;
            for (const auto& e: w.log) kinds[e.kind]++;
            auto got = label_pois(w.reconstruction, n.correct, {}, 2);
            std::vector<oracle::labelled> scan;
            for (const auto& p: got.pairs) scan.push_back({p.poi, p.control, std::string(to_string(p.reason))});
            if (got == w.truth && scan == oracle::label(w.reconstruction, n.correct, 4.0)) ++agree;
            pois += w.truth.pairs.size();
        }
    }
    const double secs = seconds_since(t0);
    o.require(cases >= 200, fmt("only %zu reconstructions", cases));
    o.require(kinds.size() == 3, "not every error kind is present");
    o.require(agree == cases, fmt("%zu of %zu agree", agree, cases));
    o.require(secs < 120.0, fmt("took %.1f s", secs));
    if (o.pass) {
        o.detail = fmt("%zu/%zu reconstructions, %zu POIs, kinds %zu/%zu/%zu, %.1f s", agree, cases, pois,
                       kinds[synth::error_kind::truncate_subtree], kinds[synth::error_kind::graft_foreign_branch],
                       kinds[synth::error_kind::background_leak], secs);
    }
    return o;
}

outcome identity_null() {
    outcome o;
    std::size_t points = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        auto r = synth::generate_neuron({}, derive_seed(5, seed), {1, 10, ""});
        points += r.size();
        o.require(label_pois(r, r, {}).pairs.empty(), fmt("neuron %llu has POIs", static_cast<unsigned long long>(seed)));
    }
    if (o.pass) o.detail = fmt("100 neurons, %zu points, no POIs", points);
    return o;
}

outcome patch_oracle() {
    outcome o;
    testing::temp_dir dir("acceptance_patch");
    synth::params p;
    p.dims = {70, 60, 50};
    p.origin = {-12, 30, 5};
    auto r = synth::generate_neuron(p, 3, {1, 10, ""});
    std::vector<neuron_reconstruction> rs{r};
    auto vol = synth::render_volume(rs, p, 4);
    auto map = rasterize(r, vol).map;

    rng g(8);
    const double lo[3] = {-12, 30, 5}, hi[3] = {-12 + 69, 30 + 59, 5 + 49};
    std::vector<sample_record> records;
    std::size_t border = 0, degenerate = 0;
    for (int i = 0; i < 500; ++i) {
        vec3 c;
        double* axes[3] = {&c.x, &c.y, &c.z};
        for (int a = 0; a < 3; ++a) {
            switch (i % 5) {
            case 0: case 1: *axes[a] = g.uniform(lo[a], hi[a]); break;                      // anywhere inside
            case 2: *axes[a] = (g.bernoulli(0.5)? lo[a]: hi[a]) + g.uniform(-3, 3); break;  // on a face or corner
            case 3: *axes[a] = g.uniform(lo[a] - 20, hi[a] + 20); break;                    // partly outside
            default: *axes[a] = g.uniform(lo[a] - 60, hi[a] + 60); break;                   // possibly disjoint
            }
        }
        if (i % 50 == 0) c = r.points()[static_cast<std::size_t>(g.below(r.size()))].pos;
        auto patch = crop_patch(vol, map, c);
        const auto want = oracle::crop(vol, map.bits(), c, 32);
        o.require(patch.data.size() == want.size()
                  && std::memcmp(patch.data.data(), want.data(), 4*want.size()) == 0,
                  fmt("centre %d differs from the triple loop", i));
        const auto v = voxel_of(c, vol.origin());
        border += !(v.x >= 16 && v.y >= 16 && v.z >= 16 && v.x + 16 <= 70 && v.y + 16 <= 60 && v.z + 16 <= 50);
        degenerate += patch.degenerate;
        sample_record rec;
        rec.neuron_id = 1;
        rec.reconstruction_id = 10;
        rec.point = i + 1;
        rec.group = static_cast<sample_group>(i % 3);
        rec.label = rec.group == sample_group::poi? 1: 0;
        rec.data = std::move(patch);
        records.push_back(std::move(rec));
    }

    export_dataset(dir/"a.nqcd", records);
    auto back = import_dataset(dir/"a.nqcd");
    o.require(back == records, "imported records differ");
    const auto bytes = testing::read_bytes(dir/"a.nqcd");
    for (std::size_t i = 0; i < back.size() && o.pass; ++i) {
        o.require(std::memcmp(back[i].data.data.data(), records[i].data.data.data(), nqcd::payload_size) == 0,
                  "payload not bit-exact");
        const std::size_t off = nqcd::header_size + i*nqcd::record_stride + nqcd::record_header_size;
        std::uint32_t stored = 0;
        for (int b = 3; b >= 0; --b) {
            stored = stored << 8 | static_cast<unsigned char>(bytes[off + nqcd::payload_size + static_cast<std::size_t>(b)]);
        }
        o.require(stored == crc32(0, reinterpret_cast<const Bytef*>(bytes.data() + off), nqcd::payload_size),
                  fmt("stored CRC of record %zu is wrong", i));
    }
    export_dataset(dir/"b.nqcd", back);
    o.require(testing::read_bytes(dir/"b.nqcd") == bytes, "re-export is not byte-identical");

    auto corrupt = bytes;
    corrupt[nqcd::header_size + 123*nqcd::record_stride + nqcd::record_header_size + 4321] ^= 0x01;
    testing::write_text(dir/"c.nqcd", corrupt);
    bool rejected = false;
    try {
        import_dataset(dir/"c.nqcd");
    }
    catch (const data_error& e) {
        rejected = std::string(e.what()).find("checksum") != std::string::npos;
    }
    o.require(rejected, "a flipped payload bit was not caught by the CRC");
    o.require(border >= 100, "too few border centres");
    if (o.pass) {
        o.detail = fmt("500 centres (%zu at borders, %zu disjoint) exact; %zu records round trip, CRC verified",
                       border, degenerate, records.size());
    }
    return o;
}

outcome fold_integrity() {
    outcome o;
    std::vector<std::uint64_t> ids;
    rng g(254);
    std::set<std::uint64_t> unique;
    while (unique.size() < 254) unique.insert(1 + g.below(1000000));
    ids.assign(unique.begin(), unique.end());
    g.shuffle(std::span<std::uint64_t>(ids));
    auto f = split_folds(ids, 5, 7);
    auto sizes = f.fold_sizes();
    std::sort(sizes.begin(), sizes.end(), std::greater<>());
    o.require(sizes == std::vector<std::size_t>{51, 51, 51, 51, 50}, "fold sizes are not {51,51,51,51,50}");
    std::map<std::uint64_t, int> seen;
    for (unsigned k = 0; k < 5; ++k) {
        for (auto id: f.neurons_in(k)) seen[id]++;
    }
    o.require(seen.size() == 254, "not every neuron is assigned");
    o.require(std::all_of(seen.begin(), seen.end(), [](auto& kv) { return kv.second == 1; }), "a neuron is in two folds");
    o.require(fold_split_from_json(to_json(f)) == f, "fold JSON does not round trip");
    o.require(split_folds(ids, 5, 7) == f, "split is not reproducible");
    if (o.pass) o.detail = "254 neurons -> 51/51/51/51/50, each in exactly one fold";
    return o;
}

outcome metrics_checks() {
    outcome o;
    rng g(1000);
    double worst = 0;
    std::size_t rows = 0;
    for (int t = 0; t < 1000; ++t) {
        const auto n = 2 + static_cast<std::size_t>(g.below(300));
        const auto levels = 1 + g.below(t % 2? 8: 1000);
        std::vector<double> s;
        std::vector<std::uint8_t> l;
        for (std::size_t i = 0; i < n; ++i) {
            s.push_back(static_cast<double>(g.below(levels))/static_cast<double>(levels));
            l.push_back(static_cast<std::uint8_t>(g.below(2)));
        }
        l[0] = 1;
        l[1] = 0;
        rows += n;
        const double auc = roc_auc(s, l);
        worst = std::max(worst, std::abs(auc - oracle::pair_auc(s, l)));

        std::vector<double> sq, lg;
        for (double x: s) {
            sq.push_back(x*x);
            lg.push_back(std::log1p(9*x));
        }
        o.require(roc_auc(sq, l) == auc && roc_auc(lg, l) == auc, fmt("table %d not transform invariant", t));

        const double threshold = t % 3 == 0? 0.5: g.uniform();
        auto c = confusion_at(s, l, threshold);
        auto d = oracle::count(s, l, threshold);
        o.require(c.tp == d.tp && c.fp == d.fp && c.tn == d.tn && c.fn == d.fn, fmt("table %d confusion differs", t));
        o.require(c.accuracy() == static_cast<double>(d.tp + d.tn)/static_cast<double>(n), "accuracy differs");
        if (d.tp + d.fn) o.require(c.sensitivity() == static_cast<double>(d.tp)/static_cast<double>(d.tp + d.fn), "sensitivity differs");
        else o.require(!c.sensitivity(), "sensitivity should be absent");
        if (d.tn + d.fp) o.require(c.specificity() == static_cast<double>(d.tn)/static_cast<double>(d.tn + d.fp), "specificity differs");
        else o.require(!c.specificity(), "specificity should be absent");
        if (d.tp + d.fp) o.require(c.precision() == static_cast<double>(d.tp)/static_cast<double>(d.tp + d.fp), "precision differs");
        else o.require(!c.precision(), "precision should be absent");
    }
    o.require(worst <= 1e-12, fmt("AUC off by %.3g", worst));

    o.require(format_mean_std({0.949, 0.014, 5}) == "94.9±1.4", "94.9±1.4 rendering");
    o.require(format_mean_std({0.747, 0.047, 5}) == "74.7±4.7", "74.7±4.7 rendering");
    o.require(format_mean_std({0.986, 0.004, 5}) == "98.6±0.4", "98.6±0.4 rendering");
    score_table t;
    const double fold_scores[2][4] = {{0.9, 0.1, 0.8, 0.2}, {0.6, 0.6, 0.4, 0.4}};
    for (unsigned f = 0; f < 2; ++f) {
        for (std::size_t i = 0; i < 4; ++i) {
            t.rows.push_back({f*4 + i, f, static_cast<point_id>(i), f, static_cast<std::uint8_t>(i % 2 == 0), fold_scores[f][i]});
        }
    }
    auto rep = report(t);
    o.require(rep.auc && format_mean_std(*rep.auc) == "75.0±25.0", "fold AUCs {1.0, 0.5} should render 75.0±25.0");
    const std::regex cell(R"(^\d{1,3}\.\d±\d{1,3}\.\d$)");
    for (const auto& m: {rep.auc, rep.accuracy, rep.sensitivity, rep.specificity, rep.precision}) {
        o.require(m && std::regex_match(format_mean_std(*m), cell), "cell is not mean±std");
    }
    if (o.pass) o.detail = fmt("1000 tables (%zu rows), max AUC error %.2g; transforms, counts and mean±std ok", rows, worst);
    return o;
}

outcome cli_determinism() {
    outcome o;
    testing::temp_dir dir("acceptance_cli");
    auto run = [&](std::vector<std::string> args, std::string* log = nullptr) {
        args.insert(args.begin(), "neuroqc");
        std::vector<const char*> argv;
        for (const auto& a: args) argv.push_back(a.c_str());
        std::ostringstream out;
        const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out);
        if (log) *log = out.str();
        return code;
    };
    auto s = [](const fs::path& p) { return p.string(); };

    // Each subcommand writes into run_N/, once per repetition; the two trees
    // must be byte-identical. The second repetition uses more workers.
    std::vector<std::string> checked;
    for (int rep = 0; rep < 2; ++rep) {
        const auto out = dir/("run_" + std::to_string(rep));
        fs::create_directories(out);
        const std::string workers = rep? "4": "1";
        std::string log;
        o.require(run({"--workers", workers, "synth", "--neurons", "12", "--seed", "7", "--out", s(out/"corpus")}) == 0, "synth failed");
        const auto corpus = dir/"run_0"/"corpus";
        const auto manifest = s(corpus/"manifest.json");
        o.require(run({"validate", s(corpus/"neuron_0001"/"correct.swc"), s(corpus/"neuron_0002"/"wrong_1.swc")}, &log) == 0,
                  "validate failed");
        testing::write_text(out/"validate.log", log);
        o.require(run({"--workers", workers, "label", "--wrong", s(corpus/"neuron_0001"/"wrong_1.swc"),
                       "--correct", s(corpus/"neuron_0001"/"correct.swc"), "--out", s(out/"labels.json"),
                       "--match-out", s(out/"matches.json"), "--neuron-id", "1", "--wrong-id", "11", "--correct-id", "10"}) == 0,
                  "label failed");
        o.require(run({"--workers", workers, "crop", "--manifest", manifest, "--out", s(out/"pairs.nqcd")}) == 0, "crop failed");
        o.require(run({"--workers", workers, "pool", "--manifest", manifest, "--out", s(out/"pool.nqcd"),
                       "--count", "200", "--seed", "5"}) == 0, "pool failed");
        o.require(run({"split", "--manifest", manifest, "--out", s(out/"folds.json"), "--seed", "3"}) == 0, "split failed");

        // Scores for the cropped pairs, derived from the patches, feed eval.
        auto recs = import_dataset(out/"pairs.nqcd");
        auto folds = fold_split_from_json(nlohmann::json::parse(testing::read_bytes(out/"folds.json")));
        score_table scores;
        for (std::size_t i = 0; i < recs.size(); ++i) {
            double mean = 0;
            for (std::size_t k = 32*32*32; k < recs[i].data.data.size(); ++k) mean += recs[i].data.data[k];
            const double sc = std::min(1.0, mean/2000.0 + (recs[i].label? 0.3: 0.0));
            scores.rows.push_back({i, recs[i].neuron_id, recs[i].point, folds.fold_of(recs[i].neuron_id), recs[i].label, sc});
        }
        {
            std::ofstream csv(out/"scores.csv");
            write_scores_csv(csv, scores);
        }
        o.require(run({"eval", "--scores", s(out/"scores.csv"), "--out", s(out/"report.json"),
                       "--table", s(out/"report.txt")}) == 0, "eval failed");
        if (rep == 0) checked = {"synth", "validate", "label", "crop", "pool", "split", "eval"};
    }
    const auto a = testing::snapshot(dir/"run_0");
    const auto b = testing::snapshot(dir/"run_1");
    o.require(a.size() == b.size(), "different file sets");
    std::size_t bytes = 0;
    for (const auto& [name, content]: a) {
        auto it = b.find(name);
        o.require(it != b.end() && it->second == content, name + " differs between runs");
        bytes += content.size();
    }
    if (o.pass) {
        o.detail = fmt("%zu subcommands, %zu files, %zu bytes identical across reruns", checked.size(), a.size(), bytes);
    }
    return o;
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<outcome()>>> criteria = {
        {"matching oracle equivalence", matching_equivalence},
        {"match threshold boundary", boundary},
        {"POI oracle equivalence", poi_equivalence},
        {"identity null result", identity_null},
        {"patch oracle and dataset round trip", patch_oracle},
        {"fold integrity", fold_integrity},
        {"metrics", metrics_checks},
        {"CLI determinism", cli_determinism},
    };
    int failed = 0;
    for (const auto& [name, check]: criteria) {
        outcome o;
        try {
            o = check();
        }
        catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        failed += !o.pass;
        std::cout << (o.pass? "PASS  ": "FAIL  ") << name << "  (" << o.detail << ")" << std::endl;
    }
    std::cout << (failed? "FAILED: ": "ALL PASSED: ") << criteria.size() - static_cast<std::size_t>(failed)
              << "/" << criteria.size() << " criteria" << std::endl;
    return failed? 1: 0;
}
