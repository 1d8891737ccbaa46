#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include <neuroqc/cli.hpp>
#include <neuroqc/dataset.hpp>
#include <neuroqc/error.hpp>
#include <neuroqc/manifest.hpp>
#include <neuroqc/matching.hpp>
#include <neuroqc/metrics.hpp>
#include <neuroqc/poi.hpp>
#include <neuroqc/swc.hpp>
#include <neuroqc/synthetic.hpp>
#include <neuroqc/volume.hpp>

namespace neuroqc::cli {

namespace {

namespace fs = std::filesystem;

class logger {
public:
    logger(std::ostream& out, int level): out_(out), level_(level) {}

    std::ostream& info() { return level_ >= 1? out_: null_; }
    std::ostream& debug() { return level_ >= 2? out_: null_; }
    std::ostream& warn() { return level_ >= 0? out_ << "warning: ": null_; }
    std::ostream& error() { return out_ << "error: "; }

private:
    std::ostream& out_;
    int level_;
    std::ostream null_{nullptr};
};

void require_file(const fs::path& p) {
    if (!fs::is_regular_file(p)) throw io_error("no such file: " + p.string());
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot create " + path.string());
    out << text;
    if (!out) throw io_error("write failure on " + path.string());
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    write_text(path, j.dump(2) + "\n");
}

struct common_options {
    int verbosity = 1;
    unsigned workers = 1;
};

// Reconstructions and volumes of a manifest, loaded once.
struct loaded_corpus {
    manifest m;
    std::map<std::uint64_t, std::unique_ptr<neuron_reconstruction>> reconstructions;
    std::map<std::uint64_t, std::unique_ptr<volume>> volumes;

    corpus_view view() const {
        corpus_view v;
        for (const auto& [id, r]: reconstructions) v.reconstructions[id] = r.get();
        for (const auto& [id, vol]: volumes) v.volumes[id] = vol.get();
        return v;
    }
};

loaded_corpus load_corpus(const fs::path& path, bool with_wrong, logger& log) {
    loaded_corpus c;
    c.m = load_manifest(path);
    for (const auto& n: c.m.neurons) {
        require_file(n.correct.swc);
        for (const auto& w: n.wrong) require_file(w.swc);
    }
    for (const auto& n: c.m.neurons) {
        auto load = [&](const manifest_reconstruction& r, const std::string& label) {
            auto rec = std::make_unique<neuron_reconstruction>(
                load_swc(r.swc, {n.neuron_id, r.id, label}));
            c.reconstructions[r.id] = std::move(rec);
        };
        load(n.correct, "correct");
        if (with_wrong) {
            for (const auto& w: n.wrong) load(w, w.swc.filename().string());
        }
        auto vol = std::make_unique<volume>(load_volume(n.volume));
        log.debug() << "neuron " << n.neuron_id << ": volume " << vol->dims().nx << "x" << vol->dims().ny
                    << "x" << vol->dims().nz << "\n";
        c.volumes[n.neuron_id] = std::move(vol);
    }
    return c;
}

poi_label_set labels_for(const loaded_corpus& c, const manifest_neuron& n, const manifest_reconstruction& w,
                         const match_config& cfg, unsigned workers)
{
    if (w.labels) {
        auto s = load_poi_label_set(*w.labels);
        if (s.wrong_id != w.id || s.correct_id != n.correct.id) {
            throw data_error(w.labels->string() + ": label set does not belong to reconstruction " + std::to_string(w.id));
        }
        s.neuron_id = n.neuron_id;
        return s;
    }
    return label_pois(*c.reconstructions.at(w.id), *c.reconstructions.at(n.correct.id), cfg, workers);
}

std::size_t count_degenerate(const std::vector<sample_record>& records) {
    return static_cast<std::size_t>(std::count_if(records.begin(), records.end(),
        [](const sample_record& r) { return r.data.degenerate; }));
}

// --- subcommands ---------------------------------------------------------

int cmd_validate(const std::vector<fs::path>& files, logger& log) {
    for (const auto& f: files) require_file(f);
    bool all_ok = true;
    for (const auto& f: files) {
        try {
            auto r = load_swc(f);
            log.info() << f.string() << ": ok, " << r.size() << " points, " << r.roots().size() << " root(s)\n";
        }
        catch (const data_error& e) {
            log.error() << f.string() << ": " << e.what() << "\n";
            all_ok = false;
        }
    }
    return all_ok? ok: data_failure;
}

struct label_options {
    fs::path wrong, correct, out, match_out;
    double threshold = default_match_threshold;
    std::uint64_t neuron_id = 0, wrong_id = 1, correct_id = 0;
};

int cmd_label(const label_options& o, const common_options& common, logger& log) {
    require_file(o.wrong);
    require_file(o.correct);
    const match_config cfg{o.threshold};
    cfg.validate();
    auto wrong = load_swc(o.wrong, {o.neuron_id, o.wrong_id, o.wrong.filename().string()});
    auto correct = load_swc(o.correct, {o.neuron_id, o.correct_id, o.correct.filename().string()});
    auto labels = label_pois(wrong, correct, cfg, common.workers);
    save_poi_label_set(o.out, labels);
    if (!o.match_out.empty()) {
        write_json(o.match_out, to_json(build_match_map(wrong, correct, cfg, common.workers)));
    }
    log.info() << "label: " << labels.pairs.size() << " POI pair(s) written to " << o.out.string() << "\n";
    return ok;
}

struct crop_options {
    fs::path manifest, out;
    std::optional<double> threshold;
};

int cmd_crop(const crop_options& o, const common_options& common, logger& log) {
    require_file(o.manifest);
    auto corpus = load_corpus(o.manifest, true, log);
    const match_config cfg{o.threshold.value_or(corpus.m.threshold)};
    cfg.validate();
    const auto view = corpus.view();

    dataset_writer writer(o.out);
    std::size_t degenerate = 0;
    for (const auto& n: corpus.m.neurons) {
        for (const auto& w: n.wrong) {
            const auto labels = labels_for(corpus, n, w, cfg, common.workers);
            const auto records = build_pairs(std::span(&labels, 1), view, common.workers);
            degenerate += count_degenerate(records);
            for (const auto& r: records) writer.append(r);
            log.debug() << "reconstruction " << w.id << ": " << labels.pairs.size() << " pair(s)\n";
        }
    }
    writer.close();
    if (degenerate) log.warn() << degenerate << " patch(es) lie entirely outside their volume\n";
    log.info() << "crop: " << writer.count() << " record(s) written to " << o.out.string() << "\n";
    return ok;
}

struct pool_options {
    fs::path manifest, out;
    std::size_t count = 0;
    std::uint64_t seed = 0;
    std::optional<double> threshold;
};

int cmd_pool(const pool_options& o, const common_options& common, logger& log) {
    require_file(o.manifest);
    auto corpus = load_corpus(o.manifest, true, log);
    const match_config cfg{o.threshold.value_or(corpus.m.threshold)};
    cfg.validate();

    // Match points of POIs already serve as controls in the pair file.
    std::set<point_ref> exclude;
    std::vector<neuron_reconstruction> correct;
    for (const auto& n: corpus.m.neurons) {
        for (const auto& w: n.wrong) {
            for (auto c: labels_for(corpus, n, w, cfg, common.workers).controls()) exclude.insert({n.correct.id, c});
        }
        correct.push_back(*corpus.reconstructions.at(n.correct.id));
    }
    std::size_t available = 0;
    for (const auto& r: correct) available += r.size();
    available -= exclude.size();
    const auto n = o.count == 0? available: o.count;
    const auto points = sample_controls(correct, n, exclude, o.seed);

    const auto view = corpus.view();
    dataset_writer writer(o.out);
    constexpr std::size_t chunk = 256;
    std::size_t degenerate = 0;
    for (std::size_t begin = 0; begin < points.size(); begin += chunk) {
        const auto end = std::min(points.size(), begin + chunk);
        const auto records = build_controls(std::span(points).subspan(begin, end - begin), view, common.workers);
        degenerate += count_degenerate(records);
        for (const auto& r: records) writer.append(r);
    }
    writer.close();
    if (degenerate) log.warn() << degenerate << " patch(es) lie entirely outside their volume\n";
    log.info() << "pool: " << writer.count() << " control candidate(s) written to " << o.out.string() << "\n";
    return ok;
}

struct split_options {
    fs::path neurons, manifest, out;
    unsigned k = 5;
    std::uint64_t seed = 0;
};

std::vector<std::uint64_t> read_neuron_list(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path.string());
    std::vector<std::uint64_t> ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream fields(line);
        std::string token;
        while (fields >> token) {
            try {
                std::size_t used = 0;
                if (token.front() == '-') throw std::invalid_argument("negative");
                ids.push_back(std::stoull(token, &used));
                if (used != token.size()) throw std::invalid_argument("trailing");
            }
            catch (const std::logic_error&) {
                throw parse_error("invalid neuron id '" + token + "'", lineno);
            }
        }
    }
    return ids;
}

int cmd_split(const split_options& o, logger& log) {
    std::vector<std::uint64_t> ids;
    if (!o.manifest.empty()) {
        require_file(o.manifest);
        for (const auto& n: load_manifest(o.manifest).neurons) ids.push_back(n.neuron_id);
    }
    else {
        require_file(o.neurons);
        ids = read_neuron_list(o.neurons);
    }
    auto split = split_folds(ids, o.k, o.seed);
    write_json(o.out, to_json(split));
    std::ostringstream sizes;
    for (auto s: split.fold_sizes()) sizes << ' ' << s;
    log.info() << "split: " << ids.size() << " neurons into " << o.k << " folds, sizes" << sizes.str() << "\n";
    return ok;
}

struct synth_options {
    fs::path out;
    synth::corpus_params cp;
    std::size_t dim = 64;
};

int cmd_synth(synth_options o, const common_options& common, logger& log) {
    o.cp.neuron.dims = {o.dim, o.dim, o.dim};
    auto corpus = synth::generate_corpus(o.cp, common.workers);
    synth::write_corpus(o.out, corpus, o.cp);
    std::size_t wrong = 0, pois = 0;
    for (const auto& n: corpus) {
        wrong += n.wrong.size();
        for (const auto& w: n.wrong) pois += w.truth.pairs.size();
    }
    log.info() << "synth: " << corpus.size() << " neurons, " << wrong << " wrong reconstructions, "
               << pois << " ground-truth POIs under " << o.out.string() << "\n";
    return ok;
}

struct eval_options {
    fs::path scores, others, out, table;
    double threshold = default_decision_threshold;
    std::string name = "model";
};

int cmd_eval(const eval_options& o, logger& log) {
    require_file(o.scores);
    if (!o.others.empty()) require_file(o.others);
    auto table = load_scores_csv(o.scores);
    std::optional<score_table> others;
    if (!o.others.empty()) others = load_scores_csv(o.others);
    auto r = report(table, o.threshold, others? &*others: nullptr);
    for (const auto& w: r.warnings) log.warn() << w << "\n";
    const auto text = render_table(r, o.name);
    if (!o.out.empty()) write_json(o.out, to_json(r));
    if (!o.table.empty()) write_text(o.table, text);
    log.info() << text;
    return ok;
}

} // anonymous namespace

int run(int argc, const char* const* argv, std::ostream& log_stream) {
    CLI::App app{"Quality control for neuron reconstructions"};
    app.require_subcommand(1);
    common_options common;
    bool quiet = false, verbose = false;
    app.add_flag("-q,--quiet", quiet, "Only report errors");
    app.add_flag("-v,--verbose", verbose, "Report per-item progress");
    app.add_option("--workers", common.workers, "Worker threads")->check(CLI::Range(1u, 1024u));

    std::vector<fs::path> validate_files;
    auto* validate = app.add_subcommand("validate", "Check SWC files");
    validate->add_option("files", validate_files, "SWC files")->required();

    label_options lo;
    auto* label = app.add_subcommand("label", "Find POIs of a wrong reconstruction against the correct one");
    label->add_option("--wrong", lo.wrong, "Wrong reconstruction (SWC)")->required();
    label->add_option("--correct", lo.correct, "Correct reconstruction (SWC)")->required();
    label->add_option("--out", lo.out, "Label set JSON to write")->required();
    label->add_option("--match-out", lo.match_out, "Also write the wrong->correct match map JSON");
    label->add_option("--threshold", lo.threshold, "Match distance in voxels")->capture_default_str();
    label->add_option("--neuron-id", lo.neuron_id, "Neuron id recorded in the output")->capture_default_str();
    label->add_option("--wrong-id", lo.wrong_id, "Reconstruction id of the wrong tracing")->capture_default_str();
    label->add_option("--correct-id", lo.correct_id, "Reconstruction id of the correct tracing")->capture_default_str();

    crop_options co;
    auto* crop = app.add_subcommand("crop", "Cut POI / match-control patch pairs into an .nqcd file");
    crop->add_option("--manifest", co.manifest, "Corpus manifest JSON")->required();
    crop->add_option("--out", co.out, ".nqcd file to write")->required();
    crop->add_option("--threshold", co.threshold, "Match distance (default: manifest value)");

    pool_options po;
    auto* pool = app.add_subcommand("pool", "Cut random-control candidate patches into an .nqcd file");
    pool->add_option("--manifest", po.manifest, "Corpus manifest JSON")->required();
    pool->add_option("--out", po.out, ".nqcd file to write")->required();
    pool->add_option("--count", po.count, "Points to draw (0 = every candidate)")->capture_default_str();
    pool->add_option("--seed", po.seed, "Sampling seed")->capture_default_str();
    pool->add_option("--threshold", po.threshold, "Match distance (default: manifest value)");

    split_options so;
    auto* split = app.add_subcommand("split", "Assign neurons to cross-validation folds");
    auto* split_src = split->add_option_group("source");
    split_src->add_option("--neurons", so.neurons, "Text file of neuron ids");
    split_src->add_option("--manifest", so.manifest, "Corpus manifest JSON");
    split_src->require_option(1);
    split->add_option("--out", so.out, "Fold JSON to write")->required();
    split->add_option("--k", so.k, "Fold count")->capture_default_str();
    split->add_option("--seed", so.seed, "Shuffle seed")->capture_default_str();

    synth_options sy;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with injected errors");
    synth->add_option("--out", sy.out, "Output directory")->required();
    synth->add_option("--neurons", sy.cp.neurons, "Neuron count")->capture_default_str()->check(CLI::PositiveNumber);
    synth->add_option("--seed", sy.cp.seed, "Corpus seed")->capture_default_str();
    synth->add_option("--threshold", sy.cp.threshold, "Match distance in voxels")->capture_default_str();
    synth->add_option("--dim", sy.dim, "Cubic volume edge length")->capture_default_str()->check(CLI::PositiveNumber);
    synth->add_option("--spacing", sy.cp.neuron.spacing, "Point spacing")->capture_default_str();
    synth->add_option("--branch-probability", sy.cp.neuron.branch_probability, "Branching probability per point")->capture_default_str();
    synth->add_option("--max-points", sy.cp.neuron.max_points, "Points per neuron cap")->capture_default_str();
    synth->add_option("--noise-std", sy.cp.neuron.noise_std, "Background noise std")->capture_default_str();
    synth->add_option("--errors", sy.cp.errors_per_reconstruction, "Errors per wrong reconstruction")->capture_default_str();
    synth->add_option("--displacement", sy.cp.min_displacement, "Minimum distance of injected points")->capture_default_str();

    eval_options eo;
    auto* eval = app.add_subcommand("eval", "Compute AUC / accuracy / sensitivity / specificity / precision");
    eval->add_option("--scores", eo.scores, "Scores CSV")->required();
    eval->add_option("--others", eo.others, "Scores CSV for further correct points (specificity2)");
    eval->add_option("--out", eo.out, "Report JSON to write");
    eval->add_option("--table", eo.table, "Text table to write");
    eval->add_option("--threshold", eo.threshold, "Decision threshold")->capture_default_str();
    eval->add_option("--name", eo.name, "Row label in the table")->capture_default_str();

    try {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp&) {
        log_stream << app.help();
        return ok;
    }
    catch (const CLI::CallForAllHelp&) {
        log_stream << app.help("", CLI::AppFormatMode::All);
        return ok;
    }
    catch (const CLI::ParseError& e) {
        log_stream << "error: " << e.what() << "\n" << "run with --help for usage\n";
        return usage_error;
    }

    common.verbosity = quiet? 0: verbose? 2: 1;
    logger log(log_stream, common.verbosity);
    try {
        if (*validate) return cmd_validate(validate_files, log);
        if (*label) return cmd_label(lo, common, log);
        if (*crop) return cmd_crop(co, common, log);
        if (*pool) return cmd_pool(po, common, log);
        if (*split) return cmd_split(so, log);
        if (*synth) return cmd_synth(sy, common, log);
        if (*eval) return cmd_eval(eo, log);
    }
    catch (const io_error& e) {
        log.error() << e.what() << "\n";
        return io_failure;
    }
    catch (const data_error& e) {
        log.error() << e.what() << "\n";
        return data_failure;
    }
    catch (const std::filesystem::filesystem_error& e) {
        log.error() << e.what() << "\n";
        return io_failure;
    }
    catch (const std::exception& e) {
        log.error() << e.what() << "\n";
        return data_failure;
    }
    return usage_error;
}

} // namespace neuroqc::cli
