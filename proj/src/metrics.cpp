#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <neuroqc/error.hpp>
#include <neuroqc/metrics.hpp>

namespace neuroqc {

namespace {

constexpr const char* csv_header = "record_index,neuron_id,point_id,fold,label,score";

template <typename T>
T csv_number(std::string_view field, const char* what, std::size_t line) {
    T value{};
    auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || end != field.data() + field.size()) {
        throw parse_error("invalid " + std::string(what) + " '" + std::string(field) + "'", line);
    }
    return value;
}

void check_inputs(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    if (scores.size() != labels.size()) throw data_error("scores and labels differ in length");
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] > 1) throw data_error("labels must be 0 or 1");
        if (std::isnan(scores[i])) throw data_error("score is NaN");
    }
}

} // anonymous namespace

void score_table::validate() const {
    for (const auto& r: rows) {
        if (r.label > 1) throw data_error("row " + std::to_string(r.record_index) + ": label must be 0 or 1");
        if (!(r.score >= 0 && r.score <= 1)) {
            throw data_error("row " + std::to_string(r.record_index) + ": score outside [0,1]");
        }
    }
}

score_table read_scores_csv(std::istream& in) {
    score_table t;
    std::string line;
    std::size_t lineno = 0;
    bool seen_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!seen_header) {
            if (line != csv_header) throw parse_error(std::string("expected header '") + csv_header + "'", lineno);
            seen_header = true;
            continue;
        }
        std::vector<std::string_view> f;
        std::string_view view(line);
        for (std::size_t start = 0;;) {
            auto comma = view.find(',', start);
            f.push_back(view.substr(start, comma == std::string_view::npos? std::string_view::npos: comma - start));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (f.size() != 6) throw parse_error("expected 6 columns, found " + std::to_string(f.size()), lineno);
        score_row r;
        r.record_index = csv_number<std::uint64_t>(f[0], "record_index", lineno);
        r.neuron_id = csv_number<std::uint64_t>(f[1], "neuron_id", lineno);
        r.point = csv_number<point_id>(f[2], "point_id", lineno);
        r.fold = csv_number<unsigned>(f[3], "fold", lineno);
        auto label = csv_number<unsigned>(f[4], "label", lineno);
        if (label > 1) throw parse_error("label must be 0 or 1", lineno);
        r.label = static_cast<std::uint8_t>(label);
        r.score = csv_number<double>(f[5], "score", lineno);
        if (!(r.score >= 0 && r.score <= 1)) throw parse_error("score outside [0,1]", lineno);
        t.rows.push_back(r);
    }
    if (!seen_header) throw parse_error("missing CSV header", lineno);
    return t;
}

score_table load_scores_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path.string());
    return read_scores_csv(in);
}

void write_scores_csv(std::ostream& out, const score_table& t) {
    out << csv_header << '\n';
    for (const auto& r: t.rows) {
        char score[32];
        auto [end, ec] = std::to_chars(score, score + sizeof score, r.score);
        out << r.record_index << ',' << r.neuron_id << ',' << r.point << ',' << r.fold << ','
            << unsigned(r.label) << ',' << std::string_view(score, end - score) << '\n';
    }
}

double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    check_inputs(scores, labels);
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Walk groups of equal score in ascending order; every positive in a group
    // beats all negatives seen before it and ties with the group's negatives.
    // Counts are kept doubled so the sum stays integral.
    std::uint64_t negatives_below = 0, doubled_wins = 0, positives = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        std::uint64_t pos = 0, neg = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            (labels[order[j]]? pos: neg) += 1;
            ++j;
        }
        doubled_wins += pos*(2*negatives_below + neg);
        negatives_below += neg;
        positives += pos;
        i = j;
    }
    const auto negatives = negatives_below;
    if (positives == 0 || negatives == 0) throw data_error("AUC needs both positive and negative samples");
    return (static_cast<double>(doubled_wins)/2.0)/(static_cast<double>(positives)*static_cast<double>(negatives));
}

double confusion::accuracy() const {
    if (total() == 0) throw data_error("accuracy of an empty confusion matrix");
    return static_cast<double>(tp + tn)/static_cast<double>(total());
}

namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num)/static_cast<double>(den);
}

} // anonymous namespace

std::optional<double> confusion::sensitivity() const { return ratio(tp, tp + fn); }
std::optional<double> confusion::specificity() const { return ratio(tn, tn + fp); }
std::optional<double> confusion::precision() const { return ratio(tp, tp + fp); }

confusion confusion_at(std::span<const double> scores, std::span<const std::uint8_t> labels, double threshold) {
    check_inputs(scores, labels);
    if (scores.empty()) throw data_error("confusion matrix of an empty score set");
    confusion c;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = scores[i] >= threshold;
        if (labels[i]) (predicted? c.tp: c.fn) += 1;
        else (predicted? c.fp: c.tn) += 1;
    }
    return c;
}

std::optional<mean_std> aggregate(std::span<const std::optional<double>> values) {
    mean_std out;
    double sum = 0;
    for (const auto& v: values) {
        if (v) {
            sum += *v;
            ++out.count;
        }
    }
    if (out.count == 0) return std::nullopt;
    out.mean = sum/static_cast<double>(out.count);
    double sq = 0;
    for (const auto& v: values) {
        if (v) sq += (*v - out.mean)*(*v - out.mean);
    }
    out.std = std::sqrt(sq/static_cast<double>(out.count));
    return out;
}

std::string format_mean_std(const mean_std& v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1f±%.1f", 100*v.mean, 100*v.std);
    return buf;
}

metrics_report report(const score_table& table, double threshold, const score_table* others) {
    table.validate();
    if (others) others->validate();

    std::map<unsigned, std::pair<std::vector<double>, std::vector<std::uint8_t>>> by_fold, others_by_fold;
    for (const auto& r: table.rows) {
        by_fold[r.fold].first.push_back(r.score);
        by_fold[r.fold].second.push_back(r.label);
    }
    if (others) {
        for (const auto& r: others->rows) {
            others_by_fold[r.fold].first.push_back(r.score);
            others_by_fold[r.fold].second.push_back(r.label);
        }
    }

    metrics_report out;
    out.threshold = threshold;
    bool any_complete = false;
    for (const auto& [fold, data]: by_fold) {
        const auto& [scores, labels] = data;
        fold_metrics m;
        m.fold = fold;
        m.counts = confusion_at(scores, labels, threshold);
        const bool has_pos = m.counts.tp + m.counts.fn > 0, has_neg = m.counts.tn + m.counts.fp > 0;
        if (has_pos && has_neg) {
            m.auc = roc_auc(scores, labels);
            any_complete = true;
        }
        else {
            out.warnings.push_back("fold " + std::to_string(fold) + " has a single class; AUC excluded");
        }
        m.accuracy = m.counts.accuracy();
        m.sensitivity = m.counts.sensitivity();
        m.specificity = m.counts.specificity();
        m.precision = m.counts.precision();
        if (!m.precision) {
            out.warnings.push_back("fold " + std::to_string(fold) + " has no positive predictions; precision undefined");
        }
        if (auto it = others_by_fold.find(fold); it != others_by_fold.end()) {
            m.specificity2 = confusion_at(it->second.first, it->second.second, threshold).specificity();
        }
        out.folds.push_back(m);
    }
    if (!any_complete) throw data_error("no fold contains both classes");
    for (const auto& [fold, data]: others_by_fold) {
        if (!by_fold.count(fold)) {
            out.warnings.push_back("extra control scores for fold " + std::to_string(fold) + " have no matching fold");
        }
    }

    auto collect = [&](std::optional<double> fold_metrics::*field) {
        std::vector<std::optional<double>> v;
        for (const auto& f: out.folds) v.push_back(f.*field);
        return aggregate(v);
    };
    out.auc = collect(&fold_metrics::auc);
    out.accuracy = collect(&fold_metrics::accuracy);
    out.sensitivity = collect(&fold_metrics::sensitivity);
    out.specificity = collect(&fold_metrics::specificity);
    out.precision = collect(&fold_metrics::precision);
    out.specificity2 = collect(&fold_metrics::specificity2);
    return out;
}

namespace {

nlohmann::json opt_json(const std::optional<double>& v) {
    return v? nlohmann::json(*v): nlohmann::json(nullptr);
}

nlohmann::json summary_json(const std::optional<mean_std>& v) {
    if (!v) return nullptr;
    return {{"mean", v->mean}, {"std", v->std}, {"folds", v->count}, {"text", format_mean_std(*v)}};
}

std::string cell(const std::optional<mean_std>& v) {
    return v? format_mean_std(*v): std::string("n/a");
}

std::string cell(const std::optional<double>& v) {
    if (!v) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", 100**v);
    return buf;
}

} // anonymous namespace

nlohmann::json to_json(const metrics_report& r) {
    nlohmann::json folds = nlohmann::json::array();
    for (const auto& f: r.folds) {
        nlohmann::json j = {
            {"fold", f.fold},
            {"tp", f.counts.tp}, {"fp", f.counts.fp}, {"tn", f.counts.tn}, {"fn", f.counts.fn},
            {"auc", opt_json(f.auc)},
            {"accuracy", opt_json(f.accuracy)},
            {"sensitivity", opt_json(f.sensitivity)},
            {"specificity", opt_json(f.specificity)},
            {"precision", opt_json(f.precision)},
        };
        if (f.specificity2) j["specificity2"] = *f.specificity2;
        folds.push_back(std::move(j));
    }
    nlohmann::json agg = {
        {"auc", summary_json(r.auc)},
        {"accuracy", summary_json(r.accuracy)},
        {"sensitivity", summary_json(r.sensitivity)},
        {"specificity", summary_json(r.specificity)},
        {"precision", summary_json(r.precision)},
    };
    if (r.specificity2) agg["specificity2"] = summary_json(r.specificity2);
    return {{"threshold", r.threshold}, {"folds", std::move(folds)}, {"aggregate", std::move(agg)},
            {"warnings", r.warnings}};
}

std::string render_table(const metrics_report& r, const std::string& name) {
    std::vector<std::string> header = {"Network", "AUC (%)", "Accuracy (%)", "Sensitivity (%)", "Specificity (%)", "Precision (%)"};
    const bool with2 = r.specificity2.has_value();
    if (with2) header.push_back("Specificity2 (%)");

    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> summary = {name, cell(r.auc), cell(r.accuracy), cell(r.sensitivity),
                                        cell(r.specificity), cell(r.precision)};
    if (with2) summary.push_back(cell(r.specificity2));
    rows.push_back(std::move(summary));
    for (const auto& f: r.folds) {
        std::vector<std::string> row = {"  fold " + std::to_string(f.fold), cell(f.auc), cell(f.accuracy),
                                        cell(f.sensitivity), cell(f.specificity), cell(f.precision)};
        if (with2) row.push_back(cell(f.specificity2));
        rows.push_back(std::move(row));
    }

    // Column widths count code points so '±' does not skew alignment.
    auto width = [](const std::string& s) {
        return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) { return (c & 0xC0) != 0x80; }));
    };
    std::vector<std::size_t> widths(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) {
        widths[c] = width(header[c]);
        for (const auto& row: rows) widths[c] = std::max(widths[c], width(row[c]));
    }
    std::ostringstream out;
    auto emit = [&](const std::vector<std::string>& row) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            out << (c? " | ": "") << row[c];
            if (c + 1 < row.size()) out << std::string(widths[c] - width(row[c]), ' ');
        }
        out << '\n';
    };
    emit(header);
    std::size_t total = 0;
    for (auto w: widths) total += w;
    out << std::string(total + 3*(widths.size() - 1), '-') << '\n';
    for (const auto& row: rows) emit(row);
    return out.str();
}

} // namespace neuroqc
