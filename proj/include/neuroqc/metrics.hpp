#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include <neuroqc/swc.hpp>

namespace neuroqc {

struct score_row {
    std::uint64_t record_index = 0;
    std::uint64_t neuron_id = 0;
    point_id point = 0;
    unsigned fold = 0;
    std::uint8_t label = 0;
    double score = 0;

    friend bool operator==(const score_row&, const score_row&) = default;
};

struct score_table {
    std::vector<score_row> rows;

    // Throws data_error on scores outside [0,1] or non-binary labels.
    void validate() const;
};

// CSV with header "record_index,neuron_id,point_id,fold,label,score".
score_table read_scores_csv(std::istream& in);
score_table load_scores_csv(const std::filesystem::path& path);
void write_scores_csv(std::ostream& out, const score_table& t);

// Probability that a random positive outscores a random negative, ties
// counting one half. Throws data_error unless both classes are present.
double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

struct confusion {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    std::size_t total() const noexcept { return tp + fp + tn + fn; }
    double accuracy() const;
    // Ratios with a zero denominator are absent rather than 0.
    std::optional<double> sensitivity() const;
    std::optional<double> specificity() const;
    std::optional<double> precision() const;

    friend bool operator==(const confusion&, const confusion&) = default;
};

inline constexpr double default_decision_threshold = 0.5;

// A row is predicted positive when score >= threshold.
confusion confusion_at(std::span<const double> scores, std::span<const std::uint8_t> labels,
                       double threshold = default_decision_threshold);

struct mean_std {
    double mean = 0;
    double std = 0;     // population standard deviation
    std::size_t count = 0;
};

// Unweighted mean and population std of the present values; nothing if none
// are present.
std::optional<mean_std> aggregate(std::span<const std::optional<double>> values);

// "94.9±1.4": percentages with one decimal.
std::string format_mean_std(const mean_std& v);

struct fold_metrics {
    unsigned fold = 0;
    confusion counts;
    std::optional<double> auc;
    std::optional<double> accuracy;
    std::optional<double> sensitivity;
    std::optional<double> specificity;
    std::optional<double> precision;
    // Specificity over the extra control population, when one is supplied.
    std::optional<double> specificity2;
};

struct metrics_report {
    double threshold = default_decision_threshold;
    std::vector<fold_metrics> folds;
    std::optional<mean_std> auc, accuracy, sensitivity, specificity, precision, specificity2;
    std::vector<std::string> warnings;
};

// Per-fold metrics and their mean±std across folds. `others` optionally holds
// scores for further correct points, evaluated with the same confusion code
// as specificity2. A fold lacking one class has no AUC and is left out of the
// AUC aggregate with a warning.
metrics_report report(const score_table& table, double threshold = default_decision_threshold,
                      const score_table* others = nullptr);

nlohmann::json to_json(const metrics_report& r);

// Aligned text table: one summary row laid out as
// "AUC (%) | Accuracy (%) | Sensitivity (%) | Specificity (%) | Precision (%)",
// followed by one row per fold.
std::string render_table(const metrics_report& r, const std::string& name = "model");

} // namespace neuroqc
