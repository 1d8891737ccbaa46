#include <doctest.h>

#include <cmath>
#include <regex>
#include <sstream>

#include <neuroqc/error.hpp>
#include <neuroqc/metrics.hpp>

#include "oracles.hpp"
#include "support.hpp"

using namespace neuroqc;

namespace {

using labels = std::vector<std::uint8_t>;
using scores = std::vector<double>;

score_table table_of(const scores& s, const labels& l, unsigned fold = 0) {
    score_table t;
    for (std::size_t i = 0; i < s.size(); ++i) t.rows.push_back({i, 1, static_cast<point_id>(i + 1), fold, l[i], s[i]});
    return t;
}

void append(score_table& dst, const score_table& src) {
    dst.rows.insert(dst.rows.end(), src.rows.begin(), src.rows.end());
}

} // namespace

TEST_CASE("AUC small cases") {
    CHECK(roc_auc(scores{0.9, 0.1}, labels{1, 0}) == 1.0);
    CHECK(roc_auc(scores{0.5, 0.5}, labels{1, 0}) == 0.5);
    CHECK(roc_auc(scores{0.8, 0.8, 0.6, 0.2}, labels{1, 0, 1, 0}) == 0.625);
    CHECK(roc_auc(scores{0.1, 0.9}, labels{1, 0}) == 0.0);
    CHECK_THROWS_AS(roc_auc(scores{0.1, 0.9}, labels{1, 1}), data_error);
    CHECK_THROWS_AS(roc_auc(scores{}, labels{}), data_error);
}

TEST_CASE("AUC equals pair counting on tied random tables") {
    rng g(1);
    for (int t = 0; t < 300; ++t) {
        const auto n = 2 + g.below(120);
        const auto levels = 1 + g.below(10);
        scores s;
        labels l;
        for (std::uint64_t i = 0; i < n; ++i) {
            s.push_back(static_cast<double>(g.below(levels))/static_cast<double>(levels));
            l.push_back(static_cast<std::uint8_t>(g.below(2)));
        }
        l[0] = 1;
        l[1] = 0;
        CHECK(std::abs(roc_auc(s, l) - oracle::pair_auc(s, l)) <= 1e-12);
    }
}

TEST_CASE("AUC is invariant under increasing transforms and complement") {
    rng g(2);
    for (int t = 0; t < 50; ++t) {
        scores s;
        labels l;
        for (int i = 0; i < 60; ++i) {
            s.push_back(std::round(g.uniform()*20)/20);
            l.push_back(i % 2? 1: 0);
        }
        const double base = roc_auc(s, l);
        scores cube, expo, flipped;
        labels swapped;
        for (std::size_t i = 0; i < s.size(); ++i) {
            cube.push_back(s[i]*s[i]*s[i]);
            expo.push_back(std::exp(5*s[i]));
            flipped.push_back(1 - s[i]);
            swapped.push_back(1 - l[i]);
        }
        CHECK(roc_auc(cube, l) == base);
        CHECK(roc_auc(expo, l) == base);
        CHECK(roc_auc(flipped, swapped) == doctest::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("confusion counts and ratios") {
    auto c = confusion_at(scores{0.7, 0.4}, labels{1, 0});
    CHECK(c == confusion{1, 0, 1, 0});
    CHECK(c.accuracy() == 1.0);
    CHECK(c.sensitivity() == 1.0);
    CHECK(c.specificity() == 1.0);
    CHECK(c.precision() == 1.0);

    auto none = confusion_at(scores{0.1, 0.2, 0.3}, labels{1, 1, 0});
    CHECK(none.sensitivity() == 0.0);
    CHECK_FALSE(none.precision());
    CHECK(none.specificity() == 1.0);

    CHECK(confusion_at(scores{0.5}, labels{0}).fp == 1);
    CHECK_FALSE(confusion_at(scores{0.5}, labels{1}).specificity());
    CHECK_THROWS_AS(confusion_at(scores{}, labels{}), data_error);
}

TEST_CASE("confusion equals direct counts on random rows") {
    rng g(3);
    for (int t = 0; t < 20; ++t) {
        scores s;
        labels l;
        for (int i = 0; i < 200; ++i) {
            s.push_back(std::round(g.uniform()*10)/10);
            l.push_back(static_cast<std::uint8_t>(g.below(2)));
        }
        auto c = confusion_at(s, l);
        auto o = oracle::count(s, l, 0.5);
        CHECK(c.tp == o.tp);
        CHECK(c.fp == o.fp);
        CHECK(c.tn == o.tn);
        CHECK(c.fn == o.fn);
        CHECK(c.total() == 200);
        CHECK(c.accuracy() == static_cast<double>(o.tp + o.tn)/200);
        if (o.tp + o.fn) CHECK(*c.sensitivity() == static_cast<double>(o.tp)/static_cast<double>(o.tp + o.fn));
        if (o.tn + o.fp) CHECK(*c.specificity() == static_cast<double>(o.tn)/static_cast<double>(o.tn + o.fp));
        if (o.tp + o.fp) CHECK(*c.precision() == static_cast<double>(o.tp)/static_cast<double>(o.tp + o.fp));
    }
}

TEST_CASE("mean and population std") {
    std::vector<std::optional<double>> v{1.0, 0.5};
    auto a = aggregate(v);
    REQUIRE(a);
    CHECK(a->mean == 0.75);
    CHECK(a->std == 0.25);
    CHECK(a->count == 2);
    std::vector<std::optional<double>> gaps{std::nullopt, 0.2, std::nullopt};
    CHECK(aggregate(gaps)->std == 0);
    std::vector<std::optional<double>> empty{std::nullopt};
    CHECK_FALSE(aggregate(empty));
}

TEST_CASE("mean±std text format") {
    CHECK(format_mean_std({0.949, 0.014, 5}) == "94.9±1.4");
    CHECK(format_mean_std({0.75, 0.25, 2}) == "75.0±25.0");
    CHECK(format_mean_std({1.0, 0.0, 5}) == "100.0±0.0");
    CHECK(format_mean_std({0.986, 0.004, 5}) == "98.6±0.4");
}

TEST_CASE("report over folds") {
    score_table t;
    append(t, table_of({0.9, 0.1, 0.8, 0.2}, {1, 0, 1, 0}, 0));     // AUC 1.0
    append(t, table_of({0.6, 0.6, 0.4, 0.4}, {1, 0, 1, 0}, 1));     // AUC 0.5
    auto r = report(t);
    REQUIRE(r.folds.size() == 2);
    CHECK(r.folds[0].auc == 1.0);
    CHECK(r.folds[1].auc == 0.5);
    CHECK(r.auc->mean == 0.75);
    CHECK(r.auc->std == 0.25);
    CHECK(format_mean_std(*r.auc) == "75.0±25.0");
}

TEST_CASE("identical folds have zero spread") {
    score_table t;
    for (unsigned f = 0; f < 5; ++f) append(t, table_of({0.9, 0.3, 0.6, 0.55, 0.2}, {1, 0, 1, 0, 1}, f));
    auto r = report(t);
    for (const auto& m: {r.auc, r.accuracy, r.sensitivity, r.specificity, r.precision}) {
        REQUIRE(m);
        CHECK(m->std == 0);
    }
}

TEST_CASE("aggregates equal a recomputation from the fold values") {
    rng g(4);
    score_table t;
    for (unsigned f = 0; f < 5; ++f) {
        scores s;
        labels l;
        for (int i = 0; i < 40; ++i) {
            const std::uint8_t y = static_cast<std::uint8_t>(g.below(2));
            l.push_back(y);
            s.push_back(std::clamp(0.5 + (y? 0.2: -0.2) + g.normal(0, 0.25), 0.0, 1.0));
        }
        append(t, table_of(s, l, f));
    }
    auto r = report(t);
    std::vector<double> aucs, sens;
    for (const auto& f: r.folds) {
        aucs.push_back(*f.auc);
        sens.push_back(*f.sensitivity);
    }
    auto [am, as] = oracle::population_mean_std(aucs);
    auto [sm, ss] = oracle::population_mean_std(sens);
    CHECK(r.auc->mean == doctest::Approx(am).epsilon(1e-12));
    CHECK(r.auc->std == doctest::Approx(as).epsilon(1e-12));
    CHECK(r.sensitivity->mean == doctest::Approx(sm).epsilon(1e-12));
    CHECK(r.sensitivity->std == doctest::Approx(ss).epsilon(1e-12));
}

TEST_CASE("single-class fold has no AUC and is excluded with a warning") {
    score_table t;
    append(t, table_of({0.9, 0.1}, {1, 0}, 0));
    append(t, table_of({0.3, 0.2}, {0, 0}, 1));
    auto r = report(t);
    CHECK_FALSE(r.folds[1].auc);
    CHECK(r.auc->count == 1);
    CHECK(r.auc->mean == 1.0);
    CHECK_FALSE(r.warnings.empty());
}

TEST_CASE("specificity2 uses the extra population") {
    score_table t = table_of({0.9, 0.1}, {1, 0});
    score_table others = table_of({0.2, 0.7, 0.1, 0.3}, {0, 0, 0, 0});
    auto r = report(t, 0.5, &others);
    REQUIRE(r.specificity2);
    CHECK(r.specificity2->mean == 0.75);
    CHECK(r.folds[0].specificity2 == confusion_at(scores{0.2, 0.7, 0.1, 0.3}, labels{0, 0, 0, 0}).specificity());
    auto text = render_table(r, "vgg11_3d");
    CHECK(text.find("Specificity2 (%)") != std::string::npos);
    CHECK(text.find("75.0±0.0") != std::string::npos);
}

TEST_CASE("rendered table rows") {
    score_table t;
    append(t, table_of({0.9, 0.1, 0.8, 0.2}, {1, 0, 1, 0}, 0));
    append(t, table_of({0.6, 0.6, 0.4, 0.4}, {1, 0, 1, 0}, 1));
    auto text = render_table(report(t), "net");
    std::istringstream in(text);
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    REQUIRE(lines.size() == 5);
    CHECK(lines[0].starts_with("Network"));
    CHECK(lines[2].starts_with("net"));
    CHECK(lines[2].find("75.0±25.0") != std::string::npos);
    for (const auto& l: lines) CHECK((l.empty() || l.back() != ' '));
    const std::regex cell(R"(\d+\.\d±\d+\.\d)");
    CHECK(std::distance(std::sregex_iterator(lines[2].begin(), lines[2].end(), cell), std::sregex_iterator()) == 5);

    auto j = to_json(report(t));
    CHECK(j["aggregate"]["auc"]["text"] == "75.0±25.0");
}

TEST_CASE("scores CSV round trip and validation") {
    auto t = table_of({0.25, 1.0, 0.0}, {1, 0, 1}, 3);
    std::ostringstream out;
    write_scores_csv(out, t);
    CHECK(out.str().starts_with("record_index,neuron_id,point_id,fold,label,score\n"));
    std::istringstream in(out.str());
    CHECK(read_scores_csv(in).rows == t.rows);

    std::istringstream bad_score("record_index,neuron_id,point_id,fold,label,score\n0,1,1,0,1,1.5\n");
    CHECK_THROWS_AS(read_scores_csv(bad_score), data_error);
    std::istringstream bad_label("record_index,neuron_id,point_id,fold,label,score\n0,1,1,0,2,0.5\n");
    CHECK_THROWS_AS(read_scores_csv(bad_label), data_error);
    std::istringstream bad_header("a,b\n");
    CHECK_THROWS_AS(read_scores_csv(bad_header), data_error);
    std::istringstream short_row("record_index,neuron_id,point_id,fold,label,score\n0,1,1,0\n");
    CHECK_THROWS_AS(read_scores_csv(short_row), data_error);
}
