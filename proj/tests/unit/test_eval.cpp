#include "densesvm/errors.hpp"
#include "densesvm/eval.hpp"

#include "support/oracles.hpp"
#include "support/random.hpp"

#include <doctest.h>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>

using namespace densesvm;
using namespace densesvm::eval;
namespace fs = std::filesystem;

namespace {

std::vector<int> class_labels(std::size_t pos, std::size_t neg, std::uint64_t shuffle_seed = 0) {
    std::vector<int> y(pos, 1);
    y.insert(y.end(), neg, -1);
    if (shuffle_seed) {
        testing::Rng rng(shuffle_seed);
        rng.shuffle(y);
    }
    return y;
}

Matrix blob_features(const std::vector<int>& y, double separation, std::uint64_t seed, std::size_t d = 3) {
    testing::Rng rng(seed);
    Matrix x(y.size(), d);
    for (std::size_t i = 0; i < y.size(); ++i)
        for (std::size_t j = 0; j < d; ++j) x(i, j) = (j == 0 ? 0.5 * separation * y[i] : 0.0) + rng.normal();
    return x;
}

}  // namespace

TEST_CASE("stratified folds on the 349/397 split") {
    const auto y = class_labels(349, 397, 5);
    const FoldAssignment a = stratified_kfold(y, 10, 42);
    int n75 = 0;
    int n74 = 0;
    for (int f = 0; f < 10; ++f) {
        const auto size = a.fold_size(f);
        n75 += size == 75;
        n74 += size == 74;
        std::size_t pos = 0;
        for (std::size_t i : a.test_indices(f)) pos += y[i] > 0;
        CHECK((pos == 34 || pos == 35));
        CHECK(a.train_indices(f).size() + size == 746);
    }
    CHECK(n75 == 6);
    CHECK(n74 == 4);

    std::vector<std::size_t> all;
    for (int f = 0; f < 10; ++f) {
        const auto t = a.test_indices(f);
        all.insert(all.end(), t.begin(), t.end());
    }
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expect(746);
    std::iota(expect.begin(), expect.end(), 0);
    CHECK(all == expect);

    CHECK(stratified_kfold(y, 10, 42).fold == a.fold);
    CHECK(stratified_kfold(y, 10, 43).fold != a.fold);
}

TEST_CASE("fold partition property on random label sets") {
    testing::Rng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t pos = static_cast<std::size_t>(rng.integer(2, 60));
        const std::size_t neg = static_cast<std::size_t>(rng.integer(2, 60));
        const auto y = class_labels(pos, neg, 1 + static_cast<std::uint64_t>(trial));
        const int k = rng.integer(2, static_cast<int>(std::min(pos, neg)));
        const FoldAssignment a = stratified_kfold(y, k, static_cast<std::uint64_t>(trial));
        std::size_t lo = SIZE_MAX, hi = 0, plo = SIZE_MAX, phi = 0, nlo = SIZE_MAX, nhi = 0;
        for (int f = 0; f < k; ++f) {
            std::size_t p = 0, n = 0;
            for (std::size_t i : a.test_indices(f)) (y[i] > 0 ? p : n)++;
            lo = std::min(lo, p + n);
            hi = std::max(hi, p + n);
            plo = std::min(plo, p);
            phi = std::max(phi, p);
            nlo = std::min(nlo, n);
            nhi = std::max(nhi, n);
        }
        CHECK(hi - lo <= 1);
        CHECK(phi - plo <= 1);
        CHECK(nhi - nlo <= 1);
        for (int f : a.fold) REQUIRE((f >= 0 && f < k));
    }
}

TEST_CASE("fold edge cases") {
    const auto y = class_labels(5, 5);
    const FoldAssignment loo = stratified_kfold(y, 10, 1);
    for (int f = 0; f < 10; ++f) CHECK(loo.fold_size(f) == 1);
    CHECK_THROWS_AS(stratified_kfold(y, 1, 1), BadK);
    CHECK_THROWS_AS(stratified_kfold(y, 11, 1), BadK);
    CHECK_THROWS_AS(stratified_kfold(std::vector<int>{1, 0, -1}, 2, 1), InvalidData);
}

TEST_CASE("metrics from confusion counts") {
    const MetricSet m = metrics_from_confusion({.tp = 3, .fp = 1, .tn = 4, .fn = 2});
    CHECK(m.accuracy == 0.7);
    CHECK(*m.precision == 0.75);
    CHECK(*m.recall == 0.6);
    CHECK(m.f1 == doctest::Approx(0.6667).epsilon(5e-5));
    CHECK(m.f1 == doctest::Approx(2.0 * 0.75 * 0.6 / 1.35).epsilon(1e-15));

    const MetricSet perfect = metrics_from_confusion({.tp = 7, .fp = 0, .tn = 9, .fn = 0});
    CHECK(perfect.accuracy == 1.0);
    CHECK(*perfect.precision == 1.0);
    CHECK(*perfect.recall == 1.0);
    CHECK(perfect.f1 == 1.0);

    const MetricSet none = metrics_from_confusion({.tp = 0, .fp = 0, .tn = 5, .fn = 0});
    CHECK_FALSE(none.recall.has_value());
    CHECK_FALSE(none.precision.has_value());
    CHECK(none.f1 == 0.0);
    CHECK(none.accuracy == 1.0);

    CHECK_THROWS_AS(metrics_from_confusion({}), InvalidData);
}

TEST_CASE("metric identities on random confusion tables") {
    testing::Rng rng(12);
    for (int trial = 0; trial < 500; ++trial) {
        ConfusionCounts c{static_cast<std::size_t>(rng.integer(0, 50)), static_cast<std::size_t>(rng.integer(0, 50)),
                          static_cast<std::size_t>(rng.integer(0, 50)), static_cast<std::size_t>(rng.integer(0, 50))};
        if (c.total() == 0) continue;
        const MetricSet m = metrics_from_confusion(c);
        if (m.precision && m.recall) {
            const double expect = 2.0 * c.tp / static_cast<double>(2 * c.tp + c.fp + c.fn);
            REQUIRE(m.f1 == expect);
            if (*m.precision + *m.recall > 0)
                REQUIRE(m.f1 == doctest::Approx(2 * *m.precision * *m.recall / (*m.precision + *m.recall)).epsilon(1e-14));
            // Fraction of positives missed is the recall complement.
            REQUIRE(static_cast<double>(c.fn) / static_cast<double>(c.tp + c.fn) == doctest::Approx(1.0 - *m.recall));
        }
        REQUIRE(m.accuracy >= 0.0);
        REQUIRE(m.accuracy <= 1.0);
    }
}

TEST_CASE("confusion counting") {
    std::vector<int> truth{1, 1, -1, -1, 1};
    std::vector<int> pred{1, -1, 1, -1, 1};
    const ConfusionCounts c = confusion(truth, pred);
    CHECK(c == ConfusionCounts{.tp = 2, .fp = 1, .tn = 1, .fn = 1});
    CHECK_THROWS_AS(confusion(truth, std::vector<int>{1}), DimError);
}

TEST_CASE("roc examples") {
    CHECK(roc_auc(std::vector<double>{0.9, 0.8, 0.7, 0.1}, std::vector<int>{1, 1, -1, -1}).auc == 1.0);
    CHECK(roc_auc(std::vector<double>{0.8, 0.4, 0.6, 0.2}, std::vector<int>{1, 1, -1, -1}).auc == 0.75);
    CHECK(roc_auc(std::vector<double>{0.3, 0.3, 0.3, 0.3, 0.3}, std::vector<int>{1, -1, 1, -1, -1}).auc == 0.5);
    const RocCurve c = roc_auc(std::vector<double>{0.8, 0.4, 0.6, 0.2}, std::vector<int>{1, 1, -1, -1});
    CHECK(c.points.front().fpr == 0.0);
    CHECK(c.points.front().tpr == 0.0);
    CHECK(c.points.back().fpr == 1.0);
    CHECK(c.points.back().tpr == 1.0);
    CHECK(c.points.size() == 5);
    CHECK_THROWS_AS(roc_auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), SingleClass);
}

TEST_CASE("trapezoid auc equals pair counting") {
    testing::Rng rng(404);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = static_cast<std::size_t>(rng.integer(2, 50));
        std::vector<int> y(n);
        for (auto& v : y) v = rng.uniform() < 0.5 ? 1 : -1;
        y[0] = 1;
        y[1] = -1;
        const int levels = trial % 3 == 0 ? 3 : 1000;
        std::vector<double> s(n);
        for (auto& v : s) v = static_cast<double>(rng.integer(0, levels));
        const double auc = roc_auc(s, y).auc;
        REQUIRE(std::abs(auc - testing::pair_count_auc(s, y)) <= 1e-12);

        // Relabel and negate: ranking of positives over negatives is unchanged.
        std::vector<int> flipped(y);
        std::vector<double> negated(s);
        for (auto& v : flipped) v = -v;
        for (auto& v : negated) v = -v;
        REQUIRE(std::abs(roc_auc(negated, flipped).auc - auc) <= 1e-12);
    }
}

TEST_CASE("relabeling transposes the confusion table") {
    std::vector<int> truth{1, 1, -1, -1, 1, -1, -1};
    std::vector<int> pred{1, -1, 1, -1, 1, -1, 1};
    std::vector<int> t2(truth), p2(pred);
    for (auto& v : t2) v = -v;
    for (auto& v : p2) v = -v;
    const ConfusionCounts a = confusion(truth, pred);
    const ConfusionCounts b = confusion(t2, p2);
    CHECK(b == ConfusionCounts{.tp = a.tn, .fp = a.fn, .tn = a.tp, .fn = a.fp});
    CHECK(*metrics_from_confusion(b).precision == static_cast<double>(a.tn) / static_cast<double>(a.tn + a.fn));
}

TEST_CASE("summary statistics") {
    std::vector<std::optional<double>> v{1.0, 2.0, std::nullopt, 3.0, 4.0};
    const Summary s = summarize(v);
    CHECK(s.defined == 4);
    CHECK(s.mean == 2.5);
    CHECK(s.std == doctest::Approx(1.2909944487358056).epsilon(1e-15));
    CHECK(s.min == 1.0);
    CHECK(s.max == 4.0);
    CHECK(format_cell({.mean = 0.9061, .std = 0.054, .defined = 10}) == "90.61(±5.4)");
    CHECK(format_cell({}) == "n/a");
    std::vector<std::optional<double>> same(10, 0.3);
    CHECK(summarize(same).std == 0.0);
    CHECK(summarize(same).mean == 0.3);
}

TEST_CASE("cross validation on separable blobs is perfect") {
    const auto y = class_labels(100, 100, 3);
    const Matrix x = blob_features(y, 30.0, 4);
    const CVReport r = cross_validate(x, y, {.nu = 0.4, .gamma = 0.05}, {.k = 10, .seed = 42});
    REQUIRE(r.folds.size() == 10);
    for (const auto& f : r.folds) {
        CHECK(f.metrics.accuracy == 1.0);
        CHECK(*f.metrics.auc == 1.0);
        CHECK(f.metrics.f1 == 1.0);
        CHECK(f.test_size == 20);
    }
    CHECK(r.accuracy.mean == 1.0);
    CHECK(r.accuracy.std == 0.0);
    CHECK(r.auc.std == 0.0);
}

TEST_CASE("cross validation under the permutation null") {
    double total = 0.0;
    for (std::uint64_t rep = 0; rep < 20; ++rep) {
        const auto y = class_labels(100, 100, 100 + rep);
        testing::Rng rng(500 + rep);
        Matrix x(200, 5);
        for (double& v : x.data) v = rng.normal();
        total += cross_validate(x, y, {.nu = 0.4, .gamma = 0.2}, {.k = 10, .seed = rep}).accuracy.mean;
    }
    const double mean = total / 20.0;
    MESSAGE("null accuracy " << mean);
    CHECK(mean > 0.4);
    CHECK(mean < 0.6);
}

TEST_CASE("cross validation structure and determinism") {
    const auto y = class_labels(349, 397, 8);
    const Matrix x = blob_features(y, 1.0, 9, 2);
    const CrossValidator cv(x, y, 10, 42);
    const svm::NuSvmConfig cfg{.nu = 0.4, .gamma = 0.5, .max_iter = 176};
    const CVReport seq = cv.run(cfg, 1);
    const CVReport par = cv.run(cfg, 4);
    CHECK(seq.folds.size() == 10);
    CHECK(report_json(seq) == report_json(par));
    CHECK(report_table(seq) == report_table(par));
    CHECK(report_json(seq) == report_json(cross_validate(x, y, cfg, {.k = 10, .seed = 42, .threads = 2})));
    for (const Summary* s : {&seq.accuracy, &seq.recall, &seq.precision, &seq.f1, &seq.auc}) {
        CHECK(s->std >= 0.0);
        CHECK(s->mean >= s->min);
        CHECK(s->mean <= s->max);
    }
    const auto j = nlohmann::json::parse(report_json(seq));
    CHECK(j["folds"].size() == 10);
    CHECK(j["std_kind"] == "sample");
    CHECK(j["config"]["max_iter"] == 176);
    const std::string table = report_table(seq);
    CHECK(table.find("Accuracy") != std::string::npos);
    CHECK(table.find("(±") != std::string::npos);
}

TEST_CASE("infeasible nu names the fold") {
    const auto y = class_labels(12, 88, 2);
    const Matrix x = blob_features(y, 2.0, 3);
    try {
        cross_validate(x, y, {.nu = svm::nu_max(y)}, {.k = 10, .seed = 1});
        FAIL("expected InfeasibleNu");
    } catch (const InfeasibleNu& e) {
        CHECK(std::string(e.what()).find("fold ") != std::string::npos);
    }
}

TEST_CASE("feature and label files") {
    const fs::path dir = fs::temp_directory_path() / ("densesvm_eval_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    Matrix x(3, 4);
    for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] = static_cast<float>(0.1 * static_cast<double>(i) - 0.5);
    write_features(dir / "f.bin", x);
    CHECK(fs::file_size(dir / "f.bin") == 24 + 12 * 4);
    const Matrix back = read_features(dir / "f.bin");
    CHECK(back.rows == 3);
    CHECK(back.cols == 4);
    CHECK(back.data == x.data);

    std::vector<int> y{1, -1, 1};
    write_labels(dir / "l.csv", y);
    CHECK(read_labels(dir / "l.csv") == y);
    std::ofstream(dir / "plain.csv") << "1\n-1\n\n+1\n";
    CHECK(read_labels(dir / "plain.csv") == std::vector<int>{1, -1, 1});
    std::ofstream(dir / "bad.csv") << "label\n1\n0\n";
    CHECK_THROWS_AS(read_labels(dir / "bad.csv"), FormatError);

    fs::resize_file(dir / "f.bin", 30);
    CHECK_THROWS_AS(read_features(dir / "f.bin"), FormatError);
    std::ofstream(dir / "g.bin") << "NOPE12345678901234567890";
    CHECK_THROWS_AS(read_features(dir / "g.bin"), FormatError);
    CHECK_THROWS_AS(read_features(dir / "missing.bin"), FormatError);
    fs::remove_all(dir);
}
