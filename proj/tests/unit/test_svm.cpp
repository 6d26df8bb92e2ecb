#include "densesvm/errors.hpp"
#include "densesvm/svm.hpp"

#include "support/oracles.hpp"
#include "support/random.hpp"

#include <Eigen/Dense>
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

using namespace densesvm;
using namespace densesvm::svm;

namespace {

TrainingSet make_set(const std::vector<std::vector<double>>& rows, std::vector<int> labels) {
    TrainingSet s{Matrix(rows.size(), rows.front().size()), std::move(labels)};
    for (std::size_t i = 0; i < rows.size(); ++i) std::copy(rows[i].begin(), rows[i].end(), s.features.row(i).begin());
    return s;
}

TrainingSet blobs(testing::Rng& rng, std::size_t per_class, std::size_t d, double separation, double sigma) {
    TrainingSet s{Matrix(2 * per_class, d), {}};
    for (std::size_t i = 0; i < 2 * per_class; ++i) {
        const int y = i < per_class ? kPositive : kNegative;
        s.labels.push_back(y);
        for (std::size_t j = 0; j < d; ++j)
            s.features(i, j) = (j == 0 ? y * separation / 2.0 : 0.0) + sigma * rng.normal();
    }
    return s;
}

// Random instance with both classes present.
TrainingSet random_instance(testing::Rng& rng, std::size_t n, std::size_t d) {
    TrainingSet s{Matrix(n, d), std::vector<int>(n)};
    for (double& v : s.features.data) v = rng.uniform(-1.5, 1.5);
    for (std::size_t i = 0; i < n; ++i) s.labels[i] = rng.uniform() < 0.5 ? kPositive : kNegative;
    s.labels[0] = kPositive;
    s.labels[1] = kNegative;
    rng.shuffle(s.labels);
    return s;
}

double training_accuracy(const NuSvmModel& m, const TrainingSet& s) {
    std::size_t ok = 0;
    for (std::size_t i = 0; i < s.labels.size(); ++i) ok += m.predict_label(s.features.row(i)) == s.labels[i];
    return static_cast<double>(ok) / static_cast<double>(s.labels.size());
}

}  // namespace

TEST_CASE("rbf kernel values") {
    std::vector<double> x{0.0, 0.0};
    std::vector<double> y{6.0, 8.0};
    CHECK(rbf_kernel(x, y, 0.0098) == doctest::Approx(0.37531109885139957).epsilon(1e-14));
    CHECK(rbf_kernel(x, x, 0.0098) == 1.0);
    CHECK(rbf_kernel(x, y, 0.0) == 1.0);
    std::vector<double> z{1.0};
    CHECK_THROWS_AS(rbf_kernel(x, z, 1.0), DimError);
    CHECK_THROWS_AS(rbf_kernel(x, y, -1.0), InvalidData);
}

TEST_CASE("gram matrix matches oracle and is positive semidefinite") {
    testing::Rng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = static_cast<std::size_t>(rng.integer(2, 30));
        Matrix x(n, static_cast<std::size_t>(rng.integer(1, 8)));
        for (double& v : x.data) v = rng.uniform(-3.0, 3.0);
        const double gamma = std::exp(rng.uniform(-5.0, 1.0));
        const Matrix k = rbf_gram(x, gamma);
        const Matrix ref = testing::oracle_gram(x, gamma);
        Eigen::MatrixXd e(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                REQUIRE(k(i, j) == doctest::Approx(ref(i, j)).epsilon(1e-12));
                REQUIRE(k(i, j) == k(j, i));
                e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = k(i, j);
            }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(e, Eigen::EigenvaluesOnly);
        CHECK(eig.eigenvalues().minCoeff() > -1e-9);
    }
}

TEST_CASE("xor layout matches the polytope oracle") {
    const TrainingSet s = make_set({{0, 0}, {1, 1}, {0, 1}, {1, 0}}, {+1, +1, -1, -1});
    const TrainResult r = train_nu_svm(s, {.nu = 0.5, .gamma = 1.0, .max_iter = 1000, .tol = 1e-9});
    CHECK(r.dual.converged);
    CHECK(r.model.support_count() == 4);
    CHECK(training_accuracy(r.model, s) == 1.0);
    const auto oracle = testing::nu_dual_polytope_oracle(rbf_gram(s.features, 1.0), s.labels, 0.5);
    CHECK(std::abs(r.dual.objective - oracle.objective) < 1e-6);
}

TEST_CASE("solver matches the polytope oracle on small random instances") {
    testing::Rng rng(77);
    for (int trial = 0; trial < 12; ++trial) {
        const std::size_t n = static_cast<std::size_t>(rng.integer(2, 5));
        const TrainingSet s = random_instance(rng, n, static_cast<std::size_t>(rng.integer(1, 3)));
        const double gamma = std::exp(rng.uniform(-2.0, 1.5));
        const double nu = rng.uniform(0.05, 1.0) * nu_max(s.labels);
        const Matrix k = rbf_gram(s.features, gamma);
        const DualSolution sol = solve_nu_dual(k, s.labels, nu, 10000, 1e-9);
        const auto oracle = testing::nu_dual_polytope_oracle(k, s.labels, nu, 32);
        INFO("trial " << trial << " n=" << n << " nu=" << nu);
        CHECK(sol.converged);
        CHECK(std::abs(sol.objective - oracle.objective) < 1e-6);
        CHECK(sol.objective == doctest::Approx(dual_objective(k, s.labels, sol.alpha)).epsilon(1e-12));
    }
}

TEST_CASE("separated blobs") {
    testing::Rng rng(3);
    const TrainingSet s = blobs(rng, 20, 2, 40.0, 1.0);
    const TrainResult r = train_nu_svm(s, {.nu = 0.4, .gamma = 0.0098});
    CHECK(training_accuracy(r.model, s) == 1.0);
    CHECK(static_cast<double>(r.model.support_count()) / 40.0 >= 0.4);
    CHECK(r.support_indices.size() == r.model.support_count());
    CHECK(r.model.gamma == 0.0098);
    CHECK(r.model.nu == 0.4);
    CHECK(r.model.max_iter == 176);
}

TEST_CASE("infeasible nu") {
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < 10; ++i) rows.push_back({static_cast<double>(i)});
    const TrainingSet s = make_set(rows, {1, 1, 1, 1, 1, 1, 1, 1, 1, -1});
    CHECK(nu_max(s.labels) == doctest::Approx(0.2));
    CHECK_THROWS_AS(train_nu_svm(s, {.nu = 0.5}), InfeasibleNu);
    CHECK_NOTHROW(train_nu_svm(s, {.nu = 0.2}));
    CHECK_THROWS_AS(train_nu_svm(s, {.nu = 0.0}), InfeasibleNu);
}

TEST_CASE("training set validation") {
    CHECK_THROWS_AS(train_nu_svm(make_set({{0.0}, {1.0}}, {1, 1}), {}), InvalidData);
    CHECK_THROWS_AS(train_nu_svm(make_set({{0.0}, {1.0}}, {1, 0}), {}), InvalidData);
    CHECK_THROWS_AS(train_nu_svm(make_set({{0.0}, {NAN}}, {1, -1}), {}), InvalidData);
    CHECK_THROWS_AS(train_nu_svm(make_set({{0.0}}, {1}), {}), InvalidData);
}

TEST_CASE("symmetric pair decides zero at the midpoint") {
    const TrainingSet s = make_set({{1.0, 2.0}, {3.0, -1.0}}, {+1, -1});
    for (double nu : {0.3, 1.0}) {
        const TrainResult r = train_nu_svm(s, {.nu = nu, .gamma = 0.5});
        std::vector<double> mid{2.0, 0.5};
        CHECK(std::abs(r.model.decision_value(mid)) < 1e-9);
        CHECK(r.model.predict_label(s.features.row(0)) == kPositive);
        CHECK(r.model.predict_label(s.features.row(1)) == kNegative);
    }
}

TEST_CASE("margin condition on a converged separable model") {
    testing::Rng rng(11);
    const TrainingSet s = blobs(rng, 25, 3, 6.0, 1.0);
    const double tol = 1e-8;
    const TrainResult r = train_nu_svm(s, {.nu = 0.2, .gamma = 0.1, .max_iter = 10000, .tol = tol});
    REQUIRE(r.dual.converged);
    const double ub = 1.0 / 50.0;
    std::size_t interior = 0;
    for (std::size_t i = 0; i < 50; ++i) {
        const double f = r.model.decision_value(s.features.row(i));
        const double a = r.dual.alpha[i];
        if (a == 0.0) {
            CHECK(s.labels[i] * f >= 1.0 - 1e-6);
            interior += s.labels[i] > 0;
        } else if (a < ub) {
            CHECK(s.labels[i] * f == doctest::Approx(1.0).epsilon(1e-6));
        } else {
            CHECK(s.labels[i] * f <= 1.0 + 1e-6);
        }
    }
    CHECK(interior > 0);
}

TEST_CASE("far-away input falls back to the bias") {
    testing::Rng rng(2);
    const TrainingSet s = blobs(rng, 10, 2, 4.0, 1.0);
    const TrainResult r = train_nu_svm(s, {.nu = 0.4, .gamma = 1.0});
    std::vector<double> far{1e3, -1e3};
    CHECK(r.model.decision_value(far) == r.model.bias);
    CHECK_THROWS_AS(r.model.decision_value(std::vector<double>{1.0}), DimError);
}

TEST_CASE("sign rule") {
    CHECK(label_from_decision(0.0) == kNegative);
    CHECK(label_from_decision(-0.0) == kNegative);
    CHECK(label_from_decision(1e-300) == kPositive);
    CHECK(label_from_decision(-1e-300) == kNegative);
    NuSvmModel m;
    CHECK(m.label_name(kPositive) == "COVID");
    CHECK(m.label_name(kNegative) == "NonCOVID");
}

TEST_CASE("dual feasibility and nu property on random instances") {
    testing::Rng rng(2024);
    int checked = 0;
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = static_cast<std::size_t>(rng.integer(4, 40));
        const TrainingSet s = random_instance(rng, n, static_cast<std::size_t>(rng.integer(1, 5)));
        const double nu = rng.uniform(0.05, 1.0) * nu_max(s.labels);
        const double gamma = std::exp(rng.uniform(-3.0, 1.0));
        const TrainResult r = train_nu_svm(s, {.nu = nu, .gamma = gamma, .max_iter = 5000, .tol = 1e-6});
        const auto& a = r.dual.alpha;
        const double ub = 1.0 / static_cast<double>(n);
        double sum = 0.0;
        double signed_sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            REQUIRE(a[i] >= 0.0);
            REQUIRE(a[i] <= ub);
            sum += a[i];
            signed_sum += a[i] * s.labels[i];
        }
        CHECK(sum == doctest::Approx(nu).epsilon(1e-10));
        CHECK(std::abs(signed_sum) < 1e-12);
        if (!r.dual.converged) continue;
        ++checked;
        // Gradient error is bounded by tol, so y f carries up to tol / r.
        REQUIRE(r.dual.r > 0.0);
        const double band = 2.0 * 1e-6 / r.dual.r + 1e-9;
        std::size_t margin_errors = 0;
        for (std::size_t i = 0; i < n; ++i)
            margin_errors += s.labels[i] * r.model.decision_value(s.features.row(i)) < 1.0 - band;
        const double slack = 1.0 / static_cast<double>(n);
        CHECK(static_cast<double>(margin_errors) / n <= nu + slack);
        CHECK(static_cast<double>(r.model.support_count()) / n >= nu - slack);
    }
    CHECK(checked > 30);
}

TEST_CASE("row permutation leaves the optimum unchanged") {
    testing::Rng rng(99);
    for (int trial = 0; trial < 8; ++trial) {
        const std::size_t n = static_cast<std::size_t>(rng.integer(6, 30));
        const TrainingSet s = random_instance(rng, n, 2);
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(perm);
        TrainingSet p{s.features.select_rows(perm), {}};
        for (std::size_t i : perm) p.labels.push_back(s.labels[i]);
        const NuSvmConfig cfg{.nu = 0.5 * nu_max(s.labels), .gamma = 0.7, .max_iter = 10000, .tol = 1e-10};
        const TrainResult a = train_nu_svm(s, cfg);
        const TrainResult b = train_nu_svm(p, cfg);
        CHECK(a.dual.objective == doctest::Approx(b.dual.objective).epsilon(1e-8));
        std::vector<double> probe{0.3, -0.2};
        CHECK(a.model.decision_value(probe) == doctest::Approx(b.model.decision_value(probe)).epsilon(1e-5));
    }
}

TEST_CASE("training is deterministic") {
    testing::Rng rng(8);
    const TrainingSet s = blobs(rng, 30, 4, 2.0, 1.0);
    const TrainResult a = train_nu_svm(s, {});
    const TrainResult b = train_nu_svm(s, {});
    CHECK(a.dual.alpha == b.dual.alpha);
    CHECK(serialize_model(a.model) == serialize_model(b.model));
}

TEST_CASE("iteration cap flags non-convergence but still returns a model") {
    testing::Rng rng(4);
    const TrainingSet s = blobs(rng, 60, 3, 1.0, 1.0);
    const TrainResult r = train_nu_svm(s, {.nu = 0.3, .gamma = 2.0, .max_iter = 1, .tol = 1e-12});
    CHECK_FALSE(r.dual.converged);
    CHECK_FALSE(r.model.converged);
    CHECK(r.dual.iterations == 1);
    CHECK(r.dual.kkt_residual >= 1e-12);
    CHECK(std::isfinite(r.model.decision_value(s.features.row(0))));
}

TEST_CASE("model serialization") {
    testing::Rng rng(6);
    const TrainingSet s = blobs(rng, 15, 5, 3.0, 1.0);
    const TrainResult r = train_nu_svm(s, {.nu = 0.4, .gamma = 0.0098, .max_iter = 176});
    const auto bytes = serialize_model(r.model);
    REQUIRE(bytes.size() > 4);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "DSVM");
    CHECK(bytes[4] == kModelFormatVersion);

    const NuSvmModel back = deserialize_model(bytes);
    CHECK(back.gamma == 0.0098);
    CHECK(back.nu == 0.4);
    CHECK(back.max_iter == 176);
    CHECK(back.support_count() == r.model.support_count());
    CHECK(back.dim() == 5);
    CHECK(back.label_names == r.model.label_names);
    for (std::size_t i = 0; i < s.labels.size(); ++i)
        CHECK(back.decision_value(s.features.row(i)) ==
              doctest::Approx(r.model.decision_value(s.features.row(i))).epsilon(1e-5));
    CHECK(serialize_model(back) == bytes);
    CHECK(model_version(back) == model_version(r.model));
    CHECK(model_version(back).rfind("nusvm-v1-", 0) == 0);

    const auto path = std::filesystem::temp_directory_path() / "densesvm_test_model.dsvm";
    save_model(r.model, path);
    CHECK(serialize_model(load_model(path)) == bytes);
    std::filesystem::remove(path);

    SUBCASE("bad magic") {
        auto b = bytes;
        b[0] = 'X';
        CHECK_THROWS_AS(deserialize_model(b), FormatError);
    }
    SUBCASE("unknown version") {
        auto b = bytes;
        b[4] = 9;
        CHECK_THROWS_AS(deserialize_model(b), FormatError);
    }
    SUBCASE("truncated") {
        for (std::size_t cut : {std::size_t{3}, std::size_t{20}, bytes.size() - 1}) {
            std::vector<std::uint8_t> b(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
            CHECK_THROWS_AS(deserialize_model(b), FormatError);
        }
    }
    SUBCASE("trailing bytes") {
        auto b = bytes;
        b.push_back(0);
        CHECK_THROWS_AS(deserialize_model(b), FormatError);
    }
    SUBCASE("missing file") { CHECK_THROWS_AS(load_model("/nonexistent/model.dsvm"), FormatError); }
    SUBCASE("version changes with content") {
        NuSvmModel other = r.model;
        other.bias += 1.0;
        CHECK(model_version(other) != model_version(r.model));
    }
}
