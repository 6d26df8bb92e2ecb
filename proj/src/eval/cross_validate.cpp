#include "densesvm/errors.hpp"
#include "densesvm/eval.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

namespace densesvm::eval {

CrossValidator::CrossValidator(Matrix features, std::vector<int> labels, int k, std::uint64_t seed)
    : features_(std::move(features)), labels_(std::move(labels)), seed_(seed) {
    svm::TrainingSet{features_, labels_}.validate();
    folds_ = stratified_kfold(labels_, k, seed);
    distances_ = svm::squared_distances(features_);
}

FoldResult CrossValidator::run_fold(int f, const svm::NuSvmConfig& cfg) const {
    FoldResult r;
    r.fold = f;
    const std::vector<std::size_t> train = folds_.train_indices(f);
    r.test_indices = folds_.test_indices(f);
    r.train_size = train.size();
    r.test_size = r.test_indices.size();

    svm::TrainingSet data{features_.select_rows(train), {}};
    data.labels.reserve(train.size());
    for (std::size_t i : train) data.labels.push_back(labels_[i]);
    Matrix kernel(train.size(), train.size());
    for (std::size_t a = 0; a < train.size(); ++a)
        for (std::size_t b = 0; b < train.size(); ++b) kernel(a, b) = std::exp(-cfg.gamma * distances_(train[a], train[b]));

    svm::TrainResult trained;
    try {
        trained = svm::train_nu_svm(data, cfg, kernel);
    } catch (const InfeasibleNu& e) {
        throw InfeasibleNu("fold " + std::to_string(f + 1) + ": " + e.what());
    }
    r.support_vectors = trained.model.support_count();
    r.converged = trained.dual.converged;

    std::vector<int> truth, predicted;
    for (std::size_t i : r.test_indices) {
        const double v = trained.model.decision_value(features_.row(i));
        r.decision_values.push_back(v);
        truth.push_back(labels_[i]);
        predicted.push_back(svm::label_from_decision(v));
    }
    r.counts = confusion(truth, predicted);
    r.metrics = metrics_from_confusion(r.counts);
    bool both = false;
    for (int t : truth) both |= t != truth.front();
    if (both) r.metrics.auc = roc_auc(r.decision_values, truth).auc;
    return r;
}

CVReport CrossValidator::run(const svm::NuSvmConfig& cfg, unsigned threads) const {
    const int k = folds_.k;
    CVReport report;
    report.k = k;
    report.seed = seed_;
    report.config = cfg;
    report.folds.resize(static_cast<std::size_t>(k));

    const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(k)));
    if (workers == 1) {
        for (int f = 0; f < k; ++f) report.folds[static_cast<std::size_t>(f)] = run_fold(f, cfg);
    } else {
        std::atomic<int> next{0};
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(k));
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (int f = next++; f < k; f = next++) {
                    try {
                        report.folds[static_cast<std::size_t>(f)] = run_fold(f, cfg);
                    } catch (...) {
                        errors[static_cast<std::size_t>(f)] = std::current_exception();
                    }
                }
            });
        for (auto& t : pool) t.join();
        for (const auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    const auto collect = [&](auto&& get) {
        std::vector<std::optional<double>> v;
        for (const auto& f : report.folds) v.push_back(get(f.metrics));
        return summarize(v);
    };
    report.accuracy = collect([](const MetricSet& m) { return std::optional<double>(m.accuracy); });
    report.recall = collect([](const MetricSet& m) { return m.recall; });
    report.precision = collect([](const MetricSet& m) { return m.precision; });
    report.f1 = collect([](const MetricSet& m) { return std::optional<double>(m.f1); });
    report.auc = collect([](const MetricSet& m) { return m.auc; });
    return report;
}

CVReport cross_validate(const Matrix& features, std::span<const int> labels, const svm::NuSvmConfig& cfg,
                        const CVOptions& options) {
    const CrossValidator cv(features, std::vector<int>(labels.begin(), labels.end()), options.k, options.seed);
    return cv.run(cfg, options.threads);
}

}  // namespace densesvm::eval
