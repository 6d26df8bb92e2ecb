#pragma once

#include "densesvm/matrix.hpp"
#include "densesvm/svm.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace densesvm::eval {

struct FoldAssignment {
    int k = 0;
    std::vector<int> fold;  // fold index per sample

    std::vector<std::size_t> test_indices(int f) const;
    std::vector<std::size_t> train_indices(int f) const;
    std::size_t fold_size(int f) const;
};

/// Shuffles each class with `seed`, then deals positives followed by
/// negatives round-robin over the k folds, so class counts per fold differ
/// by at most one. Throws BadK when k < 2 or k > n.
FoldAssignment stratified_kfold(std::span<const int> labels, int k, std::uint64_t seed);

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;

    std::size_t total() const { return tp + fp + tn + fn; }
    bool operator==(const ConfusionCounts&) const = default;
};

/// Positive class is +1. Throws DimError on length mismatch.
ConfusionCounts confusion(std::span<const int> truth, std::span<const int> predicted);

struct MetricSet {
    double accuracy = 0.0;
    std::optional<double> precision;  // empty when TP + FP = 0
    std::optional<double> recall;     // empty when TP + FN = 0
    double f1 = 0.0;                  // 2TP / (2TP + FP + FN); 0 unless both precision and recall exist
    std::optional<double> auc;
};

/// Throws InvalidData on an empty confusion table.
MetricSet metrics_from_confusion(const ConfusionCounts& c);

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double threshold = 0.0;
};

struct RocCurve {
    std::vector<RocPoint> points;  // from (0,0) to (1,1)
    double auc = 0.0;
};

/// Sweeps thresholds over distinct scores (higher = more positive); tied
/// scores move both rates at once. Throws SingleClass.
RocCurve roc_auc(std::span<const double> scores, std::span<const int> truth);

struct FoldResult {
    int fold = 0;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
    std::size_t support_vectors = 0;
    bool converged = false;
    ConfusionCounts counts;
    MetricSet metrics;
    std::vector<std::size_t> test_indices;
    std::vector<double> decision_values;
};

struct Summary {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation (k - 1)
    double min = 0.0;
    double max = 0.0;
    std::size_t defined = 0;  // folds where the metric exists
};

struct CVReport {
    int k = 0;
    std::uint64_t seed = 0;
    svm::NuSvmConfig config;
    std::vector<FoldResult> folds;
    Summary accuracy, recall, precision, f1, auc;
};

/// Mean, sample std, min and max over the defined values.
Summary summarize(std::span<const std::optional<double>> values);

struct CVOptions {
    int k = 10;
    std::uint64_t seed = 42;
    unsigned threads = 1;
};

/// Holds the fold split and the pairwise squared distances so repeated runs
/// (e.g. during tuning) only redo the per-fold training.
class CrossValidator {
public:
    CrossValidator(Matrix features, std::vector<int> labels, int k, std::uint64_t seed);

    /// Throws InfeasibleNu naming the first offending fold.
    CVReport run(const svm::NuSvmConfig& cfg, unsigned threads = 1) const;

    const FoldAssignment& folds() const { return folds_; }
    const Matrix& features() const { return features_; }
    const std::vector<int>& labels() const { return labels_; }
    std::uint64_t seed() const { return seed_; }

private:
    FoldResult run_fold(int f, const svm::NuSvmConfig& cfg) const;

    Matrix features_;
    std::vector<int> labels_;
    FoldAssignment folds_;
    std::uint64_t seed_ = 0;
    Matrix distances_;
};

CVReport cross_validate(const Matrix& features, std::span<const int> labels, const svm::NuSvmConfig& cfg,
                        const CVOptions& options = {});

/// JSON with per-fold rows and the summary; undefined metrics are null.
std::string report_json(const CVReport& report);
/// Aligned text table, cells formatted as percentage "90.61(±5.4)".
std::string report_table(const CVReport& report);
/// "90.61(±5.4)" from fractions.
std::string format_cell(const Summary& s);

// Feature file: "DSVF", u32 version, u64 n, u64 d, then n*d little-endian f32.
inline constexpr std::uint32_t kFeatureFormatVersion = 1;

void write_features(const std::filesystem::path& path, const Matrix& features);
Matrix read_features(const std::filesystem::path& path);
/// One label per line (1 or -1); a non-numeric first line is a header.
void write_labels(const std::filesystem::path& path, std::span<const int> labels);
std::vector<int> read_labels(const std::filesystem::path& path);

}  // namespace densesvm::eval
