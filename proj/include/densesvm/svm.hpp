#pragma once

#include "densesvm/matrix.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace densesvm::svm {

inline constexpr int kPositive = +1;  // COVID
inline constexpr int kNegative = -1;  // NonCOVID

/// Sum of squared coordinate differences, accumulated in index order.
double squared_distance(std::span<const double> x, std::span<const double> y);

/// exp(-gamma * |x - y|^2). Throws DimError on length mismatch.
double rbf_kernel(std::span<const double> x, std::span<const double> y, double gamma);

/// Full n x n RBF Gram matrix over the rows of `x`.
Matrix rbf_gram(const Matrix& x, double gamma);
/// Pairwise squared distances over the rows of `x`; rbf_gram is exp(-gamma D).
Matrix squared_distances(const Matrix& x);

struct TrainingSet {
    Matrix features;          // n x d
    std::vector<int> labels;  // +1 / -1

    /// Throws InvalidData unless n >= 2, both classes appear, labels are
    /// +/-1 and every feature is finite.
    void validate() const;
};

struct NuSvmConfig {
    double nu = 0.4;
    double gamma = 0.0098;
    int max_iter = 176;  // outer iterations; each is one sweep of n pair updates
    double tol = 1e-3;   // KKT residual, measured on the unit-box scaled dual
};

/// Largest feasible nu: 2 min(n+, n-) / n.
double nu_max(std::span<const int> labels);

/// State of the solved dual  max -1/2 a'Qa  s.t.  0 <= a_i <= 1/n,
/// sum a_i y_i = 0, sum a_i >= nu  (solved with sum a_i = nu, which attains
/// the same optimum).
struct DualSolution {
    std::vector<double> alpha;  // in [0, 1/n]
    double objective = 0.0;     // -1/2 a'Qa at alpha
    double rho = 0.0;           // margin offset, unit-box scale
    double r = 0.0;             // margin normalizer, unit-box scale
    int iterations = 0;         // outer iterations used
    std::size_t pair_updates = 0;
    double kkt_residual = 0.0;
    bool converged = false;

    std::size_t support_count() const;
    /// Points with alpha at the upper bound 1/n.
    std::size_t bounded_count() const;
};

/// Pairwise working-set ascent on the nu-SVM dual given a kernel matrix.
/// The working pair is the maximal KKT violator within one class; ties go to
/// the lowest index. Throws InfeasibleNu when nu is outside (0, nu_max].
DualSolution solve_nu_dual(const Matrix& kernel, std::span<const int> labels, double nu, int max_iter,
                           double tol);

/// Dual objective -1/2 a'Qa for arbitrary alpha (used by checks and oracles).
double dual_objective(const Matrix& kernel, std::span<const int> labels, std::span<const double> alpha);

struct NuSvmModel {
    Matrix support_vectors;            // m x d
    std::vector<double> dual_coeffs;   // alpha_i y_i, margin-normalized
    double bias = 0.0;
    double gamma = 0.0;
    double nu = 0.0;
    int max_iter = 0;
    bool converged = false;
    std::array<std::string, 2> label_names{"COVID", "NonCOVID"};  // for +1, -1

    std::size_t dim() const { return support_vectors.cols; }
    std::size_t support_count() const { return support_vectors.rows; }

    /// sum_i coeff_i k(sv_i, x) + bias. Throws DimError.
    double decision_value(std::span<const double> x) const;
    /// +1 when the decision value is strictly positive, otherwise -1.
    int predict_label(std::span<const double> x) const;
    const std::string& label_name(int label) const { return label_names[label > 0 ? 0 : 1]; }
};

int label_from_decision(double decision_value);

struct TrainResult {
    NuSvmModel model;
    DualSolution dual;
    std::vector<std::size_t> support_indices;
};

/// Throws InfeasibleNu when cfg.nu > nu_max(data.labels). A capped run
/// returns a usable model with converged = false.
TrainResult train_nu_svm(const TrainingSet& data, const NuSvmConfig& cfg);
/// As train_nu_svm, reusing a precomputed kernel matrix over data.features.
TrainResult train_nu_svm(const TrainingSet& data, const NuSvmConfig& cfg, const Matrix& kernel);

// Model file: "DSVM" magic, format version byte, then parameters and the
// support set as little-endian values (vectors and coefficients as f32).
inline constexpr std::uint8_t kModelFormatVersion = 1;

std::vector<std::uint8_t> serialize_model(const NuSvmModel& model);
NuSvmModel deserialize_model(std::span<const std::uint8_t> bytes);
void save_model(const NuSvmModel& model, const std::filesystem::path& path);
NuSvmModel load_model(const std::filesystem::path& path);
/// Stable identifier, "nusvm-v<version>-<fnv1a of serialized bytes>".
std::string model_version(const NuSvmModel& model);

}  // namespace densesvm::svm
