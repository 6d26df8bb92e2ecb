#include "densesvm/errors.hpp"
#include "densesvm/svm.hpp"

#include <cmath>
#include <string>

namespace densesvm::svm {

void TrainingSet::validate() const {
    const std::size_t n = labels.size();
    if (features.rows != n) throw InvalidData("feature rows and label count differ");
    if (features.data.size() != features.rows * features.cols) throw InvalidData("feature matrix is ragged");
    if (n < 2) throw InvalidData("need at least two training samples");
    if (features.cols < 1) throw InvalidData("features have zero dimensions");
    bool pos = false;
    bool neg = false;
    for (int y : labels) {
        if (y == kPositive) pos = true;
        else if (y == kNegative) neg = true;
        else throw InvalidData("labels must be +1 or -1, got " + std::to_string(y));
    }
    if (!pos || !neg) throw InvalidData("both classes must be present");
    for (double v : features.data)
        if (!std::isfinite(v)) throw InvalidData("features contain a non-finite value");
}

int label_from_decision(double decision_value) { return decision_value > 0.0 ? kPositive : kNegative; }

double NuSvmModel::decision_value(std::span<const double> x) const {
    if (x.size() != dim())
        throw DimError("model expects " + std::to_string(dim()) + " features, got " + std::to_string(x.size()));
    double sum = 0.0;
    for (std::size_t i = 0; i < support_vectors.rows; ++i)
        sum += dual_coeffs[i] * rbf_kernel(support_vectors.row(i), x, gamma);
    return sum + bias;
}

int NuSvmModel::predict_label(std::span<const double> x) const { return label_from_decision(decision_value(x)); }

TrainResult train_nu_svm(const TrainingSet& data, const NuSvmConfig& cfg) {
    data.validate();
    if (!(cfg.gamma > 0.0)) throw InvalidData("gamma must be positive");
    if (cfg.nu > nu_max(data.labels) * (1.0 + 1e-12))
        throw InfeasibleNu("nu = " + std::to_string(cfg.nu) + " exceeds nu_max = " +
                           std::to_string(nu_max(data.labels)));
    return train_nu_svm(data, cfg, rbf_gram(data.features, cfg.gamma));
}

TrainResult train_nu_svm(const TrainingSet& data, const NuSvmConfig& cfg, const Matrix& kernel) {
    data.validate();
    TrainResult out;
    out.dual = solve_nu_dual(kernel, data.labels, cfg.nu, cfg.max_iter, cfg.tol);
    const DualSolution& dual = out.dual;
    const double n = static_cast<double>(data.labels.size());
    // Degenerate solutions (r <= 0) keep the unnormalized scale.
    const double r = dual.r > 0.0 ? dual.r : 1.0;

    for (std::size_t i = 0; i < dual.alpha.size(); ++i)
        if (dual.alpha[i] > 0.0) out.support_indices.push_back(i);

    NuSvmModel& m = out.model;
    m.support_vectors = data.features.select_rows(out.support_indices);
    m.dual_coeffs.reserve(out.support_indices.size());
    for (std::size_t i : out.support_indices) m.dual_coeffs.push_back(dual.alpha[i] * n * data.labels[i] / r);
    m.bias = -dual.rho / r;
    m.gamma = cfg.gamma;
    m.nu = cfg.nu;
    m.max_iter = cfg.max_iter;
    m.converged = dual.converged;
    return out;
}

}  // namespace densesvm::svm
