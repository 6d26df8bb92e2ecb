#include "densesvm/errors.hpp"
#include "densesvm/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace densesvm::svm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTau = 1e-12;

struct Pair {
    std::size_t up = 0;    // alpha increases
    std::size_t down = 0;  // alpha decreases
    double violation = -kInf;
};

}  // namespace

double nu_max(std::span<const int> labels) {
    std::size_t pos = 0;
    for (int y : labels) pos += y > 0 ? 1 : 0;
    const std::size_t neg = labels.size() - pos;
    if (labels.empty()) return 0.0;
    return 2.0 * static_cast<double>(std::min(pos, neg)) / static_cast<double>(labels.size());
}

std::size_t DualSolution::support_count() const {
    return static_cast<std::size_t>(std::count_if(alpha.begin(), alpha.end(), [](double a) { return a > 0.0; }));
}

std::size_t DualSolution::bounded_count() const {
    const double ub = 1.0 / static_cast<double>(alpha.size());
    return static_cast<std::size_t>(std::count_if(alpha.begin(), alpha.end(), [ub](double a) { return a >= ub; }));
}

double dual_objective(const Matrix& kernel, std::span<const int> labels, std::span<const double> alpha) {
    const std::size_t n = labels.size();
    double quad = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (alpha[i] == 0.0) continue;
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) row += alpha[j] * labels[j] * kernel(i, j);
        quad += alpha[i] * labels[i] * row;
    }
    return -0.5 * quad;
}

DualSolution solve_nu_dual(const Matrix& kernel, std::span<const int> labels, double nu, int max_iter,
                           double tol) {
    const std::size_t n = labels.size();
    if (kernel.rows != n || kernel.cols != n) throw DimError("kernel matrix does not match label count");
    if (max_iter < 1) throw InvalidData("max_iter must be positive");
    if (!(tol > 0.0)) throw InvalidData("tol must be positive");
    const double limit = nu_max(labels);
    if (!(nu > 0.0) || nu > 1.0 || nu > limit * (1.0 + 1e-12))
        throw InfeasibleNu("nu = " + std::to_string(nu) + " is infeasible; nu_max = " + std::to_string(limit));

    // Work on the unit box 0 <= a <= 1 with sum a = nu n / 2 per class; the
    // reported alpha is a / n.
    std::size_t count[2] = {0, 0};
    for (int y : labels) ++count[y > 0 ? 0 : 1];
    const double half = nu * static_cast<double>(n) / 2.0;
    std::vector<double> a(n);
    for (std::size_t i = 0; i < n; ++i)
        a[i] = std::min(1.0, half / static_cast<double>(count[labels[i] > 0 ? 0 : 1]));

    const auto q = [&](std::size_t i, std::size_t j) { return labels[i] * labels[j] * kernel(i, j); };
    std::vector<double> grad(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) grad[i] += q(i, j) * a[j];

    const auto select = [&]() {
        Pair best[2];
        double low_grad[2] = {kInf, kInf};
        double high_grad[2] = {-kInf, -kInf};
        for (std::size_t t = 0; t < n; ++t) {
            const int c = labels[t] > 0 ? 0 : 1;
            if (a[t] < 1.0 && grad[t] < low_grad[c]) {
                low_grad[c] = grad[t];
                best[c].up = t;
            }
            if (a[t] > 0.0 && grad[t] > high_grad[c]) {
                high_grad[c] = grad[t];
                best[c].down = t;
            }
        }
        for (int c = 0; c < 2; ++c) best[c].violation = high_grad[c] - low_grad[c];
        return best[0].violation >= best[1].violation ? best[0] : best[1];
    };

    DualSolution sol;
    Pair pair = select();
    for (int iter = 0; iter < max_iter && pair.violation >= tol; ++iter) {
        sol.iterations = iter + 1;
        for (std::size_t step = 0; step < n && pair.violation >= tol; ++step) {
            const std::size_t i = pair.up;
            const std::size_t j = pair.down;
            double quad = kernel(i, i) + kernel(j, j) - 2.0 * kernel(i, j);
            if (quad <= 0.0) quad = kTau;
            double delta = (grad[j] - grad[i]) / quad;
            const double room_up = 1.0 - a[i];
            const double room_down = a[j];
            if (delta >= room_up || delta >= room_down) {
                if (room_up <= room_down) {
                    delta = room_up;
                    a[i] = 1.0;
                    a[j] -= delta;
                    if (room_up == room_down) a[j] = 0.0;
                } else {
                    delta = room_down;
                    a[j] = 0.0;
                    a[i] += delta;
                }
            } else {
                a[i] += delta;
                a[j] -= delta;
            }
            for (std::size_t k = 0; k < n; ++k) grad[k] += delta * (q(k, i) - q(k, j));
            ++sol.pair_updates;
            pair = select();
        }
    }
    sol.kkt_residual = std::max(pair.violation, 0.0);
    sol.converged = pair.violation < tol;

    // Margin offset and normalizer: average gradient over free points per
    // class, or the midpoint of the bound-side extremes when none are free.
    double sum_free[2] = {0.0, 0.0};
    std::size_t nr_free[2] = {0, 0};
    double ub[2] = {kInf, kInf};
    double lb[2] = {-kInf, -kInf};
    for (std::size_t t = 0; t < n; ++t) {
        const int c = labels[t] > 0 ? 0 : 1;
        if (a[t] >= 1.0) lb[c] = std::max(lb[c], grad[t]);
        else if (a[t] <= 0.0) ub[c] = std::min(ub[c], grad[t]);
        else {
            ++nr_free[c];
            sum_free[c] += grad[t];
        }
    }
    double rc[2];
    for (int c = 0; c < 2; ++c) {
        if (nr_free[c] > 0) rc[c] = sum_free[c] / static_cast<double>(nr_free[c]);
        else if (std::isfinite(ub[c]) && std::isfinite(lb[c])) rc[c] = (ub[c] + lb[c]) / 2.0;
        else rc[c] = std::isfinite(ub[c]) ? ub[c] : lb[c];
    }
    sol.r = (rc[0] + rc[1]) / 2.0;
    sol.rho = (rc[0] - rc[1]) / 2.0;

    double quad = 0.0;
    for (std::size_t i = 0; i < n; ++i) quad += a[i] * grad[i];
    const double nd = static_cast<double>(n);
    sol.objective = -0.5 * quad / (nd * nd);
    sol.alpha.resize(n);
    for (std::size_t i = 0; i < n; ++i) sol.alpha[i] = a[i] >= 1.0 ? 1.0 / nd : a[i] / nd;
    return sol;
}

}  // namespace densesvm::svm
