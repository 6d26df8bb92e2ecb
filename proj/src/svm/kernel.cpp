#include "densesvm/errors.hpp"
#include "densesvm/svm.hpp"

#include <cmath>
#include <string>

namespace densesvm::svm {

double squared_distance(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw DimError("vector lengths differ: " + std::to_string(x.size()) + " vs " + std::to_string(y.size()));
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        sum += d * d;
    }
    return sum;
}

double rbf_kernel(std::span<const double> x, std::span<const double> y, double gamma) {
    if (!(gamma >= 0.0)) throw InvalidData("rbf gamma must be non-negative");
    return std::exp(-gamma * squared_distance(x, y));
}

Matrix squared_distances(const Matrix& x) {
    Matrix d(x.rows, x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) {
        for (std::size_t j = i + 1; j < x.rows; ++j) {
            const double v = squared_distance(x.row(i), x.row(j));
            d(i, j) = v;
            d(j, i) = v;
        }
    }
    return d;
}

Matrix rbf_gram(const Matrix& x, double gamma) {
    if (!(gamma >= 0.0)) throw InvalidData("rbf gamma must be non-negative");
    Matrix k = squared_distances(x);
    for (double& v : k.data) v = std::exp(-gamma * v);
    return k;
}

}  // namespace densesvm::svm
