#include "densesvm/errors.hpp"
#include "densesvm/tensor.hpp"

#include <cmath>

namespace densesvm::backbone {

FeatureGrid reshape_feature_grid(const FeatureVector& f) {
    const std::size_t dim = f.dim();
    if (dim < 4) throw ReshapeError("feature dimension " + std::to_string(dim) + " has no 2-D grid");
    auto rows = static_cast<std::size_t>(std::sqrt(static_cast<double>(dim)));
    while (rows * rows > dim) --rows;
    while (rows > 1 && dim % rows != 0) --rows;
    if (rows < 2)
        throw ReshapeError("feature dimension " + std::to_string(dim) + " is prime; no 2-D grid");
    return FeatureGrid{static_cast<int>(rows), static_cast<int>(dim / rows), f.values};
}

}  // namespace densesvm::backbone
