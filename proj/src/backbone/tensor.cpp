#include "densesvm/errors.hpp"
#include "densesvm/tensor.hpp"

#include <cmath>

namespace densesvm::backbone {

std::string Shape::str() const {
    return std::to_string(height) + "x" + std::to_string(width) + "x" + std::to_string(channels);
}

TensorBuf::TensorBuf(Shape s, std::vector<float> v) : shape(s), values(std::move(v)) {
    if (values.size() != shape.size())
        throw ShapeError("tensor of shape " + shape.str() + " given " + std::to_string(values.size()) +
                         " values");
}

bool TensorBuf::all_finite() const {
    for (float v : values)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace densesvm::backbone
