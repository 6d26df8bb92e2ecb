#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace densesvm::backbone {

struct Shape {
    int height = 0;
    int width = 0;
    int channels = 0;

    std::size_t size() const {
        return static_cast<std::size_t>(height) * width * channels;
    }
    bool operator==(const Shape&) const = default;
    std::string str() const;
};

/// Activation buffer, HWC row-major.
struct TensorBuf {
    Shape shape;
    std::vector<float> values;

    TensorBuf() = default;
    explicit TensorBuf(Shape s, float fill = 0.0f) : shape(s), values(s.size(), fill) {}
    TensorBuf(Shape s, std::vector<float> v);

    float& at(int y, int x, int c) {
        return values[(static_cast<std::size_t>(y) * shape.width + x) * shape.channels + c];
    }
    const float& at(int y, int x, int c) const {
        return values[(static_cast<std::size_t>(y) * shape.width + x) * shape.channels + c];
    }
    bool all_finite() const;
};

struct FeatureVector {
    std::vector<float> values;
    std::size_t dim() const { return values.size(); }
};

/// Row-major grid view of a feature vector, for display.
struct FeatureGrid {
    int rows = 0;
    int cols = 0;
    std::vector<float> values;
};

/// rows = largest divisor of dim not exceeding sqrt(dim); 1024 -> 32x32,
/// 2048 -> 32x64. Throws ReshapeError when only the trivial 1 x dim exists.
FeatureGrid reshape_feature_grid(const FeatureVector& f);

}  // namespace densesvm::backbone
