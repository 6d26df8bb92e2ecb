#pragma once

#include "densesvm/backbone.hpp"

#include <limits>

namespace densesvm::backbone::detail {

inline constexpr std::size_t kGraphInput = std::numeric_limits<std::size_t>::max();

/// Validated execution schedule over topologically sorted layers.
struct Plan {
    std::string input_id;
    Shape input_shape;
    std::vector<LayerSpec> layers;
    WeightStore weights;
    std::unordered_map<std::string, std::size_t> index;
    std::vector<std::vector<std::size_t>> producers;  // kGraphInput = graph input
    std::vector<Shape> shapes;
    std::vector<std::size_t> last_use;
    std::size_t output = 0;
};

/// Sorts, checks wiring and weights, infers shapes. BundleError for
/// structural faults, ShapeError when activation shapes disagree.
Plan make_plan(std::string input_id, Shape input_shape, std::vector<LayerSpec> layers, WeightStore weights,
               const std::string& output, const std::vector<DenseBlockSpec>& blocks);

TensorBuf execute(const Plan& plan, const TensorBuf& input);

}  // namespace densesvm::backbone::detail
