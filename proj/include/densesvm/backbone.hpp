#pragma once

#include "densesvm/imaging.hpp"
#include "densesvm/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace densesvm::backbone {

enum class LayerKind {
    Conv2d,
    DepthwiseConv2d,
    BatchNorm,
    Relu,
    MaxPool,
    AvgPool,
    GlobalAvgPool,
    Concat,
    Add,
};

std::string_view to_string(LayerKind kind);
/// Throws BundleError for names outside the nine supported kinds.
LayerKind parse_layer_kind(std::string_view name);

/// Names of bundle tensors a layer reads. Which are required depends on kind:
/// conv2d/depthwise use kernel (+ optional bias); batch_norm uses the four
/// statistics tensors.
struct WeightRefs {
    std::string kernel;
    std::string bias;
    std::string gamma;
    std::string beta;
    std::string mean;
    std::string variance;
};

struct LayerSpec {
    std::string id;
    LayerKind kind = LayerKind::Relu;
    std::vector<std::string> inputs;
    int kernel = 1;
    int stride = 1;
    int pad = 0;
    int filters = 0;          // conv2d output channels
    float epsilon = 1.001e-5f;  // batch_norm
    WeightRefs weights;
};

/// A dense block: `layers` lists every layer id of the block. Each concat in
/// the block must consume the block input followed by all previous in-block
/// layer outputs, in order.
struct DenseBlockSpec {
    std::string input;
    std::vector<std::string> layers;
};

struct WeightTensor {
    std::vector<int> shape;
    std::vector<float> values;

    std::size_t element_count() const;
};

namespace detail {
struct Plan;
}

/// Named tensors in insertion order; the order is the on-disk order.
class WeightStore {
public:
    void add(std::string name, WeightTensor tensor);
    const WeightTensor* find(std::string_view name) const;
    const WeightTensor& at(std::string_view name) const;
    std::size_t size() const { return tensors_.size(); }
    const std::vector<std::pair<std::string, WeightTensor>>& entries() const { return tensors_; }

private:
    std::vector<std::pair<std::string, WeightTensor>> tensors_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// The input node every graph reads from.
inline constexpr std::string_view kInputId = "input";

/// Validated, immutable layer DAG plus weights. Construction throws
/// BundleError on any structural problem (unknown inputs, cycles, missing or
/// mis-shaped weights, dense blocks not fed by every earlier output) and ShapeError
/// when activations cannot agree.
class NetworkGraph {
public:
    NetworkGraph(std::string name, Shape input, std::vector<LayerSpec> layers, std::string output,
                 WeightStore weights, int feature_dim, std::vector<DenseBlockSpec> blocks = {});

    const std::string& name() const { return name_; }
    const Shape& input_shape() const { return input_; }
    /// Topologically ordered.
    const std::vector<LayerSpec>& layers() const;
    const std::string& output() const { return output_; }
    const WeightStore& weights() const;
    int feature_dim() const { return feature_dim_; }
    const std::vector<DenseBlockSpec>& dense_blocks() const { return blocks_; }
    /// Inferred activation shape of a layer (or the input node).
    const Shape& shape_of(std::string_view id) const;
    std::size_t parameter_count() const;

    /// Runs the whole graph on an input matching input_shape().
    TensorBuf run(const TensorBuf& input) const;

private:
    std::string name_;
    Shape input_;
    std::string output_;
    int feature_dim_ = 0;
    std::vector<DenseBlockSpec> blocks_;
    // Layers, weights and the execution schedule; shared between copies.
    std::shared_ptr<const detail::Plan> plan_;
};

/// Executes a dense block (concat/composite layers) on `input`. `layers` must
/// be topologically ordered; the first concat's first input names the block
/// input. Throws ShapeError on spatial mismatch within a concat and
/// BundleError if the wiring does not follow dense connectivity.
TensorBuf dense_block_forward(const TensorBuf& input, std::span<const LayerSpec> layers,
                              const WeightStore& weights);

/// Deterministic forward pass to the pooled feature vector.
FeatureVector forward(const NetworkGraph& graph, const imaging::ImageTensor& x);

// Weight bundle: <dir>/manifest.json + <dir>/weights.bin (little-endian f32,
// concatenated in manifest order, offsets in bytes).
NetworkGraph load_weight_bundle(const std::filesystem::path& dir);
void save_weight_bundle(const NetworkGraph& graph, const std::filesystem::path& dir);

// Builders for random-initialized graphs.

struct DenseNetConfig {
    std::string name = "densenet121";
    std::vector<int> block_layers{6, 12, 24, 16};
    int growth_rate = 32;
    int init_features = 64;
    double compression = 0.5;
    int bottleneck_factor = 4;  // 1x1 conv width = factor * growth
};

DenseNetConfig densenet121_config();
/// Two blocks of two layers, growth 4, init 8, one 0.5 transition: 16 features.
DenseNetConfig tiny_densenet_config();

struct InitOptions {
    std::uint64_t seed = 1;
    /// Draw batch-norm shift/mean at random instead of zero.
    bool random_shift = false;
    /// Replace every tensor with zeros (zero-propagation checks).
    bool all_zero = false;
};

/// Channel count after the final dense block, from channel arithmetic alone.
int densenet_feature_dim(const DenseNetConfig& cfg);

NetworkGraph build_densenet(const DenseNetConfig& cfg, const InitOptions& init = {});
/// Small residual network (add layers) ending in global pooling.
NetworkGraph build_residual_toy(int width, const InitOptions& init = {});
/// Small depthwise-separable network ending in global pooling.
NetworkGraph build_mobile_toy(int width, const InitOptions& init = {});

}  // namespace densesvm::backbone
