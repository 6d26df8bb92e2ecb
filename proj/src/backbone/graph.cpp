#include "ops.hpp"
#include "plan.hpp"

#include "densesvm/errors.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <numeric>
#include <queue>

namespace densesvm::backbone {

namespace {

constexpr std::array<std::pair<LayerKind, std::string_view>, 9> kKindNames{{
    {LayerKind::Conv2d, "conv2d"},
    {LayerKind::DepthwiseConv2d, "depthwise_conv2d"},
    {LayerKind::BatchNorm, "batch_norm"},
    {LayerKind::Relu, "relu"},
    {LayerKind::MaxPool, "max_pool"},
    {LayerKind::AvgPool, "avg_pool"},
    {LayerKind::GlobalAvgPool, "global_avg_pool"},
    {LayerKind::Concat, "concat"},
    {LayerKind::Add, "add"},
}};

std::string shape_str(const std::vector<int>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
    return s + "]";
}

}  // namespace

std::string_view to_string(LayerKind kind) {
    for (const auto& [k, name] : kKindNames)
        if (k == kind) return name;
    return "unknown";
}

LayerKind parse_layer_kind(std::string_view name) {
    for (const auto& [k, n] : kKindNames)
        if (n == name) return k;
    throw BundleError("unknown layer kind '" + std::string(name) + "'");
}

std::size_t WeightTensor::element_count() const {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           [](std::size_t acc, int d) { return acc * static_cast<std::size_t>(d); });
}

void WeightStore::add(std::string name, WeightTensor tensor) {
    if (tensor.values.size() != tensor.element_count())
        throw BundleError("tensor '" + name + "' has " + std::to_string(tensor.values.size()) +
                          " values for shape " + shape_str(tensor.shape));
    if (index_.contains(name)) throw BundleError("duplicate tensor name '" + name + "'");
    index_.emplace(name, tensors_.size());
    tensors_.emplace_back(std::move(name), std::move(tensor));
}

const WeightTensor* WeightStore::find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    return it == index_.end() ? nullptr : &tensors_[it->second].second;
}

const WeightTensor& WeightStore::at(std::string_view name) const {
    const WeightTensor* t = find(name);
    if (t == nullptr) throw BundleError("bundle has no tensor named '" + std::string(name) + "'");
    return *t;
}

namespace detail {

namespace {

void require_tensor(const WeightStore& weights, const LayerSpec& layer, const std::string& name,
                    const std::vector<int>& expected, const char* role) {
    if (name.empty()) throw BundleError("layer '" + layer.id + "' is missing its " + role + " tensor");
    const WeightTensor* t = weights.find(name);
    if (t == nullptr)
        throw BundleError("layer '" + layer.id + "' references absent tensor '" + name + "'");
    if (t->shape != expected)
        throw BundleError("tensor '" + name + "' has shape " + shape_str(t->shape) + ", layer '" + layer.id +
                          "' expects " + shape_str(expected));
}

void check_window(const LayerSpec& layer) {
    if (layer.kernel < 1 || layer.stride < 1 || layer.pad < 0 || layer.pad >= layer.kernel)
        throw BundleError("layer '" + layer.id + "' has invalid kernel/stride/pad");
}

Shape windowed(const LayerSpec& layer, const Shape& in, int channels) {
    check_window(layer);
    Shape out{ops::conv_out_extent(in.height, layer.kernel, layer.stride, layer.pad),
              ops::conv_out_extent(in.width, layer.kernel, layer.stride, layer.pad), channels};
    if (out.height < 1 || out.width < 1)
        throw ShapeError("layer '" + layer.id + "' window does not fit input " + in.str());
    return out;
}

Shape infer_shape(const LayerSpec& layer, const std::vector<Shape>& in, const WeightStore& weights) {
    const auto arity = [&](std::size_t lo, std::size_t hi) {
        if (in.size() < lo || in.size() > hi)
            throw BundleError("layer '" + layer.id + "' (" + std::string(to_string(layer.kind)) + ") has " +
                              std::to_string(in.size()) + " inputs");
    };
    switch (layer.kind) {
        case LayerKind::Conv2d: {
            arity(1, 1);
            if (layer.filters < 1) throw BundleError("conv2d '" + layer.id + "' needs filters >= 1");
            require_tensor(weights, layer, layer.weights.kernel,
                           {layer.kernel, layer.kernel, in[0].channels, layer.filters}, "kernel");
            if (!layer.weights.bias.empty())
                require_tensor(weights, layer, layer.weights.bias, {layer.filters}, "bias");
            return windowed(layer, in[0], layer.filters);
        }
        case LayerKind::DepthwiseConv2d: {
            arity(1, 1);
            require_tensor(weights, layer, layer.weights.kernel, {layer.kernel, layer.kernel, in[0].channels},
                           "kernel");
            if (!layer.weights.bias.empty())
                require_tensor(weights, layer, layer.weights.bias, {in[0].channels}, "bias");
            return windowed(layer, in[0], in[0].channels);
        }
        case LayerKind::BatchNorm: {
            arity(1, 1);
            const std::vector<int> c{in[0].channels};
            require_tensor(weights, layer, layer.weights.gamma, c, "gamma");
            require_tensor(weights, layer, layer.weights.beta, c, "beta");
            require_tensor(weights, layer, layer.weights.mean, c, "mean");
            require_tensor(weights, layer, layer.weights.variance, c, "variance");
            if (!(layer.epsilon > 0.0f)) throw BundleError("batch_norm '" + layer.id + "' needs epsilon > 0");
            for (float v : weights.at(layer.weights.variance).values)
                if (!(v + layer.epsilon > 0.0f))
                    throw BundleError("batch_norm '" + layer.id + "' has non-positive variance");
            return in[0];
        }
        case LayerKind::Relu:
            arity(1, 1);
            return in[0];
        case LayerKind::MaxPool:
        case LayerKind::AvgPool:
            arity(1, 1);
            return windowed(layer, in[0], in[0].channels);
        case LayerKind::GlobalAvgPool:
            arity(1, 1);
            return Shape{1, 1, in[0].channels};
        case LayerKind::Concat: {
            arity(1, in.size() == 0 ? 1 : in.size());
            int channels = 0;
            for (const Shape& s : in) {
                if (s.height != in[0].height || s.width != in[0].width)
                    throw ShapeError("concat '" + layer.id + "' spatial mismatch: " + in[0].str() + " vs " +
                                     s.str());
                channels += s.channels;
            }
            return Shape{in[0].height, in[0].width, channels};
        }
        case LayerKind::Add: {
            arity(2, in.size() < 2 ? 2 : in.size());
            for (const Shape& s : in)
                if (s != in[0])
                    throw ShapeError("add '" + layer.id + "' shape mismatch: " + in[0].str() + " vs " + s.str());
            return in[0];
        }
    }
    throw BundleError("unhandled layer kind");
}

// Each concat in a block consumes the block input followed by the outputs of
// every earlier composite segment; the block ends on a concat.
void check_dense_block(const DenseBlockSpec& block, const Plan& plan) {
    if (block.layers.empty()) throw BundleError("dense block after '" + block.input + "' is empty");
    std::vector<std::string> expected{block.input};
    std::string segment_tail;
    for (const std::string& id : block.layers) {
        auto it = plan.index.find(id);
        if (it == plan.index.end()) throw BundleError("dense block lists unknown layer '" + id + "'");
        const LayerSpec& layer = plan.layers[it->second];
        if (layer.kind == LayerKind::Concat) {
            if (!segment_tail.empty()) expected.push_back(segment_tail);
            segment_tail.clear();
            if (layer.inputs != expected)
                throw BundleError("dense concat '" + id +
                                  "' does not consume the block input and all previous layer outputs");
        } else {
            segment_tail = id;
        }
    }
    if (!segment_tail.empty() || plan.layers[plan.index.at(block.layers.back())].kind != LayerKind::Concat)
        throw BundleError("dense block after '" + block.input + "' must end with a concat");
}

}  // namespace

Plan make_plan(std::string input_id, Shape input_shape, std::vector<LayerSpec> layers, WeightStore weights,
               const std::string& output, const std::vector<DenseBlockSpec>& blocks) {
    if (input_shape.size() == 0) throw BundleError("graph input shape is empty");
    std::unordered_map<std::string, std::size_t> original;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const std::string& id = layers[i].id;
        if (id.empty()) throw BundleError("layer " + std::to_string(i) + " has no id");
        if (id == input_id) throw BundleError("layer id '" + id + "' shadows the graph input");
        if (!original.emplace(id, i).second) throw BundleError("duplicate layer id '" + id + "'");
    }

    // Kahn's algorithm; ties resolve to manifest order.
    const std::size_t n = layers.size();
    std::vector<std::size_t> indegree(n, 0);
    std::vector<std::vector<std::size_t>> consumers(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (const std::string& in : layers[i].inputs) {
            if (in == input_id) continue;
            if (in == layers[i].id) throw BundleError("cycle: layer '" + in + "' consumes its own output");
            auto it = original.find(in);
            if (it == original.end())
                throw BundleError("layer '" + layers[i].id + "' reads unknown input '" + in + "'");
            ++indegree[i];
            consumers[it->second].push_back(i);
        }
    }
    std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
    for (std::size_t i = 0; i < n; ++i)
        if (indegree[i] == 0) ready.push(i);
    std::vector<std::size_t> order;
    order.reserve(n);
    while (!ready.empty()) {
        const std::size_t i = ready.top();
        ready.pop();
        order.push_back(i);
        for (std::size_t c : consumers[i])
            if (--indegree[c] == 0) ready.push(c);
    }
    if (order.size() != n) throw BundleError("cycle detected in layer graph");

    Plan plan;
    plan.input_id = std::move(input_id);
    plan.input_shape = input_shape;
    plan.weights = std::move(weights);
    plan.layers.reserve(n);
    for (std::size_t i : order) plan.layers.push_back(std::move(layers[i]));
    for (std::size_t i = 0; i < n; ++i) plan.index.emplace(plan.layers[i].id, i);

    plan.producers.resize(n);
    plan.shapes.resize(n);
    plan.last_use.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const LayerSpec& layer = plan.layers[i];
        std::vector<Shape> in_shapes;
        for (const std::string& in : layer.inputs) {
            if (in == plan.input_id) {
                plan.producers[i].push_back(kGraphInput);
                in_shapes.push_back(plan.input_shape);
            } else {
                const std::size_t p = plan.index.at(in);
                plan.producers[i].push_back(p);
                in_shapes.push_back(plan.shapes[p]);
                plan.last_use[p] = i;
            }
        }
        plan.shapes[i] = infer_shape(layer, in_shapes, plan.weights);
    }

    auto out = plan.index.find(output);
    if (out == plan.index.end()) throw BundleError("output layer '" + output + "' does not exist");
    plan.output = out->second;
    plan.last_use[plan.output] = kGraphInput;

    for (const DenseBlockSpec& block : blocks) check_dense_block(block, plan);
    return plan;
}

TensorBuf execute(const Plan& plan, const TensorBuf& input) {
    if (input.shape != plan.input_shape)
        throw ShapeError("graph expects input " + plan.input_shape.str() + ", got " + input.shape.str());
    const std::size_t n = plan.layers.size();
    std::vector<TensorBuf> acts(n);
    std::vector<const TensorBuf*> args;

    for (std::size_t i = 0; i < n; ++i) {
        const LayerSpec& layer = plan.layers[i];
        const WeightStore& w = plan.weights;
        args.clear();
        for (std::size_t p : plan.producers[i]) args.push_back(p == kGraphInput ? &input : &acts[p]);

        // Elementwise layers steal their input buffer when this is its last use.
        const auto take_or_copy = [&]() -> TensorBuf {
            const std::size_t p = plan.producers[i][0];
            if (p != kGraphInput && plan.last_use[p] == i) return std::move(acts[p]);
            return *args[0];
        };

        TensorBuf out;
        switch (layer.kind) {
            case LayerKind::Conv2d:
                out = ops::conv2d(*args[0], w.at(layer.weights.kernel),
                                  layer.weights.bias.empty() ? nullptr : &w.at(layer.weights.bias), layer.stride,
                                  layer.pad);
                break;
            case LayerKind::DepthwiseConv2d:
                out = ops::depthwise_conv2d(*args[0], w.at(layer.weights.kernel),
                                            layer.weights.bias.empty() ? nullptr : &w.at(layer.weights.bias),
                                            layer.stride, layer.pad);
                break;
            case LayerKind::BatchNorm:
                out = take_or_copy();
                ops::batch_norm(out, w.at(layer.weights.gamma), w.at(layer.weights.beta), w.at(layer.weights.mean),
                                w.at(layer.weights.variance), layer.epsilon);
                break;
            case LayerKind::Relu:
                out = take_or_copy();
                ops::relu(out);
                break;
            case LayerKind::MaxPool:
                out = ops::max_pool(*args[0], layer.kernel, layer.stride, layer.pad);
                break;
            case LayerKind::AvgPool:
                out = ops::avg_pool(*args[0], layer.kernel, layer.stride, layer.pad);
                break;
            case LayerKind::GlobalAvgPool:
                out = ops::global_avg_pool(*args[0]);
                break;
            case LayerKind::Concat:
                out = ops::concat(args);
                break;
            case LayerKind::Add:
                out = ops::add(args);
                break;
        }
        acts[i] = std::move(out);
        for (std::size_t p : plan.producers[i])
            if (p != kGraphInput && plan.last_use[p] == i) acts[p] = TensorBuf{};
        if (i == plan.output) return std::move(acts[i]);
    }
    return std::move(acts[plan.output]);
}

}  // namespace detail

NetworkGraph::NetworkGraph(std::string name, Shape input, std::vector<LayerSpec> layers, std::string output,
                           WeightStore weights, int feature_dim, std::vector<DenseBlockSpec> blocks)
    : name_(std::move(name)),
      input_(input),
      output_(std::move(output)),
      feature_dim_(feature_dim),
      blocks_(std::move(blocks)) {
    auto plan = std::make_shared<detail::Plan>(detail::make_plan(
        std::string(kInputId), input_, std::move(layers), std::move(weights), output_, blocks_));
    const LayerSpec& out = plan->layers[plan->output];
    if (out.kind != LayerKind::GlobalAvgPool)
        throw BundleError("output layer '" + output_ + "' must be global_avg_pool");
    if (feature_dim_ < 1 || plan->shapes[plan->output].channels != feature_dim_)
        throw BundleError("declared feature dimension " + std::to_string(feature_dim_) +
                          " differs from pooled channel count " +
                          std::to_string(plan->shapes[plan->output].channels));
    plan_ = std::move(plan);
}

const std::vector<LayerSpec>& NetworkGraph::layers() const { return plan_->layers; }

const WeightStore& NetworkGraph::weights() const { return plan_->weights; }

const Shape& NetworkGraph::shape_of(std::string_view id) const {
    if (id == kInputId) return input_;
    auto it = plan_->index.find(std::string(id));
    if (it == plan_->index.end()) throw BundleError("no layer named '" + std::string(id) + "'");
    return plan_->shapes[it->second];
}

std::size_t NetworkGraph::parameter_count() const {
    std::size_t total = 0;
    for (const auto& [name, t] : plan_->weights.entries()) total += t.element_count();
    return total;
}

TensorBuf NetworkGraph::run(const TensorBuf& input) const { return detail::execute(*plan_, input); }

TensorBuf dense_block_forward(const TensorBuf& input, std::span<const LayerSpec> layers,
                              const WeightStore& weights) {
    if (layers.empty() || layers.front().kind != LayerKind::Concat || layers.front().inputs.empty())
        throw BundleError("a dense block starts with a concat over the block input");
    DenseBlockSpec block{layers.front().inputs.front(), {}};
    for (const LayerSpec& l : layers) block.layers.push_back(l.id);
    const detail::Plan plan = detail::make_plan(block.input, input.shape,
                                                std::vector<LayerSpec>(layers.begin(), layers.end()), weights,
                                                layers.back().id, {block});
    return detail::execute(plan, input);
}

FeatureVector forward(const NetworkGraph& graph, const imaging::ImageTensor& x) {
    const Shape expected{imaging::kInputHeight, imaging::kInputWidth, imaging::kInputChannels};
    if (graph.input_shape() != expected)
        throw ShapeError("graph input is " + graph.input_shape().str() + ", images are " + expected.str());
    if (x.values.size() != expected.size()) throw ShapeError("image tensor has wrong length");
    TensorBuf out = graph.run(TensorBuf(expected, x.values));
    return FeatureVector{std::move(out.values)};
}

}  // namespace densesvm::backbone
