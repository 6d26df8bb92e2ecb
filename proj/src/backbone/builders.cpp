#include "densesvm/backbone.hpp"
#include "densesvm/errors.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <unordered_map>

namespace densesvm::backbone {

namespace {

// Box-Muller over mt19937_64 so a seed names the same bundle on every
// standard library.
class Normal {
public:
    explicit Normal(std::uint64_t seed) : rng_(seed) {}

    double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

    double operator()() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
        has_spare_ = true;
        return r * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::mt19937_64 rng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

class Builder {
public:
    Builder(Shape input, const InitOptions& init) : init_(init), normal_(init.seed) {
        channels_.emplace(std::string(kInputId), input.channels);
    }

    int channels(const std::string& id) const { return channels_.at(id); }

    std::string conv(const std::string& id, const std::string& in, int filters, int k, int stride, int pad,
                     bool bias = false) {
        const int cin = channels(in);
        LayerSpec l = base(id, LayerKind::Conv2d, {in});
        l.kernel = k;
        l.stride = stride;
        l.pad = pad;
        l.filters = filters;
        l.weights.kernel = id + "/kernel";
        he_normal(l.weights.kernel, {k, k, cin, filters}, k * k * cin);
        if (bias) {
            l.weights.bias = id + "/bias";
            constant(l.weights.bias, {filters}, 0.0f);
        }
        return push(std::move(l), filters);
    }

    std::string depthwise(const std::string& id, const std::string& in, int k, int stride, int pad) {
        const int c = channels(in);
        LayerSpec l = base(id, LayerKind::DepthwiseConv2d, {in});
        l.kernel = k;
        l.stride = stride;
        l.pad = pad;
        l.weights.kernel = id + "/depthwise_kernel";
        he_normal(l.weights.kernel, {k, k, c}, k * k);
        return push(std::move(l), c);
    }

    std::string batch_norm(const std::string& id, const std::string& in) {
        const int c = channels(in);
        LayerSpec l = base(id, LayerKind::BatchNorm, {in});
        l.weights = {"", "", id + "/gamma", id + "/beta", id + "/moving_mean", id + "/moving_variance"};
        std::vector<float> gamma(static_cast<std::size_t>(c)), beta(gamma.size()), mean(gamma.size()),
            var(gamma.size());
        for (std::size_t i = 0; i < gamma.size(); ++i) {
            gamma[i] = init_.all_zero ? 0.0f : static_cast<float>(0.8 + 0.4 * normal_.uniform());
            var[i] = static_cast<float>(0.8 + 0.4 * normal_.uniform());
            if (init_.random_shift && !init_.all_zero) {
                beta[i] = static_cast<float>(0.1 * normal_());
                mean[i] = static_cast<float>(0.1 * normal_());
            }
        }
        add_tensor(l.weights.gamma, {c}, std::move(gamma));
        add_tensor(l.weights.beta, {c}, std::move(beta));
        add_tensor(l.weights.mean, {c}, std::move(mean));
        add_tensor(l.weights.variance, {c}, std::move(var));
        return push(std::move(l), c);
    }

    std::string relu(const std::string& id, const std::string& in) {
        return push(base(id, LayerKind::Relu, {in}), channels(in));
    }

    std::string pool(const std::string& id, LayerKind kind, const std::string& in, int k, int stride, int pad) {
        LayerSpec l = base(id, kind, {in});
        l.kernel = k;
        l.stride = stride;
        l.pad = pad;
        return push(std::move(l), channels(in));
    }

    std::string global_pool(const std::string& id, const std::string& in) {
        return push(base(id, LayerKind::GlobalAvgPool, {in}), channels(in));
    }

    std::string concat(const std::string& id, std::vector<std::string> ins) {
        int c = 0;
        for (const auto& in : ins) c += channels(in);
        return push(base(id, LayerKind::Concat, std::move(ins)), c);
    }

    std::string add(const std::string& id, std::vector<std::string> ins) {
        const int c = channels(ins.front());
        return push(base(id, LayerKind::Add, std::move(ins)), c);
    }

    NetworkGraph finish(std::string name, Shape input, const std::string& output,
                        std::vector<DenseBlockSpec> blocks = {}) {
        const int dim = channels(output);
        return NetworkGraph(std::move(name), input, std::move(layers_), output, std::move(weights_), dim,
                            std::move(blocks));
    }

private:
    static LayerSpec base(const std::string& id, LayerKind kind, std::vector<std::string> ins) {
        LayerSpec l;
        l.id = id;
        l.kind = kind;
        l.inputs = std::move(ins);
        return l;
    }

    std::string push(LayerSpec l, int channels) {
        std::string id = l.id;
        channels_[id] = channels;
        layers_.push_back(std::move(l));
        return id;
    }

    void add_tensor(const std::string& name, std::vector<int> shape, std::vector<float> values) {
        weights_.add(name, WeightTensor{std::move(shape), std::move(values)});
    }

    void constant(const std::string& name, std::vector<int> shape, float v) {
        WeightTensor t{std::move(shape), {}};
        t.values.assign(t.element_count(), v);
        weights_.add(name, std::move(t));
    }

    void he_normal(const std::string& name, std::vector<int> shape, int fan_in) {
        WeightTensor t{std::move(shape), {}};
        t.values.resize(t.element_count());
        const double stddev = std::sqrt(2.0 / fan_in);
        for (float& v : t.values) v = init_.all_zero ? 0.0f : static_cast<float>(stddev * normal_());
        weights_.add(name, std::move(t));
    }

    InitOptions init_;
    Normal normal_;
    std::vector<LayerSpec> layers_;
    WeightStore weights_;
    std::unordered_map<std::string, int> channels_;
};

Shape image_shape() { return Shape{imaging::kInputHeight, imaging::kInputWidth, imaging::kInputChannels}; }

}  // namespace

DenseNetConfig densenet121_config() { return DenseNetConfig{}; }

DenseNetConfig tiny_densenet_config() {
    DenseNetConfig cfg;
    cfg.name = "tiny_densenet";
    cfg.block_layers = {2, 2};
    cfg.growth_rate = 4;
    cfg.init_features = 8;
    return cfg;
}

int densenet_feature_dim(const DenseNetConfig& cfg) {
    int c = cfg.init_features;
    for (std::size_t b = 0; b < cfg.block_layers.size(); ++b) {
        c += cfg.block_layers[b] * cfg.growth_rate;
        if (b + 1 < cfg.block_layers.size()) c = static_cast<int>(std::floor(c * cfg.compression));
    }
    return c;
}

NetworkGraph build_densenet(const DenseNetConfig& cfg, const InitOptions& init) {
    if (cfg.block_layers.empty() || cfg.growth_rate < 1 || cfg.init_features < 1 || cfg.compression <= 0.0 ||
        cfg.compression > 1.0 || cfg.bottleneck_factor < 1)
        throw BundleError("invalid DenseNet configuration");
    Builder b(image_shape(), init);

    // Stem: 7x7/2 conv, BN, ReLU, 3x3/2 max pool (224 -> 56).
    std::string x = b.conv("stem_conv", std::string(kInputId), cfg.init_features, 7, 2, 3);
    x = b.batch_norm("stem_bn", x);
    x = b.relu("stem_relu", x);
    x = b.pool("stem_pool", LayerKind::MaxPool, x, 3, 2, 1);

    std::vector<DenseBlockSpec> blocks;
    for (std::size_t bi = 0; bi < cfg.block_layers.size(); ++bi) {
        const std::string tag = "block" + std::to_string(bi + 1);
        DenseBlockSpec block{x, {}};
        std::vector<std::string> stream{x};
        for (int li = 1; li <= cfg.block_layers[bi]; ++li) {
            const std::string p = tag + "_layer" + std::to_string(li);
            // Composite: BN -> ReLU -> 1x1 conv -> BN -> ReLU -> 3x3 conv over
            // the concatenation of everything produced so far.
            std::string h = b.concat(p + "_concat", stream);
            block.layers.push_back(h);
            h = b.batch_norm(p + "_bn1", h);
            block.layers.push_back(h);
            h = b.relu(p + "_relu1", h);
            block.layers.push_back(h);
            h = b.conv(p + "_conv1", h, cfg.bottleneck_factor * cfg.growth_rate, 1, 1, 0);
            block.layers.push_back(h);
            h = b.batch_norm(p + "_bn2", h);
            block.layers.push_back(h);
            h = b.relu(p + "_relu2", h);
            block.layers.push_back(h);
            h = b.conv(p + "_conv2", h, cfg.growth_rate, 3, 1, 1);
            block.layers.push_back(h);
            stream.push_back(h);
        }
        x = b.concat(tag + "_out", stream);
        block.layers.push_back(x);
        blocks.push_back(std::move(block));

        if (bi + 1 < cfg.block_layers.size()) {
            const std::string t = "transition" + std::to_string(bi + 1);
            const int out = static_cast<int>(std::floor(b.channels(x) * cfg.compression));
            x = b.batch_norm(t + "_bn", x);
            x = b.relu(t + "_relu", x);
            x = b.conv(t + "_conv", x, out, 1, 1, 0);
            x = b.pool(t + "_pool", LayerKind::AvgPool, x, 2, 2, 0);
        }
    }
    x = b.batch_norm("final_bn", x);
    x = b.relu("final_relu", x);
    x = b.global_pool("avg_pool", x);
    return b.finish(cfg.name, image_shape(), x, std::move(blocks));
}

NetworkGraph build_residual_toy(int width, const InitOptions& init) {
    Builder b(image_shape(), init);
    std::string x = b.conv("stem_conv", std::string(kInputId), width, 3, 4, 1);
    x = b.batch_norm("stem_bn", x);
    x = b.relu("stem_relu", x);
    x = b.pool("stem_pool", LayerKind::MaxPool, x, 3, 2, 1);
    for (int u = 1; u <= 2; ++u) {
        const std::string p = "unit" + std::to_string(u);
        std::string h = b.conv(p + "_conv1", x, width, 3, 1, 1);
        h = b.batch_norm(p + "_bn1", h);
        h = b.relu(p + "_relu1", h);
        h = b.conv(p + "_conv2", h, width, 3, 1, 1);
        h = b.batch_norm(p + "_bn2", h);
        x = b.add(p + "_add", {x, h});
        x = b.relu(p + "_out", x);
    }
    // Projection unit: strided 1x1 shortcut doubles the width.
    std::string shortcut = b.conv("unit3_proj", x, 2 * width, 1, 2, 0, true);
    std::string h = b.conv("unit3_conv1", x, 2 * width, 3, 2, 1);
    h = b.batch_norm("unit3_bn1", h);
    h = b.relu("unit3_relu1", h);
    h = b.conv("unit3_conv2", h, 2 * width, 3, 1, 1);
    x = b.add("unit3_add", {shortcut, h});
    x = b.relu("unit3_out", x);
    x = b.global_pool("avg_pool", x);
    return b.finish("residual_toy", image_shape(), x);
}

NetworkGraph build_mobile_toy(int width, const InitOptions& init) {
    Builder b(image_shape(), init);
    std::string x = b.conv("stem_conv", std::string(kInputId), width, 3, 4, 1);
    x = b.batch_norm("stem_bn", x);
    x = b.relu("stem_relu", x);
    int c = width;
    for (int u = 1; u <= 3; ++u) {
        const std::string p = "sep" + std::to_string(u);
        x = b.depthwise(p + "_dw", x, 3, u == 1 ? 1 : 2, 1);
        x = b.batch_norm(p + "_dw_bn", x);
        x = b.relu(p + "_dw_relu", x);
        c *= u == 1 ? 1 : 2;
        x = b.conv(p + "_pw", x, c, 1, 1, 0);
        x = b.batch_norm(p + "_pw_bn", x);
        x = b.relu(p + "_pw_relu", x);
    }
    x = b.global_pool("avg_pool", x);
    return b.finish("mobile_toy", image_shape(), x);
}

}  // namespace densesvm::backbone
