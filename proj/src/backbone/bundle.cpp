#include "densesvm/backbone.hpp"
#include "densesvm/errors.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>

namespace densesvm::backbone {

namespace {

using nlohmann::json;

constexpr std::string_view kFormat = "densesvm.bundle";
constexpr int kVersion = 1;

static_assert(std::endian::native == std::endian::little, "weights.bin is read natively as little-endian");

json layer_to_json(const LayerSpec& l) {
    json j{{"id", l.id}, {"kind", std::string(to_string(l.kind))}, {"inputs", l.inputs}};
    switch (l.kind) {
        case LayerKind::Conv2d:
            j["filters"] = l.filters;
            [[fallthrough]];
        case LayerKind::DepthwiseConv2d: {
            j["kernel"] = l.kernel;
            j["stride"] = l.stride;
            j["pad"] = l.pad;
            json w{{"kernel", l.weights.kernel}};
            if (!l.weights.bias.empty()) w["bias"] = l.weights.bias;
            j["weights"] = w;
            break;
        }
        case LayerKind::BatchNorm:
            j["epsilon"] = l.epsilon;
            j["weights"] = {{"gamma", l.weights.gamma},
                            {"beta", l.weights.beta},
                            {"mean", l.weights.mean},
                            {"variance", l.weights.variance}};
            break;
        case LayerKind::MaxPool:
        case LayerKind::AvgPool:
            j["kernel"] = l.kernel;
            j["stride"] = l.stride;
            j["pad"] = l.pad;
            break;
        default:
            break;
    }
    return j;
}

LayerSpec layer_from_json(const json& j) {
    LayerSpec l;
    l.id = j.at("id").get<std::string>();
    l.kind = parse_layer_kind(j.at("kind").get<std::string>());
    l.inputs = j.at("inputs").get<std::vector<std::string>>();
    l.kernel = j.value("kernel", 1);
    l.stride = j.value("stride", 1);
    l.pad = j.value("pad", 0);
    l.filters = j.value("filters", 0);
    l.epsilon = j.value("epsilon", 1.001e-5f);
    if (j.contains("weights")) {
        const json& w = j.at("weights");
        l.weights.kernel = w.value("kernel", "");
        l.weights.bias = w.value("bias", "");
        l.weights.gamma = w.value("gamma", "");
        l.weights.beta = w.value("beta", "");
        l.weights.mean = w.value("mean", "");
        l.weights.variance = w.value("variance", "");
    }
    return l;
}

std::vector<char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw BundleError("cannot open " + path.string());
    in.seekg(0, std::ios::end);
    const auto size = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    std::vector<char> data(size);
    if (size > 0 && !in.read(data.data(), static_cast<std::streamsize>(size)))
        throw BundleError("short read from " + path.string());
    return data;
}

}  // namespace

NetworkGraph load_weight_bundle(const std::filesystem::path& dir) {
    const auto manifest_path = dir / "manifest.json";
    const auto blob_path = dir / "weights.bin";
    if (!std::filesystem::is_regular_file(manifest_path))
        throw BundleError("missing manifest: " + manifest_path.string());
    if (!std::filesystem::is_regular_file(blob_path)) throw BundleError("missing blob: " + blob_path.string());

    try {
        const auto text = read_file(manifest_path);
        const json m = json::parse(text.begin(), text.end());
        if (m.value("format", "") != kFormat) throw BundleError("manifest format tag is not densesvm.bundle");
        if (m.value("version", 0) != kVersion)
            throw BundleError("unsupported bundle version " + std::to_string(m.value("version", 0)));
        if (m.value("dtype", "") != "f32") throw BundleError("bundle dtype must be f32");

        const auto blob = read_file(blob_path);
        WeightStore weights;
        std::size_t offset = 0;
        for (const json& t : m.at("tensors")) {
            const auto name = t.at("name").get<std::string>();
            WeightTensor tensor;
            tensor.shape = t.at("shape").get<std::vector<int>>();
            for (int d : tensor.shape)
                if (d < 1) throw BundleError("tensor '" + name + "' has a non-positive dimension");
            const std::size_t nbytes = tensor.element_count() * sizeof(float);
            if (t.at("offset").get<std::size_t>() != offset)
                throw BundleError("tensor '" + name + "' offset " + std::to_string(t.at("offset").get<std::size_t>()) +
                                  " breaks manifest order (expected " + std::to_string(offset) + ")");
            if (t.at("nbytes").get<std::size_t>() != nbytes)
                throw BundleError("tensor '" + name + "' nbytes disagrees with its shape");
            if (offset + nbytes > blob.size()) throw BundleError("weights.bin is truncated at '" + name + "'");
            tensor.values.resize(tensor.element_count());
            std::memcpy(tensor.values.data(), blob.data() + offset, nbytes);
            offset += nbytes;
            weights.add(name, std::move(tensor));
        }
        if (offset != blob.size())
            throw BundleError("weights.bin holds " + std::to_string(blob.size()) + " bytes, manifest describes " +
                              std::to_string(offset));

        std::vector<LayerSpec> layers;
        for (const json& l : m.at("layers")) layers.push_back(layer_from_json(l));
        std::vector<DenseBlockSpec> blocks;
        if (m.contains("dense_blocks"))
            for (const json& b : m.at("dense_blocks"))
                blocks.push_back({b.at("input").get<std::string>(), b.at("layers").get<std::vector<std::string>>()});

        const auto in = m.at("input").get<std::vector<int>>();
        if (in.size() != 3) throw BundleError("input shape must be [height, width, channels]");
        return NetworkGraph(m.value("name", "unnamed"), Shape{in[0], in[1], in[2]}, std::move(layers),
                            m.at("output").get<std::string>(), std::move(weights), m.at("feature_dim").get<int>(),
                            std::move(blocks));
    } catch (const json::exception& e) {
        throw BundleError(std::string("malformed manifest: ") + e.what());
    } catch (const ShapeError& e) {
        throw BundleError(std::string("inconsistent shapes: ") + e.what());
    }
}

void save_weight_bundle(const NetworkGraph& graph, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    json tensors = json::array();
    std::size_t offset = 0;
    std::ofstream blob(dir / "weights.bin", std::ios::binary | std::ios::trunc);
    if (!blob) throw BundleError("cannot write " + (dir / "weights.bin").string());
    for (const auto& [name, t] : graph.weights().entries()) {
        const std::size_t nbytes = t.values.size() * sizeof(float);
        tensors.push_back({{"name", name}, {"shape", t.shape}, {"offset", offset}, {"nbytes", nbytes}});
        blob.write(reinterpret_cast<const char*>(t.values.data()), static_cast<std::streamsize>(nbytes));
        offset += nbytes;
    }
    if (!blob) throw BundleError("write failed for weights.bin");

    json layers = json::array();
    for (const LayerSpec& l : graph.layers()) layers.push_back(layer_to_json(l));
    json blocks = json::array();
    for (const DenseBlockSpec& b : graph.dense_blocks()) blocks.push_back({{"input", b.input}, {"layers", b.layers}});

    const Shape& in = graph.input_shape();
    json manifest{{"format", kFormat},
                  {"version", kVersion},
                  {"name", graph.name()},
                  {"dtype", "f32"},
                  {"input", {in.height, in.width, in.channels}},
                  {"feature_dim", graph.feature_dim()},
                  {"output", graph.output()},
                  {"tensors", tensors},
                  {"layers", layers},
                  {"dense_blocks", blocks}};
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    out << manifest.dump(1) << '\n';
    if (!out) throw BundleError("write failed for manifest.json");
}

}  // namespace densesvm::backbone
