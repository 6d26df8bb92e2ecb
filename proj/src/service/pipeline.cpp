#include "densesvm/errors.hpp"
#include "densesvm/imaging.hpp"
#include "densesvm/service.hpp"

#include <chrono>
#include <cstdlib>

#include <json.hpp>

namespace densesvm::service {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t) { return std::chrono::duration<double, std::milli>(Clock::now() - t).count(); }

}  // namespace

void ServiceConfig::validate() const {
    if (port < 0 || port > 65535) throw StartupError("port must be in [1, 65535], got " + std::to_string(port));
    if (bundle.empty() || !std::filesystem::is_directory(bundle))
        throw StartupError("weight bundle directory not found: " + bundle.string());
    if (model.empty() || !std::filesystem::is_regular_file(model))
        throw StartupError("model file not found: " + model.string());
    if (!static_dir.empty() && !std::filesystem::is_directory(static_dir))
        throw StartupError("static directory not found: " + static_dir.string());
    if (max_upload == 0) throw StartupError("max upload must be positive");
}

ServiceConfig apply_environment(ServiceConfig cfg) {
    const auto env = [](const char* name) -> const char* {
        const char* v = std::getenv(name);
        return v && *v ? v : nullptr;
    };
    try {
        if (const char* v = env("DENSESVM_PORT")) cfg.port = std::stoi(v);
        if (const char* v = env("DENSESVM_MAX_UPLOAD")) cfg.max_upload = std::stoull(v);
    } catch (const std::logic_error&) {
        throw StartupError("DENSESVM_PORT and DENSESVM_MAX_UPLOAD must be integers");
    }
    if (const char* v = env("DENSESVM_BUNDLE")) cfg.bundle = v;
    if (const char* v = env("DENSESVM_MODEL")) cfg.model = v;
    if (const char* v = env("DENSESVM_STATIC_DIR")) cfg.static_dir = v;
    return cfg;
}

Pipeline::Pipeline(backbone::NetworkGraph graph, svm::NuSvmModel model)
    : graph_(std::move(graph)), model_(std::move(model)), model_version_(svm::model_version(model_)) {
    if (model_.dim() != static_cast<std::size_t>(graph_.feature_dim()))
        throw StartupError("model expects " + std::to_string(model_.dim()) + "-d features, backbone produces " +
                           std::to_string(graph_.feature_dim()));
}

Pipeline Pipeline::load(const std::filesystem::path& bundle, const std::filesystem::path& model) {
    backbone::NetworkGraph graph = [&] {
        try {
            return backbone::load_weight_bundle(bundle);
        } catch (const Error& e) {
            throw StartupError(std::string("cannot load weight bundle: ") + e.code() + ": " + e.what());
        }
    }();
    svm::NuSvmModel m = [&] {
        try {
            return svm::load_model(model);
        } catch (const Error& e) {
            throw StartupError(std::string("cannot load model: ") + e.code() + ": " + e.what());
        }
    }();
    return Pipeline(std::move(graph), std::move(m));
}

backbone::FeatureVector Pipeline::features(std::span<const std::uint8_t> image_bytes) const {
    return backbone::forward(graph_, imaging::preprocess(imaging::decode_image(image_bytes)));
}

Prediction Pipeline::predict(std::span<const std::uint8_t> image_bytes) const {
    Prediction p;
    const auto start = Clock::now();
    auto t = start;
    const imaging::RawImage raw = imaging::decode_image(image_bytes);
    p.timings.decode_ms = ms_since(t);
    t = Clock::now();
    const imaging::ImageTensor tensor = imaging::preprocess(raw);
    p.timings.preprocess_ms = ms_since(t);
    t = Clock::now();
    const backbone::FeatureVector f = backbone::forward(graph_, tensor);
    p.timings.forward_ms = ms_since(t);
    t = Clock::now();
    const std::vector<double> x(f.values.begin(), f.values.end());
    p.decision_value = model_.decision_value(x);
    p.label_value = svm::label_from_decision(p.decision_value);
    p.label = model_.label_name(p.label_value);
    p.timings.classify_ms = ms_since(t);
    p.elapsed_ms = ms_since(start);
    return p;
}

std::string prediction_json(const Prediction& p, bool verbose) {
    nlohmann::ordered_json j{{"label", p.label}, {"decision_value", p.decision_value}, {"elapsed_ms", p.elapsed_ms}};
    if (verbose)
        j["timings"] = {{"decode_ms", p.timings.decode_ms},
                        {"preprocess_ms", p.timings.preprocess_ms},
                        {"forward_ms", p.timings.forward_ms},
                        {"classify_ms", p.timings.classify_ms}};
    return j.dump();
}

}  // namespace densesvm::service
