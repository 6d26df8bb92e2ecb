#pragma once

#include "densesvm/backbone.hpp"
#include "densesvm/svm.hpp"
#include "densesvm/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>

namespace densesvm::service {

inline constexpr std::size_t kDefaultMaxUpload = 10u << 20;

struct ServiceConfig {
    std::string host = "0.0.0.0";
    int port = 8080;  // 0 binds an ephemeral port
    std::filesystem::path bundle;
    std::filesystem::path model;
    std::filesystem::path static_dir;  // optional
    std::size_t max_upload = kDefaultMaxUpload;

    /// Throws StartupError on a bad port, missing paths or a zero upload cap.
    void validate() const;
};

/// Fills fields from DENSESVM_PORT, DENSESVM_BUNDLE, DENSESVM_MODEL,
/// DENSESVM_STATIC_DIR and DENSESVM_MAX_UPLOAD when they are set.
ServiceConfig apply_environment(ServiceConfig cfg);

struct Timings {
    double decode_ms = 0.0;
    double preprocess_ms = 0.0;
    double forward_ms = 0.0;
    double classify_ms = 0.0;
};

struct Prediction {
    std::string label;
    int label_value = 0;
    double decision_value = 0.0;
    double elapsed_ms = 0.0;  // decode through classification
    Timings timings;
};

/// Backbone plus classifier, loaded once and shared read-only.
class Pipeline {
public:
    Pipeline(backbone::NetworkGraph graph, svm::NuSvmModel model);
    /// Throws StartupError wrapping bundle or model failures.
    static Pipeline load(const std::filesystem::path& bundle, const std::filesystem::path& model);

    /// decode -> preprocess -> forward -> decision value. Throws DecodeError.
    Prediction predict(std::span<const std::uint8_t> image_bytes) const;
    backbone::FeatureVector features(std::span<const std::uint8_t> image_bytes) const;

    const backbone::NetworkGraph& graph() const { return graph_; }
    const svm::NuSvmModel& model() const { return model_; }
    const std::string& model_version() const { return model_version_; }

private:
    backbone::NetworkGraph graph_;
    svm::NuSvmModel model_;
    std::string model_version_;
};

/// PredictionResponse JSON; verbose adds the stage timings.
std::string prediction_json(const Prediction& p, bool verbose = false);

class Server {
public:
    /// Loads and validates everything before any socket is opened.
    explicit Server(ServiceConfig cfg);
    Server(std::shared_ptr<const Pipeline> pipeline, ServiceConfig cfg);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Binds the configured port (0 = ephemeral) and returns the bound port.
    int bind();
    /// Serves until stop(); binds first if needed.
    void listen();
    void stop();
    bool running() const;

    const Pipeline& pipeline() const { return *pipeline_; }

private:
    struct Impl;
    std::shared_ptr<const Pipeline> pipeline_;
    ServiceConfig cfg_;
    std::unique_ptr<Impl> impl_;
};

}  // namespace densesvm::service
