#include "densesvm/errors.hpp"
#include "densesvm/service.hpp"

#include <algorithm>
#include <cctype>

#include <httplib.h>
#include <json.hpp>

namespace densesvm::service {

namespace {

struct HttpError {
    int status;
    std::string code;
    std::string message;
};

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
    res.status = status;
    res.set_content(nlohmann::json{{"error", code}, {"message", message}}.dump(), "application/json");
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::span<const std::uint8_t> as_bytes(const std::string& s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

// Returns the uploaded image bytes: multipart field "file" or a raw image/* body.
const std::string& upload_bytes(const httplib::Request& req, std::size_t max_upload) {
    const std::string* content = nullptr;
    if (req.is_multipart_form_data()) {
        const auto it = req.files.find("file");
        if (it == req.files.end()) throw HttpError{400, "missing_file", "multipart form has no 'file' field"};
        content = &it->second.content;
    } else {
        const std::string type = lower(req.get_header_value("Content-Type"));
        if (type.rfind("image/", 0) != 0)
            throw HttpError{415, "unsupported_media_type",
                            "send multipart/form-data with a 'file' field or an image/* body"};
        content = &req.body;
    }
    if (content->size() > max_upload)
        throw HttpError{400, "upload_too_large", "upload exceeds " + std::to_string(max_upload) + " bytes"};
    return *content;
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
    try {
        fn();
    } catch (const HttpError& e) {
        send_error(res, e.status, e.code, e.message);
    } catch (const DecodeError& e) {
        send_error(res, 400, e.code(), e.what());
    } catch (const ReshapeError& e) {
        send_error(res, 422, e.code(), e.what());
    } catch (const std::exception& e) {
        send_error(res, 500, "internal_error", e.what());
    }
}

}  // namespace

struct Server::Impl {
    httplib::Server http;
    int port = -1;
};

Server::Server(ServiceConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    pipeline_ = std::make_shared<const Pipeline>(Pipeline::load(cfg_.bundle, cfg_.model));
    impl_ = std::make_unique<Impl>();
}

Server::Server(std::shared_ptr<const Pipeline> pipeline, ServiceConfig cfg)
    : pipeline_(std::move(pipeline)), cfg_(std::move(cfg)), impl_(std::make_unique<Impl>()) {
    if (!pipeline_) throw StartupError("no pipeline");
    if (cfg_.port < 0 || cfg_.port > 65535) throw StartupError("port out of range");
    if (!cfg_.static_dir.empty() && !std::filesystem::is_directory(cfg_.static_dir))
        throw StartupError("static directory not found: " + cfg_.static_dir.string());
}

Server::~Server() {
    if (impl_) impl_->http.stop();
}

int Server::bind() {
    if (impl_->port > 0) return impl_->port;
    auto& http = impl_->http;
    const std::shared_ptr<const Pipeline> pipe = pipeline_;
    const std::size_t max_upload = cfg_.max_upload;

    http.set_payload_max_length(max_upload + (1u << 20));
    http.set_error_handler([max_upload](const httplib::Request&, httplib::Response& res) {
        if (res.status == 413)
            send_error(res, 400, "upload_too_large", "upload exceeds " + std::to_string(max_upload) + " bytes");
        else if (res.body.empty())
            send_error(res, res.status, res.status == 404 ? "not_found" : "http_error", httplib::status_message(res.status));
    });

    http.Get("/health", [pipe](const httplib::Request&, httplib::Response& res) {
        const nlohmann::ordered_json j{{"status", "ok"},
                                       {"backbone", pipe->graph().name()},
                                       {"backbone_dim", pipe->graph().feature_dim()},
                                       {"model_version", pipe->model_version()},
                                       {"support_vectors", pipe->model().support_count()}};
        res.set_content(j.dump(), "application/json");
    });

    http.Post("/predict", [pipe, max_upload](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const std::string& bytes = upload_bytes(req, max_upload);
            const Prediction p = pipe->predict(as_bytes(bytes));
            const std::string v = req.get_param_value("verbose");
            res.set_content(prediction_json(p, v == "1" || v == "true"), "application/json");
        });
    });

    http.Post("/features", [pipe, max_upload](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const std::string& bytes = upload_bytes(req, max_upload);
            const backbone::FeatureGrid g = backbone::reshape_feature_grid(pipe->features(as_bytes(bytes)));
            nlohmann::json grid = nlohmann::json::array();
            for (int r = 0; r < g.rows; ++r) {
                const auto begin = g.values.begin() + static_cast<std::ptrdiff_t>(r) * g.cols;
                grid.push_back(std::vector<float>(begin, begin + g.cols));
            }
            res.set_content(nlohmann::json{{"rows", g.rows}, {"cols", g.cols}, {"grid", std::move(grid)}}.dump(),
                            "application/json");
        });
    });

    if (!cfg_.static_dir.empty() && !http.set_mount_point("/", cfg_.static_dir.string()))
        throw StartupError("cannot mount static directory " + cfg_.static_dir.string());

    if (cfg_.port == 0) {
        impl_->port = http.bind_to_any_port(cfg_.host);
        if (impl_->port <= 0) throw StartupError("cannot bind an ephemeral port on " + cfg_.host);
    } else {
        if (!http.bind_to_port(cfg_.host, cfg_.port))
            throw StartupError("cannot bind " + cfg_.host + ":" + std::to_string(cfg_.port));
        impl_->port = cfg_.port;
    }
    return impl_->port;
}

void Server::listen() {
    bind();
    if (!impl_->http.listen_after_bind()) throw StartupError("server stopped unexpectedly");
}

void Server::stop() { impl_->http.stop(); }

bool Server::running() const { return impl_->http.is_running(); }

}  // namespace densesvm::service
