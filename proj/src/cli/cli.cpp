#include "densesvm/cli.hpp"

#include "densesvm/backbone.hpp"
#include "densesvm/errors.hpp"
#include "densesvm/eval.hpp"
#include "densesvm/imaging.hpp"
#include "densesvm/service.hpp"
#include "densesvm/svm.hpp"
#include "densesvm/tuner.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace densesvm::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
    std::uint64_t seed = 42;
    bool verbose = false;

    // shared
    std::string features, labels, bundle, model, out;
    unsigned threads = 1;

    // extract
    std::string list, pos_dir, neg_dir, labels_out;

    // train / eval
    svm::NuSvmConfig svm;
    int folds = 10;
    std::string format = "json";
    bool tune = false;

    // tune
    std::size_t budget = 50;
    std::string trace;

    // serve
    service::ServiceConfig serve;
    std::string static_dir;
    int port = 8080;
    std::size_t max_upload = service::kDefaultMaxUpload;
    std::string host = "0.0.0.0";

    // predict
    std::string image;
};

void require_file(const std::string& path, const char* what) {
    if (path.empty() || !fs::is_regular_file(path)) throw InvalidData(std::string(what) + " not found: " + path);
}

void require_dir(const std::string& path, const char* what) {
    if (path.empty() || !fs::is_directory(path)) throw InvalidData(std::string(what) + " not found: " + path);
}

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw InvalidData("cannot read " + p.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InvalidData("cannot write " + path);
    f << text;
    if (!f) throw InvalidData("failed writing " + path);
}

std::string lower_ext(const fs::path& p) {
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return e;
}

std::vector<fs::path> images_in(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string ext = lower_ext(e.path());
        if (e.is_regular_file() && (ext == ".png" || ext == ".jpg" || ext == ".jpeg")) out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

// "path,label" rows; relative paths resolve against the list's directory.
std::vector<std::pair<fs::path, int>> read_image_list(const fs::path& list) {
    std::ifstream in(list);
    if (!in) throw InvalidData("cannot read " + list.string());
    std::vector<std::pair<fs::path, int>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.rfind(',');
        if (comma == std::string::npos) throw FormatError(list.string() + ":" + std::to_string(lineno) + ": expected path,label");
        const std::string label = line.substr(comma + 1);
        int y = 0;
        if (label == "1" || label == "+1") y = 1;
        else if (label == "-1") y = -1;
        else if (lineno == 1) continue;  // header
        else throw FormatError(list.string() + ":" + std::to_string(lineno) + ": label must be 1 or -1");
        fs::path p = line.substr(0, comma);
        if (p.is_relative()) p = list.parent_path() / p;
        rows.emplace_back(p, y);
    }
    return rows;
}

svm::TrainingSet load_training_set(const Options& o) {
    require_file(o.features, "feature file");
    require_file(o.labels, "label file");
    svm::TrainingSet data{eval::read_features(o.features), eval::read_labels(o.labels)};
    if (data.features.rows != data.labels.size())
        throw InvalidData("feature file has " + std::to_string(data.features.rows) + " rows but label file has " +
                          std::to_string(data.labels.size()));
    data.validate();
    return data;
}

struct TuneOutcome {
    svm::NuSvmConfig config;
    double accuracy = 0.0;
    std::size_t evaluations = 0;
};

TuneOutcome tune_config(const eval::CrossValidator& cv, const Options& o, std::ostream& log) {
    const tuner::SearchSpace space = tuner::default_svm_space();
    std::ofstream trace;
    if (!o.trace.empty()) {
        trace.open(o.trace);
        if (!trace) throw InvalidData("cannot write " + o.trace);
    }
    const auto to_config = [&](std::span<const double> p) {
        svm::NuSvmConfig c = o.svm;
        c.gamma = p[0];
        c.nu = p[1];
        c.max_iter = static_cast<int>(p[2]);
        return c;
    };
    const auto objective = [&](std::span<const double> p) {
        try {
            return cv.run(to_config(p), o.threads).accuracy.mean;
        } catch (const InfeasibleNu&) {
            return 0.0;  // nu too large for some training fold
        }
    };
    tuner::TuneOptions opt;
    opt.budget = o.budget;
    opt.seed = o.seed;
    opt.on_step = [&](const tuner::TraceRecord& r) {
        const std::string line = tuner::trace_line(space, r);
        if (trace) trace << line << '\n';
        if (o.verbose) log << line << '\n';
    };
    const tuner::TuneResult r = tuner::bayes_optimize(objective, space, opt);
    return {to_config(r.best_point), r.best_value, r.history.size()};
}

std::string config_json(const svm::NuSvmConfig& c, double accuracy, std::size_t evaluations) {
    nlohmann::ordered_json j{{"gamma", c.gamma}, {"nu", c.nu}, {"max_iter", c.max_iter}, {"tol", c.tol},
                             {"cv_accuracy", accuracy}, {"evaluations", evaluations}};
    return j.dump(2) + "\n";
}

int do_extract(const Options& o, std::ostream& out) {
    require_dir(o.bundle, "weight bundle");
    std::vector<std::pair<fs::path, int>> items;
    if (!o.list.empty()) {
        require_file(o.list, "image list");
        items = read_image_list(o.list);
    } else {
        require_dir(o.pos_dir, "positive image directory");
        require_dir(o.neg_dir, "negative image directory");
        for (const auto& p : images_in(o.pos_dir)) items.emplace_back(p, 1);
        for (const auto& p : images_in(o.neg_dir)) items.emplace_back(p, -1);
    }
    if (items.empty()) throw InvalidData("no images to extract");
    for (const auto& [p, y] : items) require_file(p.string(), "image");

    const backbone::NetworkGraph graph = backbone::load_weight_bundle(o.bundle);
    const auto d = static_cast<std::size_t>(graph.feature_dim());
    Matrix features(items.size(), d);
    std::vector<std::exception_ptr> errors(items.size());
    std::atomic<std::size_t> next{0};
    const auto work = [&] {
        for (std::size_t i = next++; i < items.size(); i = next++) {
            try {
                const auto f = backbone::forward(graph, imaging::preprocess(imaging::decode_image(read_bytes(items[i].first))));
                std::copy(f.values.begin(), f.values.end(), features.row(i).begin());
            } catch (const Error& e) {
                errors[i] = std::make_exception_ptr(InvalidData(items[i].first.string() + ": " + e.code() + ": " + e.what()));
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < std::max(1u, o.threads); ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    std::vector<int> labels;
    for (const auto& item : items) labels.push_back(item.second);
    eval::write_features(o.out, features);
    const std::string labels_out = o.labels_out.empty() ? o.out + ".labels.csv" : o.labels_out;
    eval::write_labels(labels_out, labels);
    out << "extracted " << items.size() << " x " << d << " features to " << o.out << ", labels to " << labels_out << '\n';
    return kExitOk;
}

int do_train(const Options& o, std::ostream& out) {
    const svm::TrainingSet data = load_training_set(o);
    const svm::TrainResult r = svm::train_nu_svm(data, o.svm);
    svm::save_model(r.model, o.out);
    nlohmann::ordered_json j{{"model", o.out},
                             {"model_version", svm::model_version(r.model)},
                             {"support_vectors", r.model.support_count()},
                             {"converged", r.dual.converged},
                             {"iterations", r.dual.iterations},
                             {"kkt_residual", r.dual.kkt_residual}};
    out << j.dump(2) << '\n';
    return kExitOk;
}

int do_tune(const Options& o, std::ostream& out, std::ostream& err) {
    const svm::TrainingSet data = load_training_set(o);
    const eval::CrossValidator cv(data.features, data.labels, o.folds, o.seed);
    const TuneOutcome t = tune_config(cv, o, err);
    write_text(o.out, config_json(t.config, t.accuracy, t.evaluations), out);
    return kExitOk;
}

int do_eval(const Options& o, std::ostream& out, std::ostream& err) {
    if (o.format != "json" && o.format != "table") throw CLI::ValidationError("--format", "must be json or table");
    const svm::TrainingSet data = load_training_set(o);
    const eval::CrossValidator cv(data.features, data.labels, o.folds, o.seed);
    svm::NuSvmConfig cfg = o.svm;
    if (o.tune) cfg = tune_config(cv, o, err).config;
    const eval::CVReport report = cv.run(cfg, o.threads);
    write_text(o.out, o.format == "json" ? eval::report_json(report) : eval::report_table(report), out);
    return kExitOk;
}

std::atomic<service::Server*> g_server{nullptr};

extern "C" void on_signal(int) {
    if (auto* s = g_server.load()) s->stop();
}

int do_serve(const Options& o, const CLI::App& cmd, std::ostream& out) {
    service::ServiceConfig cfg = service::apply_environment({});
    if (cmd.count("--host")) cfg.host = o.host;
    if (cmd.count("--port")) cfg.port = o.port;
    if (cmd.count("--bundle")) cfg.bundle = o.bundle;
    if (cmd.count("--model")) cfg.model = o.model;
    if (cmd.count("--static-dir")) cfg.static_dir = o.static_dir;
    if (cmd.count("--max-upload")) cfg.max_upload = o.max_upload;
    service::Server server(cfg);
    const int port = server.bind();
    out << "serving " << server.pipeline().graph().name() << " (" << server.pipeline().graph().feature_dim()
        << "-d) with model " << server.pipeline().model_version() << " on " << cfg.host << ":" << port << std::endl;
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    server.listen();
    g_server = nullptr;
    return kExitOk;
}

int do_predict(const Options& o, std::ostream& out) {
    require_dir(o.bundle, "weight bundle");
    require_file(o.model, "model file");
    require_file(o.image, "image");
    const service::Pipeline pipe = service::Pipeline::load(o.bundle, o.model);
    out << service::prediction_json(pipe.predict(read_bytes(o.image)), o.verbose) << '\n';
    return kExitOk;
}

void add_svm_flags(CLI::App* cmd, Options& o) {
    cmd->add_option("--nu", o.svm.nu, "Nu parameter")->capture_default_str();
    cmd->add_option("--gamma", o.svm.gamma, "RBF kernel width")->capture_default_str();
    cmd->add_option("--max-iter", o.svm.max_iter, "Outer solver iterations")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--tol", o.svm.tol, "KKT tolerance")->capture_default_str()->check(CLI::PositiveNumber);
}

void add_data_flags(CLI::App* cmd, Options& o) {
    cmd->add_option("--features", o.features, "Feature file")->required();
    cmd->add_option("--labels", o.labels, "Label CSV")->required();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Deep-feature Nu-SVM classifier for chest CT images", "densesvm"};
    app.fallthrough();
    app.require_subcommand(1);
    app.add_option("--seed", o.seed, "Seed for fold shuffling and tuning")->capture_default_str();
    app.add_flag("-v,--verbose", o.verbose, "Print progress and timings");

    auto* extract = app.add_subcommand("extract", "Extract backbone features from images");
    extract->add_option("--bundle", o.bundle, "Weight bundle directory")->required();
    auto* list = extract->add_option("--list", o.list, "CSV of path,label rows");
    auto* pos = extract->add_option("--pos-dir", o.pos_dir, "Directory of positive (COVID) images");
    auto* neg = extract->add_option("--neg-dir", o.neg_dir, "Directory of negative (NonCOVID) images");
    pos->needs(neg);
    neg->needs(pos);
    list->excludes(pos)->excludes(neg);
    extract->add_option("--out", o.out, "Output feature file")->required();
    extract->add_option("--labels-out", o.labels_out, "Output label CSV (default <out>.labels.csv)");
    extract->add_option("--threads", o.threads, "Worker threads")->capture_default_str();

    auto* train = app.add_subcommand("train", "Train a Nu-SVM model");
    add_data_flags(train, o);
    add_svm_flags(train, o);
    train->add_option("--out", o.out, "Output model file")->required();

    auto* tune = app.add_subcommand("tune", "Bayesian search over gamma, nu and max_iter");
    add_data_flags(tune, o);
    tune->add_option("--folds", o.folds, "Cross-validation folds")->capture_default_str();
    tune->add_option("--budget", o.budget, "Objective evaluations")->capture_default_str();
    tune->add_option("--trace", o.trace, "Write the tuning trace as JSON lines");
    tune->add_option("--out", o.out, "Write the best configuration (default stdout)");
    tune->add_option("--threads", o.threads, "Fold worker threads")->capture_default_str();

    auto* ev = app.add_subcommand("eval", "Stratified k-fold cross-validation report");
    add_data_flags(ev, o);
    add_svm_flags(ev, o);
    ev->add_option("--folds", o.folds, "Cross-validation folds")->capture_default_str();
    ev->add_option("--format", o.format, "json or table")->capture_default_str()->check(CLI::IsMember({"json", "table"}));
    ev->add_option("--out", o.out, "Report file (default stdout)");
    ev->add_option("--threads", o.threads, "Fold worker threads")->capture_default_str();
    ev->add_flag("--tune", o.tune, "Tune hyperparameters on the same folds first");
    ev->add_option("--budget", o.budget, "Tuning evaluations with --tune")->capture_default_str();
    ev->add_option("--trace", o.trace, "Tuning trace file with --tune");

    auto* serve = app.add_subcommand("serve", "Run the HTTP inference service");
    serve->add_option("--host", o.host, "Listen address")->capture_default_str();
    serve->add_option("--port", o.port, "Listen port")->capture_default_str()->check(CLI::Range(1, 65535));
    serve->add_option("--bundle", o.bundle, "Weight bundle directory");
    serve->add_option("--model", o.model, "Model file");
    serve->add_option("--static-dir", o.static_dir, "Static assets served at /");
    serve->add_option("--max-upload", o.max_upload, "Upload size limit in bytes")->capture_default_str();

    auto* predict = app.add_subcommand("predict", "Classify one image");
    predict->add_option("--bundle", o.bundle, "Weight bundle directory")->required();
    predict->add_option("--model", o.model, "Model file")->required();
    predict->add_option("--image", o.image, "PNG or JPEG image")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n";
        const auto subs = app.get_subcommands();
        err << (subs.empty() ? app.help() : subs.front()->help());
        return kExitUsage;
    }

    try {
        if (extract->parsed()) return do_extract(o, out);
        if (train->parsed()) return do_train(o, out);
        if (tune->parsed()) return do_tune(o, out, err);
        if (ev->parsed()) return do_eval(o, out, err);
        if (serve->parsed()) return do_serve(o, *serve, out);
        if (predict->parsed()) return do_predict(o, out);
    } catch (const CLI::Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const Error& e) {
        err << "error: " << e.code() << ": " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}

int run(int argc, const char* const* argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args, std::cout, std::cerr);
}

}  // namespace densesvm::cli
