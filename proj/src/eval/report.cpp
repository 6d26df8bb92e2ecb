#include "densesvm/eval.hpp"

#include <cstdio>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace densesvm::eval {

namespace {

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

nlohmann::ordered_json summary_json(const Summary& s) {
    return {{"mean", s.mean}, {"std", s.std}, {"min", s.min}, {"max", s.max}, {"defined_folds", s.defined}};
}

std::string percent(const std::optional<double>& v) {
    if (!v) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * *v);
    return buf;
}

}  // namespace

std::string format_cell(const Summary& s) {
    if (s.defined == 0) return "n/a";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f(±%.1f)", 100.0 * s.mean, 100.0 * s.std);
    return buf;
}

std::string report_json(const CVReport& report) {
    nlohmann::ordered_json j;
    j["k"] = report.k;
    j["seed"] = report.seed;
    j["config"] = {{"nu", report.config.nu},
                   {"gamma", report.config.gamma},
                   {"max_iter", report.config.max_iter},
                   {"tol", report.config.tol}};
    j["std_kind"] = "sample";
    nlohmann::ordered_json folds = nlohmann::ordered_json::array();
    for (const auto& f : report.folds) {
        folds.push_back({{"fold", f.fold + 1},
                         {"train_size", f.train_size},
                         {"test_size", f.test_size},
                         {"support_vectors", f.support_vectors},
                         {"converged", f.converged},
                         {"tp", f.counts.tp},
                         {"fp", f.counts.fp},
                         {"tn", f.counts.tn},
                         {"fn", f.counts.fn},
                         {"accuracy", f.metrics.accuracy},
                         {"recall", optional_json(f.metrics.recall)},
                         {"precision", optional_json(f.metrics.precision)},
                         {"f1", f.metrics.f1},
                         {"auc", optional_json(f.metrics.auc)}});
    }
    j["folds"] = folds;
    j["summary"] = {{"accuracy", summary_json(report.accuracy)},
                    {"recall", summary_json(report.recall)},
                    {"precision", summary_json(report.precision)},
                    {"f1", summary_json(report.f1)},
                    {"auc", summary_json(report.auc)}};
    return j.dump(2) + "\n";
}

std::string report_table(const CVReport& report) {
    std::ostringstream out;
    const auto row = [&](const std::string& name, const std::string& a, const std::string& r, const std::string& p,
                         const std::string& f, const std::string& u) {
        out << std::left << std::setw(6) << name << std::right << std::setw(14) << a << std::setw(14) << r
            << std::setw(14) << p << std::setw(14) << f << std::setw(14) << u << '\n';
    };
    row("Fold", "Accuracy", "Recall", "Precision", "F1-Score", "AUC");
    for (const auto& f : report.folds)
        row(std::to_string(f.fold + 1), percent(f.metrics.accuracy), percent(f.metrics.recall),
            percent(f.metrics.precision), percent(f.metrics.f1), percent(f.metrics.auc));
    // "±" is two bytes in UTF-8, widen by one to keep columns aligned.
    out << std::left << std::setw(6) << "Mean" << std::right;
    for (const Summary* s : {&report.accuracy, &report.recall, &report.precision, &report.f1, &report.auc}) {
        const std::string cell = format_cell(*s);
        out << std::setw(s->defined ? 15 : 14) << cell;
    }
    out << '\n';
    char cfg[128];
    std::snprintf(cfg, sizeof cfg, "k=%d seed=%llu nu=%g gamma=%g max_iter=%d (sample std)\n", report.k,
                  static_cast<unsigned long long>(report.seed), report.config.nu, report.config.gamma,
                  report.config.max_iter);
    out << cfg;
    return out.str();
}

}  // namespace densesvm::eval
