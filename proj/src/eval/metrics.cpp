#include "densesvm/errors.hpp"
#include "densesvm/eval.hpp"

#include <algorithm>
#include <cmath>

namespace densesvm::eval {

ConfusionCounts confusion(std::span<const int> truth, std::span<const int> predicted) {
    if (truth.size() != predicted.size()) throw DimError("truth and prediction lengths differ");
    ConfusionCounts c;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool t = truth[i] > 0;
        const bool p = predicted[i] > 0;
        if (t && p) ++c.tp;
        else if (!t && p) ++c.fp;
        else if (!t && !p) ++c.tn;
        else ++c.fn;
    }
    return c;
}

MetricSet metrics_from_confusion(const ConfusionCounts& c) {
    if (c.total() == 0) throw InvalidData("empty confusion table");
    MetricSet m;
    const auto d = [](std::size_t v) { return static_cast<double>(v); };
    m.accuracy = d(c.tp + c.tn) / d(c.total());
    if (c.tp + c.fp > 0) m.precision = d(c.tp) / d(c.tp + c.fp);
    if (c.tp + c.fn > 0) m.recall = d(c.tp) / d(c.tp + c.fn);
    if (m.precision && m.recall && c.tp > 0) m.f1 = d(2 * c.tp) / d(2 * c.tp + c.fp + c.fn);
    return m;
}

Summary summarize(std::span<const std::optional<double>> values) {
    Summary s;
    double sum = 0.0;
    s.min = INFINITY;
    s.max = -INFINITY;
    for (const auto& v : values) {
        if (!v) continue;
        ++s.defined;
        sum += *v;
        s.min = std::min(s.min, *v);
        s.max = std::max(s.max, *v);
    }
    if (s.defined == 0) return Summary{};
    if (s.min == s.max) {
        s.mean = s.min;
        return s;
    }
    s.mean = sum / static_cast<double>(s.defined);
    if (s.defined > 1) {
        double ss = 0.0;
        for (const auto& v : values)
            if (v) ss += (*v - s.mean) * (*v - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(s.defined - 1));
    }
    // Keep the mean inside [min, max] despite rounding.
    s.mean = std::clamp(s.mean, s.min, s.max);
    return s;
}

}  // namespace densesvm::eval
