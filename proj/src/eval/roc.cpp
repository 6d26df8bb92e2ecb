#include "densesvm/errors.hpp"
#include "densesvm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace densesvm::eval {

RocCurve roc_auc(std::span<const double> scores, std::span<const int> truth) {
    if (scores.size() != truth.size()) throw DimError("scores and labels lengths differ");
    std::size_t pos = 0;
    for (int t : truth) pos += t > 0;
    const std::size_t neg = truth.size() - pos;
    if (pos == 0 || neg == 0) throw SingleClass("ROC needs both classes");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve curve;
    curve.points.push_back({0.0, 0.0, INFINITY});
    // Twice the area in units of one (positive, negative) pair.
    std::uint64_t area2 = 0;
    std::size_t tp = 0;
    std::size_t fp = 0;
    for (std::size_t i = 0; i < order.size();) {
        const double threshold = scores[order[i]];
        std::size_t dtp = 0;
        std::size_t dfp = 0;
        for (; i < order.size() && scores[order[i]] == threshold; ++i) (truth[order[i]] > 0 ? dtp : dfp)++;
        area2 += static_cast<std::uint64_t>(dfp) * (2 * tp + dtp);
        tp += dtp;
        fp += dfp;
        curve.points.push_back(
            {static_cast<double>(fp) / static_cast<double>(neg), static_cast<double>(tp) / static_cast<double>(pos), threshold});
    }
    curve.auc = static_cast<double>(area2) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
    return curve;
}

}  // namespace densesvm::eval
