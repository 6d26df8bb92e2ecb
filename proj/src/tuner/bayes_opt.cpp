#include "densesvm/errors.hpp"
#include "densesvm/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace densesvm::tuner {

namespace {

struct Candidate {
    std::vector<double> unit;   // snapped onto the representable grid
    std::vector<double> point;
    double ei = 0.0;
    double variance = 0.0;
};

}  // namespace

TuneResult bayes_optimize(const Objective& objective, const SearchSpace& space, const TuneOptions& options) {
    space.validate();
    if (options.budget == 0) throw InvalidData("tuning budget must be positive");
    const std::size_t d = space.size();
    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto draw_shift = [&] {
        std::vector<double> s(d);
        for (double& v : s) v = uniform(rng);
        return s;
    };

    TuneResult result;
    result.best_value = -std::numeric_limits<double>::infinity();
    const auto evaluate = [&](const std::vector<double>& point) {
        const double value = objective(point);
        if (!std::isfinite(value)) throw InvalidData("objective returned a non-finite value");
        result.history.push_back({point, value});
        if (value > result.best_value) {
            result.best_value = value;
            result.best_point = point;
        }
        if (options.on_step) options.on_step({result.history.size() - 1, point, value, result.best_value});
    };

    const std::size_t initial = std::clamp<std::size_t>(options.initial_points, 1, options.budget);
    const std::vector<double> design_shift = draw_shift();
    const auto seen = [&](const std::vector<double>& point) {
        return std::any_of(result.history.begin(), result.history.end(),
                           [&](const Observation& o) { return o.point == point; });
    };
    for (const auto& u : halton(initial, d, 1, design_shift)) {
        std::vector<double> point = space.from_unit(u);
        if (!seen(point)) evaluate(point);
    }

    std::uint64_t next_index = 1 + initial;
    while (result.history.size() < options.budget) {
        const GpPosterior gp = gp_posterior(space, result.history, options.noise, options.length_scale);
        const double best = result.best_value;
        const auto score = [&](std::span<const double> raw) {
            Candidate c;
            c.point = space.from_unit(raw);
            c.unit = space.to_unit(c.point);
            const Prediction p = gp.predict(c.unit);
            c.ei = expected_improvement(p.mean, p.variance, best);
            c.variance = p.variance;
            return c;
        };

        std::vector<Candidate> pool;
        pool.reserve(options.candidates + options.refine_top);
        for (const auto& u : halton(options.candidates, d, next_index, draw_shift())) pool.push_back(score(u));
        next_index += options.candidates;

        std::vector<std::size_t> order(pool.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pool[a].ei > pool[b].ei; });
        const std::size_t top = std::min(options.refine_top, order.size());
        for (std::size_t t = 0; t < top; ++t) {
            Candidate cur = pool[order[t]];
            std::vector<double> raw = cur.unit;
            double radius = 0.05;
            for (std::size_t s = 0; s < options.refine_steps; ++s) {
                std::vector<double> trial(raw);
                for (double& v : trial) v = std::clamp(v + radius * normal(rng), 0.0, 1.0);
                Candidate c = score(trial);
                if (c.ei > cur.ei) {
                    cur = std::move(c);
                    raw = std::move(trial);
                } else {
                    radius *= 0.7;
                }
            }
            pool.push_back(std::move(cur));
        }

        const Candidate* pick = nullptr;
        for (const auto& c : pool)
            if (c.ei > 0.0 && (!pick || c.ei > pick->ei) && !seen(c.point)) pick = &c;
        if (!pick)
            for (const auto& c : pool)
                if ((!pick || c.variance > pick->variance) && !seen(c.point)) pick = &c;
        if (!pick) break;  // every representable candidate is already observed
        evaluate(pick->point);
    }
    return result;
}

}  // namespace densesvm::tuner
