#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace densesvm::tuner {

enum class Scale { Linear, Log };

struct Dimension {
    std::string name;
    double lower = 0.0;
    double upper = 1.0;
    Scale scale = Scale::Linear;
    bool integer = false;
};

struct SearchSpace {
    std::vector<Dimension> dims;

    std::size_t size() const { return dims.size(); }
    /// Throws InvalidData on empty spaces, lower >= upper or non-positive log bounds.
    void validate() const;
    /// Coordinates in [0,1]^d, log dims mapped through log.
    std::vector<double> to_unit(std::span<const double> point) const;
    /// Inverse of to_unit; integer dims are rounded and everything is clamped to bounds.
    std::vector<double> from_unit(std::span<const double> unit) const;
    bool contains(std::span<const double> point) const;
    std::size_t index_of(const std::string& name) const;
};

/// gamma in [1e-4, 1] (log), nu in [0.05, 0.95], max_iter in [50, 500] (integer).
SearchSpace default_svm_space();

struct Observation {
    std::vector<double> point;
    double value = 0.0;
};

struct Prediction {
    double mean = 0.0;
    double variance = 0.0;
};

/// Gaussian-process regression with a squared-exponential kernel over unit
/// coordinates. Prior mean and signal variance come from the observations.
class GpPosterior {
public:
    GpPosterior(std::vector<std::vector<double>> unit_points, std::vector<double> values, double noise,
                double length_scale = 0.2);
    ~GpPosterior();
    GpPosterior(GpPosterior&&) noexcept;
    GpPosterior& operator=(GpPosterior&&) noexcept;

    Prediction predict(std::span<const double> unit_point) const;

    double prior_mean() const { return prior_mean_; }
    double signal_variance() const { return signal_variance_; }
    double noise() const { return noise_; }
    double length_scale() const { return length_scale_; }
    std::size_t size() const { return points_.size(); }

private:
    struct Factor;
    double kernel(std::span<const double> a, std::span<const double> b) const;

    std::vector<std::vector<double>> points_;
    double prior_mean_ = 0.0;
    double signal_variance_ = 0.0;
    double noise_ = 0.0;
    double length_scale_ = 0.2;
    std::unique_ptr<Factor> factor_;
};

/// Throws InvalidData without observations, SingularGram when noise = 0 and
/// two observations share a point.
GpPosterior gp_posterior(const SearchSpace& space, const std::vector<Observation>& observations, double noise = 1e-6,
                         double length_scale = 0.2);

double normal_pdf(double z);
double normal_cdf(double z);
/// Expected improvement over best_so_far for maximization.
double expected_improvement(double mean, double variance, double best_so_far);

/// Radical inverse of `index` in `base`.
double radical_inverse(std::uint64_t index, unsigned base);
/// Halton points with indices first..first+count-1, each coordinate shifted
/// by `shift` modulo 1 (empty shift = unshifted).
std::vector<std::vector<double>> halton(std::size_t count, std::size_t dim, std::uint64_t first = 1,
                                        std::span<const double> shift = {});

struct TraceRecord {
    std::size_t step = 0;
    std::vector<double> point;
    double value = 0.0;
    double best_so_far = 0.0;
};

/// One JSON object per line: step, point (by dimension name), value, best_so_far.
std::string trace_line(const SearchSpace& space, const TraceRecord& record);

struct TuneOptions {
    std::size_t budget = 50;
    std::size_t initial_points = 5;
    std::size_t candidates = 2048;
    std::size_t refine_top = 8;
    std::size_t refine_steps = 24;
    double noise = 1e-6;
    double length_scale = 0.2;
    std::uint64_t seed = 0;
    std::function<void(const TraceRecord&)> on_step;
};

struct TuneResult {
    std::vector<double> best_point;
    double best_value = 0.0;
    std::vector<Observation> history;
};

using Objective = std::function<double(std::span<const double>)>;

/// Maximizes `objective` over `space`. A budget at or below the initial
/// design size returns the best design point.
TuneResult bayes_optimize(const Objective& objective, const SearchSpace& space, const TuneOptions& options);

}  // namespace densesvm::tuner
