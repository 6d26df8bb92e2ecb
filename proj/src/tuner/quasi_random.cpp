#include "densesvm/errors.hpp"
#include "densesvm/tuner.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include <json.hpp>

namespace densesvm::tuner {

namespace {

constexpr std::array<unsigned, 16> kPrimes{2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};

}  // namespace

double radical_inverse(std::uint64_t index, unsigned base) {
    double result = 0.0;
    double f = 1.0 / base;
    while (index > 0) {
        result += f * static_cast<double>(index % base);
        index /= base;
        f /= base;
    }
    return result;
}

std::vector<std::vector<double>> halton(std::size_t count, std::size_t dim, std::uint64_t first,
                                        std::span<const double> shift) {
    if (dim > kPrimes.size()) throw InvalidData("halton sequence supports at most 16 dimensions");
    std::vector<std::vector<double>> out(count, std::vector<double>(dim));
    for (std::size_t i = 0; i < count; ++i)
        for (std::size_t j = 0; j < dim; ++j) {
            double u = radical_inverse(first + i, kPrimes[j]);
            if (!shift.empty()) {
                u += shift[j];
                u -= std::floor(u);
            }
            out[i][j] = u;
        }
    return out;
}

void SearchSpace::validate() const {
    if (dims.empty()) throw InvalidData("search space has no dimensions");
    for (const auto& d : dims) {
        if (!(d.lower < d.upper)) throw InvalidData("dimension " + d.name + ": lower bound must be below upper");
        if (d.scale == Scale::Log && !(d.lower > 0.0))
            throw InvalidData("dimension " + d.name + ": log scale needs positive bounds");
    }
}

std::vector<double> SearchSpace::to_unit(std::span<const double> point) const {
    if (point.size() != dims.size()) throw DimError("point has wrong dimension");
    std::vector<double> u(point.size());
    for (std::size_t j = 0; j < dims.size(); ++j) {
        const auto& d = dims[j];
        u[j] = d.scale == Scale::Log ? (std::log(point[j]) - std::log(d.lower)) / (std::log(d.upper) - std::log(d.lower))
                                     : (point[j] - d.lower) / (d.upper - d.lower);
    }
    return u;
}

std::vector<double> SearchSpace::from_unit(std::span<const double> unit) const {
    if (unit.size() != dims.size()) throw DimError("point has wrong dimension");
    std::vector<double> p(unit.size());
    for (std::size_t j = 0; j < dims.size(); ++j) {
        const auto& d = dims[j];
        const double u = std::clamp(unit[j], 0.0, 1.0);
        double v = d.scale == Scale::Log ? std::exp(std::log(d.lower) + u * (std::log(d.upper) - std::log(d.lower)))
                                         : d.lower + u * (d.upper - d.lower);
        if (d.integer) v = std::round(v);
        p[j] = std::clamp(v, d.lower, d.upper);
    }
    return p;
}

bool SearchSpace::contains(std::span<const double> point) const {
    if (point.size() != dims.size()) return false;
    for (std::size_t j = 0; j < dims.size(); ++j) {
        if (!(point[j] >= dims[j].lower && point[j] <= dims[j].upper)) return false;
        if (dims[j].integer && point[j] != std::round(point[j])) return false;
    }
    return true;
}

std::size_t SearchSpace::index_of(const std::string& name) const {
    for (std::size_t j = 0; j < dims.size(); ++j)
        if (dims[j].name == name) return j;
    throw InvalidData("search space has no dimension named " + name);
}

SearchSpace default_svm_space() {
    return SearchSpace{{
        {"gamma", 1e-4, 1.0, Scale::Log, false},
        {"nu", 0.05, 0.95, Scale::Linear, false},
        {"max_iter", 50.0, 500.0, Scale::Linear, true},
    }};
}

std::string trace_line(const SearchSpace& space, const TraceRecord& record) {
    nlohmann::ordered_json j;
    j["step"] = record.step;
    nlohmann::ordered_json point = nlohmann::ordered_json::object();
    for (std::size_t d = 0; d < space.size() && d < record.point.size(); ++d) {
        if (space.dims[d].integer) point[space.dims[d].name] = static_cast<long long>(record.point[d]);
        else point[space.dims[d].name] = record.point[d];
    }
    j["point"] = point;
    j["value"] = record.value;
    j["best_so_far"] = record.best_so_far;
    return j.dump();
}

}  // namespace densesvm::tuner
