#pragma once

// Shared builders for tests that need a small trained pipeline.

#include "densesvm/backbone.hpp"
#include "densesvm/imaging.hpp"
#include "densesvm/svm.hpp"

#include "support/random.hpp"

#include <algorithm>

namespace densesvm::testing {

/// Gray CT-like picture: disc of brightness `level` on a dark background plus noise.
inline imaging::RawImage synthetic_scan(std::uint64_t seed, double level, int width = 256, int height = 256,
                                        int channels = 1, double sigma = 6.0) {
    Rng rng(seed);
    imaging::RawImage img{width, height, channels, {}};
    img.pixels.resize(static_cast<std::size_t>(width) * height * channels);
    const double cx = width / 2.0, cy = height / 2.0, r = 0.4 * std::min(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const bool inside = (x - cx) * (x - cx) + (y - cy) * (y - cy) < r * r;
            for (int c = 0; c < channels; ++c) {
                const double v = (inside ? level : 20.0) + sigma * rng.normal();
                img.pixels[(static_cast<std::size_t>(y) * width + x) * channels + c] =
                    static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
            }
        }
    return img;
}

/// Trains an SVM on backbone features of synthetic scans (bright = positive).
inline svm::NuSvmModel train_on_scans(const backbone::NetworkGraph& g, int per_class, double gamma,
                                      std::uint64_t seed = 1) {
    svm::TrainingSet data{Matrix(static_cast<std::size_t>(2 * per_class), static_cast<std::size_t>(g.feature_dim())), {}};
    for (int i = 0; i < 2 * per_class; ++i) {
        const bool pos = i < per_class;
        const auto f = backbone::forward(
            g, imaging::preprocess(synthetic_scan(seed * 1000 + static_cast<std::uint64_t>(i), pos ? 150.0 : 90.0)));
        std::copy(f.values.begin(), f.values.end(), data.features.row(static_cast<std::size_t>(i)).begin());
        data.labels.push_back(pos ? 1 : -1);
    }
    return svm::train_nu_svm(data, {.nu = 0.4, .gamma = gamma}).model;
}

}  // namespace densesvm::testing
