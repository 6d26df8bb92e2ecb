#include "densesvm/imaging.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace densesvm::imaging {

namespace {

struct Tap {
    int lo;
    int hi;
    float frac;
};

// Half-pixel-center source coordinates for one axis, clamped to the edge.
std::vector<Tap> make_taps(int src, int dst) {
    std::vector<Tap> taps(static_cast<std::size_t>(dst));
    const double scale = static_cast<double>(src) / dst;
    for (int i = 0; i < dst; ++i) {
        double s = (i + 0.5) * scale - 0.5;
        s = std::clamp(s, 0.0, static_cast<double>(src - 1));
        const int lo = static_cast<int>(std::floor(s));
        const int hi = std::min(lo + 1, src - 1);
        taps[static_cast<std::size_t>(i)] = {lo, hi, static_cast<float>(s - lo)};
    }
    return taps;
}

}  // namespace

ImageTensor preprocess(const RawImage& raw) {
    raw.validate();
    const auto ys = make_taps(raw.height, kInputHeight);
    const auto xs = make_taps(raw.width, kInputWidth);
    const int c_in = raw.channels;
    const auto row_stride = static_cast<std::size_t>(raw.width) * c_in;

    ImageTensor out;
    out.values.resize(kInputSize);
    float* dst = out.values.data();
    for (const Tap& ty : ys) {
        const std::uint8_t* r0 = raw.pixels.data() + ty.lo * row_stride;
        const std::uint8_t* r1 = raw.pixels.data() + ty.hi * row_stride;
        for (const Tap& tx : xs) {
            std::array<float, 3> px{};
            for (int c = 0; c < c_in; ++c) {
                const float a = r0[tx.lo * c_in + c];
                const float b = r0[tx.hi * c_in + c];
                const float d = r1[tx.lo * c_in + c];
                const float e = r1[tx.hi * c_in + c];
                const float top = a + (b - a) * tx.frac;
                const float bottom = d + (e - d) * tx.frac;
                px[static_cast<std::size_t>(c)] = (top + (bottom - top) * ty.frac) / 255.0f;
            }
            if (c_in == 1) px[1] = px[2] = px[0];
            for (float v : px) *dst++ = std::clamp(v, 0.0f, 1.0f);
        }
    }
    return out;
}

}  // namespace densesvm::imaging
