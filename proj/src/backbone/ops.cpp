#include "ops.hpp"

#include "densesvm/errors.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace densesvm::backbone::ops {

namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMatrix>;
using ConstRowMap = Eigen::Map<const RowMatrix>;

}  // namespace

int conv_out_extent(int in, int kernel, int stride, int pad) {
    const int span = in + 2 * pad - kernel;
    if (span < 0 || stride < 1) return 0;
    return span / stride + 1;
}

TensorBuf conv2d(const TensorBuf& in, const WeightTensor& kernel, const WeightTensor* bias, int stride,
                 int pad) {
    const int k = kernel.shape[0];
    const int cin = kernel.shape[2];
    const int cout = kernel.shape[3];
    const int ho = conv_out_extent(in.shape.height, k, stride, pad);
    const int wo = conv_out_extent(in.shape.width, k, stride, pad);
    TensorBuf out(Shape{ho, wo, cout});
    const Eigen::Index rows = static_cast<Eigen::Index>(ho) * wo;
    ConstRowMap w(kernel.values.data(), static_cast<Eigen::Index>(k) * k * cin, cout);
    RowMap y(out.values.data(), rows, cout);

    if (k == 1 && stride == 1 && pad == 0) {
        ConstRowMap x(in.values.data(), rows, cin);
        y.noalias() = x * w;
    } else {
        const std::size_t patch = static_cast<std::size_t>(k) * k * cin;
        std::vector<float> cols(static_cast<std::size_t>(rows) * patch, 0.0f);
        float* dst = cols.data();
        for (int oy = 0; oy < ho; ++oy) {
            for (int ox = 0; ox < wo; ++ox, dst += patch) {
                float* cell = dst;
                for (int ky = 0; ky < k; ++ky) {
                    const int iy = oy * stride - pad + ky;
                    for (int kx = 0; kx < k; ++kx, cell += cin) {
                        const int ix = ox * stride - pad + kx;
                        if (iy < 0 || iy >= in.shape.height || ix < 0 || ix >= in.shape.width) continue;
                        std::memcpy(cell, &in.at(iy, ix, 0), sizeof(float) * static_cast<std::size_t>(cin));
                    }
                }
            }
        }
        ConstRowMap x(cols.data(), rows, static_cast<Eigen::Index>(patch));
        y.noalias() = x * w;
    }
    if (bias != nullptr) {
        Eigen::Map<const Eigen::RowVectorXf> b(bias->values.data(), cout);
        y.rowwise() += b;
    }
    return out;
}

TensorBuf depthwise_conv2d(const TensorBuf& in, const WeightTensor& kernel, const WeightTensor* bias,
                           int stride, int pad) {
    const int k = kernel.shape[0];
    const int c = in.shape.channels;
    const int ho = conv_out_extent(in.shape.height, k, stride, pad);
    const int wo = conv_out_extent(in.shape.width, k, stride, pad);
    TensorBuf out(Shape{ho, wo, c});
    const float* w = kernel.values.data();
    for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
            float* acc = &out.at(oy, ox, 0);
            if (bias != nullptr) std::copy_n(bias->values.data(), c, acc);
            for (int ky = 0; ky < k; ++ky) {
                const int iy = oy * stride - pad + ky;
                if (iy < 0 || iy >= in.shape.height) continue;
                for (int kx = 0; kx < k; ++kx) {
                    const int ix = ox * stride - pad + kx;
                    if (ix < 0 || ix >= in.shape.width) continue;
                    const float* src = &in.at(iy, ix, 0);
                    const float* wk = w + (static_cast<std::size_t>(ky) * k + kx) * c;
                    for (int ch = 0; ch < c; ++ch) acc[ch] += src[ch] * wk[ch];
                }
            }
        }
    }
    return out;
}

void batch_norm(TensorBuf& x, const WeightTensor& gamma, const WeightTensor& beta, const WeightTensor& mean,
                const WeightTensor& variance, float epsilon) {
    const int c = x.shape.channels;
    std::vector<float> scale(static_cast<std::size_t>(c));
    std::vector<float> shift(static_cast<std::size_t>(c));
    for (int ch = 0; ch < c; ++ch) {
        const auto i = static_cast<std::size_t>(ch);
        scale[i] = gamma.values[i] / std::sqrt(variance.values[i] + epsilon);
        shift[i] = beta.values[i] - mean.values[i] * scale[i];
    }
    const std::size_t pixels = static_cast<std::size_t>(x.shape.height) * x.shape.width;
    float* v = x.values.data();
    for (std::size_t p = 0; p < pixels; ++p, v += c)
        for (int ch = 0; ch < c; ++ch) v[ch] = v[ch] * scale[static_cast<std::size_t>(ch)] + shift[static_cast<std::size_t>(ch)];
}

void relu(TensorBuf& x) {
    for (float& v : x.values) v = std::max(v, 0.0f);
}

namespace {

template <typename Reduce, typename Finish>
TensorBuf pool(const TensorBuf& in, int k, int stride, int pad, float init, Reduce reduce, Finish finish) {
    const int c = in.shape.channels;
    const int ho = conv_out_extent(in.shape.height, k, stride, pad);
    const int wo = conv_out_extent(in.shape.width, k, stride, pad);
    TensorBuf out(Shape{ho, wo, c}, init);
    for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
            float* acc = &out.at(oy, ox, 0);
            int count = 0;
            for (int ky = 0; ky < k; ++ky) {
                const int iy = oy * stride - pad + ky;
                if (iy < 0 || iy >= in.shape.height) continue;
                for (int kx = 0; kx < k; ++kx) {
                    const int ix = ox * stride - pad + kx;
                    if (ix < 0 || ix >= in.shape.width) continue;
                    const float* src = &in.at(iy, ix, 0);
                    for (int ch = 0; ch < c; ++ch) acc[ch] = reduce(acc[ch], src[ch]);
                    ++count;
                }
            }
            finish(acc, c, count);
        }
    }
    return out;
}

}  // namespace

TensorBuf max_pool(const TensorBuf& in, int kernel, int stride, int pad) {
    return pool(
        in, kernel, stride, pad, -std::numeric_limits<float>::infinity(),
        [](float a, float b) { return std::max(a, b); }, [](float*, int, int) {});
}

TensorBuf avg_pool(const TensorBuf& in, int kernel, int stride, int pad) {
    return pool(
        in, kernel, stride, pad, 0.0f, [](float a, float b) { return a + b; },
        [](float* acc, int c, int count) {
            const float inv = count > 0 ? 1.0f / static_cast<float>(count) : 0.0f;
            for (int ch = 0; ch < c; ++ch) acc[ch] *= inv;
        });
}

TensorBuf global_avg_pool(const TensorBuf& in) {
    const int c = in.shape.channels;
    const std::size_t pixels = static_cast<std::size_t>(in.shape.height) * in.shape.width;
    // Accumulate in double so a constant channel pools back to itself exactly.
    std::vector<double> sum(static_cast<std::size_t>(c), 0.0);
    const float* v = in.values.data();
    for (std::size_t p = 0; p < pixels; ++p, v += c)
        for (int ch = 0; ch < c; ++ch) sum[static_cast<std::size_t>(ch)] += v[ch];
    TensorBuf out(Shape{1, 1, c});
    for (int ch = 0; ch < c; ++ch)
        out.values[static_cast<std::size_t>(ch)] =
            static_cast<float>(sum[static_cast<std::size_t>(ch)] / static_cast<double>(pixels));
    return out;
}

TensorBuf concat(std::span<const TensorBuf* const> parts) {
    if (parts.empty()) throw ShapeError("concat needs at least one input");
    const Shape& first = parts.front()->shape;
    int channels = 0;
    for (const TensorBuf* p : parts) {
        if (p->shape.height != first.height || p->shape.width != first.width)
            throw ShapeError("concat spatial mismatch: " + first.str() + " vs " + p->shape.str());
        channels += p->shape.channels;
    }
    TensorBuf out(Shape{first.height, first.width, channels});
    const std::size_t pixels = static_cast<std::size_t>(first.height) * first.width;
    float* dst = out.values.data();
    for (std::size_t px = 0; px < pixels; ++px) {
        for (const TensorBuf* p : parts) {
            const auto c = static_cast<std::size_t>(p->shape.channels);
            std::memcpy(dst, p->values.data() + px * c, sizeof(float) * c);
            dst += c;
        }
    }
    return out;
}

TensorBuf add(std::span<const TensorBuf* const> parts) {
    if (parts.size() < 2) throw ShapeError("add needs at least two inputs");
    TensorBuf out = *parts.front();
    for (std::size_t i = 1; i < parts.size(); ++i) {
        if (parts[i]->shape != out.shape)
            throw ShapeError("add shape mismatch: " + out.shape.str() + " vs " + parts[i]->shape.str());
        for (std::size_t j = 0; j < out.values.size(); ++j) out.values[j] += parts[i]->values[j];
    }
    return out;
}

}  // namespace densesvm::backbone::ops
