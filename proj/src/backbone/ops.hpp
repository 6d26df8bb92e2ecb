#pragma once

#include "densesvm/backbone.hpp"

#include <span>

namespace densesvm::backbone::ops {

int conv_out_extent(int in, int kernel, int stride, int pad);

/// kernel shape [k, k, cin, cout]; bias shape [cout] or null.
TensorBuf conv2d(const TensorBuf& in, const WeightTensor& kernel, const WeightTensor* bias, int stride,
                 int pad);
/// kernel shape [k, k, c]; bias shape [c] or null.
TensorBuf depthwise_conv2d(const TensorBuf& in, const WeightTensor& kernel, const WeightTensor* bias,
                           int stride, int pad);
void batch_norm(TensorBuf& x, const WeightTensor& gamma, const WeightTensor& beta, const WeightTensor& mean,
                const WeightTensor& variance, float epsilon);
void relu(TensorBuf& x);
TensorBuf max_pool(const TensorBuf& in, int kernel, int stride, int pad);
/// Padding cells are excluded from the average.
TensorBuf avg_pool(const TensorBuf& in, int kernel, int stride, int pad);
TensorBuf global_avg_pool(const TensorBuf& in);
TensorBuf concat(std::span<const TensorBuf* const> parts);
TensorBuf add(std::span<const TensorBuf* const> parts);

}  // namespace densesvm::backbone::ops
