#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace densesvm::imaging {

inline constexpr int kInputHeight = 224;
inline constexpr int kInputWidth = 224;
inline constexpr int kInputChannels = 3;
inline constexpr std::size_t kInputSize =
    static_cast<std::size_t>(kInputHeight) * kInputWidth * kInputChannels;

/// Decoded 8-bit image, row-major, channels interleaved. Channels is 1 or 3;
/// alpha is stripped at decode time.
struct RawImage {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;

    /// Throws InvalidData when the fields disagree with the pixel buffer.
    void validate() const;
};

/// The fixed 224x224x3 network input, values in [0, 1], row-major HWC.
struct ImageTensor {
    static constexpr int height = kInputHeight;
    static constexpr int width = kInputWidth;
    static constexpr int channels = kInputChannels;
    std::vector<float> values;
};

enum class ImageFormat { Png, Jpeg, Unknown };

/// Sniffs the container from magic bytes.
ImageFormat sniff_format(std::span<const std::uint8_t> bytes);

/// Decodes a PNG or JPEG stream. Throws DecodeError for anything else,
/// including empty and truncated input.
RawImage decode_image(std::span<const std::uint8_t> bytes);

/// Bilinear resize (half-pixel centers) to 224x224, grayscale replicated to
/// three channels, samples scaled by 1/255.
ImageTensor preprocess(const RawImage& raw);

// Encoders exist for tooling and tests; the service never writes images.
std::vector<std::uint8_t> encode_png(const RawImage& image);
std::vector<std::uint8_t> encode_jpeg(const RawImage& image, int quality = 92);

}  // namespace densesvm::imaging
