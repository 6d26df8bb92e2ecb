#include "densesvm/errors.hpp"
#include "densesvm/imaging.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <string>

#include <jpeglib.h>

namespace densesvm::imaging {

void RawImage::validate() const {
    if (width < 1 || height < 1) throw InvalidData("image dimensions must be positive");
    if (channels != 1 && channels != 3) throw InvalidData("image must have 1 or 3 channels");
    const auto expected = static_cast<std::size_t>(width) * height * channels;
    if (pixels.size() != expected)
        throw InvalidData("pixel buffer holds " + std::to_string(pixels.size()) +
                          " samples, expected " + std::to_string(expected));
}

ImageFormat sniff_format(std::span<const std::uint8_t> bytes) {
    static constexpr std::uint8_t kPngMagic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngMagic, 8) == 0) return ImageFormat::Png;
    if (bytes.size() >= 3 && bytes[0] == 0xff && bytes[1] == 0xd8 && bytes[2] == 0xff)
        return ImageFormat::Jpeg;
    return ImageFormat::Unknown;
}

namespace {

RawImage decode_png(std::span<const std::uint8_t> bytes) {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
        throw DecodeError(std::string("png header: ") + image.message);

    const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
    const bool alpha = (image.format & PNG_FORMAT_FLAG_ALPHA) != 0;
    if (color) image.format = alpha ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB;
    else image.format = alpha ? PNG_FORMAT_GA : PNG_FORMAT_GRAY;

    std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
        std::string msg = image.message;
        png_image_free(&image);
        throw DecodeError("png body: " + msg);
    }

    RawImage out;
    out.width = static_cast<int>(image.width);
    out.height = static_cast<int>(image.height);
    out.channels = color ? 3 : 1;
    if (!alpha) {
        out.pixels = std::move(buffer);
        return out;
    }
    const std::size_t stored = static_cast<std::size_t>(out.channels) + 1;
    const std::size_t count = static_cast<std::size_t>(out.width) * out.height;
    out.pixels.resize(count * out.channels);
    for (std::size_t i = 0; i < count; ++i)
        for (int c = 0; c < out.channels; ++c) out.pixels[i * out.channels + c] = buffer[i * stored + c];
    return out;
}

struct JpegErrorManager {
    jpeg_error_mgr base;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

// Counts corrupt-data warnings (level -1) without printing them.
void jpeg_count_warning(j_common_ptr cinfo, int msg_level) {
    if (msg_level < 0) ++cinfo->err->num_warnings;
}

RawImage decode_jpeg(std::span<const std::uint8_t> bytes) {
    jpeg_decompress_struct cinfo;
    JpegErrorManager err;
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    err.base.emit_message = jpeg_count_warning;
    err.message[0] = '\0';

    // Declared before setjmp so nothing with a destructor is skipped by longjmp.
    RawImage out;
    if (setjmp(err.jump)) {
        std::string msg = err.message;
        jpeg_destroy_decompress(&cinfo);
        throw DecodeError("jpeg: " + msg);
    }

    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = cinfo.jpeg_color_space == JCS_GRAYSCALE ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_start_decompress(&cinfo);

    out.width = static_cast<int>(cinfo.output_width);
    out.height = static_cast<int>(cinfo.output_height);
    out.channels = cinfo.output_components;
    out.pixels.resize(static_cast<std::size_t>(out.width) * out.height * out.channels);
    const std::size_t stride = static_cast<std::size_t>(out.width) * out.channels;
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = out.pixels.data() + cinfo.output_scanline * stride;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    // libjpeg only warns on premature end of data and pads with gray; a
    // truncated stream must be rejected instead.
    const bool truncated = err.base.num_warnings > 0;
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    if (truncated) throw DecodeError("jpeg: corrupt or truncated data");
    return out;
}

}  // namespace

RawImage decode_image(std::span<const std::uint8_t> bytes) {
    if (bytes.empty()) throw DecodeError("empty input");
    RawImage out;
    switch (sniff_format(bytes)) {
        case ImageFormat::Png: out = decode_png(bytes); break;
        case ImageFormat::Jpeg: out = decode_jpeg(bytes); break;
        case ImageFormat::Unknown: throw DecodeError("not a PNG or JPEG stream");
    }
    if (out.width < 1 || out.height < 1) throw DecodeError("image has no pixels");
    return out;
}

}  // namespace densesvm::imaging
