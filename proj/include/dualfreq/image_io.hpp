#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <png.h>

#include "dualfreq/common.hpp"
#include "dualfreq/tensor.hpp"

namespace dualfreq {

/// Interleaved 8-bit RGB raster.
struct ImageU8 {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<unsigned char> rgb; // width*height*3, row-major
};

namespace detail {

struct FileCloser {
    std::FILE* fp = nullptr;
    ~FileCloser() {
        if (fp) std::fclose(fp);
    }
};

} // namespace detail

/// Decodes an 8-bit RGB PNG. Grayscale, paletted, 16-bit and alpha files
/// are rejected, not converted; errors name the offending file.
inline ImageU8 png_read_rgb8(const std::string& path) {
    detail::FileCloser file;
    file.fp = std::fopen(path.c_str(), "rb");
    if (!file.fp) throw IoError("cannot open image file: " + path);

    png_byte header[8];
    if (std::fread(header, 1, 8, file.fp) != 8 || png_sig_cmp(header, 0, 8) != 0) {
        throw IoError("not a PNG file: " + path);
    }

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng init failed reading " + path);
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("libpng init failed reading " + path);
    }

    ImageU8 img;
    std::vector<png_bytep> rows;
    bool failed = false;
    if (setjmp(png_jmpbuf(png))) {
        failed = true;
    } else {
        png_init_io(png, file.fp);
        png_set_sig_bytes(png, 8);
        png_read_info(png, info);
        const png_uint_32 w = png_get_image_width(png, info);
        const png_uint_32 h = png_get_image_height(png, info);
        const int depth = png_get_bit_depth(png, info);
        const int color = png_get_color_type(png, info);
        if (depth != 8 || color != PNG_COLOR_TYPE_RGB) {
            png_destroy_read_struct(&png, &info, nullptr);
            throw IoError("expected 8-bit RGB PNG, got bit depth " + std::to_string(depth) +
                          " color type " + std::to_string(color) + " in " + path);
        }
        img.width = w;
        img.height = h;
        img.rgb.resize(static_cast<std::size_t>(w) * h * 3);
        rows.resize(h);
        for (png_uint_32 y = 0; y < h; ++y) {
            rows[y] = img.rgb.data() + static_cast<std::size_t>(y) * w * 3;
        }
        png_read_image(png, rows.data());
        png_read_end(png, nullptr);
    }
    png_destroy_read_struct(&png, &info, nullptr);
    if (failed) throw IoError("corrupt or undecodable PNG: " + path);
    return img;
}

inline void png_write_rgb8(const std::string& path, const ImageU8& img) {
    detail::FileCloser file;
    file.fp = std::fopen(path.c_str(), "wb");
    if (!file.fp) throw IoError("cannot open file for writing: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng init failed writing " + path);
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng init failed writing " + path);
    }

    std::vector<png_bytep> rows(img.height);
    bool failed = false;
    if (setjmp(png_jmpbuf(png))) {
        failed = true;
    } else {
        png_init_io(png, file.fp);
        png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                     static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
                     PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        for (std::size_t y = 0; y < img.height; ++y) {
            rows[y] = const_cast<png_bytep>(img.rgb.data() + y * img.width * 3);
        }
        png_write_image(png, rows.data());
        png_write_end(png, nullptr);
    }
    png_destroy_write_struct(&png, &info);
    if (failed) throw IoError("libpng failure writing " + path);
}

/// Binary portable graymap (P5, maxval 255).
inline void pgm_write(const std::string& path, std::size_t width, std::size_t height,
                      const std::vector<unsigned char>& gray) {
    if (gray.size() != width * height) throw ShapeError("pgm_write: pixel count mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open file for writing: " + path);
    out << "P5\n" << width << " " << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(gray.data()), static_cast<std::streamsize>(gray.size()));
    if (!out) throw IoError("write failed: " + path);
}

/// [3,H,W] planar tensor of [0,1] pixel values from interleaved RGB bytes.
inline Tensor image_to_tensor01(const ImageU8& img) {
    Tensor t({3, img.height, img.width});
    const std::size_t hw = img.height * img.width;
    for (std::size_t i = 0; i < hw; ++i) {
        t[0 * hw + i] = static_cast<float>(img.rgb[i * 3 + 0]) / 255.0f;
        t[1 * hw + i] = static_cast<float>(img.rgb[i * 3 + 1]) / 255.0f;
        t[2 * hw + i] = static_cast<float>(img.rgb[i * 3 + 2]) / 255.0f;
    }
    return t;
}

/// Rec.601 luma of [0,1] RGB, as a rank-2 double grid for spectrum display.
inline TensorT<double> luma_gray(const ImageU8& img) {
    TensorT<double> g({img.height, img.width});
    for (std::size_t i = 0; i < img.height * img.width; ++i) {
        const double r = img.rgb[i * 3 + 0] / 255.0;
        const double gr = img.rgb[i * 3 + 1] / 255.0;
        const double b = img.rgb[i * 3 + 2] / 255.0;
        g[i] = 0.299 * r + 0.587 * gr + 0.114 * b;
    }
    return g;
}

} // namespace dualfreq
