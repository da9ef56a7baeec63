#include "posebench/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <string>

namespace posebench {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) {
            std::fclose(f);
        }
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void atomic_rename(const std::filesystem::path& tmp, const std::filesystem::path& final_path) {
    std::error_code ec;
    std::filesystem::rename(tmp, final_path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw Error("failed to move " + tmp.string() + " into place: " + ec.message());
    }
}

}  // namespace

Image16 read_png16(const std::filesystem::path& path) {
    FilePtr file(std::fopen(path.string().c_str(), "rb"));
    if (!file) {
        throw MissingFile("cannot open " + path.string());
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) {
        throw Error("libpng init failed");
    }
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw Error("libpng init failed");
    }
    std::vector<png_bytep> rows;
    Image16 image;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ParseError(path.string() + " is not a readable PNG");
    }
    png_init_io(png, file.get());
    png_read_info(png, info);

    image.width = static_cast<int>(png_get_image_width(png, info));
    image.height = static_cast<int>(png_get_image_height(png, info));
    const int bit_depth = png_get_bit_depth(png, info);
    const int color_type = png_get_color_type(png, info);
    if (color_type != PNG_COLOR_TYPE_GRAY || bit_depth != 16) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ParseError(path.string() + ": expected 16-bit single-channel PNG, got depth " +
                         std::to_string(bit_depth) + " color type " +
                         std::to_string(color_type));
    }
    png_set_swap(png);  // PNG stores big-endian samples

    image.pixels.resize(static_cast<std::size_t>(image.width) * image.height);
    rows.resize(image.height);
    for (int v = 0; v < image.height; ++v) {
        rows[v] = reinterpret_cast<png_bytep>(&image.pixels[image.index(0, v)]);
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return image;
}

void write_png16(const Image16& image, const std::filesystem::path& path) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        FilePtr file(std::fopen(tmp.string().c_str(), "wb"));
        if (!file) {
            throw Error("cannot create " + tmp.string());
        }
        png_structp png =
            png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        if (!png) {
            throw Error("libpng init failed");
        }
        png_infop info = png_create_info_struct(png);
        if (!info) {
            png_destroy_write_struct(&png, nullptr);
            throw Error("libpng init failed");
        }
        if (setjmp(png_jmpbuf(png))) {
            png_destroy_write_struct(&png, &info);
            throw Error("failed to encode " + path.string());
        }
        png_init_io(png, file.get());
        png_set_IHDR(png, info, image.width, image.height, 16, PNG_COLOR_TYPE_GRAY,
                     PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                     PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        png_set_swap(png);
        std::vector<png_bytep> rows(image.height);
        std::vector<std::uint16_t> buffer = image.pixels;
        for (int v = 0; v < image.height; ++v) {
            rows[v] = reinterpret_cast<png_bytep>(&buffer[image.index(0, v)]);
        }
        png_write_image(png, rows.data());
        png_write_end(png, nullptr);
        png_destroy_write_struct(&png, &info);
    }
    atomic_rename(tmp, path);
}

namespace {

template <typename MapT>
void dump_map(const MapT& map, const std::filesystem::path& path) {
    double max_value = 0.0;
    for (std::size_t i = 0; i < map.values.size(); ++i) {
        if (map.valid[i]) {
            max_value = std::max(max_value, map.values[i]);
        }
    }
    const double scale = max_value > 0.0 ? max_value / 65535.0 : 1.0;  // mm per unit
    Image16 image;
    image.width = map.width;
    image.height = map.height;
    image.pixels.assign(map.values.size(), 0);
    for (std::size_t i = 0; i < map.values.size(); ++i) {
        if (map.valid[i]) {
            const double q = std::round(map.values[i] / scale);
            image.pixels[i] = static_cast<std::uint16_t>(std::clamp(q, 1.0, 65535.0));
        }
    }
    write_png16(image, path);

    const std::filesystem::path sidecar = path.string() + ".scale.txt";
    const std::filesystem::path tmp = sidecar.string() + ".tmp";
    {
        FilePtr f(std::fopen(tmp.string().c_str(), "w"));
        if (!f) {
            throw Error("cannot create " + tmp.string());
        }
        std::fprintf(f.get(), "mm_per_unit %.17g\n", scale);
    }
    atomic_rename(tmp, sidecar);
}

}  // namespace

void dump_depth_png(const DepthMap& map, const std::filesystem::path& path) {
    dump_map(map, path);
}

void dump_distance_png(const DistanceMap& map, const std::filesystem::path& path) {
    dump_map(map, path);
}

void write_mask_png(const VisibilityMask& mask, const std::filesystem::path& path) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        FilePtr file(std::fopen(tmp.string().c_str(), "wb"));
        if (!file) {
            throw Error("cannot create " + tmp.string());
        }
        png_structp png =
            png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        if (!png) {
            throw Error("libpng init failed");
        }
        png_infop info = png_create_info_struct(png);
        if (!info) {
            png_destroy_write_struct(&png, nullptr);
            throw Error("libpng init failed");
        }
        if (setjmp(png_jmpbuf(png))) {
            png_destroy_write_struct(&png, &info);
            throw Error("failed to encode " + path.string());
        }
        png_init_io(png, file.get());
        png_set_IHDR(png, info, mask.width, mask.height, 1, PNG_COLOR_TYPE_GRAY,
                     PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                     PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        const int stride = (mask.width + 7) / 8;
        std::vector<png_byte> packed(static_cast<std::size_t>(stride) * mask.height, 0);
        for (int v = 0; v < mask.height; ++v) {
            for (int u = 0; u < mask.width; ++u) {
                if (mask.test(u, v)) {
                    packed[static_cast<std::size_t>(v) * stride + u / 8] |=
                        static_cast<png_byte>(0x80u >> (u % 8));
                }
            }
        }
        std::vector<png_bytep> rows(mask.height);
        for (int v = 0; v < mask.height; ++v) {
            rows[v] = &packed[static_cast<std::size_t>(v) * stride];
        }
        png_write_image(png, rows.data());
        png_write_end(png, nullptr);
        png_destroy_write_struct(&png, &info);
    }
    atomic_rename(tmp, path);
}

VisibilityMask read_mask_png(const std::filesystem::path& path) {
    FilePtr file(std::fopen(path.string().c_str(), "rb"));
    if (!file) {
        throw MissingFile("cannot open " + path.string());
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) {
        throw Error("libpng init failed");
    }
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw Error("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ParseError(path.string() + " is not a readable PNG");
    }
    png_init_io(png, file.get());
    png_read_info(png, info);
    if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY ||
        png_get_bit_depth(png, info) != 1) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ParseError(path.string() + ": expected 1-bit grayscale PNG");
    }
    VisibilityMask mask(static_cast<int>(png_get_image_width(png, info)),
                        static_cast<int>(png_get_image_height(png, info)));
    const int stride = (mask.width + 7) / 8;
    std::vector<png_byte> packed(static_cast<std::size_t>(stride) * mask.height, 0);
    std::vector<png_bytep> rows(mask.height);
    for (int v = 0; v < mask.height; ++v) {
        rows[v] = &packed[static_cast<std::size_t>(v) * stride];
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    for (int v = 0; v < mask.height; ++v) {
        for (int u = 0; u < mask.width; ++u) {
            const bool on =
                (packed[static_cast<std::size_t>(v) * stride + u / 8] >> (7 - u % 8)) & 1;
            mask.set(u, v, on);
        }
    }
    return mask;
}

}  // namespace posebench
