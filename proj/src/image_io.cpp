#include "hasn/image_io.hpp"

#include <png.h>

#include <cctype>
#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

namespace hasn::io {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

bool has_suffix(const std::string& s, const std::string& suf) {
    if (s.size() < suf.size()) return false;
    for (size_t i = 0; i < suf.size(); ++i) {
        char a = char(std::tolower(static_cast<unsigned char>(s[s.size() - suf.size() + i])));
        if (a != suf[i]) return false;
    }
    return true;
}

Tensor from_rgb8(const std::vector<unsigned char>& rgb, int h, int w) {
    Tensor out(1, 3, h, w);
    for (int c = 0; c < 3; ++c) {
        float* dst = out.plane(0, c);
        for (int i = 0; i < h * w; ++i)
            dst[i] = float(rgb[size_t(i) * 3 + size_t(c)]) / 255.0f;
    }
    return out;
}

Tensor load_png(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw ImageError("cannot open " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw ImageError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw ImageError("png_create_info_struct failed");
    }
    std::vector<unsigned char> rgb;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ImageError("failed to decode PNG " + path);
    }
    png_init_io(png, f.get());
    png_read_info(png, info);

    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    const int w = int(png_get_image_width(png, info));
    const int h = int(png_get_image_height(png, info));
    if (png_get_channels(png, info) != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ImageError("unexpected channel count in " + path);
    }
    rgb.resize(size_t(h) * size_t(w) * 3);
    rows.resize(size_t(h));
    for (int y = 0; y < h; ++y) rows[size_t(y)] = rgb.data() + size_t(y) * size_t(w) * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return from_rgb8(rgb, h, w);
}

void write_png(const std::string& path, const unsigned char* data, int h, int w, int channels) {
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw ImageError("cannot write " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw ImageError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw ImageError("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw ImageError("failed to encode PNG " + path);
    }
    png_init_io(png, f.get());
    const int color = channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
    png_set_IHDR(png, info, png_uint_32(w), png_uint_32(h), 8, color, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(static_cast<size_t>(h));
    for (int y = 0; y < h; ++y)
        rows[size_t(y)] = const_cast<unsigned char*>(data) + size_t(y) * size_t(w) * size_t(channels);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

int read_pnm_token(std::FILE* f) {
    int c = std::fgetc(f);
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = std::fgetc(f);
        } else if (std::isspace(c)) {
            c = std::fgetc(f);
        } else {
            break;
        }
    }
    if (c == EOF || !std::isdigit(c)) return -1;
    int v = 0;
    while (c != EOF && std::isdigit(c)) {
        v = v * 10 + (c - '0');
        c = std::fgetc(f);
    }
    return v;
}

Tensor load_pnm(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw ImageError("cannot open " + path);
    char m0 = char(std::fgetc(f.get()));
    char m1 = char(std::fgetc(f.get()));
    if (m0 != 'P' || (m1 != '5' && m1 != '6'))
        throw ImageError("unsupported PNM magic in " + path);
    const int channels = m1 == '6' ? 3 : 1;
    const int w = read_pnm_token(f.get());
    const int h = read_pnm_token(f.get());
    const int maxval = read_pnm_token(f.get());
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
        throw ImageError("bad PNM header in " + path);
    std::vector<unsigned char> buf(size_t(h) * size_t(w) * size_t(channels));
    if (std::fread(buf.data(), 1, buf.size(), f.get()) != buf.size())
        throw ImageError("truncated PNM data in " + path);
    if (channels == 1) {
        std::vector<unsigned char> rgb(size_t(h) * size_t(w) * 3);
        for (size_t i = 0; i < buf.size(); ++i)
            rgb[i * 3] = rgb[i * 3 + 1] = rgb[i * 3 + 2] = buf[i];
        return from_rgb8(rgb, h, w);
    }
    return from_rgb8(buf, h, w);
}

}  // namespace

Tensor load_image(const std::string& path) {
    if (has_suffix(path, ".png")) return load_png(path);
    if (has_suffix(path, ".ppm") || has_suffix(path, ".pgm")) return load_pnm(path);
    throw ImageError("unsupported image format: " + path);
}

void save_image(const std::string& path, const Tensor& img) {
    require(img.n() == 1 && img.c() == 3, "save_image: expected (1,3,h,w)");
    const int h = img.h();
    const int w = img.w();
    std::vector<unsigned char> rgb(size_t(h) * size_t(w) * 3);
    for (int c = 0; c < 3; ++c) {
        const float* src = img.plane(0, c);
        for (int i = 0; i < h * w; ++i) rgb[size_t(i) * 3 + size_t(c)] = quantize8(src[i]);
    }
    if (has_suffix(path, ".png")) {
        write_png(path, rgb.data(), h, w, 3);
        return;
    }
    if (has_suffix(path, ".ppm")) {
        FilePtr f(std::fopen(path.c_str(), "wb"));
        if (!f) throw ImageError("cannot write " + path);
        std::fprintf(f.get(), "P6\n%d %d\n255\n", w, h);
        if (std::fwrite(rgb.data(), 1, rgb.size(), f.get()) != rgb.size())
            throw ImageError("short write to " + path);
        return;
    }
    throw ImageError("unsupported output format: " + path);
}

void save_gray8(const std::string& path, const unsigned char* data, int h, int w) {
    if (has_suffix(path, ".png")) {
        write_png(path, data, h, w, 1);
        return;
    }
    if (has_suffix(path, ".pgm")) {
        FilePtr f(std::fopen(path.c_str(), "wb"));
        if (!f) throw ImageError("cannot write " + path);
        std::fprintf(f.get(), "P5\n%d %d\n255\n", w, h);
        const size_t count = size_t(h) * size_t(w);
        if (std::fwrite(data, 1, count, f.get()) != count)
            throw ImageError("short write to " + path);
        return;
    }
    throw ImageError("unsupported output format: " + path);
}

}  // namespace hasn::io
