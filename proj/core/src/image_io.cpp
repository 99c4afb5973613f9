// SPDX-License-Identifier: Apache-2.0
#include "tsplat/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

namespace tsplat {

namespace {

template <class T> std::vector<std::uint8_t> to_bytes(const Image<T>& img) {
    if (img.channels != 3) throw ShapeError("image writers expect 3 channels");
    std::vector<std::uint8_t> bytes(img.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = to_byte(static_cast<double>(img.data[i]));
    return bytes;
}

Image<float> from_bytes(const std::vector<std::uint8_t>& bytes, int w, int h) {
    Image<float> img(w, h, 3);
    for (std::size_t i = 0; i < bytes.size(); ++i) img.data[i] = static_cast<float>(bytes[i]) / 255.0f;
    return img;
}

std::string lower_ext(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

} // namespace

std::uint8_t to_byte(double v) {
    if (!(v > 0.0)) return 0;
    return static_cast<std::uint8_t>(std::lround(std::min(v, 1.0) * 255.0));
}

template <class T> void write_png(const std::filesystem::path& path, const Image<T>& img) {
    const auto bytes = to_bytes(img);
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(img.width);
    png.height = static_cast<png_uint_32>(img.height);
    png.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&png, path.string().c_str(), 0, bytes.data(), 0, nullptr)) {
        throw IoError("cannot write PNG '" + path.string() + "': " + png.message);
    }
}

template <class T> void write_ppm(const std::filesystem::path& path, const Image<T>& img) {
    const auto bytes = to_bytes(img);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
    os << "P6\n" << img.width << ' ' << img.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError("cannot write PPM '" + path.string() + "'");
}

template <class T> void write_image(const std::filesystem::path& path, const Image<T>& img) {
    const auto ext = lower_ext(path);
    if (ext == ".png") return write_png(path, img);
    if (ext == ".ppm") return write_ppm(path, img);
    throw IoError("unsupported image extension '" + ext + "' (use .png or .ppm)");
}

Image<float> read_png(const std::filesystem::path& path) {
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.string().c_str())) {
        throw IoError("cannot read PNG '" + path.string() + "': " + png.message);
    }
    png.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, bytes.data(), 0, nullptr)) {
        const std::string msg = png.message;
        png_image_free(&png);
        throw IoError("cannot decode PNG '" + path.string() + "': " + msg);
    }
    return from_bytes(bytes, static_cast<int>(png.width), static_cast<int>(png.height));
}

Image<float> read_ppm(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path.string() + "'");
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    is >> magic >> w >> h >> maxval;
    if (magic != "P6" || w <= 0 || h <= 0 || maxval != 255) throw IoError("unsupported PPM header in '" + path.string() + "'");
    is.get();
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(w) * h * 3);
    if (!is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()))) {
        throw IoError("truncated PPM '" + path.string() + "'");
    }
    return from_bytes(bytes, w, h);
}

Image<float> read_image(const std::filesystem::path& path) {
    const auto ext = lower_ext(path);
    if (ext == ".png") return read_png(path);
    if (ext == ".ppm") return read_ppm(path);
    throw IoError("unsupported image extension '" + ext + "' (use .png or .ppm)");
}

template void write_png<float>(const std::filesystem::path&, const Image<float>&);
template void write_png<double>(const std::filesystem::path&, const Image<double>&);
template void write_ppm<float>(const std::filesystem::path&, const Image<float>&);
template void write_ppm<double>(const std::filesystem::path&, const Image<double>&);
template void write_image<float>(const std::filesystem::path&, const Image<float>&);
template void write_image<double>(const std::filesystem::path&, const Image<double>&);

} // namespace tsplat
