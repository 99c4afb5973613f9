// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tsplat/common.hpp"

#include <filesystem>

namespace tsplat {

/// Converts [0, 1] values to 8 bits (clamped, rounded to nearest).
[[nodiscard]] std::uint8_t to_byte(double v);

template <class T> void write_png(const std::filesystem::path& path, const Image<T>& img);
template <class T> void write_ppm(const std::filesystem::path& path, const Image<T>& img);
/// Picks PNG or PPM from the extension (.png / .ppm).
template <class T> void write_image(const std::filesystem::path& path, const Image<T>& img);

/// 8-bit RGB images scaled to [0, 1].
[[nodiscard]] Image<float> read_png(const std::filesystem::path& path);
[[nodiscard]] Image<float> read_ppm(const std::filesystem::path& path);
[[nodiscard]] Image<float> read_image(const std::filesystem::path& path);

} // namespace tsplat
