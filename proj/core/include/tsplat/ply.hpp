// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tsplat/scene.hpp"

#include <filesystem>
#include <iosfwd>

namespace tsplat {

// Binary little-endian PLY with one vertex per primitive and the float
// properties x y z f_dc_0..2 opacity scale_0..2 rot_0..3, all in raw
// (pre-activation) space: f_dc holds the color logits, opacity the opacity
// logit, scale the log scales and rot the (w, x, y, z) quaternion.

template <class T> void write_ply(std::ostream& os, const BasicScene<T>& scene);
template <class T> void write_ply(const std::filesystem::path& path, const BasicScene<T>& scene);

/// Throws IoError for malformed files; extra vertex properties are ignored.
template <class T> [[nodiscard]] BasicScene<T> read_ply(std::istream& is);
template <class T> [[nodiscard]] BasicScene<T> read_ply(const std::filesystem::path& path);

} // namespace tsplat
