// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tsplat/projection.hpp"

#include <filesystem>
#include <iosfwd>

namespace tsplat {

// Camera files are plain `key = value` lines:
//   width, height           image size in pixels
//   focal                   fx fy
//   principal_point         cx cy
//   near, far               clip depths
//   world_to_camera         16 values, row-major

void write_camera(std::ostream& os, const CameraView& cam);
void write_camera(const std::filesystem::path& path, const CameraView& cam);
/// Throws IoError on missing or malformed keys.
[[nodiscard]] CameraView read_camera(std::istream& is);
[[nodiscard]] CameraView read_camera(const std::filesystem::path& path);

} // namespace tsplat
