// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tsplat/trainer.hpp"

#include <array>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace tsplat {

/// Everything `train` needs: optimizer settings plus the data locations.
struct RunConfig {
    TrainConfig train;
    std::string init_scene; ///< PLY of the initial primitives
    std::string views;      ///< directory of *.cam files with matching images
    std::string output;     ///< output directory

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// INI text with sections [data] [train] [lr] [adam] [densify] [raster].
/// Unknown sections or keys and unparsable values throw ConfigError.
[[nodiscard]] RunConfig parse_config(std::istream& is);
[[nodiscard]] RunConfig load_config(const std::filesystem::path& path);

/// Writes every field with round-trip precision; parse_config of the output
/// yields an equal config.
void write_config(std::ostream& os, const RunConfig& cfg);

/// Sets one field by its "section.key" name.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);
[[nodiscard]] std::string get_config_value(const RunConfig& cfg, const std::string& key);
[[nodiscard]] std::vector<std::string> config_keys();

/// Resolves relative data paths against `base`.
[[nodiscard]] RunConfig resolve_paths(RunConfig cfg, const std::filesystem::path& base);

/// Loads the initial scene and views named by `cfg` and trains.
[[nodiscard]] TrainResult<float> run_training(const RunConfig& cfg, const TrainObserver<float>* observer = nullptr);

/// Writes scene.ply, metrics.csv, densify.csv, timing.csv and run.ini into `dir`.
void write_checkpoint(const std::filesystem::path& dir, const RunConfig& cfg, const TrainResult<float>& result);

/// Checkpoint files that depend only on the config and seed.
inline constexpr std::array<const char*, 4> kDeterministicOutputs = {"scene.ply", "metrics.csv", "densify.csv",
                                                                     "run.ini"};

} // namespace tsplat
