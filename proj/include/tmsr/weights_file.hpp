#pragma once

#include <filesystem>
#include <functional>
#include <ostream>
#include <span>
#include <string>

#include "tmsr/model.hpp"

namespace tmsr {

// Weights file layout:
//
//   TMSR1
//   version 1
//   scale 2                      model config, one "key value" per line
//   ...
//   layer <name> <n> <c> <h> <w>   one line per parameter array, manifest order
//   payload <float count>
//   <float count little-endian IEEE-754 binary32 values>
//
// load_weights distinguishes BadMagic, BadVersion, ConfigMismatch (header
// manifest disagrees with the config it declares) and PayloadLength.
inline constexpr const char* kWeightsMagic = "TMSR1";
inline constexpr int kWeightsVersion = 1;

std::string model_config_header(const ModelConfig& config);

// Written to a temporary sibling and renamed into place.
void save_weights(const TmsrModel& model, const std::filesystem::path& path);
TmsrModel load_weights(const std::filesystem::path& path);

// Little-endian float I/O shared with the other binary containers.
void write_f32_le(std::ostream& os, std::span<const float> values);
void read_f32_le(std::istream& is, std::span<float> values);
void write_f64_le(std::ostream& os, std::span<const double> values);
void read_f64_le(std::istream& is, std::span<double> values);

// Writes via `write(stream)` into path + ".tmp", then renames over `path`.
void atomic_write(const std::filesystem::path& path,
                  const std::function<void(std::ostream&)>& write);

}  // namespace tmsr
