#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "tmsr/model.hpp"

namespace tmsr {

using KeyValues = std::map<std::string, std::string>;

// Flat text config: one "key = value" (or "key value") per line, '#' starts a
// comment, blank lines ignored.
KeyValues parse_key_values(std::string_view text);
KeyValues read_key_values(const std::filesystem::path& path);

// "3x3,1x3,3x1"
std::string format_kernels(const std::vector<KernelSize>& kernels);
std::vector<KernelSize> parse_kernels(std::string_view text);

int parse_int(std::string_view key, std::string_view value);
double parse_double(std::string_view key, std::string_view value);
bool parse_bool(std::string_view key, std::string_view value);

// Applies and removes the model keys present in `kv`; other keys are left for
// the caller. Throws InvalidArgument on malformed values.
void apply_model_config(KeyValues& kv, ModelConfig& config);

// Throws InvalidArgument naming the first key nobody consumed.
void reject_unknown_keys(const KeyValues& kv, std::string_view context);

}  // namespace tmsr
