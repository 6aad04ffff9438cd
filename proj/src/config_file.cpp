#include "tmsr/config_file.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "tmsr/error.hpp"

namespace tmsr {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

Error bad_value(std::string_view key, std::string_view value, const char* expected) {
  return Error(ErrorKind::InvalidArgument, "config key '" + std::string(key) + "': '" +
                                               std::string(value) + "' is not " + expected);
}

}  // namespace

KeyValues parse_key_values(std::string_view text) {
  KeyValues kv;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto split = line.find('=');
    if (split == std::string_view::npos) split = line.find_first_of(" \t");
    if (split == std::string_view::npos) {
      throw Error(ErrorKind::InvalidArgument, "config line has no value: " + std::string(line));
    }
    kv[std::string(trim(line.substr(0, split)))] = std::string(trim(line.substr(split + 1)));
    if (end == text.size()) break;
  }
  return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Io, "cannot read config file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_key_values(ss.str());
}

std::string format_kernels(const std::vector<KernelSize>& kernels) {
  std::string out;
  for (std::size_t i = 0; i < kernels.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(kernels[i].h) + "x" + std::to_string(kernels[i].w);
  }
  return out;
}

std::vector<KernelSize> parse_kernels(std::string_view text) {
  std::vector<KernelSize> out;
  text = trim(text);
  if (text.empty()) return out;
  std::size_t pos = 0;
  while (true) {
    auto comma = text.find(',', pos);
    std::string_view item = trim(text.substr(pos, comma == std::string_view::npos ? text.npos : comma - pos));
    const auto x = item.find('x');
    KernelSize k{};
    if (x == std::string_view::npos ||
        std::from_chars(item.data(), item.data() + x, k.h).ec != std::errc() ||
        std::from_chars(item.data() + x + 1, item.data() + item.size(), k.w).ec != std::errc()) {
      throw bad_value("branch_kernels", item, "of the form HxW");
    }
    out.push_back(k);
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

int parse_int(std::string_view key, std::string_view value) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) throw bad_value(key, value, "an integer");
  return v;
}

double parse_double(std::string_view key, std::string_view value) {
  std::string s(value);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw bad_value(key, value, "a number");
  return v;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
  if (value == "0" || value == "false" || value == "no" || value == "off") return false;
  throw bad_value(key, value, "a boolean");
}

void apply_model_config(KeyValues& kv, ModelConfig& c) {
  auto take = [&](const char* key, auto&& apply) {
    if (auto it = kv.find(key); it != kv.end()) {
      apply(it->second);
      kv.erase(it);
    }
  };
  take("scale", [&](const std::string& v) { c.scale = parse_int("scale", v); });
  take("feat_channels", [&](const std::string& v) { c.feat_channels = parse_int("feat_channels", v); });
  take("shrink_channels", [&](const std::string& v) { c.shrink_channels = parse_int("shrink_channels", v); });
  take("num_blocks", [&](const std::string& v) { c.num_blocks = parse_int("num_blocks", v); });
  take("branch_kernels", [&](const std::string& v) { c.branch_kernels = parse_kernels(v); });
  take("activation", [&](const std::string& v) { c.activation = parse_activation(v); });
  take("prelu_shared", [&](const std::string& v) { c.prelu_shared = parse_bool("prelu_shared", v); });
  take("depthwise_branches",
       [&](const std::string& v) { c.depthwise_branches = parse_bool("depthwise_branches", v); });
  take("zero_init", [&](const std::string& v) { c.zero_init = parse_bool("zero_init", v); });
}

void reject_unknown_keys(const KeyValues& kv, std::string_view context) {
  if (!kv.empty()) {
    throw Error(ErrorKind::InvalidArgument,
                std::string(context) + ": unknown key '" + kv.begin()->first + "'");
  }
}

}  // namespace tmsr
