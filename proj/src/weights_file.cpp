#include "tmsr/weights_file.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "tmsr/config_file.hpp"
#include "tmsr/error.hpp"

namespace tmsr {

namespace {

template <class Float, class Bits>
void write_le(std::ostream& os, std::span<const Float> values) {
  std::vector<char> buf(values.size() * sizeof(Bits));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const Bits bits = std::bit_cast<Bits>(values[i]);
    for (std::size_t b = 0; b < sizeof(Bits); ++b) {
      buf[i * sizeof(Bits) + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
    }
  }
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

template <class Float, class Bits>
void read_le(std::istream& is, std::span<Float> values) {
  std::vector<unsigned char> buf(values.size() * sizeof(Bits));
  is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(is.gcount()) != buf.size()) {
    throw Error(ErrorKind::PayloadLength,
                "payload length mismatch: expected " + std::to_string(buf.size()) +
                    " bytes, got " + std::to_string(is.gcount()));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    Bits bits = 0;
    for (std::size_t b = 0; b < sizeof(Bits); ++b) {
      bits |= static_cast<Bits>(buf[i * sizeof(Bits) + b]) << (8 * b);
    }
    values[i] = std::bit_cast<Float>(bits);
  }
}

}  // namespace

void write_f32_le(std::ostream& os, std::span<const float> values) {
  write_le<float, std::uint32_t>(os, values);
}
void read_f32_le(std::istream& is, std::span<float> values) {
  read_le<float, std::uint32_t>(is, values);
}
void write_f64_le(std::ostream& os, std::span<const double> values) {
  write_le<double, std::uint64_t>(os, values);
}
void read_f64_le(std::istream& is, std::span<double> values) {
  read_le<double, std::uint64_t>(is, values);
}

void atomic_write(const std::filesystem::path& path,
                  const std::function<void(std::ostream&)>& write) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(ErrorKind::Io, "cannot open " + tmp.string() + " for writing");
    write(os);
    os.flush();
    if (!os) throw Error(ErrorKind::Io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot rename " + tmp.string() + ": " + ec.message());
}

std::string model_config_header(const ModelConfig& c) {
  std::ostringstream os;
  os << "scale " << c.scale << "\n"
     << "feat_channels " << c.feat_channels << "\n"
     << "shrink_channels " << c.shrink_channels << "\n"
     << "num_blocks " << c.num_blocks << "\n"
     << "branch_kernels " << format_kernels(c.branch_kernels) << "\n"
     << "activation " << to_string(c.activation) << "\n"
     << "prelu_shared " << (c.prelu_shared ? 1 : 0) << "\n"
     << "depthwise_branches " << (c.depthwise_branches ? 1 : 0) << "\n";
  return os.str();
}

void save_weights(const TmsrModel& model, const std::filesystem::path& path) {
  atomic_write(path, [&](std::ostream& os) {
    os << kWeightsMagic << "\n"
       << "version " << kWeightsVersion << "\n"
       << model_config_header(model.config());
    for (const auto& e : model.manifest()) {
      os << "layer " << e.name << " " << e.shape.n << " " << e.shape.c << " " << e.shape.h << " "
         << e.shape.w << "\n";
    }
    os << "payload " << model.param_count() << "\n";
    write_f32_le(os, model.params());
  });
}

TmsrModel load_weights(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::Io, "cannot open weights file " + path.string());

  std::string line;
  if (!std::getline(is, line) || line != kWeightsMagic) {
    throw Error(ErrorKind::BadMagic, path.string() + ": not a TMSR1 weights file");
  }

  std::map<std::string, std::string> fields;
  std::vector<ParamEntry> declared;
  std::size_t payload = 0;
  bool have_payload = false;
  while (!have_payload && std::getline(is, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "layer") {
      ParamEntry e;
      ls >> e.name >> e.shape.n >> e.shape.c >> e.shape.h >> e.shape.w;
      if (!ls) throw Error(ErrorKind::ConfigMismatch, "malformed layer line: " + line);
      declared.push_back(e);
    } else if (key == "payload") {
      ls >> payload;
      if (!ls) throw Error(ErrorKind::ConfigMismatch, "malformed payload line: " + line);
      have_payload = true;
    } else if (!key.empty()) {
      std::string value;
      std::getline(ls >> std::ws, value);
      fields[key] = value;
    }
  }
  if (!have_payload) throw Error(ErrorKind::PayloadLength, "payload length mismatch: no payload");

  if (fields["version"] != std::to_string(kWeightsVersion)) {
    throw Error(ErrorKind::BadVersion, "unsupported weights version '" + fields["version"] + "'");
  }
  fields.erase("version");

  ModelConfig config;
  try {
    apply_model_config(fields, config);
    reject_unknown_keys(fields, "weights header");
    config.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::ConfigMismatch, std::string("weights header config: ") + e.what());
  }

  const auto expected = param_manifest(config);
  if (declared.size() != expected.size()) {
    throw Error(ErrorKind::ConfigMismatch, "layer manifest has " + std::to_string(declared.size()) +
                                               " arrays, config implies " +
                                               std::to_string(expected.size()));
  }
  std::size_t total = 0;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (declared[i].name != expected[i].name || declared[i].shape != expected[i].shape) {
      throw Error(ErrorKind::ConfigMismatch, "layer '" + declared[i].name + "' " +
                                                 declared[i].shape.str() +
                                                 " disagrees with config (" + expected[i].name +
                                                 " " + expected[i].shape.str() + ")");
    }
    total += expected[i].count();
  }
  if (payload != total) {
    throw Error(ErrorKind::ConfigMismatch, "payload declares " + std::to_string(payload) +
                                               " floats, config implies " + std::to_string(total));
  }

  std::vector<float> params(total);
  read_f32_le(is, params);
  if (is.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorKind::PayloadLength, "payload length mismatch: trailing bytes after payload");
  }
  return TmsrModel::from_params(config, std::move(params));
}

}  // namespace tmsr
