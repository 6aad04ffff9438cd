#include "tmsr/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "tmsr/error.hpp"

namespace tmsr {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ShapeMismatch: return "shape mismatch";
    case ErrorKind::InvalidArgument: return "invalid argument";
    case ErrorKind::Io: return "i/o error";
    case ErrorKind::BadMagic: return "bad magic";
    case ErrorKind::BadVersion: return "bad version";
    case ErrorKind::PayloadLength: return "payload length mismatch";
    case ErrorKind::ConfigMismatch: return "config/payload mismatch";
    case ErrorKind::UnsupportedBitDepth: return "unsupported bit depth";
    case ErrorKind::NonDeterministic: return "non-deterministic closure";
    case ErrorKind::Numeric: return "numeric error";
  }
  return "unknown";
}

std::string Shape::str() const {
  return "(" + std::to_string(n) + ", " + std::to_string(c) + ", " + std::to_string(h) +
         ", " + std::to_string(w) + ")";
}

Tensor::Tensor(Shape shape, float fill) : shape_(shape) {
  if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
    throw Error(ErrorKind::InvalidArgument, "negative tensor extent " + shape.str());
  }
  data_.assign(shape.numel(), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.numel()) {
    throw Error(ErrorKind::ShapeMismatch,
                "tensor data length " + std::to_string(data_.size()) +
                    " does not match shape " + shape_.str());
  }
}

std::span<float> Tensor::plane(int n, int c) {
  return std::span<float>(data_).subspan(
      (static_cast<std::size_t>(n) * shape_.c + c) * shape_.plane_size(), shape_.plane_size());
}

std::span<const float> Tensor::plane(int n, int c) const {
  return std::span<const float>(data_).subspan(
      (static_cast<std::size_t>(n) * shape_.c + c) * shape_.plane_size(), shape_.plane_size());
}

void Tensor::fill(float value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a == b) return;
  const char* dim = a.n != b.n ? "batch" : a.c != b.c ? "channels" : a.h != b.h ? "height" : "width";
  throw Error(ErrorKind::ShapeMismatch,
              std::string(what) + ": " + dim + " differs, " + a.str() + " vs " + b.str());
}

Tensor add(const Tensor& a, const Tensor& b) {
  Tensor out = a;
  add_inplace(out, b);
  return out;
}

void add_inplace(Tensor& dst, const Tensor& src) {
  require_same_shape(dst.shape(), src.shape(), "add");
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

}  // namespace tmsr
