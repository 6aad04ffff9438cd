#include "tmsr/model_reference.hpp"

#include <map>
#include <string>

#include "tmsr/error.hpp"

namespace tmsr::reference {

namespace {

struct Maps {
  int c = 0, h = 0, w = 0;
  std::vector<double> v;
  Maps(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(std::size_t(c_) * h_ * w_, 0.0) {}
  double& at(int ch, int y, int x) { return v[(std::size_t(ch) * h + y) * w + x]; }
  double at(int ch, int y, int x) const { return v[(std::size_t(ch) * h + y) * w + x]; }
};

class Net {
 public:
  Net(const ModelConfig& config, std::span<const double> params)
      : config_(config), params_(params) {
    for (const auto& e : param_manifest(config)) entries_[e.name] = e;
  }

  Maps conv(const Maps& in, const std::string& name, bool depthwise) const {
    const ParamEntry& we = entries_.at(name + ".weight");
    const ParamEntry& be = entries_.at(name + ".bias");
    const int oc = we.shape.n, kh = we.shape.h, kw = we.shape.w;
    Maps out(oc, in.h, in.w);
    for (int o = 0; o < oc; ++o)
      for (int y = 0; y < in.h; ++y)
        for (int x = 0; x < in.w; ++x) {
          double acc = params_[be.offset + o];
          const int c0 = depthwise ? o : 0, c1 = depthwise ? o + 1 : in.c;
          for (int c = c0; c < c1; ++c)
            for (int i = 0; i < kh; ++i)
              for (int j = 0; j < kw; ++j) {
                const int yy = y + i - kh / 2, xx = x + j - kw / 2;
                if (yy < 0 || yy >= in.h || xx < 0 || xx >= in.w) continue;
                const int wc = depthwise ? 0 : c;
                acc += params_[we.offset + ((std::size_t(o) * we.shape.c + wc) * kh + i) * kw + j] *
                       in.at(c, yy, xx);
              }
          out.at(o, y, x) = acc;
        }
    return out;
  }

  Maps act(const Maps& pre, const std::string& name, std::uint64_t& region) const {
    Maps out = pre;
    for (int c = 0; c < pre.c; ++c)
      for (std::size_t k = 0; k < std::size_t(pre.h) * pre.w; ++k) {
        double& v = out.v[std::size_t(c) * pre.h * pre.w + k];
        region ^= v > 0.0 ? 1u : 0u;
        region *= 1099511628211ULL;
        if (v > 0.0) continue;
        if (config_.activation == Activation::ReLU) {
          v = 0.0;
        } else {
          const ParamEntry& a = entries_.at(name + ".alpha");
          v *= params_[a.offset + (a.count() == 1 ? 0 : c)];
        }
      }
    return out;
  }

 private:
  const ModelConfig& config_;
  std::span<const double> params_;
  std::map<std::string, ParamEntry> entries_;
};

void add_into(Maps& a, const Maps& b) {
  for (std::size_t i = 0; i < a.v.size(); ++i) a.v[i] += b.v[i];
}

}  // namespace

Forward64 model_forward(const ModelConfig& config, std::span<const double> params,
                        std::span<const double> input, int h, int w) {
  if (input.size() != std::size_t(h) * w) {
    throw Error(ErrorKind::ShapeMismatch, "reference forward: input length differs from h*w");
  }
  if (params.size() != count_params(config)) {
    throw Error(ErrorKind::ShapeMismatch, "reference forward: parameter count mismatch");
  }
  Net net(config, params);
  std::uint64_t region = 1469598103934665603ULL;

  Maps x(1, h, w);
  x.v.assign(input.begin(), input.end());
  const Maps y1 = net.act(net.conv(x, "feature", false), "feature", region);
  Maps cur = net.act(net.conv(y1, "shrink", false), "shrink", region);
  for (int b = 0; b < config.num_blocks; ++b) {
    const std::string prefix = "block" + std::to_string(b);
    Maps sum(cur.c, h, w);
    for (std::size_t j = 0; j < config.branch_kernels.size(); ++j) {
      const std::string name = prefix + ".branch" + std::to_string(j);
      if (config.depthwise_branches) {
        add_into(sum, net.conv(net.conv(cur, name + ".dw", true), name + ".pw", false));
      } else {
        add_into(sum, net.conv(cur, name, false));
      }
    }
    add_into(cur, net.act(sum, prefix, region));
  }
  Maps y3 = net.act(net.conv(cur, "expand", false), "expand", region);
  add_into(y3, y1);
  const Maps up = net.conv(y3, "upsample", false);

  const int r = config.scale;
  Forward64 out;
  out.region = region;
  out.output.assign(std::size_t(h) * r * w * r, 0.0);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j)
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx)
          out.output[std::size_t(y * r + i) * (w * r) + (xx * r + j)] = up.at(i * r + j, y, xx);
  return out;
}

}  // namespace tmsr::reference
