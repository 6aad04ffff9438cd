#include "tmsr/model.hpp"

#include <algorithm>
#include <cmath>

#include "tmsr/activation.hpp"
#include "tmsr/error.hpp"
#include "tmsr/pixel_shuffle.hpp"
#include "tmsr/random.hpp"

namespace tmsr {

const char* to_string(Activation a) { return a == Activation::PReLU ? "prelu" : "relu"; }

Activation parse_activation(std::string_view text) {
  if (text == "prelu") return Activation::PReLU;
  if (text == "relu") return Activation::ReLU;
  throw Error(ErrorKind::InvalidArgument,
              "unknown activation '" + std::string(text) + "' (expected prelu or relu)");
}

void ModelConfig::validate() const {
  auto positive = [](int v, const char* what) {
    if (v < 1) throw Error(ErrorKind::InvalidArgument, std::string(what) + " must be >= 1");
  };
  positive(scale, "scale");
  positive(feat_channels, "feat_channels");
  positive(shrink_channels, "shrink_channels");
  if (num_blocks < 0) throw Error(ErrorKind::InvalidArgument, "num_blocks must be >= 0");
  if (num_blocks > 0 && branch_kernels.empty()) {
    throw Error(ErrorKind::InvalidArgument, "branch_kernels must not be empty");
  }
  for (const auto& k : branch_kernels) {
    const bool supported = (k.h == 1 || k.h == 3) && (k.w == 1 || k.w == 3);
    if (!supported) {
      throw Error(ErrorKind::InvalidArgument,
                  "unsupported branch kernel " + std::to_string(k.h) + "x" + std::to_string(k.w) +
                      " (supported: 3x3, 1x3, 3x1, 1x1)");
    }
  }
}

TmsrModel::Layout TmsrModel::make_layout(const ModelConfig& c, std::vector<ParamEntry>* manifest) {
  c.validate();
  std::size_t offset = 0;
  auto add = [&](std::string name, Shape shape) {
    const std::size_t index = manifest->size();
    manifest->push_back({std::move(name), shape, offset});
    offset += shape.numel();
    return index;
  };
  auto conv = [&](const std::string& name, ConvShape cs) {
    cs.validate();
    ConvSlot slot{cs, 0, 0};
    slot.weight = add(name + ".weight", cs.weight_shape());
    slot.bias = add(name + ".bias", {1, cs.out_channels, 1, 1});
    return slot;
  };
  auto act = [&](const std::string& name, int channels) {
    ActSlot slot;
    if (c.activation == Activation::PReLU) {
      slot.learnable = true;
      slot.alpha = add(name + ".alpha", {1, c.prelu_shared ? 1 : channels, 1, 1});
    }
    return slot;
  };

  const int d = c.feat_channels, s = c.shrink_channels;
  Layout l;
  l.feature = conv("feature", {1, d, 3, 3, false});
  l.feature_act = act("feature", d);
  l.shrink = conv("shrink", {d, s, 1, 1, false});
  l.shrink_act = act("shrink", s);
  for (int b = 0; b < c.num_blocks; ++b) {
    Block block;
    const std::string prefix = "block" + std::to_string(b);
    for (std::size_t j = 0; j < c.branch_kernels.size(); ++j) {
      const auto k = c.branch_kernels[j];
      const std::string name = prefix + ".branch" + std::to_string(j);
      Branch br;
      if (c.depthwise_branches) {
        br.separable = true;
        br.conv = conv(name + ".dw", {s, s, k.h, k.w, true});
        br.pointwise = conv(name + ".pw", {s, s, 1, 1, false});
      } else {
        br.conv = conv(name, {s, s, k.h, k.w, false});
      }
      block.branches.push_back(br);
    }
    block.act = act(prefix, s);
    l.blocks.push_back(std::move(block));
  }
  l.expand = conv("expand", {s, d, 1, 1, false});
  l.expand_act = act("expand", d);
  l.upsample = conv("upsample", {d, c.scale * c.scale, 3, 3, false});
  return l;
}

std::vector<ParamEntry> param_manifest(const ModelConfig& config) {
  return TmsrModel::build(config).manifest();
}

std::size_t count_params(const ModelConfig& config) {
  std::size_t total = 0;
  for (const auto& e : param_manifest(config)) total += e.count();
  return total;
}

std::vector<LayerCount> param_breakdown(const ModelConfig& config) {
  std::vector<LayerCount> rows;
  for (const auto& e : param_manifest(config)) {
    // Group by everything before the last '.', e.g. "block0.branch1".
    const auto dot = e.name.rfind('.');
    std::string layer = e.name.substr(0, dot);
    const std::string kind = e.name.substr(dot + 1);
    if (rows.empty() || rows.back().layer != layer) rows.push_back({layer});
    auto& row = rows.back();
    if (kind == "weight") row.weights += e.count();
    else if (kind == "bias") row.biases += e.count();
    else row.alphas += e.count();
  }
  return rows;
}

TmsrModel TmsrModel::build(const ModelConfig& config, std::uint64_t seed) {
  TmsrModel m;
  m.config_ = config;
  m.layout_ = make_layout(config, &m.manifest_);
  std::size_t total = 0;
  for (const auto& e : m.manifest_) total += e.count();
  m.params_.assign(total, 0.0f);

  // Conv weights are drawn in manifest order and alphas consume no draws, so
  // the prelu and relu variants of one config start from the same weights.
  Rng rng(seed);
  for (const auto& e : m.manifest_) {
    auto values = std::span<float>(m.params_).subspan(e.offset, e.count());
    const std::string_view name = e.name;
    if (name.ends_with(".alpha")) {
      std::fill(values.begin(), values.end(), 0.25f);
    } else if (name.ends_with(".weight") && !config.zero_init) {
      const double fan_in = static_cast<double>(e.shape.c) * e.shape.h * e.shape.w;
      const double bound = std::sqrt(6.0 / fan_in);
      for (float& v : values) v = static_cast<float>(rng.uniform(-bound, bound));
    }
  }
  return m;
}

TmsrModel TmsrModel::from_params(const ModelConfig& config, std::vector<float> params) {
  TmsrModel m;
  m.config_ = config;
  m.layout_ = make_layout(config, &m.manifest_);
  std::size_t total = 0;
  for (const auto& e : m.manifest_) total += e.count();
  if (params.size() != total) {
    throw Error(ErrorKind::ConfigMismatch, "parameter count " + std::to_string(params.size()) +
                                               " does not match config (" + std::to_string(total) +
                                               ")");
  }
  m.params_ = std::move(params);
  return m;
}

const ParamEntry& TmsrModel::entry(std::string_view name) const {
  auto it = std::find_if(manifest_.begin(), manifest_.end(),
                         [&](const ParamEntry& e) { return e.name == name; });
  if (it == manifest_.end()) {
    throw Error(ErrorKind::InvalidArgument, "no parameter named '" + std::string(name) + "'");
  }
  return *it;
}

std::span<float> TmsrModel::param(std::string_view name) {
  const auto& e = entry(name);
  return std::span<float>(params_).subspan(e.offset, e.count());
}

std::span<const float> TmsrModel::param(std::string_view name) const {
  const auto& e = entry(name);
  return std::span<const float>(params_).subspan(e.offset, e.count());
}

ConvView TmsrModel::view(const ConvSlot& s) const {
  const auto& w = manifest_[s.weight];
  const auto& b = manifest_[s.bias];
  std::span<const float> all(params_);
  return {s.shape, all.subspan(w.offset, w.count()), all.subspan(b.offset, b.count())};
}

ConvGradView TmsrModel::grad_view(const ConvSlot& s, std::span<float> grads) const {
  const auto& w = manifest_[s.weight];
  const auto& b = manifest_[s.bias];
  return {grads.subspan(w.offset, w.count()), grads.subspan(b.offset, b.count())};
}

void TmsrModel::activate(const ActSlot& a, const Tensor& x, Tensor& out) const {
  if (a.learnable) {
    const auto& e = manifest_[a.alpha];
    prelu_forward_into(x, std::span<const float>(params_).subspan(e.offset, e.count()), out);
  } else {
    out = relu_forward(x);
  }
}

void TmsrModel::activate_backward(const ActSlot& a, const Tensor& x, const Tensor& grad_out,
                                  Tensor& grad_in, std::span<float> grads) const {
  if (a.learnable) {
    const auto& e = manifest_[a.alpha];
    prelu_backward_into(x, std::span<const float>(params_).subspan(e.offset, e.count()), grad_out,
                        grad_in, grads.subspan(e.offset, e.count()));
  } else {
    grad_in = relu_backward(x, grad_out);
  }
}

Tensor TmsrModel::forward_train(const Tensor& lr, ForwardCache& cache) const {
  if (lr.c() != 1) {
    throw Error(ErrorKind::ShapeMismatch,
                "model input must have 1 channel, got " + std::to_string(lr.c()));
  }
  cache.input = lr;
  conv2d_forward_into(cache.input, view(layout_.feature), cache.feature_pre);
  activate(layout_.feature_act, cache.feature_pre, cache.y1);

  conv2d_forward_into(cache.y1, view(layout_.shrink), cache.shrink_pre);
  Tensor current;
  activate(layout_.shrink_act, cache.shrink_pre, current);

  cache.blocks.resize(layout_.blocks.size());
  Tensor branch_out, activated;
  for (std::size_t b = 0; b < layout_.blocks.size(); ++b) {
    const Block& block = layout_.blocks[b];
    ForwardCache::Block& bc = cache.blocks[b];
    bc.input = std::move(current);
    bc.depthwise.resize(block.branches.size());
    for (std::size_t j = 0; j < block.branches.size(); ++j) {
      const Branch& br = block.branches[j];
      if (br.separable) {
        conv2d_forward_into(bc.input, view(br.conv), bc.depthwise[j]);
        conv2d_forward_into(bc.depthwise[j], view(br.pointwise), branch_out);
      } else {
        conv2d_forward_into(bc.input, view(br.conv), branch_out);
      }
      if (j == 0) bc.pre = branch_out;
      else add_inplace(bc.pre, branch_out);
    }
    activate(block.act, bc.pre, activated);
    current = add(bc.input, activated);
  }
  cache.body_out = std::move(current);

  conv2d_forward_into(cache.body_out, view(layout_.expand), cache.expand_pre);
  activate(layout_.expand_act, cache.expand_pre, cache.y2);
  cache.y3 = add(cache.y1, cache.y2);

  conv2d_forward_into(cache.y3, view(layout_.upsample), cache.upsample_pre);
  return pixel_shuffle(cache.upsample_pre, config_.scale);
}

std::uint64_t activation_region(const ForwardCache& cache) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](const Tensor& t) {
    for (float v : t.data()) {
      h ^= v > 0.0f ? 1u : 0u;
      h *= 1099511628211ULL;
    }
  };
  mix(cache.feature_pre);
  mix(cache.shrink_pre);
  for (const auto& b : cache.blocks) mix(b.pre);
  mix(cache.expand_pre);
  return h;
}

ForwardResult TmsrModel::forward(const Tensor& lr) const {
  ForwardCache cache;
  ForwardResult r;
  r.output = forward_train(lr, cache);
  r.taps = {std::move(cache.y1), std::move(cache.y2), std::move(cache.y3)};
  return r;
}

Tensor TmsrModel::backward(const ForwardCache& cache, const Tensor& grad_out,
                           std::span<float> grads, bool want_input_grad) const {
  if (grads.size() != params_.size()) {
    throw Error(ErrorKind::ShapeMismatch, "gradient buffer length differs from parameter count");
  }
  std::fill(grads.begin(), grads.end(), 0.0f);

  const Tensor grad_up = pixel_unshuffle(grad_out, config_.scale);
  require_same_shape(grad_up.shape(), cache.upsample_pre.shape(), "model grad_out");

  Tensor grad_y3;
  conv2d_backward_into(cache.y3, view(layout_.upsample), grad_up, &grad_y3,
                       grad_view(layout_.upsample, grads));

  // y3 = y1 + y2: both taps receive grad_y3.
  Tensor grad_expand;
  activate_backward(layout_.expand_act, cache.expand_pre, grad_y3, grad_expand, grads);
  Tensor grad_body;
  conv2d_backward_into(cache.body_out, view(layout_.expand), grad_expand, &grad_body,
                       grad_view(layout_.expand, grads));

  Tensor grad_pre, grad_branch, grad_dw;
  for (std::size_t bi = layout_.blocks.size(); bi-- > 0;) {
    const Block& block = layout_.blocks[bi];
    const ForwardCache::Block& bc = cache.blocks[bi];
    // out = in + act(pre): the skip passes grad_body through unchanged.
    activate_backward(block.act, bc.pre, grad_body, grad_pre, grads);
    for (std::size_t j = 0; j < block.branches.size(); ++j) {
      const Branch& br = block.branches[j];
      if (br.separable) {
        conv2d_backward_into(bc.depthwise[j], view(br.pointwise), grad_pre, &grad_dw,
                             grad_view(br.pointwise, grads));
        conv2d_backward_into(bc.input, view(br.conv), grad_dw, &grad_branch,
                             grad_view(br.conv, grads));
      } else {
        conv2d_backward_into(bc.input, view(br.conv), grad_pre, &grad_branch,
                             grad_view(br.conv, grads));
      }
      add_inplace(grad_body, grad_branch);
    }
  }

  Tensor grad_shrink;
  activate_backward(layout_.shrink_act, cache.shrink_pre, grad_body, grad_shrink, grads);
  Tensor grad_y1;
  conv2d_backward_into(cache.y1, view(layout_.shrink), grad_shrink, &grad_y1,
                       grad_view(layout_.shrink, grads));
  add_inplace(grad_y1, grad_y3);

  Tensor grad_feature;
  activate_backward(layout_.feature_act, cache.feature_pre, grad_y1, grad_feature, grads);
  Tensor grad_input;
  conv2d_backward_into(cache.input, view(layout_.feature), grad_feature,
                       want_input_grad ? &grad_input : nullptr, grad_view(layout_.feature, grads));
  return grad_input;
}

}  // namespace tmsr
