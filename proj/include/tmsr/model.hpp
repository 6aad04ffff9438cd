#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tmsr/conv.hpp"
#include "tmsr/tensor.hpp"

namespace tmsr {

enum class Activation { PReLU, ReLU };

const char* to_string(Activation a);
Activation parse_activation(std::string_view text);

struct KernelSize {
  int h = 3;
  int w = 3;
  friend bool operator==(const KernelSize&, const KernelSize&) = default;
};

// Declarative description of the network:
//   feature 3x3 conv 1->feat, act                         (Y1)
//   shrink 1x1 conv feat->shrink, act
//   num_blocks x [ sum of parallel branch convs shrink->shrink, act, + skip ]
//   expand 1x1 conv shrink->feat, act                     (Y2)
//   Y3 = Y1 + Y2
//   upsample 3x3 conv feat->scale^2, pixel shuffle
struct ModelConfig {
  int scale = 2;
  int feat_channels = 8;
  int shrink_channels = 6;
  int num_blocks = 2;
  std::vector<KernelSize> branch_kernels{{3, 3}, {1, 3}, {3, 1}};
  Activation activation = Activation::PReLU;
  bool prelu_shared = false;
  // Each branch becomes a depthwise kxk conv followed by a pointwise 1x1.
  bool depthwise_branches = false;
  // Start every conv weight at zero instead of He-uniform. Kept to show that
  // such a network cannot train; not for real use.
  bool zero_init = false;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// One stored parameter array inside the flat parameter buffer.
struct ParamEntry {
  std::string name;
  Shape shape;
  std::size_t offset = 0;

  std::size_t count() const { return shape.numel(); }
  friend bool operator==(const ParamEntry&, const ParamEntry&) = default;
};

struct LayerCount {
  std::string layer;
  std::size_t weights = 0;
  std::size_t biases = 0;
  std::size_t alphas = 0;
  std::size_t total() const { return weights + biases + alphas; }
};

std::vector<ParamEntry> param_manifest(const ModelConfig& config);
std::size_t count_params(const ModelConfig& config);
std::vector<LayerCount> param_breakdown(const ModelConfig& config);

struct ForwardTaps {
  Tensor y1;  // feature-extraction output
  Tensor y2;  // expand output (the residual image)
  Tensor y3;  // y1 + y2
};

struct ForwardResult {
  Tensor output;
  ForwardTaps taps;
};

// Activations saved by forward_train for the backward pass.
struct ForwardCache {
  struct Block {
    Tensor input;
    Tensor pre;                   // branch sum before activation
    std::vector<Tensor> depthwise;  // per-branch depthwise outputs (depthwise mode only)
  };
  Tensor input;
  Tensor feature_pre, y1;
  Tensor shrink_pre;
  std::vector<Block> blocks;
  Tensor body_out;
  Tensor expand_pre, y2, y3;
  Tensor upsample_pre;
};

// Fingerprint of which side of zero every activation input fell on. Two
// evaluations with equal fingerprints lie in the same linear piece.
std::uint64_t activation_region(const ForwardCache& cache);

class TmsrModel {
 public:
  // Builds the graph and initializes it: He-uniform conv weights (or zeros
  // with config.zero_init), zero biases, PReLU alpha 0.25.
  static TmsrModel build(const ModelConfig& config, std::uint64_t seed = 1);

  // Adopts existing parameters; `params` must match param_manifest(config).
  static TmsrModel from_params(const ModelConfig& config, std::vector<float> params);

  const ModelConfig& config() const { return config_; }
  const std::vector<ParamEntry>& manifest() const { return manifest_; }
  std::size_t param_count() const { return params_.size(); }

  std::span<float> params() { return params_; }
  std::span<const float> params() const { return params_; }

  const ParamEntry& entry(std::string_view name) const;
  std::span<float> param(std::string_view name);
  std::span<const float> param(std::string_view name) const;

  // Input is (n, 1, h, w) in the network domain ([0, 1]).
  ForwardResult forward(const Tensor& lr) const;
  Tensor forward_train(const Tensor& lr, ForwardCache& cache) const;

  // Writes d(loss)/d(params) into `grads` (overwritten, length param_count()).
  // Returns d(loss)/d(input) when `want_input_grad`, else an empty tensor.
  Tensor backward(const ForwardCache& cache, const Tensor& grad_out, std::span<float> grads,
                  bool want_input_grad = false) const;

  friend bool operator==(const TmsrModel& a, const TmsrModel& b) {
    return a.config_ == b.config_ && a.params_ == b.params_;
  }

 private:
  struct ConvSlot {
    ConvShape shape;
    std::size_t weight = 0;  // manifest indices
    std::size_t bias = 0;
  };
  struct ActSlot {
    bool learnable = false;
    std::size_t alpha = 0;
  };
  struct Branch {
    ConvSlot conv;       // the only conv, or the depthwise half
    bool separable = false;
    ConvSlot pointwise;
  };
  struct Block {
    std::vector<Branch> branches;
    ActSlot act;
  };
  struct Layout {
    ConvSlot feature;
    ActSlot feature_act;
    ConvSlot shrink;
    ActSlot shrink_act;
    std::vector<Block> blocks;
    ConvSlot expand;
    ActSlot expand_act;
    ConvSlot upsample;
  };

  static Layout make_layout(const ModelConfig& config, std::vector<ParamEntry>* manifest);

  ConvView view(const ConvSlot& s) const;
  ConvGradView grad_view(const ConvSlot& s, std::span<float> grads) const;
  void activate(const ActSlot& a, const Tensor& x, Tensor& out) const;
  void activate_backward(const ActSlot& a, const Tensor& x, const Tensor& grad_out,
                         Tensor& grad_in, std::span<float> grads) const;

  ModelConfig config_;
  std::vector<ParamEntry> manifest_;
  std::vector<float> params_;
  Layout layout_;
};

}  // namespace tmsr
