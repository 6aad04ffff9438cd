#include "tmsr/model_gradcheck.hpp"

#include "tmsr/model_reference.hpp"
#include "tmsr/random.hpp"

namespace tmsr {

namespace {

Tensor random_tensor(Shape s, Rng& rng, double lo, double hi) {
  Tensor t(s);
  for (float& v : t.data()) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

}  // namespace

GradCheckReport check_model_gradients(const ModelConfig& config,
                                      const ModelGradCheckOptions& options) {
  Rng rng(options.seed);
  TmsrModel model = TmsrModel::build(config, options.seed);
  for (const auto& e : model.manifest()) {
    const bool alpha = e.name.ends_with(".alpha");
    if (alpha || e.name.ends_with(".bias")) {
      for (float& v : model.param(e.name)) {
        v = static_cast<float>(alpha ? rng.uniform(0.05, 0.5) : rng.uniform(-0.1, 0.1));
      }
    }
  }
  const int s = config.scale;
  const Tensor x = random_tensor({1, 1, options.size, options.size}, rng, 0.0, 1.0);
  const Tensor target = random_tensor({1, 1, options.size * s, options.size * s}, rng, 0.0, 1.0);
  const double n = static_cast<double>(target.size());

  ForwardCache cache;
  const Tensor y = model.forward_train(x, cache);
  Tensor grad_out(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) {
    grad_out.data()[i] =
        static_cast<float>(2.0 * (static_cast<double>(y.data()[i]) - target.data()[i]) / n);
  }
  std::vector<float> grads(model.param_count());
  Tensor grad_in = model.backward(cache, grad_out, grads, options.check_input);

  // Finite differences come from the independent float64 forward, so the
  // comparison measures the float32 backward pass rather than float32
  // evaluation noise in the loss.
  auto loss64 = [&](std::span<const double> p, std::span<const double> in) {
    auto r = reference::model_forward(config, p, in, options.size, options.size);
    double acc = 0.0;
    for (std::size_t i = 0; i < r.output.size(); ++i) {
      const double d = r.output[i] - target.data()[i];
      acc += d * d;
    }
    return Evaluation{acc / n, r.region};
  };
  std::vector<double> p64(model.params().begin(), model.params().end());
  std::vector<double> x64(x.data().begin(), x.data().end());

  if (options.check_input) {
    std::vector<float> analytic(grad_in.data().begin(), grad_in.data().end());
    auto eval = [&](std::span<const double> in) { return loss64(p64, in); };
    return gradient_check_piecewise(eval, std::span<const double>(x64), analytic, options.check);
  }
  auto eval = [&](std::span<const double> p) { return loss64(p, x64); };
  return gradient_check_piecewise(eval, std::span<const double>(p64), grads, options.check);
}

}  // namespace tmsr
