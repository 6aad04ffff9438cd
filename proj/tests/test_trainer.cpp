#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "support/synthetic.hpp"
#include "support/test_util.hpp"
#include "tmsr/error.hpp"
#include "tmsr/gradcheck.hpp"
#include "tmsr/image.hpp"
#include "tmsr/metrics.hpp"
#include "tmsr/patches.hpp"
#include "tmsr/trainer.hpp"
#include "tmsr/weights_file.hpp"

using namespace tmsr;
using tmsr::test::random_tensor;

namespace {

PatchDataset synthetic_patches(int images, int size, std::uint64_t seed) {
  PatchDataset ds;
  for (int i = 0; i < images; ++i) {
    ImagePlane y = rgb_to_y(tmsr::test::synthetic_image(size, size, seed + i));
    for (const auto& p : extract_patches(y, {}, i)) ds.append(p);
  }
  return ds;
}

TrainConfig quick_config(int epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.batch_size = 16;
  c.lr = 1e-4;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_CASE("mse_loss: examples") {
  Rng rng(1);
  Tensor a = random_tensor({3, 1, 4, 4}, rng);
  Tensor g;
  CHECK(mse_loss(a, a, &g) == 0.0);
  for (float v : g.data()) CHECK(v == 0.0f);

  Tensor pred({1, 1, 5, 3}, 2.0f), target({1, 1, 5, 3}, 1.0f);
  CHECK(mse_loss(pred, target, &g) == 15.0);
  for (float v : g.data()) CHECK(v == 2.0f);

  // n is the batch size, not the element count.
  Tensor p2({4, 1, 2, 2}, 1.0f), t2({4, 1, 2, 2}, 0.0f);
  CHECK(mse_loss(p2, t2, nullptr) == 4.0);
  CHECK_THROWS_AS(mse_loss(p2, pred, nullptr), Error);
}

TEST_CASE("mse_loss: gradient against finite differences") {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor target = random_tensor({3, 1, 4, 5}, rng);
    Tensor pred = random_tensor(target.shape(), rng);
    Tensor g;
    mse_loss(pred, target, &g);
    std::vector<float> flat(pred.data().begin(), pred.data().end());
    std::vector<float> analytic(g.data().begin(), g.data().end());
    auto loss = [&](std::span<const float> p) {
      Tensor t(target.shape(), std::vector<float>(p.begin(), p.end()));
      return mse_loss(t, target, nullptr);
    };
    // The loss is quadratic, so the central difference has no truncation error.
    auto report = gradient_check(loss, flat, analytic, {.epsilon = 1e-3, .tolerance = 1e-4});
    INFO(report.summary());
    CHECK(report.passed);
  }
}

TEST_CASE("epoch_order: seeded permutations") {
  auto a = epoch_order(100, 7, 1);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> iota(100);
  std::iota(iota.begin(), iota.end(), 0);
  CHECK(sorted == iota);
  CHECK(epoch_order(100, 7, 1) == a);
  CHECK(epoch_order(100, 7, 2) != a);
  CHECK(epoch_order(100, 8, 1) != a);
}

TEST_CASE("make_batch: network domain") {
  PatchDataset ds = synthetic_patches(1, 60, 1);
  std::vector<std::size_t> idx{2, 0};
  Tensor lr, hr;
  make_batch(ds, idx, lr, hr);
  CHECK(lr.shape() == Shape{2, 1, 16, 16});
  CHECK(hr.shape() == Shape{2, 1, 32, 32});
  CHECK(lr.at(0, 0, 3, 4) == ds.lr[2 * 256 + 3 * 16 + 4] / 255.0f);
  CHECK(hr.at(1, 0, 31, 0) == ds.hr[31 * 32] / 255.0f);
}

TEST_CASE("train: lr = 0 leaves parameters unchanged") {
  PatchDataset ds = synthetic_patches(2, 60, 1);
  auto model = TmsrModel::build(ModelConfig{}, 2);
  TrainConfig c = quick_config(3);
  c.lr = 0.0;
  TrainState s = train(TrainState::fresh(model), c, ds);
  CHECK(s.model == model);
  CHECK(s.epoch == 3);
  CHECK(s.log.size() == 3);
}

TEST_CASE("train: deterministic and resumable") {
  PatchDataset ds = synthetic_patches(2, 74, 5);
  auto model = TmsrModel::build(ModelConfig{}, 4);
  TrainConfig c = quick_config(4);
  TrainState a = train(TrainState::fresh(model), c, ds);
  TrainState b = train(TrainState::fresh(model), c, ds);
  CHECK(tmsr::test::bit_identical(a.model.params(), b.model.params()));
  CHECK_FALSE(a.model == model);

  auto dir = tmsr::test::temp_dir("resume");
  TrainConfig half = c;
  half.epochs = 2;
  TrainState first = train(TrainState::fresh(model), half, ds);
  save_checkpoint(first, dir / "ck.tmsr");
  TrainState loaded = load_checkpoint(dir / "ck.tmsr");
  CHECK(loaded.step == first.step);
  CHECK(loaded.epoch == 2);
  CHECK(loaded.optimizer.m == first.optimizer.m);
  CHECK(loaded.optimizer.v == first.optimizer.v);
  TrainState resumed = train(loaded, c, ds);
  CHECK(resumed.epoch == 4);
  CHECK(resumed.step == a.step);
  CHECK(tmsr::test::bit_identical(resumed.model.params(), a.model.params()));
}

TEST_CASE("train: loss descends over the first 50 steps") {
  PatchDataset ds = synthetic_patches(4, 96, 11);
  REQUIRE(ds.count() >= 64);
  TrainConfig c = quick_config(1000);
  c.batch_size = 64;
  c.max_steps = 50;
  TrainState s = train(TrainState::fresh(TmsrModel::build(ModelConfig{}, 1)), c, ds);
  REQUIRE(s.step_losses.size() == 50);
  int violations = 0;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t i = 10; i <= 50; ++i) {
    const double avg =
        std::accumulate(s.step_losses.begin() + (i - 10), s.step_losses.begin() + i, 0.0) / 10;
    violations += !(avg < prev);
    prev = avg;
  }
  CHECK(violations <= 1);
  CHECK(s.step_losses.back() < s.step_losses.front());
}

TEST_CASE("train: zero initialization is detected as degenerate") {
  PatchDataset ds = synthetic_patches(2, 60, 2);
  ModelConfig zc;
  zc.zero_init = true;
  TrainConfig c = quick_config(100);
  c.max_steps = 10;
  TrainState s = train(TrainState::fresh(TmsrModel::build(zc)), c, ds);
  CHECK(s.degenerate_init);
  auto initial = TmsrModel::build(zc);
  for (const auto& e : s.model.manifest()) {
    if (e.name.starts_with("upsample.")) continue;
    auto now = s.model.param(e.name), was = initial.param(e.name);
    INFO(e.name);
    CHECK(std::equal(now.begin(), now.end(), was.begin()));
  }
  TrainState ok = train(TrainState::fresh(TmsrModel::build(ModelConfig{})), c, ds);
  CHECK_FALSE(ok.degenerate_init);
}

TEST_CASE("train: non-finite loss aborts with a diagnostic") {
  PatchDataset ds = synthetic_patches(1, 60, 3);
  auto model = TmsrModel::build(ModelConfig{});
  model.param("upsample.bias")[0] = std::numeric_limits<float>::quiet_NaN();
  try {
    train(TrainState::fresh(model), quick_config(1), ds);
    FAIL("expected a numeric error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Numeric);
    const std::string msg = e.what();
    CHECK(msg.find("lr") != std::string::npos);
    CHECK(msg.find("step") != std::string::npos);
    CHECK(msg.find("batch") != std::string::npos);
  }
}

TEST_CASE("train: log, checkpoints and best model on disk") {
  auto dir = tmsr::test::temp_dir("train_out");
  auto val = dir / "val";
  std::filesystem::create_directories(val);
  tmsr::test::write_synthetic_folder(val, 2, 40, 40, 30);
  PatchDataset ds = synthetic_patches(2, 60, 4);
  TrainConfig c = quick_config(4);
  c.checkpoint_every = 2;
  c.out_dir = dir / "run";
  c.validation_dir = val;
  std::vector<int> seen;
  c.on_epoch = [&](const EpochLog& l) { seen.push_back(l.epoch); };
  TrainState s = train(TrainState::fresh(TmsrModel::build(ModelConfig{})), c, ds);
  CHECK(seen == std::vector<int>{1, 2, 3, 4});
  CHECK(std::filesystem::exists(c.out_dir / "checkpoint_e000002.tmsr"));
  CHECK(std::filesystem::exists(c.out_dir / "checkpoint_e000004.tmsr.state"));
  CHECK(std::filesystem::exists(c.out_dir / "best.tmsr"));
  CHECK(std::isfinite(s.best_val_psnr));
  CHECK(std::isnan(s.log[0].val_psnr));
  CHECK(std::isfinite(s.log[1].val_psnr));

  std::ifstream log(c.out_dir / "train_log.csv");
  std::string header, line;
  std::getline(log, header);
  CHECK(header == "epoch,loss,val_psnr");
  int rows = 0;
  while (std::getline(log, line)) ++rows;
  CHECK(rows == 4);
}

TEST_CASE("train: config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.epochs = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = TrainConfig{};
  c.lr = 0;
  CHECK_NOTHROW(c.validate());
  c.lr = -1e-4;
  CHECK_THROWS_AS(c.validate(), Error);
  c = TrainConfig{};
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK_THROWS_AS(train(TrainState::fresh(TmsrModel::build(ModelConfig{})), TrainConfig{},
                        PatchDataset{}),
                  Error);
}

TEST_CASE("loss and psnr move together on the training set") {
  // PSNR is a strictly decreasing function of MSE on the same residuals.
  PatchDataset ds = synthetic_patches(1, 60, 6);
  auto model = TmsrModel::build(ModelConfig{}, 9);
  TrainConfig c = quick_config(1);
  double prev_mse = std::numeric_limits<double>::infinity(), prev_psnr = -1;
  TrainState s = TrainState::fresh(model);
  for (int e = 1; e <= 3; ++e) {
    c.epochs = e;
    s = train(s, c, ds);
    std::vector<std::size_t> all(ds.count());
    std::iota(all.begin(), all.end(), 0);
    Tensor lr, hr;
    make_batch(ds, all, lr, hr);
    Tensor out = s.model.forward(lr).output;
    double se = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double d = 255.0 * (double(out.data()[i]) - hr.data()[i]);
      se += d * d;
    }
    const double m = se / double(out.size());
    const double p = psnr_from_mse(m);
    if (m < prev_mse) CHECK(p > prev_psnr);
    prev_mse = m;
    prev_psnr = p;
  }
}

TEST_CASE("ablation: identical arms give a zero delta") {
  auto dir = tmsr::test::temp_dir("ablate");
  tmsr::test::write_synthetic_folder(dir, 2, 40, 40, 40);
  PatchDataset ds = synthetic_patches(2, 60, 7);
  TrainConfig c = quick_config(2);
  AblationReport same = ablate_activation(ModelConfig{}, c, ds, dir, 1, Activation::PReLU,
                                          Activation::PReLU);
  CHECK(same.delta_psnr == 0.0);
  CHECK(same.delta_ssim == 0.0);

  AblationReport r = ablate_activation(ModelConfig{}, c, ds, dir);
  CHECK(r.first.activation == Activation::ReLU);
  CHECK(r.second.activation == Activation::PReLU);
  CHECK(std::isfinite(r.first.psnr));
  CHECK(std::isfinite(r.second.psnr));
  CHECK(r.delta_psnr == r.second.psnr - r.first.psnr);
  CHECK(r.second.params - r.first.params == 34);
}
