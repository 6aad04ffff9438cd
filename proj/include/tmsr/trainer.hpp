#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <vector>

#include "tmsr/adam.hpp"
#include "tmsr/config_file.hpp"
#include "tmsr/metrics.hpp"
#include "tmsr/model.hpp"
#include "tmsr/patches.hpp"

namespace tmsr {

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double val_psnr = 0.0;  // NaN when validation did not run this epoch
};

struct TrainConfig {
  int epochs = 5000;
  double lr = 1e-4;
  int batch_size = 64;
  std::uint64_t seed = 1;
  // Checkpoint (and validate) every N epochs; 0 disables periodic checkpoints.
  int checkpoint_every = 0;
  // Stop after this many optimizer steps in total; 0 means no limit.
  std::int64_t max_steps = 0;
  std::filesystem::path out_dir;         // empty: write nothing
  std::filesystem::path validation_dir;  // empty: no validation
  int validation_shave = -1;             // -1: the model scale
  std::function<void(const EpochLog&)> on_epoch;

  void validate() const;
};

// Consumes epochs, lr, batch_size, seed, checkpoint_every from `kv`.
void apply_train_config(KeyValues& kv, TrainConfig& config);

struct TrainState {
  std::int64_t step = 0;
  int epoch = 0;  // completed epochs
  TmsrModel model;
  AdamState optimizer;
  double running_loss = 0.0;  // mean loss of the last completed epoch
  double best_val_psnr = -std::numeric_limits<double>::infinity();
  std::vector<EpochLog> log;
  std::vector<double> step_losses;
  // Set when the first steps left every non-upsample parameter untouched.
  bool degenerate_init = false;

  static TrainState fresh(TmsrModel model);
};

// Per-sample sum of squared differences averaged over the batch:
//   loss = (1/n) sum_i ||pred_i - target_i||^2, grad = 2 (pred - target) / n.
double mse_loss(const Tensor& pred, const Tensor& target, Tensor* grad_pred);

// Network-domain batch of dataset samples `indices`.
void make_batch(const PatchDataset& ds, std::span<const std::size_t> indices, Tensor& lr, Tensor& hr);

// Seeded permutation of [0, count) for one epoch; independent of other epochs.
std::vector<std::size_t> epoch_order(std::size_t count, std::uint64_t seed, int epoch);

// Runs epochs state.epoch + 1 .. config.epochs. Throws Numeric on a
// non-finite loss, naming the learning rate, step and batch.
TrainState train(TrainState state, const TrainConfig& config, const PatchDataset& data);

// Weights file at `path` plus optimizer/progress sidecar at path + ".state".
void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
TrainState load_checkpoint(const std::filesystem::path& path);

struct AblationArm {
  Activation activation = Activation::PReLU;
  std::size_t params = 0;
  double psnr = 0.0;
  double ssim = 0.0;
  double final_loss = 0.0;
};

struct AblationReport {
  AblationArm first;
  AblationArm second;
  double delta_psnr = 0.0;  // second - first
  double delta_ssim = 0.0;
};

// Trains two models that differ only in activation (same init seed, same data
// order) and evaluates both on `validation_dir`.
AblationReport ablate_activation(const ModelConfig& base, const TrainConfig& config,
                                 const PatchDataset& data,
                                 const std::filesystem::path& validation_dir,
                                 std::uint64_t init_seed = 1,
                                 Activation first = Activation::ReLU,
                                 Activation second = Activation::PReLU);

}  // namespace tmsr
