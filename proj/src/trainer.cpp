#include "tmsr/trainer.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "tmsr/error.hpp"
#include "tmsr/inference.hpp"
#include "tmsr/random.hpp"
#include "tmsr/weights_file.hpp"

namespace tmsr {

void TrainConfig::validate() const {
  if (epochs < 1) throw Error(ErrorKind::InvalidArgument, "epochs must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw Error(ErrorKind::InvalidArgument, "lr must be finite and >= 0");
  if (batch_size < 1) throw Error(ErrorKind::InvalidArgument, "batch_size must be >= 1");
  if (checkpoint_every < 0) throw Error(ErrorKind::InvalidArgument, "checkpoint_every must be >= 0");
}

void apply_train_config(KeyValues& kv, TrainConfig& c) {
  auto take = [&](const char* key, auto&& apply) {
    if (auto it = kv.find(key); it != kv.end()) {
      apply(it->second);
      kv.erase(it);
    }
  };
  take("epochs", [&](const std::string& v) { c.epochs = parse_int("epochs", v); });
  take("lr", [&](const std::string& v) { c.lr = parse_double("lr", v); });
  take("batch_size", [&](const std::string& v) { c.batch_size = parse_int("batch_size", v); });
  take("seed", [&](const std::string& v) {
    std::uint64_t seed = 0;
    auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), seed);
    if (ec != std::errc() || end != v.data() + v.size()) {
      throw Error(ErrorKind::InvalidArgument, "seed: expected an unsigned integer, got '" + v + "'");
    }
    c.seed = seed;
  });
  take("checkpoint_every",
       [&](const std::string& v) { c.checkpoint_every = parse_int("checkpoint_every", v); });
}

TrainState TrainState::fresh(TmsrModel model) {
  TrainState s;
  s.optimizer = AdamState(model.param_count());
  s.model = std::move(model);
  return s;
}

double mse_loss(const Tensor& pred, const Tensor& target, Tensor* grad_pred) {
  require_same_shape(pred.shape(), target.shape(), "mse_loss");
  const int n = pred.n();
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "mse_loss: empty batch");
  auto p = pred.data();
  auto t = target.data();
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = static_cast<double>(p[i]) - t[i];
    sum += d * d;
  }
  if (grad_pred != nullptr) {
    if (grad_pred->shape() != pred.shape()) *grad_pred = Tensor(pred.shape());
    auto g = grad_pred->data();
    const double k = 2.0 / n;
    for (std::size_t i = 0; i < p.size(); ++i) {
      g[i] = static_cast<float>(k * (static_cast<double>(p[i]) - t[i]));
    }
  }
  return sum / n;
}

void make_batch(const PatchDataset& ds, std::span<const std::size_t> indices, Tensor& lr,
                Tensor& hr) {
  const int b = static_cast<int>(indices.size());
  const Shape ls{b, 1, ds.lr_size, ds.lr_size}, hs{b, 1, ds.hr_size, ds.hr_size};
  if (lr.shape() != ls) lr = Tensor(ls);
  if (hr.shape() != hs) hr = Tensor(hs);
  const std::size_t lr_n = ls.plane_size(), hr_n = hs.plane_size();
  for (int i = 0; i < b; ++i) {
    const std::size_t k = indices[i];
    auto ld = lr.plane(i, 0);
    auto hd = hr.plane(i, 0);
    for (std::size_t j = 0; j < lr_n; ++j) ld[j] = ds.lr[k * lr_n + j] / 255.0f;
    for (std::size_t j = 0; j < hr_n; ++j) hd[j] = ds.hr[k * hr_n + j] / 255.0f;
  }
}

std::vector<std::size_t> epoch_order(std::size_t count, std::uint64_t seed, int epoch) {
  // splitmix64 of (seed, epoch) so each epoch's order is reproducible alone.
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(epoch + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  z ^= z >> 31;
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  Rng rng(z);
  rng.shuffle(std::span<std::size_t>(order));
  return order;
}

namespace {

constexpr int kDegenerateCheckSteps = 10;

bool body_unchanged(const TmsrModel& model, const std::vector<float>& initial) {
  auto now = model.params();
  for (const auto& e : model.manifest()) {
    if (e.name.starts_with("upsample.")) continue;
    for (std::size_t i = e.offset; i < e.offset + e.count(); ++i) {
      if (now[i] != initial[i]) return false;
    }
  }
  return true;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void append_log_line(const std::filesystem::path& path, const EpochLog& e) {
  const bool header = !std::filesystem::exists(path);
  std::ofstream os(path, std::ios::app);
  if (!os) throw Error(ErrorKind::Io, "cannot write training log " + path.string());
  if (header) os << "epoch,loss,val_psnr\n";
  os << e.epoch << "," << format_double(e.loss) << ",";
  if (!std::isnan(e.val_psnr)) os << format_double(e.val_psnr);
  else os << "nan";
  os << "\n";
}

}  // namespace

TrainState train(TrainState state, const TrainConfig& config, const PatchDataset& data) {
  config.validate();
  const std::size_t count = data.count();
  if (count == 0) throw Error(ErrorKind::InvalidArgument, "train: empty patch dataset");
  if (data.scale != state.model.config().scale) {
    throw Error(ErrorKind::ConfigMismatch, "train: dataset scale differs from model scale");
  }
  if (state.optimizer.m.size() != state.model.param_count()) {
    state.optimizer = AdamState(state.model.param_count());
  }
  if (!config.out_dir.empty()) std::filesystem::create_directories(config.out_dir);

  const AdamConfig adam{config.lr};
  const int shave = config.validation_shave >= 0 ? config.validation_shave : state.model.config().scale;
  const std::vector<float> initial(state.model.params().begin(), state.model.params().end());
  const bool check_degenerate = state.step < kDegenerateCheckSteps && config.lr > 0.0;

  std::vector<float> grads(state.model.param_count());
  ForwardCache cache;
  Tensor lr_batch, hr_batch, grad_out;
  bool stop = false;

  for (int epoch = state.epoch + 1; epoch <= config.epochs && !stop; ++epoch) {
    const auto order = epoch_order(count, config.seed, epoch);
    double epoch_sum = 0.0;
    std::size_t seen = 0;
    std::size_t batch_id = 0;
    for (std::size_t begin = 0; begin < count; begin += config.batch_size, ++batch_id) {
      if (config.max_steps > 0 && state.step >= config.max_steps) {
        stop = true;
        break;
      }
      const std::size_t end = std::min(count, begin + static_cast<std::size_t>(config.batch_size));
      const std::span<const std::size_t> idx(order.data() + begin, end - begin);
      make_batch(data, idx, lr_batch, hr_batch);

      const Tensor pred = state.model.forward_train(lr_batch, cache);
      const double loss = mse_loss(pred, hr_batch, &grad_out);
      if (!std::isfinite(loss)) {
        std::ostringstream os;
        os << "non-finite loss " << loss << " (lr " << config.lr << ", step " << state.step + 1
           << ", epoch " << epoch << ", batch " << batch_id << ")";
        throw Error(ErrorKind::Numeric, os.str());
      }
      state.model.backward(cache, grad_out, grads);
      adam_step(state.model.params(), grads, state.optimizer, adam);
      ++state.step;
      state.step_losses.push_back(loss);
      epoch_sum += loss * static_cast<double>(idx.size());
      seen += idx.size();

      if (check_degenerate && !state.degenerate_init &&
          (state.step == kDegenerateCheckSteps)) {
        if (body_unchanged(state.model, initial)) {
          state.degenerate_init = true;
          std::cerr << "warning: degenerate initialization: no parameter outside the upsample "
                       "layer changed in the first "
                    << kDegenerateCheckSteps << " steps\n";
        }
      }
    }
    if (seen == 0) break;

    EpochLog entry{epoch, epoch_sum / static_cast<double>(seen), std::nan("")};
    state.running_loss = entry.loss;
    state.epoch = epoch;

    const bool periodic = config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0;
    if (periodic && !config.validation_dir.empty()) {
      const MetricReport report = evaluate_folder(model_reconstructor(state.model),
                                                  config.validation_dir,
                                                  state.model.config().scale, shave);
      entry.val_psnr = report.mean_psnr;
      if (report.mean_psnr > state.best_val_psnr) {
        state.best_val_psnr = report.mean_psnr;
        if (!config.out_dir.empty()) save_checkpoint(state, config.out_dir / "best.tmsr");
      }
    }
    state.log.push_back(entry);
    if (!config.out_dir.empty()) {
      append_log_line(config.out_dir / "train_log.csv", entry);
      if (periodic) {
        char name[64];
        std::snprintf(name, sizeof name, "checkpoint_e%06d.tmsr", epoch);
        save_checkpoint(state, config.out_dir / name);
      }
    }
    if (config.on_epoch) config.on_epoch(entry);
  }

  // Fewer than kDegenerateCheckSteps steps in total: judge what we have.
  if (check_degenerate && !state.degenerate_init && state.step > 0 &&
      state.step < kDegenerateCheckSteps && body_unchanged(state.model, initial)) {
    state.degenerate_init = true;
  }
  return state;
}

void save_checkpoint(const TrainState& state, const std::filesystem::path& path) {
  save_weights(state.model, path);
  auto sidecar = path;
  sidecar += ".state";
  atomic_write(sidecar, [&](std::ostream& os) {
    os << "TMSRSTATE1\n"
       << "step " << state.step << "\n"
       << "epoch " << state.epoch << "\n"
       << "running_loss " << format_double(state.running_loss) << "\n"
       << "best_val_psnr " << format_double(state.best_val_psnr) << "\n"
       << "moments " << state.optimizer.m.size() << "\n"
       << "data\n";
    write_f64_le(os, state.optimizer.m);
    write_f64_le(os, state.optimizer.v);
  });
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  TrainState state = TrainState::fresh(load_weights(path));
  auto sidecar = path;
  sidecar += ".state";
  std::ifstream is(sidecar, std::ios::binary);
  if (!is) throw Error(ErrorKind::Io, "cannot open optimizer state " + sidecar.string());
  std::string line;
  if (!std::getline(is, line) || line != "TMSRSTATE1") {
    throw Error(ErrorKind::BadMagic, sidecar.string() + ": not a TMSRSTATE1 file");
  }
  std::size_t moments = 0;
  while (std::getline(is, line) && line != "data") {
    std::istringstream ls(line);
    std::string key, value;
    ls >> key >> value;
    if (key == "step") state.step = std::stoll(value);
    else if (key == "epoch") state.epoch = std::stoi(value);
    else if (key == "running_loss") state.running_loss = std::strtod(value.c_str(), nullptr);
    else if (key == "best_val_psnr") state.best_val_psnr = std::strtod(value.c_str(), nullptr);
    else if (key == "moments") moments = std::stoull(value);
  }
  if (moments != state.model.param_count()) {
    throw Error(ErrorKind::ConfigMismatch, "optimizer state size differs from model parameters");
  }
  state.optimizer.step = state.step;
  read_f64_le(is, state.optimizer.m);
  read_f64_le(is, state.optimizer.v);
  return state;
}

AblationReport ablate_activation(const ModelConfig& base, const TrainConfig& config,
                                 const PatchDataset& data,
                                 const std::filesystem::path& validation_dir,
                                 std::uint64_t init_seed, Activation first, Activation second) {
  const int shave = config.validation_shave >= 0 ? config.validation_shave : base.scale;
  auto run = [&](Activation act, const char* tag) {
    ModelConfig mc = base;
    mc.activation = act;
    TrainConfig tc = config;
    if (!tc.out_dir.empty()) tc.out_dir /= tag;
    TrainState s = train(TrainState::fresh(TmsrModel::build(mc, init_seed)), tc, data);
    const MetricReport r = evaluate_folder(model_reconstructor(s.model), validation_dir, mc.scale, shave);
    return AblationArm{act, s.model.param_count(), r.mean_psnr, r.mean_ssim, s.running_loss};
  };
  AblationReport report;
  report.first = run(first, "arm_a");
  report.second = run(second, "arm_b");
  report.delta_psnr = report.second.psnr - report.first.psnr;
  report.delta_ssim = report.second.ssim - report.first.ssim;
  return report;
}

}  // namespace tmsr
