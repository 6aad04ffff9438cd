#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "tmsr/augment.hpp"
#include "tmsr/config_file.hpp"
#include "tmsr/error.hpp"
#include "tmsr/image.hpp"
#include "tmsr/inference.hpp"
#include "tmsr/metrics.hpp"
#include "tmsr/model.hpp"
#include "tmsr/model_gradcheck.hpp"
#include "tmsr/patches.hpp"
#include "tmsr/trainer.hpp"
#include "tmsr/weights_file.hpp"

#ifndef TMSR_VERSION
#define TMSR_VERSION "0.0.0"
#endif

namespace tmsr::cli {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

constexpr std::size_t kT91ReferencePatches = 240288;

// Raised for a well-formed run whose check did not pass.
struct CheckFailed {
  std::string message;
};

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument:
    case ErrorKind::ShapeMismatch:
      return kUsage;
    case ErrorKind::Numeric:
    case ErrorKind::NonDeterministic:
      return kNumeric;
    default:
      return kData;
  }
}

Json number_or_string(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

Json model_json(const ModelConfig& c) {
  return Json{{"scale", c.scale},
              {"feat_channels", c.feat_channels},
              {"shrink_channels", c.shrink_channels},
              {"num_blocks", c.num_blocks},
              {"branch_kernels", format_kernels(c.branch_kernels)},
              {"activation", to_string(c.activation)},
              {"prelu_shared", c.prelu_shared},
              {"depthwise_branches", c.depthwise_branches},
              {"zero_init", c.zero_init}};
}

Json manifest_base(const std::string& command, const std::vector<std::string>& argv) {
  return Json{{"command", command}, {"argv", argv}, {"version", TMSR_VERSION}};
}

void write_manifest(const fs::path& path, const Json& manifest) {
  atomic_write(path, [&](std::ostream& os) { os << manifest.dump(2) << "\n"; });
}

fs::path manifest_path_for(const fs::path& output) {
  fs::path p = output;
  p += ".manifest.json";
  return p;
}

// Model config from an optional key-value file; remaining keys are returned.
KeyValues load_config_file(const std::string& path, ModelConfig& model) {
  KeyValues kv;
  if (!path.empty()) kv = read_key_values(path);
  apply_model_config(kv, model);
  return kv;
}

// ---------------------------------------------------------------- prepare

struct PrepareOptions {
  std::vector<std::string> hr_dirs;
  int scale = 2;
  int f_sub = 32;
  int stride = 14;
  bool augment = false;
  int limit = 0;
  std::string out;
};

int cmd_prepare(const PrepareOptions& o, const std::vector<std::string>& argv) {
  std::vector<fs::path> files;
  for (const auto& dir : o.hr_dirs) {
    auto listed = list_png_files(dir);
    if (listed.empty()) throw Error(ErrorKind::Io, "no PNG images in " + dir);
    files.insert(files.end(), listed.begin(), listed.end());
  }
  if (o.limit > 0 && files.size() > static_cast<std::size_t>(o.limit)) files.resize(o.limit);

  std::vector<ImagePlane> planes;
  planes.reserve(files.size());
  for (const auto& f : files) planes.push_back(quantize(rgb_to_y(load_png(f))));
  const std::size_t source_images = planes.size();
  if (o.augment) planes = augment(planes);

  const PatchOptions popt{o.scale, o.f_sub, o.stride};
  PatchDataset ds;
  ds.scale = o.scale;
  ds.hr_size = o.f_sub;
  ds.lr_size = o.f_sub / o.scale;
  if (o.f_sub % o.scale != 0 || o.stride % o.scale != 0) {
    throw Error(ErrorKind::InvalidArgument, "f-sub and stride must be divisible by scale");
  }
  for (std::size_t i = 0; i < planes.size(); ++i) {
    for (const auto& p : extract_patches(planes[i], popt, static_cast<int>(i))) ds.append(p);
  }
  save_patch_dataset(ds, o.out);

  std::cout << "source images: " << source_images << "\n"
            << "augmented images: " << planes.size() << "\n"
            << "patches: " << ds.count() << "\n";

  Json m = manifest_base("prepare", argv);
  m["config"] = {{"hr_dirs", o.hr_dirs}, {"scale", o.scale},    {"f_sub", o.f_sub},
                 {"stride", o.stride},   {"augment", o.augment}, {"limit", o.limit}};
  m["seed"] = nullptr;
  m["inputs"] = {{"images", source_images}};
  m["outputs"] = {{"patches_file", o.out}};
  m["results"] = {{"augmented_images", planes.size()}, {"patches", ds.count()}};
  if (o.augment) {
    const double dev = (static_cast<double>(ds.count()) - kT91ReferencePatches) / kT91ReferencePatches;
    m["results"]["t91_reference_patches"] = kT91ReferencePatches;
    m["results"]["relative_deviation"] = dev;
    std::cout << "relative to " << kT91ReferencePatches << " (full T91 reference): "
              << (dev >= 0 ? "+" : "") << dev * 100.0 << "%\n";
  }
  write_manifest(manifest_path_for(o.out), m);
  return kOk;
}

// ------------------------------------------------------------------ train

struct TrainOptions {
  std::string patches;
  std::string config;
  std::optional<int> epochs;
  std::optional<double> lr;
  std::optional<std::uint64_t> seed;
  std::optional<int> batch_size;
  std::optional<std::string> activation;
  std::optional<int> checkpoint_every;
  std::uint64_t init_seed = 1;
  std::int64_t max_steps = 0;
  std::string validation_dir;
  std::string resume;
  bool zero_init = false;
  std::string out;
};

int cmd_train(const TrainOptions& o, const std::vector<std::string>& argv) {
  const PatchDataset data = load_patch_dataset(o.patches);

  ModelConfig mc;
  mc.scale = data.scale;
  KeyValues kv = load_config_file(o.config, mc);
  TrainConfig tc;
  apply_train_config(kv, tc);
  reject_unknown_keys(kv, "train config");
  if (o.activation) mc.activation = parse_activation(*o.activation);
  if (o.zero_init) mc.zero_init = true;
  if (o.epochs) tc.epochs = *o.epochs;
  if (o.lr) tc.lr = *o.lr;
  if (o.seed) tc.seed = *o.seed;
  if (o.batch_size) tc.batch_size = *o.batch_size;
  if (o.checkpoint_every) tc.checkpoint_every = *o.checkpoint_every;
  tc.max_steps = o.max_steps;
  tc.validation_dir = o.validation_dir;
  tc.out_dir = o.out;
  mc.validate();
  if (mc.scale != data.scale) {
    throw Error(ErrorKind::InvalidArgument, "config scale " + std::to_string(mc.scale) +
                                                " differs from patch file scale " +
                                                std::to_string(data.scale));
  }

  TrainState state;
  if (!o.resume.empty()) {
    state = load_checkpoint(o.resume);
    if (o.activation && state.model.config().activation != mc.activation) {
      throw Error(ErrorKind::InvalidArgument, "--activation disagrees with the resumed checkpoint");
    }
    mc = state.model.config();
  } else {
    state = TrainState::fresh(TmsrModel::build(mc, o.init_seed));
  }

  fs::create_directories(o.out);
  const fs::path log = fs::path(o.out) / "train_log.csv";
  if (o.resume.empty()) fs::remove(log);

  tc.on_epoch = [&](const EpochLog& e) {
    std::cout << "epoch " << e.epoch << " loss " << e.loss;
    if (!std::isnan(e.val_psnr)) std::cout << " val_psnr " << e.val_psnr;
    std::cout << "\n";
  };
  // Zero epochs writes the initialized (or resumed) model untouched.
  if (tc.epochs > 0) {
    tc.validate();
    state = train(std::move(state), tc, data);
  } else {
    TrainConfig probe = tc;
    probe.epochs = 1;
    probe.validate();
  }

  const fs::path model_path = fs::path(o.out) / "model.tmsr";
  save_checkpoint(state, model_path);
  if (state.degenerate_init) {
    std::cout << "degenerate initialization: body weights did not move\n";
  }

  Json m = manifest_base("train", argv);
  m["config"] = {{"model", model_json(mc)},
                 {"train",
                  {{"epochs", tc.epochs},
                   {"lr", tc.lr},
                   {"batch_size", tc.batch_size},
                   {"checkpoint_every", tc.checkpoint_every},
                   {"max_steps", tc.max_steps},
                   {"validation_dir", o.validation_dir},
                   {"optimizer", "adam"},
                   {"init_seed", o.init_seed}}}};
  m["seed"] = tc.seed;
  m["inputs"] = {{"patches", o.patches}, {"samples", data.count()}, {"resume", o.resume}};
  m["outputs"] = {{"model", model_path.string()}, {"log", log.string()}};
  m["results"] = {{"epochs_completed", state.epoch},
                  {"steps", state.step},
                  {"final_loss", number_or_string(state.running_loss)},
                  {"best_val_psnr", number_or_string(state.best_val_psnr)},
                  {"degenerate_init", state.degenerate_init}};
  write_manifest(fs::path(o.out) / "train.manifest.json", m);
  std::cout << "wrote " << model_path.string() << "\n";
  return kOk;
}

// ------------------------------------------------------------------- eval

struct EvalOptions {
  std::string model;
  std::string baseline;
  std::string hr_dir;
  std::optional<int> scale;
  std::optional<int> shave;
  std::string report;
};

int cmd_eval(const EvalOptions& o, const std::vector<std::string>& argv) {
  if (o.model.empty() == o.baseline.empty()) {
    throw Error(ErrorKind::InvalidArgument, "give exactly one of --model or --baseline");
  }
  Reconstructor reconstruct;
  int scale = o.scale.value_or(2);
  Json method;
  if (!o.model.empty()) {
    TmsrModel model = load_weights(o.model);
    if (o.scale && *o.scale != model.config().scale) {
      throw Error(ErrorKind::InvalidArgument, "--scale " + std::to_string(*o.scale) +
                                                  " differs from the model scale " +
                                                  std::to_string(model.config().scale));
    }
    scale = model.config().scale;
    reconstruct = model_reconstructor(model);
    method = {{"model", o.model}, {"model_config", model_json(model.config())}};
  } else if (o.baseline == "bicubic") {
    reconstruct = bicubic_reconstructor(scale);
    method = {{"baseline", "bicubic"}};
  } else {
    reconstruct = identity_reconstructor();
    method = {{"baseline", "identity"}};
  }
  const int shave = o.shave.value_or(scale);
  MetricReport report = evaluate_folder(reconstruct, o.hr_dir, scale, shave);
  report.write_csv(std::cout);
  if (!o.report.empty()) {
    report.write_csv(fs::path(o.report));
    Json m = manifest_base("eval", argv);
    m["config"] = {{"method", method}, {"scale", scale}, {"shave", shave}, {"domain", report.domain}};
    m["seed"] = nullptr;
    m["inputs"] = {{"hr_dir", o.hr_dir}};
    m["outputs"] = {{"report", o.report}};
    m["results"] = {{"images", report.rows.size()},
                    {"mean_psnr", number_or_string(report.mean_psnr)},
                    {"mean_ssim", number_or_string(report.mean_ssim)}};
    write_manifest(manifest_path_for(o.report), m);
  }
  return kOk;
}

// ---------------------------------------------------------------- upscale

struct UpscaleOptions {
  std::string model;
  std::string in;
  std::string out;
  std::optional<int> scale;
};

int cmd_upscale(const UpscaleOptions& o, const std::vector<std::string>& argv) {
  TmsrModel model = load_weights(o.model);
  if (o.scale && *o.scale != model.config().scale) {
    throw Error(ErrorKind::InvalidArgument, "--scale " + std::to_string(*o.scale) +
                                                " differs from the model scale " +
                                                std::to_string(model.config().scale));
  }
  const ImageRGB lr = load_png(o.in);
  const ImageRGB hr = upscale_rgb(model, lr);
  save_png(hr, o.out);
  std::cout << lr.width << "x" << lr.height << " -> " << hr.width << "x" << hr.height << "\n";

  Json m = manifest_base("upscale", argv);
  m["config"] = {{"model_config", model_json(model.config())}};
  m["seed"] = nullptr;
  m["inputs"] = {{"model", o.model}, {"image", o.in}};
  m["outputs"] = {{"image", o.out}};
  write_manifest(manifest_path_for(o.out), m);
  return kOk;
}

// ----------------------------------------------------------- count-params

struct CountOptions {
  std::string config;
  std::optional<std::size_t> assert_max;
};

int cmd_count_params(const CountOptions& o) {
  ModelConfig mc;
  KeyValues kv = load_config_file(o.config, mc);
  reject_unknown_keys(kv, "model config");
  mc.validate();

  std::printf("%-22s %8s %8s %8s %8s\n", "layer", "weights", "biases", "alphas", "total");
  std::size_t total = 0;
  for (const auto& row : param_breakdown(mc)) {
    std::printf("%-22s %8zu %8zu %8zu %8zu\n", row.layer.c_str(), row.weights, row.biases,
                row.alphas, row.total());
    total += row.total();
  }
  std::printf("%-22s %8s %8s %8s %8zu\n", "total", "", "", "", total);
  if (o.assert_max && total > *o.assert_max) {
    throw CheckFailed{"parameter count " + std::to_string(total) + " exceeds " +
                      std::to_string(*o.assert_max)};
  }
  return kOk;
}

// -------------------------------------------------------------- gradcheck

struct GradcheckOptions {
  std::string config;
  int size = 16;
  std::uint64_t seed = 1;
  double epsilon = 1e-3;
  double tolerance = 1e-3;
  bool input = false;
};

int cmd_gradcheck(const GradcheckOptions& o) {
  ModelConfig mc;
  KeyValues kv = load_config_file(o.config, mc);
  reject_unknown_keys(kv, "model config");
  ModelGradCheckOptions opt;
  opt.size = o.size;
  opt.seed = o.seed;
  opt.check_input = o.input;
  opt.check.epsilon = o.epsilon;
  opt.check.tolerance = o.tolerance;
  const GradCheckReport r = check_model_gradients(mc, opt);
  std::cout << (o.input ? "input" : "parameter") << " gradients, " << o.size << "x" << o.size
            << " input: " << r.summary() << "\n";
  if (!r.passed) throw CheckFailed{"gradient check failed"};
  return kOk;
}

// ------------------------------------------------------------------ rerun

int cmd_rerun(const std::string& manifest_path, int depth);

int dispatch(const std::vector<std::string>& args, int depth) {
  CLI::App app{"Tiny multi-path super-resolution toolkit", "tmsr"};
  app.set_version_flag("--version", TMSR_VERSION);
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  app.footer("Exit codes: 0 ok, 1 check failed, 2 usage, 3 data, 4 numeric abort.\n"
             "TMSR_THREADS caps kernel threads (0 or 1: sequential).");

  PrepareOptions prep;
  auto* prepare = app.add_subcommand("prepare", "Build a patch container from HR PNG folders");
  prepare->add_option("--hr-dir", prep.hr_dirs, "HR image folder (repeatable)")->required();
  prepare->add_option("--scale", prep.scale, "Upscaling factor");
  prepare->add_option("--f-sub", prep.f_sub, "HR patch size");
  prepare->add_option("--stride", prep.stride, "Patch stride");
  prepare->add_flag("--augment", prep.augment, "Scale x rotation augmentation (20 variants)");
  prepare->add_option("--limit", prep.limit, "Use only the first N images (0: all)");
  prepare->add_option("--out", prep.out, "Patch container to write")->required();

  TrainOptions tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a patch container");
  train_cmd->add_option("--patches", tr.patches, "Patch container from prepare")->required();
  train_cmd->add_option("--config", tr.config, "Key-value config file (model and train keys)");
  train_cmd->add_option("--epochs", tr.epochs, "Epochs (default 5000)");
  train_cmd->add_option("--lr", tr.lr, "Adam learning rate (default 1e-4)");
  train_cmd->add_option("--seed", tr.seed, "Data order seed (default 1)");
  train_cmd->add_option("--batch-size", tr.batch_size, "Mini-batch size (default 64)");
  train_cmd->add_option("--activation", tr.activation, "prelu or relu (default prelu)");
  train_cmd->add_option("--checkpoint-every", tr.checkpoint_every,
                        "Validate and checkpoint every N epochs (default 0: off)");
  train_cmd->add_option("--init-seed", tr.init_seed, "Weight initialization seed");
  train_cmd->add_option("--max-steps", tr.max_steps, "Stop after N optimizer steps (0: no limit)");
  train_cmd->add_option("--validation-dir", tr.validation_dir, "HR folder for validation PSNR");
  train_cmd->add_option("--resume", tr.resume, "Checkpoint to continue from");
  train_cmd->add_flag("--zero-init", tr.zero_init, "Start all conv weights at zero (untrainable)");
  train_cmd->add_option("--out", tr.out, "Output directory")->required();

  EvalOptions ev;
  auto* eval = app.add_subcommand("eval", "PSNR/SSIM report over an HR folder");
  eval->add_option("--model", ev.model, "Weights file");
  eval->add_option("--baseline", ev.baseline, "Reference method instead of a model")
      ->check(CLI::IsMember({"bicubic", "identity"}));
  eval->add_option("--hr-dir", ev.hr_dir, "HR image folder")->required();
  eval->add_option("--scale", ev.scale, "Scale (default: model scale, else 2)");
  eval->add_option("--shave", ev.shave, "Border pixels excluded (default: scale)");
  eval->add_option("--report", ev.report, "CSV report path");

  UpscaleOptions up;
  auto* upscale = app.add_subcommand("upscale", "Upscale one PNG");
  upscale->add_option("--model", up.model, "Weights file")->required();
  upscale->add_option("--in", up.in, "Input PNG")->required();
  upscale->add_option("--out", up.out, "Output PNG")->required();
  upscale->add_option("--scale", up.scale, "Expected scale (must match the model)");

  CountOptions cnt;
  auto* count = app.add_subcommand("count-params", "Parameter count per layer");
  count->add_option("--config", cnt.config, "Key-value model config file");
  count->add_option("--assert-max", cnt.assert_max, "Exit 1 if the total exceeds this");

  GradcheckOptions gc;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of the full graph");
  grad->add_option("--config", gc.config, "Key-value model config file");
  grad->add_option("--size", gc.size, "LR input edge");
  grad->add_option("--seed", gc.seed, "Seed for model, input and target");
  grad->add_option("--epsilon", gc.epsilon, "Finite-difference step");
  grad->add_option("--tolerance", gc.tolerance, "Max relative error");
  grad->add_flag("--input", gc.input, "Check the input gradient instead of the parameters");

  std::string manifest;
  auto* rerun = app.add_subcommand("rerun", "Repeat the command recorded in a run manifest");
  rerun->add_option("manifest", manifest, "Manifest JSON")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  if (*prepare) return cmd_prepare(prep, args);
  if (*train_cmd) return cmd_train(tr, args);
  if (*eval) return cmd_eval(ev, args);
  if (*upscale) return cmd_upscale(up, args);
  if (*count) return cmd_count_params(cnt);
  if (*grad) return cmd_gradcheck(gc);
  if (*rerun) return cmd_rerun(manifest, depth);
  return kUsage;
}

int cmd_rerun(const std::string& manifest_path, int depth) {
  if (depth > 0) throw Error(ErrorKind::InvalidArgument, "a rerun manifest cannot itself rerun");
  std::ifstream is(manifest_path);
  if (!is) throw Error(ErrorKind::Io, "cannot open manifest " + manifest_path);
  Json m;
  try {
    m = Json::parse(is);
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::Io, "malformed manifest " + manifest_path + ": " + e.what());
  }
  if (!m.contains("argv") || !m["argv"].is_array()) {
    throw Error(ErrorKind::Io, "manifest " + manifest_path + " has no argv");
  }
  return dispatch(m["argv"].get<std::vector<std::string>>(), depth + 1);
}

}  // namespace

int run(const std::vector<std::string>& args) {
  try {
    return dispatch(args, 0);
  } catch (const CheckFailed& e) {
    std::cerr << "check failed: " << e.message << "\n";
    return kCheckFailed;
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error (io): " << e.what() << "\n";
    return kData;
  }
}

}  // namespace tmsr::cli
