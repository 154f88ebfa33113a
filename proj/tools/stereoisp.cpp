// Command-line front end: stereoisp <subcommand> [flags]. See README.md.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stereoisp.hpp"

#ifndef STEREOISP_COMMIT
#define STEREOISP_COMMIT "unknown"
#endif

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace stereoisp;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_usage = 1;
constexpr int exit_runtime = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// JSON config files for CLI11. Keys at the top level belong to the active
// subcommand; an object named after a subcommand is accepted too, which is
// the shape manifest.json is written in.
class JsonConfig : public CLI::Config {
 public:
  explicit JsonConfig(std::string section) : section_(std::move(section)) {}

  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    return resolved(app, default_also).dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    try {
      input >> j;
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    std::vector<CLI::ConfigItem> items;
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it.value().is_object()) {
        if (it.key() != section_) continue;
        for (auto sub = it.value().begin(); sub != it.value().end(); ++sub) add(items, sub.key(), sub.value());
      } else {
        add(items, it.key(), it.value());
      }
    }
    return items;
  }

  /// Every configurable long option of `app` with its effective value.
  static json resolved(const CLI::App* app, bool default_also = true) {
    json j = json::object();
    for (const CLI::Option* opt : app->get_options({})) {
      if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
      const std::string name = opt->get_lnames()[0];
      if (opt->get_type_size() != 0) {
        if (opt->count() == 1) {
          j[name] = opt->results().at(0);
        } else if (opt->count() > 1) {
          j[name] = opt->results();
        } else if (default_also && !opt->get_default_str().empty()) {
          j[name] = opt->get_default_str();
        }
      } else {
        const bool on = opt->count() > 0 && opt->as<bool>();
        if (on || default_also) j[name] = on;
      }
    }
    return j;
  }

 private:
  void add(std::vector<CLI::ConfigItem>& items, const std::string& key, const json& value) const {
    CLI::ConfigItem item;
    item.parents = {section_};
    item.name = key;
    if (value.is_boolean()) {
      item.inputs = {value.get<bool>() ? "true" : "false"};
    } else if (value.is_string()) {
      item.inputs = {value.get<std::string>()};
    } else if (value.is_number()) {
      item.inputs = {value.dump()};
    } else if (value.is_array()) {
      for (const auto& v : value) item.inputs.push_back(v.is_string() ? v.get<std::string>() : v.dump());
    } else if (value.is_null()) {
      return;
    } else {
      throw CLI::ConversionError("config key '" + key + "' has an unsupported value");
    }
    items.push_back(std::move(item));
  }

  std::string section_;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
}

std::string default_data_root() {
  const char* env = std::getenv("STEREOISP_DATA_ROOT");
  return env ? env : "";
}

// ---------------------------------------------------------------------------
// Shared option groups

struct NoiseFlags {
  std::string kind = "poisson";
  double photons = 10.0;
  double sigma = 0.0;

  void add(CLI::App* app) {
    app->add_option("--noise", kind, "Noise model: poisson | gaussian | poisson-gaussian");
    app->add_option("--photons", photons, "Photons at full scale (lambda)");
    app->add_option("--sigma", sigma, "Gaussian read-noise std in normalized units");
  }

  NoiseModel model() const {
    NoiseModel n;
    n.kind = parse_noise_kind(kind);
    n.photons = photons;
    n.sigma = sigma;
    if (n.kind == NoiseModel::Kind::gaussian) n.photons = 1.0;
    n.validate();
    return n;
  }
};

struct DatasetFlags {
  std::string dataset = "toy";
  std::string data_root = default_data_root();
  std::string split = "kitti-160-40";
  std::string kitti_disparity = "disp_occ_0";
  int toy_count = 200;
  int toy_height = 64;
  int toy_width = 128;
  std::uint64_t toy_seed = 1;
  int toy_max_disp = 16;

  void add(CLI::App* app) {
    app->add_option("--dataset", dataset, "toy | kitti | drivingstereo");
    app->add_option("--data-root", data_root, "Dataset root (default: $STEREOISP_DATA_ROOT)");
    app->add_option("--split", split, "kitti-160-40 | ratio:<rho>:<seed>");
    app->add_option("--kitti-disparity", kitti_disparity, "KITTI disparity folder (disp_occ_0 | disp_noc_0)");
    app->add_option("--toy-count", toy_count, "Toy scenes");
    app->add_option("--toy-height", toy_height, "Toy scene height");
    app->add_option("--toy-width", toy_width, "Toy scene width");
    app->add_option("--toy-seed", toy_seed, "Toy scene seed");
    app->add_option("--toy-max-disp", toy_max_disp, "Toy maximum disparity (even)");
  }

  std::vector<StereoSample> load() const {
    if (dataset == "toy") return generate_toy_dataset({toy_count, toy_height, toy_width, toy_seed, toy_max_disp});
    if (dataset != "kitti" && dataset != "drivingstereo") throw UsageError("unknown dataset '" + dataset + "'");
    if (data_root.empty()) throw UsageError("--data-root (or STEREOISP_DATA_ROOT) is required for " + dataset);
    LoadOptions opt;
    opt.kitti_disparity_dir = kitti_disparity;
    return load_stereo_dataset(data_root, parse_layout(dataset), opt);
  }

  Split load_split() const { return split_dataset(load(), parse_split_scheme(split)); }
};

struct ExperimentFlags {
  int stage = 1;
  std::string variant = "warped-gt";
  int patch_height = 32;
  int patch_width = 64;
  int batch = 8;
  double lr = 1e-3;
  double lr_decay_factor = 10.0;
  int lr_decay_period = 100;
  int epochs = 60;
  int patience = 20;
  std::uint64_t seed = 1;
  std::uint64_t validation_seed = 1000;
  int depth = 4;
  int width = 16;
  int kernel = 3;
  bool reference_model = false;
  std::string warp_mode = "raw";
  std::string fill = "primary";
  int bm_max_disp = 8;
  int bm_block = 5;
  bool cold_start = false;
  NoiseFlags noise;

  void add(CLI::App* app) {
    app->add_option("--stage", stage, "Training stage (1 or 2)");
    app->add_option("--variant", variant,
                    "baseline-single | unwarped-pair | warped-gt | warped-estimated | same-noise");
    app->add_option("--patch-height", patch_height, "Training patch height (even)");
    app->add_option("--patch-width", patch_width, "Training patch width (even)");
    app->add_option("--batch", batch, "Batch size");
    app->add_option("--lr", lr, "Initial learning rate");
    app->add_option("--lr-decay-factor", lr_decay_factor, "Learning-rate decay factor");
    app->add_option("--lr-decay-period", lr_decay_period, "Epochs between learning-rate decays");
    app->add_option("--epochs", epochs, "Epoch budget");
    app->add_option("--patience", patience, "Plateau patience in epochs (0 = off)");
    app->add_option("--seed", seed, "Run seed (init, patches, noise)");
    app->add_option("--validation-seed", validation_seed, "Noise seed of the validation set");
    app->add_option("--depth", depth, "Half-resolution blocks N");
    app->add_option("--width", width, "Per-input width W (layers run 2W channels)");
    app->add_option("--kernel", kernel, "Convolution kernel size");
    app->add_flag("--reference-model", reference_model, "Use the full-size model (depth 15, width 64)");
    app->add_option("--warp-mode", warp_mode, "raw | packed");
    app->add_option("--fill", fill, "Fill for uncovered pixels: primary | zero");
    app->add_option("--bm-max-disp", bm_max_disp, "Block-matcher search range (half-res pixels)");
    app->add_option("--bm-block", bm_block, "Block-matcher window (odd, half-res pixels)");
    app->add_flag("--cold-start", cold_start, "Allow stage 2 from a fresh model");
    noise.add(app);
  }

  ExperimentConfig config() const {
    ExperimentConfig c;
    try {
      c.stage = stage;
      c.variant = parse_variant(variant);
      c.patch_height = patch_height;
      c.patch_width = patch_width;
      c.batch = batch;
      c.lr = lr;
      c.lr_decay_factor = lr_decay_factor;
      c.lr_decay_period = lr_decay_period;
      c.epochs = epochs;
      c.patience = patience;
      c.noise = noise.model();
      c.seed = seed;
      c.validation_seed = validation_seed;
      c.model.depth = reference_model ? 15 : depth;
      c.model.width = reference_model ? 64 : width;
      c.model.kernel = kernel;
      c.model.ports = c.variant == Variant::baseline_single ? 1 : 2;
      c.warp_mode = parse_warp_mode(warp_mode);
      c.fill = parse_fill_policy(fill);
      c.bm_max_disp = bm_max_disp;
      c.bm_block = bm_block;
      c.cold_start = cold_start;
      c.validate();
    } catch (const std::runtime_error& e) {
      throw UsageError(e.what());
    }
    return c;
  }
};

struct Context {
  CLI::App* sub = nullptr;
  std::string out;
  int threads = 1;
};

void write_manifest(const Context& ctx, json extra = json::object()) {
  json m;
  m["command"] = ctx.sub->get_name();
  m[ctx.sub->get_name()] = JsonConfig::resolved(ctx.sub);
  m["threads"] = ctx.threads;
  m["commit"] = STEREOISP_COMMIT;
  for (auto& [k, v] : extra.items()) m[k] = v;
  write_text(fs::path(ctx.out) / "manifest.json", m.dump(2) + "\n");
}

void log_epoch(const std::string& run, const EpochProgress& p) {
  std::cerr << "[" << run << "] epoch " << p.epoch + 1 << "/" << p.total << "  loss " << std::setprecision(5)
            << p.loss << "  val " << std::fixed << std::setprecision(3) << p.val_psnr << " dB  lr "
            << std::defaultfloat << p.lr << "\n";
}

// ---------------------------------------------------------------------------
// Subcommands

int run_synth(const Context& ctx, const std::string& input, const NoiseFlags& nf, std::uint64_t seed) {
  const NoiseModel noise = nf.model();
  ensure_dir(ctx.out);
  std::vector<std::pair<fs::path, fs::path>> pairs;  // (primary source, secondary source or empty)
  const fs::path in(input);
  auto pngs = [](const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
  };
  if (!fs::is_directory(in)) throw UsageError("--input '" + input + "' is not a directory");
  if (fs::is_directory(in / "image_2") && fs::is_directory(in / "image_3")) {
    for (const auto& left : pngs(in / "image_2")) {
      const fs::path right = in / "image_3" / left.filename();
      if (!fs::exists(right)) throw IoError("missing right image for '" + left.stem().string() + "'");
      pairs.emplace_back(left, right);
    }
  } else {
    for (const auto& p : pngs(in)) pairs.emplace_back(p, fs::path());
  }
  if (pairs.empty()) throw IoError("no PNG images under '" + input + "'");
  std::uint64_t index = 0;
  for (const auto& [p, s] : pairs) {
    const std::string id = p.stem().string();
    RgbImage left = read_rgb_png(p.string());
    RgbImage right = s.empty() ? left : read_rgb_png(s.string());
    const int h = left.height / 2 * 2;
    const int w = left.width / 2 * 2;
    left = crop(left, 0, 0, h, w);
    right = crop(right, 0, 0, h, w);
    const auto primary = add_noise(bayer_mosaic(left), noise, derive_seed({seed, index, 1}));
    const auto secondary = add_noise(bayer_mosaic(right), noise, derive_seed({seed, index, 2}));
    write_mosaic_png((fs::path(ctx.out) / (id + "_primary.png")).string(), primary);
    write_mosaic_png((fs::path(ctx.out) / (id + "_secondary.png")).string(), secondary);
    write_rgb_png((fs::path(ctx.out) / (id + "_preview.png")).string(), clamp01(demosaic_bilinear(primary)));
    std::cerr << "synth " << id << "\n";
    ++index;
  }
  write_manifest(ctx, {{"seeds", {{"noise", seed}}}, {"outputs", index}});
  return exit_ok;
}

int run_warp(const Context& ctx, const std::string& secondary_path, const std::string& disparity_path,
             const std::string& primary_path, const std::string& mode, const std::string& fill) {
  const auto secondary = read_mosaic_png(secondary_path);
  const auto disparity = decode_disparity_png(read_png(disparity_path));
  const FillPolicy policy = parse_fill_policy(fill);
  std::optional<BayerMosaic> primary;
  if (policy == FillPolicy::primary) {
    if (primary_path.empty()) throw UsageError("--fill primary needs --primary");
    primary = read_mosaic_png(primary_path);
  }
  const auto result = warp_backward(secondary, disparity, parse_warp_mode(mode), policy, primary ? &*primary : nullptr);
  ensure_dir(ctx.out);
  write_mosaic_png((fs::path(ctx.out) / "warped.png").string(), result.warped);
  PngData mask{result.warped.width, result.warped.height, 1, 8, {}};
  for (auto c : result.coverage) mask.samples.push_back(c ? 255 : 0);
  write_png((fs::path(ctx.out) / "coverage.png").string(), mask);
  write_manifest(ctx);
  return exit_ok;
}

int run_disparity(const Context& ctx, const std::string& left, const std::string& right, int max_disp, int block) {
  const auto d = estimate_disparity_blockmatch(read_mosaic_png(left), read_mosaic_png(right), max_disp, block);
  ensure_dir(ctx.out);
  write_png((fs::path(ctx.out) / "disparity.png").string(), encode_disparity_png(d));
  write_manifest(ctx);
  return exit_ok;
}

int run_toygen(const Context& ctx, const DatasetFlags& df) {
  const auto samples = generate_toy_dataset({df.toy_count, df.toy_height, df.toy_width, df.toy_seed, df.toy_max_disp});
  save_stereo_dataset(ctx.out, samples);
  write_manifest(ctx, {{"seeds", {{"toy", df.toy_seed}}}, {"samples", samples.size()}});
  return exit_ok;
}

int run_gradcheck(const Context& ctx, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto results = run_gradcheck_suite(seed);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  bool ok = true;
  json rows = json::array();
  for (const auto& r : results) {
    std::cout << (r.passed() ? "PASS " : "FAIL ") << std::left << std::setw(30) << r.name << " rel_err "
              << std::scientific << std::setprecision(3) << r.rel_error << " (tol " << r.tolerance << ", "
              << std::defaultfloat << r.checked << " entries)\n";
    ok = ok && r.passed();
    rows.push_back({{"name", r.name}, {"rel_error", r.rel_error}, {"tolerance", r.tolerance},
                    {"checked", r.checked}, {"passed", r.passed()}});
  }
  std::cout << "gradcheck " << (ok ? "passed" : "FAILED") << " in " << std::fixed << std::setprecision(2)
            << seconds << " s\n";
  if (!ctx.out.empty()) {
    ensure_dir(ctx.out);
    write_text(fs::path(ctx.out) / "gradcheck.json", json({{"results", rows}, {"seconds", seconds}}).dump(2) + "\n");
    write_manifest(ctx, {{"seeds", {{"gradcheck", seed}}}});
  }
  return ok ? exit_ok : exit_runtime;
}

json seeds_of(const ExperimentConfig& c, const DatasetFlags& df) {
  json s = {{"run", c.seed}, {"validation", c.validation_seed}};
  if (df.dataset == "toy") s["toy"] = df.toy_seed;
  return s;
}

int run_train(const Context& ctx, const DatasetFlags& df, const ExperimentFlags& ef, const std::string& init_path,
              const std::string& resume_path) {
  const ExperimentConfig config = ef.config();
  if (!init_path.empty() && !resume_path.empty()) throw UsageError("--init and --resume are exclusive");
  const Split split = df.load_split();
  ensure_dir(ctx.out);

  TrainState<float> st;
  if (!resume_path.empty()) {
    const Checkpoint ckpt = load_checkpoint(resume_path);
    if (!ckpt.metadata.contains("experiment")) throw UsageError("'" + resume_path + "' is not a training state");
    json stored = ckpt.metadata["experiment"];
    json wanted = to_json(config);
    stored.erase("epochs");
    wanted.erase("epochs");
    if (stored != wanted) {
      throw UsageError("--resume: experiment config differs from the stored run\n  stored: " + stored.dump() +
                       "\n  flags:  " + wanted.dump());
    }
    st = restore_train_state<float>(ckpt);
  } else {
    std::optional<ModelParams<float>> init;
    if (!init_path.empty()) {
      const Checkpoint ckpt = load_checkpoint(init_path);
      const ModelConfig mc = checkpoint_model_config(ckpt);
      if (!(mc == config.model)) {
        throw UsageError("--init model config differs: checkpoint {" + mc.str() + "} vs flags {" +
                         config.model.str() + "}");
      }
      init = restore_params<float>(ckpt, mc);
    }
    try {
      st = init_training<float>(config, split.test, init);
    } catch (const TrainingError& e) {
      throw UsageError(e.what());
    }
  }
  train(config, split.train, split.test, st, [](const EpochProgress& p) { log_epoch("train", p); });

  const fs::path out(ctx.out);
  json meta = {{"experiment", to_json(config)}, {"best_epoch", st.report.best_epoch},
               {"best_psnr", st.report.best_epoch >= 0 ? json(st.report.best_psnr) : json(nullptr)}};
  save_checkpoint(out / "model.ckpt", make_model_checkpoint(st.best, meta));
  save_checkpoint(out / "state.ckpt", make_train_checkpoint(st, config));
  st.report.best_checkpoint = (out / "model.ckpt").string();
  write_text(out / "report.json", to_json(st.report).dump(2) + "\n");
  write_text(out / "report.csv", train_csv(st.report));
  write_manifest(ctx, {{"seeds", seeds_of(config, df)}, {"train_samples", split.train.size()},
                       {"test_samples", split.test.size()}});
  std::cerr << "best val PSNR " << st.report.best_psnr << " dB at epoch " << st.report.best_epoch + 1 << "\n";
  return exit_ok;
}

int run_eval(const Context& ctx, const DatasetFlags& df, const ExperimentFlags& ef, const std::string& ckpt_path,
             std::uint64_t noise_seed, bool whole_dataset) {
  const ExperimentConfig config = ef.config();
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const ModelConfig stored = checkpoint_model_config(ckpt);
  if (!(stored == config.model)) {
    throw UsageError("checkpoint model config does not match the requested config\n  checkpoint: " + stored.str() +
                     "\n  flags:      " + config.model.str());
  }
  auto params = restore_params<float>(ckpt, stored);
  const auto samples = whole_dataset ? df.load() : df.load_split().test;
  const EvalReport report = evaluate(params, samples, config, noise_seed);
  ensure_dir(ctx.out);
  const fs::path out(ctx.out);
  write_text(out / "eval.csv", eval_csv(report));
  write_text(out / "eval.json",
             json({{"mean_psnr_db", report.mean_psnr}, {"samples", report.samples.size()},
                   {"variant", to_string(config.variant)}})
                     .dump(2) +
                 "\n");
  json seeds = seeds_of(config, df);
  seeds["eval_noise"] = noise_seed;
  write_manifest(ctx, {{"seeds", seeds}});
  std::cout << std::fixed << std::setprecision(4) << report.mean_psnr << "\n";
  return exit_ok;
}

int run_ablate(const Context& ctx, const DatasetFlags& df, const ExperimentFlags& ef, int stage1_epochs,
               int stage2_epochs, std::uint64_t test_seed) {
  AblationOptions opt;
  opt.base = ef.config();
  opt.dataset = df.dataset;
  opt.stage1_epochs = stage1_epochs;
  opt.stage2_epochs = stage2_epochs;
  opt.test_seed = test_seed;
  if (stage1_epochs < 1 || stage2_epochs < 1) throw UsageError("stage epoch budgets must be >= 1");
  const Split split = df.load_split();
  const AblationReport report = run_ablation(opt, split.train, split.test, nullptr, log_epoch);
  ensure_dir(ctx.out);
  AblationReport with_meta = report;
  with_meta.metadata["commit"] = STEREOISP_COMMIT;
  write_text(fs::path(ctx.out) / "ablation.csv", ablation_csv(report));
  write_text(fs::path(ctx.out) / "ablation.json", to_json(with_meta).dump(2) + "\n");
  json seeds = seeds_of(opt.base, df);
  seeds["test"] = test_seed;
  write_manifest(ctx, {{"seeds", seeds}});
  std::cout << ablation_csv(report);
  return exit_ok;
}

std::string active_subcommand(int argc, char** argv, const std::vector<std::string>& names) {
  for (int i = 1; i < argc; ++i)
    for (const auto& n : names)
      if (n == argv[i]) return n;
  return "";
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> commands{"synth", "warp", "disparity", "train", "eval", "ablate", "toygen", "gradcheck"};
  CLI::App app{"Dual-camera raw demosaicking and denoising toolkit"};
  app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.fallthrough();
  app.config_formatter(std::make_shared<JsonConfig>(active_subcommand(argc, argv, commands)));
  app.allow_config_extras(CLI::config_extras_mode::ignore);

  Context ctx;
  std::string config_path;
  app.set_config("--config", "", "JSON file supplying any flag; command-line flags win")->configurable(false);
  app.add_option("--threads", ctx.threads, "Worker threads (1 = deterministic sequential mode)")->configurable(false);

  auto add_out = [&](CLI::App* sub, bool required) {
    auto* o = sub->add_option("--out", ctx.out, "Output directory");
    if (required) o->required();
  };

  auto* synth = app.add_subcommand("synth", "RGB images -> noisy mosaic pairs + demosaicked preview");
  std::string synth_input;
  NoiseFlags synth_noise;
  std::uint64_t synth_seed = 1;
  synth->add_option("--input", synth_input, "Directory of RGB PNGs (or a KITTI-style root)")->required();
  synth->add_option("--seed", synth_seed, "Noise seed");
  synth_noise.add(synth);
  add_out(synth, true);

  auto* warp = app.add_subcommand("warp", "Backward-warp a secondary mosaic by a disparity map");
  std::string warp_secondary, warp_disparity, warp_primary, warp_mode = "raw", warp_fill = "primary";
  warp->add_option("--secondary", warp_secondary, "Secondary mosaic PNG (16-bit)")->required();
  warp->add_option("--disparity", warp_disparity, "Disparity PNG (16-bit, value/256 px, 0 invalid)")->required();
  warp->add_option("--primary", warp_primary, "Primary mosaic PNG (needed for --fill primary)");
  warp->add_option("--mode", warp_mode, "raw | packed");
  warp->add_option("--fill", warp_fill, "primary | zero");
  add_out(warp, true);

  auto* disparity = app.add_subcommand("disparity", "SAD block-matching disparity from a raw pair");
  std::string disp_left, disp_right;
  int disp_max = 8, disp_block = 5;
  disparity->add_option("--left", disp_left, "Left (primary) mosaic PNG")->required();
  disparity->add_option("--right", disp_right, "Right (secondary) mosaic PNG")->required();
  disparity->add_option("--max-disp", disp_max, "Search range in half-resolution pixels");
  disparity->add_option("--block", disp_block, "Odd window size in half-resolution pixels");
  add_out(disparity, true);

  auto* train_cmd = app.add_subcommand("train", "Train one stage / variant");
  DatasetFlags train_data;
  ExperimentFlags train_exp;
  std::string train_init, train_resume;
  train_data.add(train_cmd);
  train_exp.add(train_cmd);
  train_cmd->add_option("--init", train_init, "Stage-1 checkpoint to fine-tune from");
  train_cmd->add_option("--resume", train_resume, "state.ckpt of an unfinished run");
  add_out(train_cmd, true);

  auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint on the test split");
  DatasetFlags eval_data;
  ExperimentFlags eval_exp;
  std::string eval_ckpt;
  std::uint64_t eval_seed = 2000;
  bool eval_all = false;
  eval_data.add(eval_cmd);
  eval_exp.add(eval_cmd);
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Model checkpoint")->required();
  eval_cmd->add_option("--noise-seed", eval_seed, "Noise seed of the evaluation inputs");
  eval_cmd->add_flag("--all", eval_all, "Score every sample instead of the test split");
  add_out(eval_cmd, true);

  auto* ablate = app.add_subcommand("ablate", "Baseline / unwarped / warped / same-noise ablation table");
  DatasetFlags ablate_data;
  ExperimentFlags ablate_exp;
  int ablate_e1 = 40, ablate_e2 = 20;
  std::uint64_t ablate_test_seed = 2000;
  ablate_data.add(ablate);
  ablate_exp.add(ablate);
  ablate->add_option("--stage1-epochs", ablate_e1, "Stage-1 epoch budget (baseline gets stage1 + stage2)");
  ablate->add_option("--stage2-epochs", ablate_e2, "Stage-2 epoch budget");
  ablate->add_option("--test-seed", ablate_test_seed, "Noise seed of the final table");
  add_out(ablate, false);

  auto* toygen = app.add_subcommand("toygen", "Write a toy stereo dataset in KITTI layout");
  DatasetFlags toy_data;
  toygen->add_option("--count", toy_data.toy_count, "Scenes");
  toygen->add_option("--height", toy_data.toy_height, "Height (even)");
  toygen->add_option("--width", toy_data.toy_width, "Width (even)");
  toygen->add_option("--seed", toy_data.toy_seed, "Seed");
  toygen->add_option("--max-disp", toy_data.toy_max_disp, "Maximum disparity (even, < width/4)");
  add_out(toygen, true);

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  std::uint64_t gc_seed = 1;
  gradcheck->add_option("--seed", gc_seed, "Seed of the random test tensors");
  add_out(gradcheck, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_usage;
  }

  set_thread_count(ctx.threads);
  try {
    CLI::App* sub = app.get_subcommands().front();
    ctx.sub = sub;
    const std::string name = sub->get_name();
    if (name == "ablate" && ctx.out.empty()) {
      std::ostringstream dir;
      dir << "ablate-" << ablate_data.dataset << "-seed" << ablate_exp.seed;
      ctx.out = dir.str();
    }
    if (name == "synth") return run_synth(ctx, synth_input, synth_noise, synth_seed);
    if (name == "warp") return run_warp(ctx, warp_secondary, warp_disparity, warp_primary, warp_mode, warp_fill);
    if (name == "disparity") return run_disparity(ctx, disp_left, disp_right, disp_max, disp_block);
    if (name == "train") return run_train(ctx, train_data, train_exp, train_init, train_resume);
    if (name == "eval") return run_eval(ctx, eval_data, eval_exp, eval_ckpt, eval_seed, eval_all);
    if (name == "ablate") return run_ablate(ctx, ablate_data, ablate_exp, ablate_e1, ablate_e2, ablate_test_seed);
    if (name == "toygen") return run_toygen(ctx, toy_data);
    if (name == "gradcheck") return run_gradcheck(ctx, gc_seed);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_usage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_runtime;
  }
  return exit_usage;
}
