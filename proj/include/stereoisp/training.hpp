#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stereoisp/adam.hpp"
#include "stereoisp/checkpoint.hpp"
#include "stereoisp/dataset.hpp"
#include "stereoisp/model.hpp"
#include "stereoisp/raw_pipeline.hpp"
#include "stereoisp/warping.hpp"

namespace stereoisp {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// What the second network port receives.
enum class Variant { baseline_single, unwarped_pair, warped_gt, warped_estimated, same_noise };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::baseline_single:
      return "baseline-single";
    case Variant::unwarped_pair:
      return "unwarped-pair";
    case Variant::warped_gt:
      return "warped-gt";
    case Variant::warped_estimated:
      return "warped-estimated";
    case Variant::same_noise:
      return "same-noise";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  for (auto v : {Variant::baseline_single, Variant::unwarped_pair, Variant::warped_gt,
                 Variant::warped_estimated, Variant::same_noise})
    if (to_string(v) == s) return v;
  throw TrainingError("unknown variant '" + s + "'");
}

struct ExperimentConfig {
  int stage = 1;
  Variant variant = Variant::warped_gt;
  int patch_height = 32;
  int patch_width = 64;
  int batch = 8;
  double lr = 1e-4;
  double lr_decay_factor = 10.0;
  int lr_decay_period = 100;
  int epochs = 100;
  int patience = 20;  // 0 disables plateau stopping
  NoiseModel noise = NoiseModel::poisson(10.0);
  std::uint64_t seed = 1;
  std::uint64_t validation_seed = 1000;
  ModelConfig model;
  WarpMode warp_mode = WarpMode::raw;
  FillPolicy fill = FillPolicy::primary;
  int bm_max_disp = 8;  // half-resolution pixels
  int bm_block = 5;
  bool cold_start = false;

  /// Stage-1 inputs: the second port sees an independently noised primary.
  bool uses_primary_copy() const { return stage == 1 || variant == Variant::same_noise; }

  void validate() const {
    std::ostringstream why;
    if (stage != 1 && stage != 2) why << "stage must be 1 or 2; ";
    if (patch_height < 2 || patch_width < 2 || patch_height % 2 != 0 || patch_width % 2 != 0)
      why << "patch dims must be even and >= 2 (got " << patch_height << "x" << patch_width << "); ";
    if (batch < 1) why << "batch must be >= 1; ";
    if (!(lr > 0)) why << "lr must be > 0; ";
    if (!(lr_decay_factor >= 1)) why << "lr decay factor must be >= 1; ";
    if (lr_decay_period < 1) why << "lr decay period must be >= 1; ";
    if (epochs < 0) why << "epochs must be >= 0; ";
    if (patience < 0) why << "patience must be >= 0; ";
    const bool single = variant == Variant::baseline_single;
    if (single != (model.ports == 1))
      why << "variant " << to_string(variant) << " needs ports=" << (single ? 1 : 2) << "; ";
    if (!why.str().empty()) throw TrainingError("invalid experiment config: " + why.str());
    model.validate();
    noise.validate();
  }

  /// Step schedule: lr / factor^(epoch / period), epochs counted from 0.
  double learning_rate(int epoch) const {
    return lr / std::pow(lr_decay_factor, epoch / lr_decay_period);
  }
};

inline nlohmann::json to_json(const NoiseModel& n) {
  return {{"kind", n.name()}, {"photons", n.photons}, {"sigma", n.sigma}};
}

inline NoiseModel noise_model_from_json(const nlohmann::json& j) {
  NoiseModel n;
  n.kind = parse_noise_kind(j.at("kind").get<std::string>());
  n.photons = j.value("photons", n.photons);
  n.sigma = j.value("sigma", n.sigma);
  return n;
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  return {{"stage", c.stage},
          {"variant", to_string(c.variant)},
          {"patch", {c.patch_height, c.patch_width}},
          {"batch", c.batch},
          {"lr", c.lr},
          {"lr_decay_factor", c.lr_decay_factor},
          {"lr_decay_period", c.lr_decay_period},
          {"epochs", c.epochs},
          {"patience", c.patience},
          {"noise", to_json(c.noise)},
          {"seed", c.seed},
          {"validation_seed", c.validation_seed},
          {"model", to_json(c.model)},
          {"warp_mode", to_string(c.warp_mode)},
          {"fill", to_string(c.fill)},
          {"bm_max_disp", c.bm_max_disp},
          {"bm_block", c.bm_block},
          {"cold_start", c.cold_start}};
}

/// Missing keys keep their defaults.
inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  c.stage = j.value("stage", c.stage);
  if (j.contains("variant")) c.variant = parse_variant(j["variant"].get<std::string>());
  if (j.contains("patch")) {
    c.patch_height = j["patch"].at(0).get<int>();
    c.patch_width = j["patch"].at(1).get<int>();
  }
  c.batch = j.value("batch", c.batch);
  c.lr = j.value("lr", c.lr);
  c.lr_decay_factor = j.value("lr_decay_factor", c.lr_decay_factor);
  c.lr_decay_period = j.value("lr_decay_period", c.lr_decay_period);
  c.epochs = j.value("epochs", c.epochs);
  c.patience = j.value("patience", c.patience);
  if (j.contains("noise")) c.noise = noise_model_from_json(j["noise"]);
  c.seed = j.value("seed", c.seed);
  c.validation_seed = j.value("validation_seed", c.validation_seed);
  if (j.contains("model")) c.model = model_config_from_json(j["model"]);
  if (j.contains("warp_mode")) c.warp_mode = parse_warp_mode(j["warp_mode"].get<std::string>());
  if (j.contains("fill")) c.fill = parse_fill_policy(j["fill"].get<std::string>());
  c.bm_max_disp = j.value("bm_max_disp", c.bm_max_disp);
  c.bm_block = j.value("bm_block", c.bm_block);
  c.cold_start = j.value("cold_start", c.cold_start);
  return c;
}

// ---------------------------------------------------------------------------
// Splits

struct SplitScheme {
  enum class Kind { kitti_160_40, ratio };
  Kind kind = Kind::kitti_160_40;
  double ratio = 0.8;
  std::uint64_t seed = 1;

  static SplitScheme kitti() { return {}; }
  static SplitScheme by_ratio(double rho, std::uint64_t seed) { return {Kind::ratio, rho, seed}; }
};

/// "kitti-160-40" or "ratio:<rho>:<seed>".
inline SplitScheme parse_split_scheme(const std::string& s) {
  if (s == "kitti-160-40") return SplitScheme::kitti();
  if (s.rfind("ratio:", 0) == 0) {
    const auto rest = s.substr(6);
    const auto colon = rest.find(':');
    try {
      const double rho = std::stod(rest.substr(0, colon));
      const std::uint64_t seed = colon == std::string::npos ? 1 : std::stoull(rest.substr(colon + 1));
      return SplitScheme::by_ratio(rho, seed);
    } catch (const std::logic_error&) {
    }
  }
  throw TrainingError("unknown split scheme '" + s + "' (expected kitti-160-40 or ratio:<rho>:<seed>)");
}

struct Split {
  std::vector<StereoSample> train;
  std::vector<StereoSample> test;
};

/// kitti-160-40: the first 160 samples by id train, the rest test.
/// ratio: a seeded shuffle puts round(rho * n) samples in train; both halves
/// are returned in id order.
inline Split split_dataset(std::vector<StereoSample> samples, const SplitScheme& scheme) {
  if (samples.empty()) throw TrainingError("split_dataset: empty dataset");
  std::sort(samples.begin(), samples.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  const std::size_t n = samples.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::size_t n_train;
  if (scheme.kind == SplitScheme::Kind::kitti_160_40) {
    n_train = std::min<std::size_t>(160, n);
  } else {
    if (!(scheme.ratio > 0 && scheme.ratio <= 1)) throw TrainingError("split_dataset: ratio must be in (0, 1]");
    std::mt19937_64 rng(derive_seed({scheme.seed, 0x53504cULL}));
    std::shuffle(order.begin(), order.end(), rng);
    n_train = static_cast<std::size_t>(std::llround(scheme.ratio * static_cast<double>(n)));
  }
  if (n_train >= n) throw TrainingError("split_dataset: test split is empty");
  if (n_train == 0) throw TrainingError("split_dataset: train split is empty");
  std::vector<std::size_t> train_idx(order.begin(), order.begin() + n_train);
  std::vector<std::size_t> test_idx(order.begin() + n_train, order.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  Split out;
  for (auto i : train_idx) out.train.push_back(samples[i]);
  for (auto i : test_idx) out.test.push_back(samples[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Network inputs

/// Full-resolution network inputs for one sample: noisy primary mosaic, the
/// second-port mosaic, the disparity used for warping, and the clean target.
struct PatchSource {
  BayerMosaic primary;
  BayerMosaic secondary;
  DisparityMap disparity;
  RgbImage truth;
};

/// Builds the inputs of `sample` for the configured stage and variant. Noise
/// realizations depend only on `noise_seed`.
inline PatchSource prepare_inputs(const StereoSample& sample, const ExperimentConfig& config,
                                  std::uint64_t noise_seed) {
  PatchSource src;
  src.truth = sample.left;
  src.disparity = sample.disparity;
  const BayerMosaic clean_primary = bayer_mosaic(sample.left);
  src.primary = add_noise(clean_primary, config.noise, derive_seed({noise_seed, 1}));
  if (config.model.ports == 1) return src;
  if (config.uses_primary_copy()) {
    src.secondary = add_noise(clean_primary, config.noise, derive_seed({noise_seed, 2}));
    return src;
  }
  const BayerMosaic noisy_secondary =
      add_noise(bayer_mosaic(sample.right), config.noise, derive_seed({noise_seed, 2}));
  switch (config.variant) {
    case Variant::unwarped_pair:
      src.secondary = noisy_secondary;
      break;
    case Variant::warped_gt:
      src.secondary = warp_backward(noisy_secondary, sample.disparity, config.warp_mode, config.fill,
                                    &src.primary)
                          .warped;
      break;
    case Variant::warped_estimated:
      src.disparity = estimate_disparity_blockmatch(src.primary, noisy_secondary, config.bm_max_disp,
                                                    config.bm_block);
      src.secondary =
          warp_backward(noisy_secondary, src.disparity, config.warp_mode, config.fill, &src.primary).warped;
      break;
    default:
      throw TrainingError("prepare_inputs: unexpected variant " + to_string(config.variant));
  }
  return src;
}

struct PatchBatch {
  std::vector<BayerMosaic> primary;
  std::vector<BayerMosaic> secondary;  // empty entries for one-port models
  std::vector<DisparityMap> disparity;
  std::vector<RgbImage> truth;
  std::vector<std::pair<int, int>> offsets;  // (y, x) top-left
};

/// Top-left corner of patch `index`, uniform over even positions.
inline std::pair<int, int> patch_offset(int height, int width, int patch_height, int patch_width,
                                        std::uint64_t seed, int epoch, std::uint64_t index) {
  if (height < patch_height || width < patch_width) {
    throw TrainingError("patch " + std::to_string(patch_height) + "x" + std::to_string(patch_width) +
                        " does not fit a " + std::to_string(height) + "x" + std::to_string(width) + " image");
  }
  std::mt19937_64 rng(derive_seed({seed, static_cast<std::uint64_t>(epoch), index, 0x504154ULL}));
  const int ny = (height - patch_height) / 2;
  const int nx = (width - patch_width) / 2;
  const int y = 2 * std::uniform_int_distribution<int>(0, ny)(rng);
  const int x = 2 * std::uniform_int_distribution<int>(0, nx)(rng);
  return {y, x};
}

/// Crops all four planes of sources[k] at the same window. Patch k's offset
/// is drawn from (seed, epoch, first_index + k).
inline PatchBatch sample_patch_batch(const std::vector<PatchSource>& sources, int patch_height,
                                     int patch_width, std::uint64_t seed, int epoch,
                                     std::uint64_t first_index = 0) {
  PatchBatch b;
  for (std::size_t k = 0; k < sources.size(); ++k) {
    const auto& s = sources[k];
    const auto [y, x] = patch_offset(s.primary.height, s.primary.width, patch_height, patch_width, seed,
                                     epoch, first_index + k);
    b.offsets.emplace_back(y, x);
    b.primary.push_back(crop(s.primary, y, x, patch_height, patch_width));
    b.secondary.push_back(s.secondary.data.empty() ? BayerMosaic{}
                                                   : crop(s.secondary, y, x, patch_height, patch_width));
    b.disparity.push_back(crop(s.disparity, y, x, patch_height, patch_width));
    b.truth.push_back(crop(s.truth, y, x, patch_height, patch_width));
  }
  return b;
}

namespace detail {

template <typename T>
Tensor<T> run_network(ModelParams<T>& params, const std::vector<const BayerMosaic*>& primary,
                      const std::vector<const BayerMosaic*>& secondary, double noise_level, NormMode mode) {
  const auto m = mosaics_to_tensor<T>(primary);
  const auto s = params.config.ports == 2 ? mosaics_to_tensor<T>(secondary) : m;
  const std::vector<T> levels(primary.size(), static_cast<T>(noise_level));
  return forward(params, m, s, std::span<const T>(levels), mode);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Evaluation

struct SampleScore {
  std::string id;
  double psnr = 0;  // dB, +inf for an exact reconstruction
};

struct EvalReport {
  double mean_psnr = 0;  // mean of per-sample PSNRs with +inf reported as the sentinel
  std::vector<SampleScore> samples;
};

/// Runs the model in eval mode on every full test image with noise from
/// `noise_seed`, clamps the output to [0, 1] and scores it with MAX = 1.
template <typename T>
EvalReport evaluate(ModelParams<T>& params, const std::vector<StereoSample>& dataset,
                    const ExperimentConfig& config, std::uint64_t noise_seed) {
  if (dataset.empty()) throw TrainingError("evaluate: empty dataset");
  EvalReport report;
  report.samples.resize(dataset.size());
  const double level = config.noise.level();
  parallel_for(static_cast<std::int64_t>(dataset.size()), [&](std::int64_t i) {
    NoGradGuard no_grad;
    const auto src = prepare_inputs(dataset[i], config, derive_seed({noise_seed, static_cast<std::uint64_t>(i)}));
    const auto out = detail::run_network(params, {&src.primary}, {&src.secondary}, level, NormMode::eval);
    report.samples[i] = {dataset[i].id, psnr(clamp01(tensor_to_image(out)), src.truth)};
  });
  double sum = 0;
  for (const auto& s : report.samples) sum += report_psnr(s.psnr);
  report.mean_psnr = sum / static_cast<double>(report.samples.size());
  return report;
}

inline std::string eval_csv(const EvalReport& r) {
  std::ostringstream os;
  os.precision(10);
  os << "id,psnr_db\n";
  for (const auto& s : r.samples) os << s.id << ',' << report_psnr(s.psnr) << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Training

struct EpochRecord {
  int epoch = 0;
  double loss = 0;      // mean training MSE over the epoch's batches
  double val_psnr = 0;  // dB
  double lr = 0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  double initial_psnr = 0;  // validation PSNR before the first update
  int best_epoch = -1;
  double best_psnr = -std::numeric_limits<double>::infinity();
  std::string best_checkpoint;
  double wall_seconds = 0;
  bool stopped_on_plateau = false;

  /// First epoch whose validation PSNR reaches `target`, or nullopt.
  std::optional<int> first_epoch_reaching(double target) const {
    for (const auto& e : epochs)
      if (e.val_psnr >= target) return e.epoch;
    return std::nullopt;
  }
};

inline nlohmann::json to_json(const TrainReport& r) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : r.epochs)
    epochs.push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"val_psnr", e.val_psnr}, {"lr", e.lr}});
  return {{"epochs", epochs},
          {"initial_psnr", std::isfinite(r.initial_psnr) ? nlohmann::json(r.initial_psnr) : nlohmann::json(nullptr)},
          {"best_epoch", r.best_epoch},
          {"best_psnr", r.best_epoch >= 0 ? nlohmann::json(r.best_psnr) : nlohmann::json(nullptr)},
          {"best_checkpoint", r.best_checkpoint},
          {"wall_seconds", r.wall_seconds},
          {"stopped_on_plateau", r.stopped_on_plateau}};
}

inline TrainReport train_report_from_json(const nlohmann::json& j) {
  TrainReport r;
  for (const auto& e : j.at("epochs"))
    r.epochs.push_back({e.at("epoch").get<int>(), e.at("loss").get<double>(), e.at("val_psnr").get<double>(),
                        e.at("lr").get<double>()});
  r.initial_psnr = j.at("initial_psnr").is_null() ? -std::numeric_limits<double>::infinity()
                                                  : j.at("initial_psnr").get<double>();
  r.best_epoch = j.at("best_epoch").get<int>();
  if (!j.at("best_psnr").is_null()) r.best_psnr = j.at("best_psnr").get<double>();
  r.best_checkpoint = j.value("best_checkpoint", "");
  r.wall_seconds = j.value("wall_seconds", 0.0);
  r.stopped_on_plateau = j.value("stopped_on_plateau", false);
  return r;
}

inline std::string train_csv(const TrainReport& r) {
  std::ostringstream os;
  os.precision(10);
  os << "epoch,loss,val_psnr,lr\n";
  for (const auto& e : r.epochs) os << e.epoch << ',' << e.loss << ',' << e.val_psnr << ',' << e.lr << '\n';
  return os.str();
}

/// Everything needed to continue a run exactly where it stopped.
template <typename T>
struct TrainState {
  ModelParams<T> params;
  ModelParams<T> best;
  AdamState<T> adam;
  TrainReport report;
  int next_epoch = 0;
};

/// Stage 2 starts from `init` (a stage-1 model) unless config.cold_start is
/// set, in which case `init` must be empty and the model is freshly built.
template <typename T>
TrainState<T> init_training(const ExperimentConfig& config, const std::vector<StereoSample>& validation,
                            const std::optional<ModelParams<T>>& init = std::nullopt) {
  config.validate();
  TrainState<T> st;
  if (config.stage == 2 && !init && !config.cold_start) {
    throw TrainingError("stage 2 needs a stage-1 checkpoint or the cold-start flag");
  }
  if (init) {
    if (!(init->config == config.model)) {
      throw TrainingError("init model (" + init->config.str() + ") does not match config (" +
                          config.model.str() + ")");
    }
    st.params = init->clone();
  } else {
    st.params = build_model<T>(config.model, derive_seed({config.seed, 0x494e4954ULL}));
  }
  st.best = st.params.clone();
  st.adam = AdamState<T>::create(st.params.trainable());
  const bool has_stats = st.params.fullres.norm.stats.count.values()[0] > T(0);
  st.report.initial_psnr =
      has_stats ? evaluate(st.params, validation, config, config.validation_seed).mean_psnr
                : -std::numeric_limits<double>::infinity();
  return st;
}

struct EpochProgress {
  int epoch;
  int total;
  double loss;
  double val_psnr;
  double lr;
};

/// Trains until the epoch budget is spent or validation PSNR has not improved
/// for `patience` epochs. `max_epochs`, when set, bounds how many epochs this
/// call runs so a run can be checkpointed and resumed.
template <typename T>
void train(const ExperimentConfig& config, const std::vector<StereoSample>& train_set,
           const std::vector<StereoSample>& validation, TrainState<T>& st,
           const std::function<void(const EpochProgress&)>& progress = {},
           std::optional<int> max_epochs = std::nullopt) {
  config.validate();
  if (train_set.empty()) throw TrainingError("train: empty training set");
  if (validation.empty()) throw TrainingError("train: empty validation set");
  for (const auto& s : train_set) {
    if (s.left.height < config.patch_height || s.left.width < config.patch_width) {
      throw TrainingError("train: sample " + s.id + " (" + std::to_string(s.left.height) + "x" +
                          std::to_string(s.left.width) + ") is smaller than the patch");
    }
  }
  const auto start = std::chrono::steady_clock::now();
  const double level = config.noise.level();
  const std::size_t n = train_set.size();
  int ran = 0;

  while (!st.report.stopped_on_plateau && st.next_epoch < config.epochs && (!max_epochs || ran < *max_epochs)) {
    const int epoch = st.next_epoch;
    const double lr = config.learning_rate(epoch);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(derive_seed({config.seed, static_cast<std::uint64_t>(epoch), 0x4f5244ULL}));
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0;
    int batches = 0;
    for (std::size_t first = 0; first < n; first += config.batch) {
      const std::size_t count = std::min<std::size_t>(config.batch, n - first);
      std::vector<PatchSource> sources(count);
      parallel_for(static_cast<std::int64_t>(count), [&](std::int64_t k) {
        const std::size_t idx = order[first + k];
        sources[k] = prepare_inputs(
            train_set[idx], config,
            derive_seed({config.seed, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(idx), 0x4e5aULL}));
      });
      const auto batch = sample_patch_batch(sources, config.patch_height, config.patch_width, config.seed, epoch,
                                            static_cast<std::uint64_t>(first));
      std::vector<const BayerMosaic*> prim, sec;
      std::vector<const RgbImage*> truth;
      for (std::size_t k = 0; k < count; ++k) {
        prim.push_back(&batch.primary[k]);
        sec.push_back(&batch.secondary[k]);
        truth.push_back(&batch.truth[k]);
      }
      double loss_value;
      try {
        st.params.zero_grad();
        auto out = detail::run_network(st.params, prim, sec, level, NormMode::train);
        auto loss = mse_loss(out, images_to_tensor<T>(truth));
        loss_value = static_cast<double>(loss.item());
        backward(loss);
        auto trainable = st.params.trainable();
        adam_step(trainable, st.adam, lr);
      } catch (const TensorError& e) {
        std::ostringstream os;
        os << "training diverged at epoch " << epoch << " (lr " << lr << "): " << e.what();
        throw TrainingError(os.str());
      }
      if (!std::isfinite(loss_value)) {
        std::ostringstream os;
        os << "NaN loss at epoch " << epoch << " (lr " << lr << ")";
        throw TrainingError(os.str());
      }
      loss_sum += loss_value;
      ++batches;
    }

    const double val = evaluate(st.params, validation, config, config.validation_seed).mean_psnr;
    st.report.epochs.push_back({epoch, loss_sum / batches, val, lr});
    if (val > st.report.best_psnr) {
      st.report.best_psnr = val;
      st.report.best_epoch = epoch;
      st.report.best_checkpoint = "epoch-" + std::to_string(epoch);
      st.best = st.params.clone();
    }
    if (progress) progress({epoch, config.epochs, loss_sum / batches, val, lr});
    ++st.next_epoch;
    ++ran;
    if (config.patience > 0 && epoch - st.report.best_epoch >= config.patience) {
      st.report.stopped_on_plateau = true;
    }
  }
  st.report.wall_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---------------------------------------------------------------------------
// Persistence of a run

/// Current params, best params ("best." prefix), Adam moments and the report.
template <typename T>
Checkpoint make_train_checkpoint(const TrainState<T>& st, const ExperimentConfig& config) {
  Checkpoint ckpt = make_model_checkpoint(st.params);
  append_params(ckpt, st.best, "best.");
  append_adam(ckpt, st.adam, st.params);
  ckpt.metadata["experiment"] = to_json(config);
  ckpt.metadata["report"] = to_json(st.report);
  ckpt.metadata["next_epoch"] = st.next_epoch;
  return ckpt;
}

template <typename T>
TrainState<T> restore_train_state(const Checkpoint& ckpt) {
  const ModelConfig mc = checkpoint_model_config(ckpt);
  TrainState<T> st;
  st.params = restore_params<T>(ckpt, mc);
  st.best = restore_params<T>(ckpt, mc, "best.");
  st.adam = restore_adam<T>(ckpt, st.params);
  if (!ckpt.metadata.contains("report")) throw CheckpointError("checkpoint has no training state");
  st.report = train_report_from_json(ckpt.metadata["report"]);
  st.next_epoch = ckpt.metadata.at("next_epoch").get<int>();
  return st;
}

}  // namespace stereoisp
