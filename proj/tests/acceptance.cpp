// Acceptance run: one PASS/FAIL line per criterion on stdout, progress on
// stderr. `acceptance 1 3 9` runs a subset; the default runs all ten.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "stereoisp.hpp"

using namespace stereoisp;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 3) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("stereoisp_accept_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(STEREOISP_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

template <typename T>
bool same_bits(ModelParams<T>& a, ModelParams<T>& b) {
  auto na = a.named(), nb = b.named();
  if (na.size() != nb.size()) return false;
  for (std::size_t i = 0; i < na.size(); ++i) {
    const auto va = na[i].tensor.values(), vb = nb[i].tensor.values();
    if (va.size() != vb.size() || std::memcmp(va.data(), vb.data(), va.size() * sizeof(T)) != 0) return false;
  }
  return true;
}

// ---- 1 --------------------------------------------------------------------

Outcome gradient_integrity() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto results = run_gradcheck_suite(1, 1e-5, 1e-4);
  const double s = seconds_since(t0);
  bool ok = s < 60.0 && !results.empty();
  double worst_layer = 0, end_to_end = 0;
  for (const auto& r : results) {
    ok = ok && r.passed() && r.checked > 0;
    if (r.tolerance <= 1e-5) worst_layer = std::max(worst_layer, r.rel_error);
    else end_to_end = std::max(end_to_end, r.rel_error);
    if (!r.passed()) std::cerr << "  gradcheck failed: " << r.name << " rel_err " << r.rel_error << "\n";
  }
  std::ostringstream d;
  d << results.size() << " checks, worst layer rel err " << std::scientific << std::setprecision(2) << worst_layer
    << ", end-to-end " << end_to_end << ", " << std::fixed << s << " s";
  return {ok, d.str()};
}

// ---- 2 --------------------------------------------------------------------

Outcome architecture_audit() {
  ModelConfig cfg;  // desk config, two ports
  auto p = build_model<float>(cfg, 1);
  const int w2 = 2 * cfg.width;
  bool ok = p.lowres.front().conv.weight.shape() == Shape{w2, 9, 3, 3};
  for (const auto& b : p.lowres) ok = ok && b.conv.weight.shape().n == w2;
  ok = ok && p.projection.weight.shape() == Shape{24, w2, 1, 1};
  ok = ok && p.fullres.conv.weight.shape() == Shape{w2, 12, 3, 3};
  ok = ok && p.head.weight.shape() == Shape{3, w2, 1, 1};

  // The same sequence observed on live activations.
  auto m = Tensor<float>::full({1, 1, 16, 32}, 0.5f);
  const std::vector<float> lv{0.3f};
  NoGradGuard no_grad;
  ok = ok && forward(p, m, m, std::span<const float>(lv), NormMode::train).shape() == Shape{1, 3, 16, 32};
  const auto seq = channel_sequence(cfg);
  ok = ok && seq.front() == 9 && seq.back() == 3 &&
       std::find(seq.begin(), seq.end(), 24) != seq.end() && std::find(seq.begin(), seq.end(), 12) != seq.end();

  ModelConfig ref = cfg;
  ref.depth = 15;
  ref.width = 64;
  const auto count = count_parameters(build_model<float>(ref, 1));
  std::cerr << "  reference model (depth 15, width 64) parameters: " << count << " vs published 2,246,146 (delta "
            << count - 2246146 << ")\n";
  std::ostringstream d;
  d << "9 -> " << w2 << " -> 24 -> 12 -> " << w2 << " -> 3; reference params " << count << " vs 2246146";
  return {ok, d.str()};
}

// ---- 3 --------------------------------------------------------------------

// Scalar backward warp: out(y,x) = lerp of S along the row at x - d.
float reference_warp(const BayerMosaic& s, const DisparityMap& d, int y, int x, bool& covered) {
  covered = false;
  if (!d.is_valid(y, x)) return 0.0f;
  const double xs = x - static_cast<double>(d.at(y, x));
  if (xs < 0 || xs > s.width - 1) return 0.0f;
  covered = true;
  const int x0 = static_cast<int>(xs);
  const int x1 = std::min(x0 + 1, s.width - 1);
  const double f = xs - x0;
  return static_cast<float>(s.at(y, x0) * (1 - f) + s.at(y, x1) * f);
}

Outcome warp_oracle() {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<float> u(0.0f, 1.0f), disp(-1.0f, 12.0f);
  std::uniform_int_distribution<int> idisp(0, 12);
  double worst = 0;
  bool integer_exact = true, coverage_ok = true;
  for (int trial = 0; trial < 50; ++trial) {
    BayerMosaic s(16, 32);
    for (auto& v : s.data) v = u(rng);
    DisparityMap real(16, 32), integer(16, 32);
    for (std::size_t i = 0; i < real.values.size(); ++i) {
      real.values[i] = std::max(0.0f, disp(rng));
      integer.values[i] = static_cast<float>(idisp(rng));
      real.valid[i] = u(rng) > 0.05f;
    }
    const auto r = warp_backward(s, real, WarpMode::raw, FillPolicy::zero);
    const auto q = warp_backward(s, integer, WarpMode::raw, FillPolicy::zero);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 32; ++x) {
        bool cov = false;
        worst = std::max(worst, static_cast<double>(std::abs(r.warped.at(y, x) - reference_warp(s, real, y, x, cov))));
        coverage_ok = coverage_ok && r.covered(y, x) == cov;
        const float exact = reference_warp(s, integer, y, x, cov);
        integer_exact = integer_exact && q.warped.at(y, x) == exact;
        const int xs = x - static_cast<int>(integer.at(y, x));
        integer_exact = integer_exact && (xs < 0 || exact == s.at(y, xs));
      }
  }
  std::ostringstream d;
  d << "50 instances, max abs diff " << std::scientific << std::setprecision(2) << worst << ", integer disparities "
    << (integer_exact ? "exact" : "NOT exact");
  return {worst < 1e-6 && integer_exact && coverage_ok, d.str()};
}

// ---- 4, 5, 8: shared toy training study -----------------------------------

// Desk budget. See README (toy acceptance study).
constexpr int study_stage1_epochs = 80;
constexpr int study_stage2_epochs = 40;
constexpr double study_lr = 3e-3;
constexpr int study_decay_period = 60;
constexpr std::uint64_t study_test_seed = 2000;
const std::vector<std::uint64_t> study_seeds{1, 2, 3};

struct SeedResult {
  std::map<Variant, double> test_psnr;
  double baseline_val = 0;
  int finetune_epochs = 0;  // epochs to reach baseline + 0.5 dB (validation), budget + 1 if never
  int cold_epochs = 0;
  double estimated_on_gt_model = 0;
};

struct Study {
  std::vector<SeedResult> seeds;
  double seconds = 0;
  double max_variant_seconds = 0;
};

ExperimentConfig study_base(std::uint64_t seed) {
  ExperimentConfig c;
  c.lr = study_lr;
  c.lr_decay_period = study_decay_period;
  c.patience = 0;
  c.seed = seed;
  c.noise = NoiseModel::poisson(10.0);
  return c;
}

int epochs_to_reach(const TrainReport& r, double target, int budget) {
  const auto e = r.first_epoch_reaching(target);
  return e ? *e + 1 : budget + 1;
}

const Study& toy_study() {
  static std::optional<Study> study;
  if (study) return *study;
  study.emplace();
  const auto t_all = std::chrono::steady_clock::now();
  const auto data = generate_toy_dataset({200, 64, 128, 1, 16});
  const auto split = split_dataset(data, SplitScheme::kitti());
  for (const auto seed : study_seeds) {
    SeedResult res;
    AblationOptions opt;
    opt.base = study_base(seed);
    opt.stage1_epochs = study_stage1_epochs;
    opt.stage2_epochs = study_stage2_epochs;
    opt.test_seed = study_test_seed;
    AblationRuns runs;
    auto t_run = std::chrono::steady_clock::now();
    std::string current;
    const auto log = [&](const std::string& name, const EpochProgress& p) {
      if (name != current) {
        if (!current.empty()) study->max_variant_seconds = std::max(study->max_variant_seconds, seconds_since(t_run));
        current = name;
        t_run = std::chrono::steady_clock::now();
      }
      if ((p.epoch + 1) % 10 == 0 || p.epoch + 1 == p.total)
        std::cerr << "  seed " << seed << " " << name << " epoch " << p.epoch + 1 << "/" << p.total << " val "
                  << fmt(p.val_psnr) << " dB\n";
    };
    const auto report = run_ablation(opt, split.train, split.test, &runs, log);
    study->max_variant_seconds = std::max(study->max_variant_seconds, seconds_since(t_run));
    for (const auto& row : report.rows) res.test_psnr[row.variant] = row.mean_psnr;
    res.baseline_val = runs.baseline.report.best_psnr;
    const double target = res.baseline_val + 0.5;
    res.finetune_epochs = epochs_to_reach(runs.stage2.at(Variant::warped_gt).report, target, study_stage2_epochs);

    // Estimated-disparity variant, fine-tuned from the same stage-1 model.
    const auto t_est = std::chrono::steady_clock::now();
    const auto est_cfg = finetune_config(opt, Variant::warped_estimated);
    auto est = init_training<float>(est_cfg, split.test, runs.stage1.best);
    train(est_cfg, split.train, split.test, est, [&](const EpochProgress& p) { log("warped-estimated", p); });
    res.test_psnr[Variant::warped_estimated] = evaluate(est.best, split.test, est_cfg, study_test_seed).mean_psnr;
    res.estimated_on_gt_model =
        evaluate(runs.stage2.at(Variant::warped_gt).best, split.test, est_cfg, study_test_seed).mean_psnr;
    study->max_variant_seconds = std::max(study->max_variant_seconds, seconds_since(t_est));

    // Cold-started stage 2 with the full stage-1 budget.
    const auto t_cold = std::chrono::steady_clock::now();
    auto cold_cfg = variant_config(opt.base, Variant::warped_gt, 2, study_stage1_epochs);
    cold_cfg.cold_start = true;
    auto cold = init_training<float>(cold_cfg, split.test);
    train(cold_cfg, split.train, split.test, cold, [&](const EpochProgress& p) { log("cold-start", p); });
    res.cold_epochs = epochs_to_reach(cold.report, target, study_stage1_epochs);
    study->max_variant_seconds = std::max(study->max_variant_seconds, seconds_since(t_cold));

    std::cerr << "  seed " << seed << ":";
    for (const auto& [v, psnr] : res.test_psnr) std::cerr << " " << to_string(v) << " " << fmt(psnr);
    std::cerr << " | reach +0.5 dB: fine-tune " << res.finetune_epochs << " ep, cold " << res.cold_epochs
              << " ep | warped-gt model on estimated disparity " << fmt(res.estimated_on_gt_model) << "\n";
    study->seeds.push_back(res);
  }
  study->seconds = seconds_since(t_all);
  return *study;
}

double mean_over_seeds(const Study& s, Variant v) {
  double acc = 0;
  for (const auto& r : s.seeds) acc += r.test_psnr.at(v);
  return acc / static_cast<double>(s.seeds.size());
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Outcome toy_ordering() {
  const auto& s = toy_study();
  const double base = mean_over_seeds(s, Variant::baseline_single);
  const double unwarped = mean_over_seeds(s, Variant::unwarped_pair);
  const double warped = mean_over_seeds(s, Variant::warped_gt);
  const double same = mean_over_seeds(s, Variant::same_noise);
  const bool upper = same >= warped - 0.1, gain = warped - base >= 0.5, flat = std::abs(unwarped - base) <= 0.5;
  const bool budget = s.max_variant_seconds <= 1800;
  std::ostringstream d;
  d << "3-seed means: baseline " << fmt(base) << ", unwarped " << fmt(unwarped) << " (" << fmt(unwarped - base, 2)
    << "), warped-gt " << fmt(warped) << " (+" << fmt(warped - base, 2) << "), same-noise " << fmt(same)
    << " dB; slowest run " << fmt(s.max_variant_seconds, 0) << " s";
  std::vector<std::string> missed;
  if (!upper) missed.push_back("same-noise >= warped-gt - 0.1");
  if (!gain) missed.push_back("warped-gt - baseline >= 0.5");
  if (!flat) missed.push_back("|unwarped - baseline| <= 0.5");
  if (!budget) missed.push_back("<= 30 min per run");
  for (std::size_t i = 0; i < missed.size(); ++i) d << (i ? ", " : "; missed: ") << missed[i];
  const bool ok = missed.empty();
  return {ok, d.str()};
}

Outcome two_stage_benefit() {
  const auto& s = toy_study();
  std::vector<double> fine, cold;
  for (const auto& r : s.seeds) {
    fine.push_back(r.finetune_epochs);
    cold.push_back(r.cold_epochs);
  }
  const double mf = median(fine), mc = median(cold);
  std::ostringstream d;
  d << "epochs to baseline+0.5 dB, median: fine-tune " << mf << ", cold start " << mc << " (budget "
    << study_stage1_epochs << ")";
  return {mf <= 0.5 * mc, d.str()};
}

// ---- 6 --------------------------------------------------------------------

Outcome metrics() {
  const RgbImage ref(16, 16, 0.25f);
  RgbImage off = ref;
  for (auto& v : off.data) v += 16.0f / 255.0f;
  const double p16 = psnr(off, ref);

  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 0.03);
  std::vector<double> err(ref.data.size());
  for (auto& e : err) e = n(rng);
  // Doubles keep the halving exact; the library PSNR works on float images.
  double mse = 0;
  for (double e : err) mse += e * e;
  mse /= static_cast<double>(err.size());
  RgbImage a(16, 16), b(16, 16), zero(16, 16, 0.0f);
  for (std::size_t i = 0; i < err.size(); ++i) {
    a.data[i] = static_cast<float>(std::sqrt(mse));
    b.data[i] = static_cast<float>(std::sqrt(mse / 2));
  }
  const double gain = psnr(b, zero) - psnr(a, zero);
  const bool inf_ok = std::isinf(psnr(ref, ref)) && psnr(ref, ref) > 0;
  const bool ok = std::abs(p16 - 24.05) <= 0.01 && std::abs(gain - 3.0103) <= 0.001 && inf_ok;
  return {ok, "16/255 error " + fmt(p16, 4) + " dB, halved MSE +" + fmt(gain, 4) + " dB, identical " +
                  (inf_ok ? "+inf" : "finite")};
}

// ---- 7 --------------------------------------------------------------------

Outcome noise_statistics() {
  const int n = 1000000;
  const BayerMosaic m(1000, 1000, 0.5f);
  const auto y = add_noise(m, NoiseModel::poisson(10.0), 77);
  double sum = 0, sq = 0;
  for (float v : y.data) sum += v;
  const double mean = sum / n;
  for (float v : y.data) sq += (v - mean) * (v - mean);
  const double var = sq / (n - 1);
  const double mean_tol = 3 * std::sqrt(0.05 / n);
  const bool moments = std::abs(mean - 0.5) <= mean_tol && std::abs(var - 0.05) <= 0.05 * 0.05;
  const auto again = add_noise(m, NoiseModel::poisson(10.0), 77);
  const bool identical = std::memcmp(y.data.data(), again.data.data(), y.data.size() * sizeof(float)) == 0;
  std::ostringstream d;
  d << "mean " << std::setprecision(6) << mean << " (tol " << mean_tol << "), variance " << var
    << " (tol 0.0025), repeat " << (identical ? "bit-identical" : "DIFFERS");
  return {moments && identical, d.str()};
}

// ---- 8 --------------------------------------------------------------------

Outcome block_matcher() {
  const auto data = generate_toy_dataset({40, 64, 128, 11, 16});
  double err_clean = 0, err_noisy = 0;
  long n = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto l = bayer_mosaic(data[i].left), r = bayer_mosaic(data[i].right);
    const auto d = estimate_disparity_blockmatch(l, r, 8, 5);
    const auto dn = estimate_disparity_blockmatch(add_noise(l, NoiseModel::poisson(10.0), 2 * i + 1),
                                                  add_noise(r, NoiseModel::poisson(10.0), 2 * i + 2), 8, 5);
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 128; ++x) {
        if (!data[i].disparity.is_valid(y, x) || !d.is_valid(y, x)) continue;
        err_clean += std::abs(d.at(y, x) - data[i].disparity.at(y, x));
        err_noisy += std::abs(dn.at(y, x) - data[i].disparity.at(y, x));
        ++n;
      }
  }
  const double mae = n ? err_clean / n : INFINITY;
  std::cerr << "  block matcher MAE on noisy (lambda 10) mosaics: " << fmt(err_noisy / n) << " px\n";

  const auto& s = toy_study();
  const double gt = mean_over_seeds(s, Variant::warped_gt);
  const double est = mean_over_seeds(s, Variant::warped_estimated);
  const bool ok = mae < 1.0 && std::isfinite(est) && gt - est <= 1.5;
  return {ok, "MAE " + fmt(mae) + " px on clean toy mosaics; warped-estimated " + fmt(est) + " dB vs warped-gt " +
                  fmt(gt) + " dB (gap " + fmt(gt - est, 2) + ")"};
}

// ---- 9 --------------------------------------------------------------------

Outcome determinism_and_persistence() {
  const fs::path dir = scratch_dir("persist");
  std::vector<std::string> notes;
  bool ok = true;

  // Manifest replay through the CLI, sequential mode.
  const std::string data_flags = " --dataset kitti --data-root " + (dir / "data").string() + " --split ratio:0.8:1";
  const std::string train_flags = " --depth 2 --width 8 --patch-height 32 --patch-width 64 --epochs 3 --threads 1";
  bool replay = run_cli("toygen --count 20 --height 64 --width 128 --seed 4 --out " + (dir / "data").string(),
                        dir / "toygen.log") == 0;
  replay = replay && run_cli("train" + data_flags + train_flags + " --out " + (dir / "a").string(), dir / "a.log") == 0;
  replay = replay && run_cli("train --threads 1 --config " + (dir / "a" / "manifest.json").string() + " --out " +
                                 (dir / "b").string(),
                             dir / "b.log") == 0;
  replay = replay && slurp(dir / "a" / "model.ckpt") == slurp(dir / "b" / "model.ckpt") &&
           slurp(dir / "a" / "state.ckpt") == slurp(dir / "b" / "state.ckpt") &&
           slurp(dir / "a" / "report.csv") == slurp(dir / "b" / "report.csv");
  notes.push_back(std::string("manifest replay ") + (replay ? "bit-exact" : "DIFFERS"));
  ok = ok && replay;

  // Resume from an on-disk training state.
  const auto samples = generate_toy_dataset({20, 64, 128, 5, 16});
  const auto split = split_dataset(samples, SplitScheme::by_ratio(0.8, 1));
  ExperimentConfig cfg;
  cfg.model.depth = 2;
  cfg.model.width = 8;
  cfg.epochs = 4;
  cfg.patience = 0;
  cfg.lr = 3e-3;
  auto straight = init_training<float>(cfg, split.test);
  train(cfg, split.train, split.test, straight);
  auto first = init_training<float>(cfg, split.test);
  train(cfg, split.train, split.test, first, {}, 2);
  save_checkpoint(dir / "state.ckpt", make_train_checkpoint(first, cfg));
  auto resumed = restore_train_state<float>(load_checkpoint(dir / "state.ckpt"));
  train(cfg, split.train, split.test, resumed);
  bool resume = same_bits(straight.params, resumed.params) && same_bits(straight.best, resumed.best) &&
                straight.report.epochs.size() == resumed.report.epochs.size();
  for (std::size_t i = 0; resume && i < straight.report.epochs.size(); ++i)
    resume = straight.report.epochs[i].loss == resumed.report.epochs[i].loss &&
             straight.report.epochs[i].val_psnr == resumed.report.epochs[i].val_psnr;
  notes.push_back(std::string("resume ") + (resume ? "bit-exact" : "DIFFERS"));
  ok = ok && resume;

  // Checkpoint roundtrip.
  save_checkpoint(dir / "model.ckpt", make_model_checkpoint(straight.best));
  const auto loaded = load_checkpoint(dir / "model.ckpt");
  auto back = restore_params<float>(loaded, checkpoint_model_config(loaded));
  const bool roundtrip = same_bits(back, straight.best);
  notes.push_back(std::string("roundtrip ") + (roundtrip ? "bit-exact" : "DIFFERS"));
  ok = ok && roundtrip;

  // Corrupted headers.
  const auto bytes = encode_checkpoint(loaded);
  auto expect_error = [&](std::vector<unsigned char> b, const std::string& needle) {
    std::ofstream(dir / "bad.ckpt", std::ios::binary).write(reinterpret_cast<const char*>(b.data()),
                                                             static_cast<std::streamsize>(b.size()));
    try {
      load_checkpoint(dir / "bad.ckpt");
    } catch (const CheckpointError& e) {
      return std::string(e.what()).find(needle) != std::string::npos;
    }
    return false;
  };
  auto bad_magic = bytes;
  bad_magic[1] = 'Z';
  auto bad_version = bytes;
  bad_version[4] = 9;
  const bool rejected = expect_error(bad_magic, "bad magic") && expect_error(bad_version, "version 9") &&
                        expect_error(std::vector<unsigned char>(bytes.begin(), bytes.end() - 3), "truncated");
  notes.push_back(std::string("corrupt files ") + (rejected ? "rejected" : "NOT rejected"));
  ok = ok && rejected;

  fs::remove_all(dir);
  std::string d;
  for (const auto& n : notes) d += (d.empty() ? "" : ", ") + n;
  return {ok, d};
}

// ---- 10 -------------------------------------------------------------------

Outcome dataset_plumbing() {
  const fs::path root = scratch_dir("kitti");
  for (const char* d : {"image_2", "image_3", "disp_occ_0"}) fs::create_directories(root / d);
  std::mt19937 rng(3);
  for (int i = 0; i < 200; ++i) {
    std::ostringstream id;
    id << std::setw(6) << std::setfill('0') << i << "_10.png";
    PngData rgb{6, 4, 3, 8, {}};
    for (int k = 0; k < 72; ++k) rgb.samples.push_back(static_cast<std::uint16_t>(rng() % 256));
    write_png((root / "image_2" / id.str()).string(), rgb);
    write_png((root / "image_3" / id.str()).string(), rgb);
    write_png((root / "disp_occ_0" / id.str()).string(), PngData{6, 4, 1, 16, std::vector<std::uint16_t>(24, 25600)});
  }
  const auto samples = load_stereo_dataset(root, DatasetLayout::kitti);
  const auto split = split_dataset(samples, SplitScheme::kitti());
  fs::remove_all(root);

  const auto d = decode_disparity_png(PngData{2, 1, 1, 16, {25600, 0}});
  const bool decode = d.at(0, 0) == 100.0f && d.is_valid(0, 0) && !d.is_valid(0, 1);
  std::set<std::string> ids;
  for (const auto& s : split.train) ids.insert(s.id);
  for (const auto& s : split.test) ids.insert(s.id);
  const bool ok = samples.size() == 200 && split.train.size() == 160 && split.test.size() == 40 &&
                  ids.size() == 200 && decode;
  return {ok, std::to_string(samples.size()) + " samples -> " + std::to_string(split.train.size()) + " train / " +
                  std::to_string(split.test.size()) + " test; 25600 -> " + fmt(d.at(0, 0), 1) + " px, 0 -> " +
                  (d.is_valid(0, 1) ? "valid" : "invalid")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient integrity", gradient_integrity},
      {"architecture audit", architecture_audit},
      {"warp oracle equivalence", warp_oracle},
      {"toy variant ordering", toy_ordering},
      {"two-stage benefit", two_stage_benefit},
      {"PSNR metrics", metrics},
      {"noise statistics", noise_statistics},
      {"block matcher", block_matcher},
      {"determinism and persistence", determinism_and_persistence},
      {"dataset plumbing", dataset_plumbing},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  set_thread_count(1);
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!wanted.empty() && !wanted.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    std::cerr << "criterion " << id << ": " << criteria[i].first << "\n";
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << std::setw(2) << id << "  " << criteria[i].first << ": "
              << o.detail << " [" << fmt(seconds_since(t0), 1) << " s]" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
