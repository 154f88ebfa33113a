#include <gtest/gtest.h>

#include <set>

#include "stereoisp/ablation.hpp"
#include "stereoisp/training.hpp"

using namespace stereoisp;

namespace {

std::vector<StereoSample> toy(int count, std::uint64_t seed = 1, int h = 32, int w = 64, int max_disp = 8) {
  return generate_toy_dataset({count, h, w, seed, max_disp});
}

ExperimentConfig small_config(Variant v = Variant::warped_gt, int stage = 1) {
  ExperimentConfig c;
  c.variant = v;
  c.stage = stage;
  c.model.depth = 2;
  c.model.width = 4;
  c.model.ports = v == Variant::baseline_single ? 1 : 2;
  c.patch_height = 16;
  c.patch_width = 32;
  c.batch = 4;
  c.lr = 3e-3;
  c.epochs = 3;
  c.patience = 0;
  c.bm_max_disp = 6;
  c.bm_block = 3;
  return c;
}

std::vector<float> flat(const ModelParams<float>& p) {
  std::vector<float> out;
  for (const auto& nt : p.named()) out.insert(out.end(), nt.tensor.values().begin(), nt.tensor.values().end());
  return out;
}

}  // namespace

TEST(Split, KittiSizes) {
  std::vector<StereoSample> samples(200);
  for (int i = 0; i < 200; ++i) samples[i].id = std::to_string(1000 + (i * 7919) % 200);
  const auto s = split_dataset(samples, SplitScheme::kitti());
  EXPECT_EQ(s.train.size(), 160u);
  EXPECT_EQ(s.test.size(), 40u);
  EXPECT_EQ(s.train.back().id, "1159");
  EXPECT_EQ(s.test.front().id, "1160");
}

TEST(Split, RatioIsDeterministicDisjointExhaustive) {
  const auto samples = toy(10);
  const auto a = split_dataset(samples, SplitScheme::by_ratio(0.8, 1));
  const auto b = split_dataset(samples, SplitScheme::by_ratio(0.8, 1));
  ASSERT_EQ(a.train.size(), 8u);
  ASSERT_EQ(a.test.size(), 2u);
  std::set<std::string> ids;
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(a.train[i].id, b.train[i].id);
    ids.insert(a.train[i].id);
  }
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(a.test[i].id, b.test[i].id);
    ids.insert(a.test[i].id);
  }
  EXPECT_EQ(ids.size(), 10u);
}

TEST(Split, Errors) {
  EXPECT_THROW(split_dataset({}, SplitScheme::kitti()), TrainingError);
  EXPECT_THROW(split_dataset(toy(10), SplitScheme::by_ratio(1.0, 1)), TrainingError);
  EXPECT_THROW(split_dataset(toy(100), SplitScheme::kitti()), TrainingError);
  EXPECT_THROW(parse_split_scheme("halves"), TrainingError);
  const auto r = parse_split_scheme("ratio:0.75:9");
  EXPECT_EQ(r.kind, SplitScheme::Kind::ratio);
  EXPECT_DOUBLE_EQ(r.ratio, 0.75);
  EXPECT_EQ(r.seed, 9u);
}

TEST(Patches, OffsetsAreEven) {
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const auto [y, x] = patch_offset(64, 128, 32, 64, 5, static_cast<int>(i % 7), i);
    EXPECT_EQ(y % 2, 0);
    EXPECT_EQ(x % 2, 0);
    EXPECT_LE(y + 32, 64);
    EXPECT_LE(x + 64, 128);
  }
  EXPECT_THROW(patch_offset(30, 128, 32, 64, 1, 0, 0), TrainingError);
}

TEST(Patches, DeterministicAndCongruent) {
  const auto samples = toy(4);
  const auto cfg = small_config(Variant::warped_gt, 2);
  std::vector<PatchSource> sources;
  for (std::size_t i = 0; i < samples.size(); ++i) sources.push_back(prepare_inputs(samples[i], cfg, 77 + i));
  const auto a = sample_patch_batch(sources, 16, 32, 3, 2);
  const auto b = sample_patch_batch(sources, 16, 32, 3, 2);
  for (std::size_t k = 0; k < sources.size(); ++k) {
    EXPECT_EQ(a.offsets[k], b.offsets[k]);
    EXPECT_EQ(a.primary[k].data, b.primary[k].data);
    const auto [y0, x0] = a.offsets[k];
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 32; ++x) {
        for (int c = 0; c < 3; ++c) EXPECT_EQ(a.truth[k].at(c, y, x), sources[k].truth.at(c, y0 + y, x0 + x));
        EXPECT_EQ(a.primary[k].at(y, x), sources[k].primary.at(y0 + y, x0 + x));
        EXPECT_EQ(a.secondary[k].at(y, x), sources[k].secondary.at(y0 + y, x0 + x));
        EXPECT_EQ(a.disparity[k].at(y, x), sources[k].disparity.at(y0 + y, x0 + x));
      }
  }
  std::vector<PatchSource> small{sources[0]};
  EXPECT_THROW(sample_patch_batch(small, 64, 32, 3, 2), TrainingError);
}

TEST(Inputs, StageOneIgnoresSecondaryImage) {
  auto samples = toy(2);
  const auto cfg = small_config(Variant::warped_gt, 1);
  const auto a = prepare_inputs(samples[0], cfg, 5);
  StereoSample swapped = samples[0];
  swapped.right = samples[1].right;
  swapped.disparity = samples[1].disparity;
  const auto b = prepare_inputs(swapped, cfg, 5);
  EXPECT_EQ(a.primary.data, b.primary.data);
  EXPECT_EQ(a.secondary.data, b.secondary.data);
  EXPECT_NE(a.primary.data, a.secondary.data);  // independent noise
}

TEST(Inputs, WarpedGtMatchesPrimarySceneOnCoverage) {
  // With zero noise the warped secondary equals the primary mosaic on non-occluded pixels.
  auto samples = toy(3);
  auto cfg = small_config(Variant::warped_gt, 2);
  cfg.noise = NoiseModel::gaussian(0.0);
  for (const auto& s : samples) {
    const auto src = prepare_inputs(s, cfg, 1);
    for (int y = 0; y < s.left.height; ++y)
      for (int x = 0; x < s.left.width; ++x)
        if (s.disparity.is_valid(y, x)) { EXPECT_EQ(src.secondary.at(y, x), src.primary.at(y, x)); }
  }
  cfg.variant = Variant::unwarped_pair;
  const auto u = prepare_inputs(samples[0], cfg, 1);
  EXPECT_EQ(u.secondary.data, bayer_mosaic(samples[0].right).data);
}

TEST(Schedule, StepDecay) {
  ExperimentConfig c;
  c.lr = 1e-4;
  EXPECT_DOUBLE_EQ(c.learning_rate(0), 1e-4);
  EXPECT_DOUBLE_EQ(c.learning_rate(99), 1e-4);
  EXPECT_NEAR(c.learning_rate(100), 1e-5, 1e-20);
  EXPECT_NEAR(c.learning_rate(200), 1e-6, 1e-20);
}

TEST(Config, ValidationAndJsonRoundtrip) {
  auto c = small_config(Variant::same_noise, 2);
  c.seed = 1234567890123ULL;
  c.noise = NoiseModel::poisson_gaussian(20, 0.01);
  const auto back = experiment_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  auto bad = c;
  bad.patch_height = 15;
  EXPECT_THROW(bad.validate(), TrainingError);
  bad = c;
  bad.batch = 0;
  EXPECT_THROW(bad.validate(), TrainingError);
  bad = c;
  bad.lr = 0;
  EXPECT_THROW(bad.validate(), TrainingError);
  bad = c;
  bad.variant = Variant::baseline_single;
  EXPECT_THROW(bad.validate(), TrainingError);
  EXPECT_THROW(parse_variant("warped"), TrainingError);
}

TEST(Train, StageTwoNeedsInitOrColdStart) {
  const auto data = toy(6);
  EXPECT_THROW(init_training<float>(small_config(Variant::warped_gt, 2), data), TrainingError);
  auto cold = small_config(Variant::warped_gt, 2);
  cold.cold_start = true;
  EXPECT_NO_THROW(init_training<float>(cold, data));
}

TEST(Train, ReportInvariantsAndLossDrops) {
  const auto split = split_dataset(toy(12), SplitScheme::by_ratio(0.75, 1));
  auto cfg = small_config();
  cfg.epochs = 5;
  auto st = init_training<float>(cfg, split.test);
  int calls = 0;
  train(cfg, split.train, split.test, st, [&](const EpochProgress&) { ++calls; });
  ASSERT_EQ(st.report.epochs.size(), 5u);
  EXPECT_EQ(calls, 5);
  double best = -1e9;
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(st.report.epochs[i].epoch, static_cast<int>(i));
    best = std::max(best, st.report.epochs[i].val_psnr);
  }
  EXPECT_EQ(st.report.best_psnr, best);
  EXPECT_LT(st.report.epochs.back().loss, st.report.epochs.front().loss);
  const auto csv = train_csv(st.report);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,loss,val_psnr,lr");
  const auto back = train_report_from_json(to_json(st.report));
  EXPECT_EQ(back.best_epoch, st.report.best_epoch);
  EXPECT_EQ(back.epochs.size(), 5u);
}

TEST(Train, PlateauStopsEarly) {
  const auto split = split_dataset(toy(8), SplitScheme::by_ratio(0.75, 1));
  auto cfg = small_config();
  cfg.epochs = 50;
  cfg.patience = 1;
  cfg.lr = 1e-9;  // nothing improves after the first epoch
  auto st = init_training<float>(cfg, split.test);
  train(cfg, split.train, split.test, st);
  EXPECT_TRUE(st.report.stopped_on_plateau);
  EXPECT_LT(st.report.epochs.size(), 50u);
}

TEST(Train, DivergenceReportsEpochAndLr) {
  const auto split = split_dataset(toy(8), SplitScheme::by_ratio(0.75, 1));
  auto cfg = small_config();
  cfg.lr = 1e30;
  cfg.epochs = 4;
  auto st = init_training<float>(cfg, split.test);
  try {
    train(cfg, split.train, split.test, st);
    FAIL() << "expected divergence";
  } catch (const TrainingError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("epoch"), std::string::npos) << msg;
    EXPECT_NE(msg.find("lr"), std::string::npos) << msg;
  }
}

TEST(Train, PatchLargerThanImagesIsError) {
  const auto split = split_dataset(toy(8), SplitScheme::by_ratio(0.75, 1));
  auto cfg = small_config();
  cfg.patch_height = 64;
  auto st = init_training<float>(cfg, split.test);
  EXPECT_THROW(train(cfg, split.train, split.test, st), TrainingError);
}

TEST(Train, ResumeIsBitExact) {
  const auto split = split_dataset(toy(12), SplitScheme::by_ratio(0.75, 2));
  auto cfg = small_config(Variant::warped_gt, 1);
  cfg.epochs = 4;
  auto full = init_training<float>(cfg, split.test);
  train(cfg, split.train, split.test, full);

  auto half = init_training<float>(cfg, split.test);
  train(cfg, split.train, split.test, half, {}, 2);
  ASSERT_EQ(half.next_epoch, 2);
  const auto bytes = encode_checkpoint(make_train_checkpoint(half, cfg));
  Checkpoint ckpt;
  ckpt.tensors = decode_checkpoint(bytes);
  ckpt.metadata = make_train_checkpoint(half, cfg).metadata;
  auto resumed = restore_train_state<float>(ckpt);
  train(cfg, split.train, split.test, resumed);
  EXPECT_EQ(flat(resumed.params), flat(full.params));
  EXPECT_EQ(flat(resumed.best), flat(full.best));
  ASSERT_EQ(resumed.report.epochs.size(), full.report.epochs.size());
  for (std::size_t i = 0; i < full.report.epochs.size(); ++i)
    EXPECT_EQ(resumed.report.epochs[i].val_psnr, full.report.epochs[i].val_psnr);
}

TEST(Evaluate, DeterministicAndErrors) {
  const auto data = toy(3);
  auto cfg = small_config();
  auto st = init_training<float>(cfg, data);
  train(cfg, data, data, st);
  const auto a = evaluate(st.best, data, cfg, 9);
  const auto b = evaluate(st.best, data, cfg, 9);
  EXPECT_EQ(a.mean_psnr, b.mean_psnr);
  EXPECT_EQ(a.samples.size(), 3u);
  EXPECT_THROW(evaluate(st.best, {}, cfg, 9), TrainingError);
  auto est = cfg;
  est.stage = 2;
  est.variant = Variant::warped_estimated;
  EXPECT_TRUE(std::isfinite(evaluate(st.best, data, est, 9).mean_psnr));
}

TEST(Evaluate, PerfectModelScoresSentinel) {
  // A one-port model whose head is a constant equal to a constant scene.
  auto data = toy(2);
  for (auto& s : data) {
    s.left = RgbImage(s.left.height, s.left.width, 0.5f);
    s.right = s.left;
  }
  auto cfg = small_config(Variant::baseline_single);
  auto p = build_model<float>(cfg.model, 1);
  const std::vector<float> lv{0.3f};
  forward(p, Tensor<float>::full({1, 1, 4, 4}, 0.5f), Tensor<float>::full({1, 1, 4, 4}, 0.5f),
          std::span<const float>(lv), NormMode::train);  // records running stats
  for (auto& v : p.head.weight.mutable_values()) v = 0.0f;
  for (auto& v : p.head.bias.mutable_values()) v = 0.5f;
  const auto r = evaluate(p, data, cfg, 1);
  for (const auto& s : r.samples) EXPECT_TRUE(std::isinf(s.psnr));
  EXPECT_EQ(r.mean_psnr, psnr_sentinel_db);
}

TEST(Ablation, DeltaConvention) {
  EXPECT_NEAR(delta_percent(26.79, 24.47), 9.48, 0.01);
  EXPECT_NEAR(delta_percent(24.37, 24.47), -0.41, 0.01);
}

TEST(Ablation, FourRowsInTableOrder) {
  const auto split = split_dataset(toy(10), SplitScheme::by_ratio(0.8, 3));
  AblationOptions opt;
  opt.base = small_config();
  opt.stage1_epochs = 1;
  opt.stage2_epochs = 1;
  const auto report = run_ablation(opt, split.train, split.test);
  ASSERT_EQ(report.rows.size(), 4u);
  EXPECT_EQ(report.rows[0].variant, Variant::baseline_single);
  EXPECT_EQ(report.rows[1].variant, Variant::unwarped_pair);
  EXPECT_EQ(report.rows[2].variant, Variant::warped_gt);
  EXPECT_EQ(report.rows[3].variant, Variant::same_noise);
  EXPECT_EQ(report.rows[0].delta_percent, 0.0);
  for (const auto& r : report.rows)
    EXPECT_NEAR(r.delta_percent, delta_percent(r.mean_psnr, report.rows[0].mean_psnr), 1e-12);
  const auto csv = ablation_csv(report);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
}

TEST(Ablation, FineTuneContinuesStageOneSchedule) {
  AblationOptions opt;
  opt.base = small_config();
  opt.base.lr = 1e-3;
  opt.base.lr_decay_period = 30;
  opt.stage1_epochs = 40;
  const auto c = finetune_config(opt, Variant::unwarped_pair);
  EXPECT_EQ(c.stage, 2);
  EXPECT_DOUBLE_EQ(c.learning_rate(0), opt.base.learning_rate(40));
  EXPECT_DOUBLE_EQ(c.learning_rate(0), 1e-4);
}

// Desk model on the toy dataset; each seed trains five epochs.
TEST(TrainSlow, LossFallsOverFirstFiveEpochs) {
  const auto data = generate_toy_dataset({200, 64, 128, 1, 16});
  const auto split = split_dataset(data, SplitScheme::kitti());
  const std::vector<StereoSample> val(split.test.begin(), split.test.begin() + 2);
  int monotone = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    ExperimentConfig c;
    c.lr = 1e-3;
    c.epochs = 5;
    c.patience = 0;
    c.seed = seed;
    auto st = init_training<float>(c, val);
    train(c, split.train, val, st);
    bool strictly = true;
    for (std::size_t e = 1; e < st.report.epochs.size(); ++e)
      strictly = strictly && st.report.epochs[e].loss < st.report.epochs[e - 1].loss;
    monotone += strictly;
  }
  EXPECT_GE(monotone, 9);
}

TEST(TrainSlow, WarpedFineTuneStaysNearStageOne) {
  const auto data = generate_toy_dataset({60, 32, 64, 2, 8});
  const auto split = split_dataset(data, SplitScheme::by_ratio(0.8, 1));
  AblationOptions opt;
  opt.base = small_config();
  opt.base.lr = 3e-3;
  opt.base.lr_decay_period = 20;
  opt.stage1_epochs = 30;
  opt.stage2_epochs = 10;
  auto s1_cfg = variant_config(opt.base, Variant::warped_gt, 1, opt.stage1_epochs);
  auto s1 = init_training<float>(s1_cfg, split.test);
  train(s1_cfg, split.train, split.test, s1);
  for (auto v : {Variant::warped_gt, Variant::same_noise}) {
    const auto cfg = finetune_config(opt, v);
    auto st = init_training<float>(cfg, split.test, s1.best);
    train(cfg, split.train, split.test, st);
    for (const auto& e : st.report.epochs)
      EXPECT_GE(e.val_psnr, st.report.initial_psnr - 0.5) << to_string(v) << " epoch " << e.epoch;
  }
}
