#include <gtest/gtest.h>

#include <cmath>

#include "partnet/optim.hpp"
#include "partnet/runner.hpp"

using namespace partnet;

namespace {

// Minimal model: logistic regression over a 1x1x1 input, so fc.weight is
// {2, 1} and fc.bias is {2}. Convenient for hand-checked SGD steps.
Model tiny_model() {
  ArchitectureSpec s;
  s.depth = 0;
  s.num_classes = 2;
  s.in_channels = 1;
  s.in_height = 1;
  s.in_width = 1;
  Rng rng(1);
  return build_model(s, rng);
}

MaskSet full_masks(const Model& m) { return build_masks(m, PartitionSpec::full()); }

OptimConfig plain_sgd(double lr, double momentum, double wd) {
  OptimConfig cfg;
  cfg.lr = lr;
  cfg.momentum = momentum;
  cfg.weight_decay = wd;
  return cfg;
}

}  // namespace

TEST(SgdStep, MomentumHandComputed) {
  // w = 1, g = 0.5, lr = 0.1, mu = 0.9: step 1 -> v = 0.5, w = 0.95;
  // step 2 -> v = 0.95, w = 0.855.
  Model m = tiny_model();
  m.param("fc.weight").data() = {1.0f, 1.0f};
  const MaskSet masks = full_masks(m);
  OptimState state = OptimState::init(m, masks);
  const OptimConfig cfg = plain_sgd(0.1, 0.9, 0.0);
  GradientSet grads = {{"fc.weight", {0.5f, 0.5f}}, {"fc.bias", {0.0f, 0.0f}}};

  sgd_step(m, grads, masks, state, cfg, cfg.lr);
  EXPECT_FLOAT_EQ(state.velocity.at("fc.weight")[0], 0.5f);
  EXPECT_FLOAT_EQ(m.param("fc.weight").data()[0], 0.95f);

  sgd_step(m, grads, masks, state, cfg, cfg.lr);
  EXPECT_FLOAT_EQ(state.velocity.at("fc.weight")[0], 0.95f);
  EXPECT_FLOAT_EQ(m.param("fc.weight").data()[0], 0.855f);
}

TEST(SgdStep, WeightDecayCouplesIntoVelocity) {
  // With wd = 0.1 the effective gradient is 0.5 + 0.1*1 = 0.6 -> w = 0.94.
  Model m = tiny_model();
  m.param("fc.weight").data() = {1.0f, 1.0f};
  const MaskSet masks = full_masks(m);
  OptimState state = OptimState::init(m, masks);
  const OptimConfig cfg = plain_sgd(0.1, 0.9, 0.1);
  GradientSet grads = {{"fc.weight", {0.5f, 0.5f}}, {"fc.bias", {0.0f, 0.0f}}};
  sgd_step(m, grads, masks, state, cfg, cfg.lr);
  EXPECT_FLOAT_EQ(m.param("fc.weight").data()[0], 0.94f);
}

TEST(SgdStep, MaskedEntriesAreBitwiseUntouched) {
  Model m = tiny_model();
  m.param("fc.weight").data() = {1.0f, 1.0f};
  MaskSet masks = full_masks(m);
  masks.masks["fc.weight"] = {1, 0};
  OptimState state = OptimState::init(m, masks);
  const OptimConfig cfg = plain_sgd(0.1, 0.9, 0.0);
  GradientSet grads = {{"fc.weight", {0.5f, 0.5f}}, {"fc.bias", {0.0f, 0.0f}}};
  sgd_step(m, grads, masks, state, cfg, cfg.lr);
  EXPECT_FLOAT_EQ(m.param("fc.weight").data()[0], 0.95f);
  EXPECT_EQ(m.param("fc.weight").data()[1], 1.0f);
  EXPECT_EQ(state.velocity.at("fc.weight")[1], 0.0f);
}

TEST(SgdStep, NonFiniteGradientRaisesNumericError) {
  Model m = tiny_model();
  const MaskSet masks = full_masks(m);
  OptimState state = OptimState::init(m, masks);
  const OptimConfig cfg = plain_sgd(0.1, 0.9, 0.0);
  GradientSet grads = {{"fc.weight", {std::nanf(""), 0.0f}},
                       {"fc.bias", {0.0f, 0.0f}}};
  EXPECT_THROW(sgd_step(m, grads, masks, state, cfg, cfg.lr), NumericError);
}

TEST(OptimState, VelocityOnlyForLearnedParams) {
  ArchitectureSpec s;
  s.depth = 1;
  Rng rng(2);
  Model m = build_model(s, rng);
  const MaskSet masks = build_masks(m, PartitionSpec::bn_only());
  OptimState state = OptimState::init(m, masks);
  EXPECT_EQ(state.velocity.count("conv1.weight"), 0u);
  EXPECT_EQ(state.velocity.count("fc.weight"), 0u);
  EXPECT_EQ(state.velocity.count("conv1.bn.gamma"), 1u);
}

TEST(Schedule, DefaultThirdsAndMultipliers) {
  const auto sched = default_schedule(30);
  ASSERT_EQ(sched.size(), 2u);
  EXPECT_EQ(sched[0], (std::pair<int, double>{10, 0.1}));
  EXPECT_EQ(sched[1], (std::pair<int, double>{20, 0.1}));

  OptimConfig cfg;
  cfg.lr = 0.1;
  cfg.epochs = 30;
  cfg.schedule = sched;
  EXPECT_DOUBLE_EQ(lr_at_epoch(cfg, 0), 0.1);
  EXPECT_DOUBLE_EQ(lr_at_epoch(cfg, 9), 0.1);
  EXPECT_DOUBLE_EQ(lr_at_epoch(cfg, 10), 0.01);
  EXPECT_DOUBLE_EQ(lr_at_epoch(cfg, 19), 0.01);
  EXPECT_NEAR(lr_at_epoch(cfg, 20), 0.001, 1e-12);
}

TEST(OptimConfig, Validation) {
  OptimConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.lr = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.momentum = 1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.epochs = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.schedule = {{5, 0.1}, {5, 0.1}};
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(CollectGradients, ZeroFilledWhenNoBackwardRan) {
  Model m = tiny_model();
  const GradientSet grads = collect_gradients(m);
  ASSERT_EQ(grads.count("fc.weight"), 1u);
  EXPECT_EQ(grads.at("fc.weight"), (std::vector<float>{0.0f, 0.0f}));
}

TEST(TrainEpoch, LossDropsAndBeatsChanceOnEasyTask) {
  ArchitectureSpec arch;
  arch.depth = 1;
  arch.num_classes = 4;
  arch.in_channels = 3;
  arch.in_height = 8;
  arch.in_width = 8;

  Rng data_rng(17);
  auto [train, test] = synth_train_test(4, 40, 8, 3, 8, 8, 0.05, data_rng);

  Rng rng(5);
  Model m = build_model(arch, rng);
  const MaskSet masks = build_masks(m, PartitionSpec::full());
  OptimState state = OptimState::init(m, masks);
  OptimConfig cfg = plain_sgd(0.3, 0.9, 5e-4);
  cfg.batch_size = 16;
  cfg.epochs = 8;

  EpochMetrics first{}, last{};
  for (int e = 0; e < cfg.epochs; ++e) {
    last = train_epoch(m, train, masks, state, cfg, cfg.lr, rng);
    if (e == 0) first = last;
  }
  EXPECT_LT(last.loss, first.loss);
  EXPECT_GT(evaluate(m, test), 0.5);  // chance is 0.25
  EXPECT_TRUE(std::isfinite(evaluate_loss(m, test)));
}

TEST(TrainEpoch, DeterministicPerSeed) {
  ArchitectureSpec arch;
  arch.depth = 1;
  arch.num_classes = 3;
  arch.in_height = 8;
  arch.in_width = 8;

  auto run = [&] {
    Rng data_rng(23);
    Dataset train = synth_dataset(3, 8, 3, 8, 8, 0.25, data_rng);
    Rng rng(7);
    Model m = build_model(arch, rng);
    const MaskSet masks = build_masks(m, PartitionSpec::full());
    OptimState state = OptimState::init(m, masks);
    OptimConfig cfg = plain_sgd(0.05, 0.9, 0.0);
    cfg.batch_size = 8;
    train_epoch(m, train, masks, state, cfg, cfg.lr, rng);
    return m.param("conv1.weight").data();
  };
  EXPECT_EQ(run(), run());
}

TEST(RunTraining, ReportShapeAndReferenceTiming) {
  RunConfig cfg;
  cfg.arch.depth = 1;
  cfg.data.classes = 3;
  cfg.data.per_class = 8;
  cfg.data.test_per_class = 4;
  cfg.data.height = 8;
  cfg.data.width = 8;
  cfg.optim.epochs = 2;
  cfg.optim.batch_size = 8;
  cfg.optim.lr = 0.05;
  cfg.optim.schedule = default_schedule(2);
  cfg.seed = 3;

  const RunResult r = run_training(cfg, "unit", /*reference=*/true);
  ASSERT_EQ(r.report.epochs.size(), 2u);
  EXPECT_EQ(r.report.epochs[0].epoch, 0);
  EXPECT_EQ(r.report.epochs[0].wall_time_s, 0.0);
  EXPECT_EQ(r.report.total_params, r.model.total_params());
  EXPECT_EQ(r.report.effective_params, r.masks.learned_count());
  EXPECT_FALSE(r.report.layers.empty());
  EXPECT_EQ(r.final_val_accuracy, r.report.epochs.back().val_acc);

  const RunResult timed = run_training(cfg, "unit", /*reference=*/false);
  double total_wall = 0;
  for (const auto& e : timed.report.epochs) total_wall += e.wall_time_s;
  EXPECT_GT(total_wall, 0.0);
}
