#include <gtest/gtest.h>

#include <cmath>

#include "partnet/gradcheck.hpp"
#include "partnet/gradcheck_suite.hpp"
#include "partnet/ops.hpp"
#include "partnet/tensor.hpp"

using namespace partnet;

TEST(Rng, SameSeedSameSequence) {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(a.next_u64(), b.next_u64());
  }
  Rng c(123), d(123);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(c.normal(), d.normal());
  }
}

TEST(InitKaiming, SigmaExactForFanInTwo) {
  // sqrt(2/2) = 1 exactly; checked through sample statistics below.
  Rng rng(7);
  const int n = 1'000'000;
  Tensor<double> t = init_kaiming<double>({n}, 2, rng);
  double sum = 0, sum_sq = 0;
  for (double v : t.data()) {
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_NEAR(var, 1.0, 0.01);  // sigma^2 = 2/fan_in = 1
}

TEST(InitKaiming, DeterministicPerSeed) {
  Rng a(99), b(99);
  Tensor<float> t1 = init_kaiming<float>({4, 3}, 5, a);
  Tensor<float> t2 = init_kaiming<float>({4, 3}, 5, b);
  EXPECT_EQ(t1.data(), t2.data());
}

TEST(InitKaiming, RejectsZeroElementShape) {
  Rng rng(1);
  EXPECT_THROW(init_kaiming<float>({4, 0}, 2, rng), std::invalid_argument);
  EXPECT_THROW(init_kaiming<float>({4}, 0, rng), std::invalid_argument);
}

TEST(Conv2d, HandComputedExample) {
  // input [[1,2],[3,4]] against filter [[1,0],[0,1]] -> 1*1 + 4*1 = 5
  Tensor<float> input({1, 1, 2, 2}, {1, 2, 3, 4});
  Tensor<float> filters({1, 1, 2, 2}, {1, 0, 0, 1});
  Tensor<float> bias({1}, std::vector<float>{0});
  Tensor<float> out = conv2d(input, filters, bias, 1, 0);
  ASSERT_EQ(out.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_FLOAT_EQ(out.data()[0], 5.0f);
}

TEST(Conv2d, ZeroFilterYieldsConstantBias) {
  Tensor<float> input({2, 3, 4, 4});
  for (std::size_t i = 0; i < input.numel(); ++i) input.data()[i] = float(i % 7) - 3;
  Tensor<float> filters({2, 3, 3, 3});  // zeros
  Tensor<float> bias({2}, {1.5f, -2.0f});
  Tensor<float> out = conv2d(input, filters, bias, 1, 1);
  for (int n = 0; n < 2; ++n) {
    for (int o = 0; o < 2; ++o) {
      for (int i = 0; i < 16; ++i) {
        EXPECT_FLOAT_EQ(out.data()[(n * 2 + o) * 16 + i], bias.data()[o]);
      }
    }
  }
}

TEST(Conv2d, IdentityFilterIsExactIdentity) {
  Rng rng(5);
  Tensor<float> input = init_kaiming<float>({2, 1, 5, 5}, 1, rng);
  Tensor<float> filters({1, 1, 1, 1}, std::vector<float>{1});
  Tensor<float> bias({1}, std::vector<float>{0});
  Tensor<float> out = conv2d(input, filters, bias, 1, 0);
  EXPECT_EQ(out.data(), input.data());
}

TEST(Conv2d, ChannelMismatchThrows) {
  Tensor<float> input({1, 3, 4, 4});
  Tensor<float> filters({2, 4, 3, 3});
  Tensor<float> bias({2});
  EXPECT_THROW(conv2d(input, filters, bias, 1, 1), std::invalid_argument);
}

TEST(BatchNorm2d, TwoValueBatch) {
  // batch {1, 3}: mu = 2, population var = 1, outputs +-1/sqrt(1+eps)
  Tensor<float> input({2, 1, 1, 1}, {1, 3});
  Tensor<float> gamma({1}, std::vector<float>{1});
  Tensor<float> beta({1}, std::vector<float>{0});
  RunningStats<float> stats(1);
  Tensor<float> out = batchnorm2d(input, gamma, beta, stats, Mode::kTrain);
  EXPECT_NEAR(out.data()[0], -0.999995f, 1e-5);
  EXPECT_NEAR(out.data()[1], 0.999995f, 1e-5);

  Tensor<float> gamma2({1}, std::vector<float>{2});
  Tensor<float> beta2({1}, std::vector<float>{1});
  RunningStats<float> stats2(1);
  Tensor<float> out2 = batchnorm2d(input, gamma2, beta2, stats2, Mode::kTrain);
  EXPECT_NEAR(out2.data()[0], -0.99999f, 1e-4);
  EXPECT_NEAR(out2.data()[1], 2.99999f, 1e-4);
}

TEST(BatchNorm2d, ConstantBatchGivesBeta) {
  Tensor<float> input({3, 2, 2, 2});
  std::fill(input.data().begin(), input.data().end(), 0.7f);
  Tensor<float> gamma({2}, {1, 1});
  Tensor<float> beta({2}, {0.25f, -0.5f});
  RunningStats<float> stats(2);
  Tensor<float> out = batchnorm2d(input, gamma, beta, stats, Mode::kTrain);
  for (int n = 0; n < 3; ++n) {
    for (int c = 0; c < 2; ++c) {
      for (int i = 0; i < 4; ++i) {
        EXPECT_NEAR(out.data()[(n * 2 + c) * 4 + i], beta.data()[c], 1e-2);
      }
    }
  }
}

TEST(BatchNorm2d, RunningStatsUpdateInTrainOnly) {
  Tensor<float> input({2, 1, 1, 1}, {1, 3});
  Tensor<float> gamma({1}, std::vector<float>{1});
  Tensor<float> beta({1}, std::vector<float>{0});
  RunningStats<float> stats(1);
  batchnorm2d(input, gamma, beta, stats, Mode::kTrain);
  EXPECT_NEAR(stats.mean[0], 0.9f * 0 + 0.1f * 2, 1e-6);   // EMA with momentum 0.1
  EXPECT_NEAR(stats.var[0], 0.9f * 1 + 0.1f * 1, 1e-6);
  const auto frozen = stats.mean[0];
  batchnorm2d(input, gamma, beta, stats, Mode::kEval);
  EXPECT_EQ(stats.mean[0], frozen);
}

TEST(Relu, Examples) {
  Tensor<float> x({3}, {-1, 0, 2});
  Tensor<float> y = relu(x);
  EXPECT_EQ(y.data(), (std::vector<float>{0, 0, 2}));

  Tensor<float> neg({3}, {-5, -0.1f, -2});
  EXPECT_EQ(relu(neg).data(), (std::vector<float>{0, 0, 0}));

  Tensor<float> pos({3}, {5, 0.1f, 2});
  EXPECT_EQ(relu(pos).data(), pos.data());
}

TEST(Linear, Examples) {
  Tensor<float> x({1, 2}, {1, 2});
  Tensor<float> w_id({2, 2}, {1, 0, 0, 1});
  Tensor<float> b0({2}, {0, 0});
  EXPECT_EQ(linear(x, w_id, b0).data(), (std::vector<float>{1, 2}));

  Tensor<float> w_zero({2, 2});
  Tensor<float> b({2}, {3, 4});
  Tensor<float> x2({3, 2}, {1, 2, 3, 4, 5, 6});
  Tensor<float> out = linear(x2, w_zero, b);
  for (int i = 0; i < 3; ++i) {
    EXPECT_FLOAT_EQ(out.data()[i * 2 + 0], 3.0f);
    EXPECT_FLOAT_EQ(out.data()[i * 2 + 1], 4.0f);
  }

  Tensor<float> x3({1, 2}, {1, 1});
  Tensor<float> w3({1, 2}, {2, 3});
  Tensor<float> b3({1}, std::vector<float>{1});
  EXPECT_FLOAT_EQ(linear(x3, w3, b3).data()[0], 6.0f);
}

TEST(GlobalAvgPool, Examples) {
  Tensor<float> x({1, 1, 2, 2}, {1, 2, 3, 4});
  EXPECT_FLOAT_EQ(global_avg_pool(x).data()[0], 2.5f);

  Tensor<float> c({2, 3, 4, 4});
  std::fill(c.data().begin(), c.data().end(), 1.25f);
  const Tensor<float> pooled = global_avg_pool(c);
  for (float v : pooled.data()) EXPECT_FLOAT_EQ(v, 1.25f);

  Tensor<float> one({1, 2, 1, 1}, {3, -4});
  EXPECT_EQ(global_avg_pool(one).data(), (std::vector<float>{3, -4}));
}

TEST(SoftmaxCrossEntropy, ClosedForms) {
  Tensor<double> logits({1, 2}, {0, 0});
  EXPECT_NEAR(softmax_cross_entropy(logits, {0}).item(), std::log(2.0), 1e-12);

  const int c = 7;
  Tensor<double> uniform({1, c}, std::vector<double>(c, 0.3));
  EXPECT_NEAR(softmax_cross_entropy(uniform, {4}).item(), std::log(double(c)), 1e-12);

  // Margin 20 in favor of the correct label: loss under 1e-4.
  Tensor<double> dominant({1, 2}, {20, 0});
  EXPECT_LT(softmax_cross_entropy(dominant, {0}).item(), 1e-4);
}

TEST(SoftmaxCrossEntropy, ShiftInvariant) {
  Tensor<double> a({2, 3}, {1.0, -2.0, 0.5, 3.0, 3.0, -1.0});
  Tensor<double> b({2, 3}, {1.0 + 100, -2.0 + 100, 0.5 + 100, 3.0 - 50, 3.0 - 50, -1.0 - 50});
  const double la = softmax_cross_entropy(a, {0, 2}).item();
  const double lb = softmax_cross_entropy(b, {0, 2}).item();
  EXPECT_NEAR(la, lb, 1e-9);
}

TEST(SoftmaxCrossEntropy, OutOfRangeLabelThrows) {
  Tensor<double> logits({1, 3});
  EXPECT_THROW(softmax_cross_entropy(logits, {3}), std::out_of_range);
  EXPECT_THROW(softmax_cross_entropy(logits, {-1}), std::out_of_range);
}

TEST(Backward, SquareGradient) {
  // f(w) = w^2 via linear(x=w, weights=w): both paths accumulate, grad = 2w.
  Tensor<double> w({1, 1}, std::vector<double>{3.0}, true);
  Tensor<double> b({1}, std::vector<double>{0.0});
  Tensor<double> y = linear(w.reshape({1, 1}), w.reshape({1, 1}), b);
  Tensor<double> loss = weighted_sum(y, {1.0});
  backward(loss);
  EXPECT_DOUBLE_EQ(w.grad()[0], 6.0);
}

TEST(Backward, InactiveReluBranchHasZeroGradient) {
  // f(w) = relu(-w) at w = 1: the branch is inactive, gradient is 0.
  Tensor<double> w({1, 1}, std::vector<double>{1.0}, true);
  Tensor<double> minus_one({1, 1}, std::vector<double>{-1.0});
  Tensor<double> b({1}, std::vector<double>{0.0});
  Tensor<double> y = relu(linear(minus_one, w, b));
  backward(weighted_sum(y, {1.0}));
  EXPECT_DOUBLE_EQ(w.grad()[0], 0.0);
}

TEST(Backward, NonScalarLossThrows) {
  Tensor<double> x({2}, {1, 2}, true);
  EXPECT_THROW(backward(relu(x)), std::invalid_argument);
}

TEST(GradCheck, LinearLayerTight) {
  Rng rng(11);
  std::vector<Tensor<double>> params = {init_kaiming<double>({3, 4}, 4, rng),
                                        init_kaiming<double>({2, 4}, 4, rng),
                                        init_kaiming<double>({2}, 4, rng)};
  auto coeffs = std::vector<double>(6);
  for (auto& v : coeffs) v = rng.normal();
  auto fn = [&](const std::vector<Tensor<double>>& p) {
    return weighted_sum(linear(p[0], p[1], p[2]), coeffs);
  };
  EXPECT_LT(grad_check(fn, params, 1e-4), 1e-6);
}

TEST(GradCheck, BatchNormTrainMode) {
  Rng rng(13);
  std::vector<Tensor<double>> params = {init_kaiming<double>({3, 2, 3, 3}, 1, rng),
                                        init_kaiming<double>({2}, 1, rng),
                                        init_kaiming<double>({2}, 1, rng)};
  auto coeffs = std::vector<double>(params[0].numel());
  for (auto& v : coeffs) v = rng.normal();
  auto fn = [&](const std::vector<Tensor<double>>& p) {
    RunningStats<double> stats(2);
    return weighted_sum(batchnorm2d(p[0], p[1], p[2], stats, Mode::kTrain), coeffs);
  };
  EXPECT_LT(grad_check(fn, params, 1e-4), 1e-4);
}

TEST(GradCheck, ReluAwayFromKink) {
  Rng rng(17);
  std::vector<double> data(20);
  for (auto& v : data) {
    const double x = rng.normal();
    v = x >= 0 ? x + 0.05 : x - 0.05;
  }
  std::vector<Tensor<double>> params = {Tensor<double>({4, 5}, data)};
  std::vector<double> coeffs(20);
  for (auto& v : coeffs) v = rng.normal();
  auto fn = [&](const std::vector<Tensor<double>>& p) {
    return weighted_sum(relu(p[0]), coeffs);
  };
  EXPECT_LT(grad_check(fn, params, 1e-4), 1e-6);
}

TEST(GradCheck, ConvLinearCrossEntropyComposite) {
  Rng rng(23);
  const int n = 4, ci = 3, h = 5, w = 5, o = 4, k = 3, classes = 3;
  std::vector<Tensor<double>> params = {
      init_kaiming<double>({n, ci, h, w}, 1, rng),
      init_kaiming<double>({o, ci, k, k}, ci * k * k, rng),
      init_kaiming<double>({o}, ci * k * k, rng),
      init_kaiming<double>({classes, o}, o, rng),
      init_kaiming<double>({classes}, o, rng)};
  std::vector<int> labels = {0, 2, 1, 0};
  auto fn = [&](const std::vector<Tensor<double>>& p) {
    Tensor<double> y = conv2d(p[0], p[1], p[2], 1, 1);
    Tensor<double> feat = global_avg_pool(y);
    return softmax_cross_entropy(linear(feat, p[3], p[4]), labels);
  };
  EXPECT_LT(grad_check(fn, params, 1e-4), 1e-5);
}

TEST(GradCheckSuite, AllOpsUnderThreshold) {
  for (const auto& r : gradcheck_suite()) {
    EXPECT_LT(r.max_rel_err, 1e-4) << "op " << r.op;
  }
}

TEST(GradCheckSuite, CorruptedConvBackwardIsDetected) {
  bool conv_failed = false;
  for (const auto& r : gradcheck_suite(42, 10, 1e-4, /*conv_backward_scale=*/1.01)) {
    if (r.op == "conv2d") conv_failed = r.max_rel_err >= 1e-4;
  }
  EXPECT_TRUE(conv_failed);
}

TEST(Ops, DeterministicForward) {
  Rng a(31), b(31);
  Tensor<float> x1 = init_kaiming<float>({2, 3, 6, 6}, 1, a);
  Tensor<float> f1 = init_kaiming<float>({4, 3, 3, 3}, 27, a);
  Tensor<float> x2 = init_kaiming<float>({2, 3, 6, 6}, 1, b);
  Tensor<float> f2 = init_kaiming<float>({4, 3, 3, 3}, 27, b);
  Tensor<float> bias({4});
  EXPECT_EQ(conv2d(x1, f1, bias, 1, 1).data(), conv2d(x2, f2, bias, 1, 1).data());
}
