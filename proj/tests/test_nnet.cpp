// Copyright 2026 The ssrg Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssrg/nnet.hpp"

#include "support/oracles.hpp"

#include <gtest/gtest.h>

namespace ssrg {
namespace {

NetworkShape small_shape() {
  NetworkShape s;
  s.input_dim = 3;
  s.hidden = {7, 5};
  s.time_embed_dim = 6;
  s.concept_embed_dim = 4;
  s.num_concepts = 3;
  return s;
}

TEST(Forward, ZeroParametersGiveZeroOutput) {
  const Parameters p = zero_parameters(NetworkShape{});
  Rng rng = make_rng(1);
  const Mat z = randn(2, 4, rng);
  EXPECT_EQ(predict(p, z, 17, 3).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Forward, Deterministic) {
  const Parameters p = init_parameters(NetworkShape{}, 3);
  Rng rng = make_rng(2);
  const Mat z = randn(2, 5, rng);
  const Mat a = predict(p, z, 40, 1);
  const Mat b = predict(p, z, 40, 1);
  EXPECT_EQ(std::memcmp(a.data(), b.data(), sizeof(double) * a.size()), 0);
}

TEST(Forward, ConceptChangesOutput) {
  Rng rng = make_rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Parameters p = oracle::random_parameters(NetworkShape{}, rng);
    const Mat z = randn(2, 1, rng);
    for (int c = 1; c <= p.shape.num_concepts; ++c) EXPECT_NE(predict(p, z, 30, 0), predict(p, z, 30, c));
  }
}

TEST(Forward, BatchColumnsAreIndependent) {
  const Parameters p = init_parameters(small_shape(), 4);
  Rng rng = make_rng(4);
  const Mat z = randn(3, 3, rng);
  const std::vector<int> ts{1, 50, 99};
  const std::vector<int> cs{0, 3, 2};
  const Mat all = predict(p, z, ts, cs);
  for (int b = 0; b < 3; ++b) EXPECT_LT((all.col(b) - predict(p, z.col(b), ts[b], cs[b])).norm(), 1e-14);
}

TEST(Forward, ShapeMismatchIsStructural) {
  const Parameters p = init_parameters(small_shape(), 4);
  EXPECT_THROW(predict(p, Mat::Zero(2, 1), 1, 0), StructuralError);
  EXPECT_THROW(predict(p, Mat::Zero(3, 1), 1, 4), StructuralError);
  const std::vector<int> ts{1};
  const std::vector<int> cs{0, 0};
  EXPECT_THROW(predict(p, Mat::Zero(3, 2), ts, cs), StructuralError);
}

TEST(Backward, MatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const oracle::GradcheckResult r = oracle::gradcheck_trial(seed);
    EXPECT_LE(r.rel_err, 1e-4) << "seed " << seed;
  }
}

TEST(Backward, ZeroUpstreamGivesZeroGradient) {
  const Parameters p = init_parameters(small_shape(), 5);
  Rng rng = make_rng(5);
  const ForwardResult fr = forward(p, randn(3, 2, rng), 10, 1);
  EXPECT_EQ(backward(p, fr.tape, Mat::Zero(3, 2)).squared_norm(), 0.0);
}

TEST(Backward, UnusedEmbeddingRowsHaveZeroGradient) {
  const Parameters p = init_parameters(small_shape(), 6);
  Rng rng = make_rng(6);
  const ForwardResult fr = forward(p, randn(3, 4, rng), 10, 2);
  const GradientBuffer g = backward(p, fr.tape, randn(3, 4, rng));
  const Mat& ge = g.grads[static_cast<std::size_t>(p.embedding_index())];
  for (int row = 0; row < ge.rows(); ++row) {
    if (row == 2)
      EXPECT_GT(ge.row(row).norm(), 0.0);
    else
      EXPECT_EQ(ge.row(row).norm(), 0.0);
  }
}

TEST(Backward, StaleTapeIsRejected) {
  Parameters p = init_parameters(small_shape(), 7);
  Rng rng = make_rng(7);
  const ForwardResult fr = forward(p, randn(3, 1, rng), 3, 0);
  const Parameters other = p;
  EXPECT_THROW(backward(other, fr.tape, Mat::Ones(3, 1)), StructuralError);
  OptimizerState st = OptimizerState::for_params(p, AdamWConfig{});
  adamw_step(p, GradientBuffer::zeros_like(p), TrainMask::all(p), st);
  EXPECT_THROW(backward(p, fr.tape, Mat::Ones(3, 1)), StructuralError);
  EXPECT_THROW(backward(p, forward(p, randn(3, 1, rng), 3, 0).tape, Mat::Ones(3, 2)), StructuralError);
}

TEST(Backward, FiniteOnDefaultShape) {
  const Parameters p = init_parameters(NetworkShape{}, 8);
  Rng rng = make_rng(8);
  const ForwardResult fr = forward(p, 10.0 * randn(2, 16, rng), 100, 8);
  EXPECT_TRUE(fr.eps.allFinite());
  EXPECT_TRUE(backward(p, fr.tape, randn(2, 16, rng)).all_finite());
}

TEST(Mask, SelectorsResolveTensors) {
  const Parameters p = init_parameters(NetworkShape{}, 1);
  const auto count = [](const TrainMask& m) { return std::count(m.trainable.begin(), m.trainable.end(), true); };
  EXPECT_EQ(count(select_tensors(p, {"all"})), p.tensor_count());
  EXPECT_EQ(count(select_tensors(p, {"embedding"})), 1);
  EXPECT_EQ(count(select_tensors(p, {"output"})), 2);
  EXPECT_EQ(count(select_tensors(p, {"hidden"})), 6);
  EXPECT_EQ(count(select_tensors(p, {"layer0", "layer2.bias"})), 3);
  EXPECT_THROW(select_tensors(p, {"layer9"}), ConfigError);
}

TEST(AdamW, AllFalseMaskLeavesParametersUnchanged) {
  Parameters p = init_parameters(small_shape(), 2);
  const Parameters before = p;
  OptimizerState st = OptimizerState::for_params(p, AdamWConfig{1e-2, 0.9, 0.999, 1e-8, 0.1});
  GradientBuffer g = GradientBuffer::zeros_like(p);
  for (auto& t : g.grads) t.setOnes();
  adamw_step(p, g, TrainMask::none(p), st);
  EXPECT_TRUE(p.bit_equal(before));
  EXPECT_EQ(st.step, 1);
  for (const auto& m : st.m) EXPECT_EQ(m.norm(), 0.0);
}

TEST(AdamW, ZeroGradientNoDecayLeavesParametersUnchanged) {
  Parameters p = init_parameters(small_shape(), 2);
  const Parameters before = p;
  OptimizerState st = OptimizerState::for_params(p, AdamWConfig{1e-2});
  for (int i = 0; i < 3; ++i) adamw_step(p, GradientBuffer::zeros_like(p), TrainMask::all(p), st);
  EXPECT_TRUE(p.bit_equal(before));
}

TEST(AdamW, MaskedTensorsAreBitUnchanged) {
  Parameters p = init_parameters(small_shape(), 2);
  const Parameters before = p;
  const TrainMask mask = select_tensors(p, {"output"});
  OptimizerState st = OptimizerState::for_params(p, AdamWConfig{1e-2, 0.9, 0.999, 1e-8, 0.5});
  Rng rng = make_rng(9);
  GradientBuffer g = GradientBuffer::zeros_like(p);
  for (auto& t : g.grads) t = randn(t.rows(), t.cols(), rng);
  adamw_step(p, g, mask, st);
  for (std::size_t i = 0; i < p.tensors.size(); ++i) {
    const double moved = (p.tensors[i].value - before.tensors[i].value).norm();
    if (mask.trainable[i])
      EXPECT_GT(moved, 0.0);
    else
      EXPECT_EQ(moved, 0.0);
  }
}

TEST(AdamW, ScalarTraceMatchesReference) {
  // Reference values from an independent AdamW implementation
  // (lr 0.01, betas 0.9/0.999, eps 1e-8, weight decay 0.1, start 0.5).
  NetworkShape s;
  s.input_dim = 1;
  s.hidden = {};
  s.time_embed_dim = 2;
  s.concept_embed_dim = 1;
  s.num_concepts = 1;
  Parameters p = zero_parameters(s);
  p.bias(0)(0, 0) = 0.5;
  const TrainMask mask = select_tensors(p, {"layer0.bias"});
  OptimizerState st = OptimizerState::for_params(p, AdamWConfig{0.01, 0.9, 0.999, 1e-8, 0.1});
  const double grads[] = {0.1, -0.3, 0.2, 0.0, 1.5};
  const double expect[] = {0.4895000009999999, 0.4939523991110065, 0.4932705697764824, 0.4926234018542751,
                           0.4868061908129035};
  for (int k = 0; k < 5; ++k) {
    GradientBuffer g = GradientBuffer::zeros_like(p);
    g.grads[1](0, 0) = grads[k];
    adamw_step(p, g, mask, st);
    EXPECT_NEAR(p.bias(0)(0, 0), expect[k], 1e-15) << "step " << k + 1;
  }
  EXPECT_EQ(st.step, 5);
}

TEST(AdamW, NanGradientAbortsAndPreservesState) {
  Parameters p = init_parameters(small_shape(), 2);
  OptimizerState st = OptimizerState::for_params(p, AdamWConfig{1e-2});
  GradientBuffer g = GradientBuffer::zeros_like(p);
  for (auto& t : g.grads) t.setConstant(0.1);
  adamw_step(p, g, TrainMask::all(p), st);
  const Parameters before = p;
  const OptimizerState st_before = st;
  g.grads[2](0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(adamw_step(p, g, TrainMask::all(p), st), NumericalError);
  EXPECT_TRUE(p.bit_equal(before));
  EXPECT_EQ(st.step, st_before.step);
  for (std::size_t i = 0; i < st.m.size(); ++i) {
    EXPECT_EQ(st.m[i], st_before.m[i]);
    EXPECT_EQ(st.v[i], st_before.v[i]);
  }
}

TEST(AdamW, IncongruentInputsAreStructural) {
  Parameters p = init_parameters(small_shape(), 2);
  const Parameters q = init_parameters(NetworkShape{}, 2);
  OptimizerState st = OptimizerState::for_params(p, AdamWConfig{});
  EXPECT_THROW(adamw_step(p, GradientBuffer::zeros_like(q), TrainMask::all(p), st), StructuralError);
}

}  // namespace
}  // namespace ssrg
