// Copyright 2026 The sparseseq Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sparseseq/autodiff.h"

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "sparseseq/errors.h"
#include "testing/gradcheck.h"

namespace sparseseq {
namespace {

using testing::MaxRelativeError;
using testing::NumericGradient;
using testing::RandomTensor;

using BuildFn = std::function<Var(Tape&, const std::vector<Var>&)>;

// Checks d/dx_i sum(R o f(x_1..x_n)) against central differences, with R a
// fixed random weighting so that symmetric errors cannot cancel.
double WorstGradientError(std::vector<Tensor> inputs, const BuildFn& build,
                          std::uint64_t seed = 7) {
  std::mt19937_64 gen(seed);
  Tensor weights;
  auto loss_value = [&]() {
    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& t : inputs) vars.push_back(tape.Constant(t));
    Var out = build(tape, vars);
    if (weights.empty()) weights = RandomTensor(out.value().shape(), gen);
    return Sum(MulConstant(out, weights)).value()[0];
  };
  loss_value();

  Tape tape;
  std::vector<Var> vars;
  for (const Tensor& t : inputs) vars.push_back(tape.Leaf(t));
  Var loss = Sum(MulConstant(build(tape, vars), weights));
  tape.Backward(loss);

  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Tensor numeric = NumericGradient(loss_value, &inputs[i]);
    worst = std::max(worst, MaxRelativeError(tape.Grad(vars[i]), numeric));
  }
  return worst;
}

TEST(MatMulTest, IdentityLeavesMatrixUnchanged) {
  Tape tape;
  Tensor x = Tensor::FromRows({{1.5, -2.0}, {0.25, 4.0}});
  Var y = MatMul(tape.Constant(Tensor::Identity(2)), tape.Constant(x));
  EXPECT_EQ(y.value().shape(), x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y.value()[i], x[i]);
}

TEST(MatMulTest, HandArithmetic) {
  Tape tape;
  Var y = MatMul(tape.Constant(Tensor::FromRows({{1, 2}, {3, 4}})),
                 tape.Constant(Tensor::FromRows({{1}, {1}})));
  ASSERT_EQ(y.value().shape(), (std::vector<std::size_t>{2, 1}));
  EXPECT_EQ(y.value()[0], 3.0);
  EXPECT_EQ(y.value()[1], 7.0);
}

TEST(MatMulTest, ShapeMismatchThrows) {
  Tape tape;
  Var a = tape.Constant(Tensor({2, 3}));
  Var b = tape.Constant(Tensor({2, 3}));
  EXPECT_THROW(MatMul(a, b), ShapeError);
  EXPECT_NO_THROW(MatMulTransposed(a, b));
}

TEST(MatMulTest, GradientMatchesFiniteDifferences) {
  std::mt19937_64 gen(1);
  EXPECT_LT(WorstGradientError({RandomTensor({3, 4}, gen),
                                RandomTensor({4, 2}, gen)},
                               [](Tape&, const std::vector<Var>& v) {
                                 return MatMul(v[0], v[1]);
                               }),
            1e-6);
  EXPECT_LT(WorstGradientError({RandomTensor({3, 4}, gen),
                                RandomTensor({5, 4}, gen)},
                               [](Tape&, const std::vector<Var>& v) {
                                 return MatMulTransposed(v[0], v[1]);
                               }),
            1e-6);
}

TEST(ElementwiseTest, ValuesAtZero) {
  Tape tape;
  Var z = tape.Constant(Tensor({1}, 0.0));
  EXPECT_EQ(Sigmoid(z).value()[0], 0.5);
  EXPECT_EQ(Tanh(z).value()[0], 0.0);
}

TEST(ElementwiseTest, SigmoidGradientAtOne) {
  EXPECT_LT(WorstGradientError({Tensor({1}, 1.0)},
                               [](Tape&, const std::vector<Var>& v) {
                                 return Sigmoid(v[0]);
                               }),
            1e-6);
}

TEST(ElementwiseTest, GradientsMatchFiniteDifferences) {
  std::mt19937_64 gen(2);
  const std::vector<std::pair<const char*, BuildFn>> cases = {
      {"add", [](Tape&, const std::vector<Var>& v) { return Add(v[0], v[1]); }},
      {"sub", [](Tape&, const std::vector<Var>& v) { return Sub(v[0], v[1]); }},
      {"mul", [](Tape&, const std::vector<Var>& v) { return Mul(v[0], v[1]); }},
      {"sigmoid",
       [](Tape&, const std::vector<Var>& v) { return Sigmoid(v[0]); }},
      {"tanh", [](Tape&, const std::vector<Var>& v) { return Tanh(v[0]); }},
      {"scale",
       [](Tape&, const std::vector<Var>& v) { return Scale(v[0], -1.7); }},
      {"slice_columns",
       [](Tape&, const std::vector<Var>& v) { return SliceColumns(v[0], 1, 2); }},
      {"slice_rows",
       [](Tape&, const std::vector<Var>& v) { return SliceRows(v[1], 1, 2); }},
      {"concat_columns",
       [](Tape&, const std::vector<Var>& v) {
         return ConcatColumns(std::vector<Var>{v[0], v[1]});
       }},
      {"concat_rows",
       [](Tape&, const std::vector<Var>& v) {
         return ConcatRows(std::vector<Var>{v[1], v[0]});
       }},
  };
  for (const auto& [name, build] : cases) {
    SCOPED_TRACE(name);
    EXPECT_LT(WorstGradientError(
                  {RandomTensor({3, 4}, gen), RandomTensor({3, 4}, gen)},
                  build),
              1e-6);
  }
}

TEST(ElementwiseTest, BiasAndMaskGradients) {
  std::mt19937_64 gen(3);
  Tensor mask = RandomTensor({3, 4}, gen);
  EXPECT_LT(WorstGradientError({RandomTensor({3, 4}, gen),
                                RandomTensor({4}, gen)},
                               [](Tape&, const std::vector<Var>& v) {
                                 return AddRowVector(v[0], v[1]);
                               }),
            1e-6);
  EXPECT_LT(WorstGradientError({RandomTensor({3, 4}, gen)},
                               [&](Tape&, const std::vector<Var>& v) {
                                 return MulConstant(v[0], mask);
                               }),
            1e-6);
}

TEST(ElementwiseTest, IncompatibleShapesThrow) {
  Tape tape;
  Var a = tape.Constant(Tensor({2, 3}));
  Var b = tape.Constant(Tensor({3, 2}));
  EXPECT_THROW(Add(a, b), ShapeError);
  EXPECT_THROW(Mul(a, b), ShapeError);
  EXPECT_THROW(AddRowVector(a, tape.Constant(Tensor({2}))), ShapeError);
  EXPECT_THROW(SliceColumns(a, 2, 2), ShapeError);
}

TEST(GatherRowsTest, GradientScattersIntoSelectedRows) {
  std::mt19937_64 gen(4);
  const std::vector<int> ids = {2, 0, 2};
  EXPECT_LT(WorstGradientError({RandomTensor({4, 3}, gen)},
                               [&](Tape&, const std::vector<Var>& v) {
                                 return GatherRows(v[0], ids);
                               }),
            1e-6);
  Tape tape;
  Var table = tape.Constant(Tensor({4, 3}));
  const std::vector<int> bad = {4};
  EXPECT_THROW(GatherRows(table, bad), std::out_of_range);
}

TEST(SoftmaxCrossEntropyTest, UniformLogitsGiveLogClasses) {
  Tape tape;
  const std::vector<int> targets = {3, 0};
  Var loss = SoftmaxCrossEntropy(tape.Constant(Tensor({2, 7}, 0.3)), targets);
  EXPECT_NEAR(loss.value()[0], std::log(7.0), 1e-12);
}

TEST(SoftmaxCrossEntropyTest, SaturatedCorrectLogitIsNearZero) {
  Tape tape;
  const std::vector<int> targets = {0};
  Var loss = SoftmaxCrossEntropy(
      tape.Constant(Tensor::FromRows({{10.0, -10.0}})), targets);
  EXPECT_LE(loss.value()[0], 1e-4);
}

TEST(SoftmaxCrossEntropyTest, GradientMatchesFiniteDifferences) {
  std::mt19937_64 gen(5);
  const std::vector<int> targets = {1, 6, 0, 3};
  EXPECT_LT(WorstGradientError({RandomTensor({4, 7}, gen)},
                               [&](Tape&, const std::vector<Var>& v) {
                                 return SoftmaxCrossEntropy(v[0], targets);
                               }),
            1e-6);
}

TEST(SoftmaxCrossEntropyTest, IgnoredRowsDoNotContribute) {
  std::mt19937_64 gen(6);
  Tensor logits = RandomTensor({3, 5}, gen);
  Tape tape;
  Var x = tape.Leaf(logits);
  const std::vector<int> targets = {2, kIgnoreTarget, 4};
  Var loss = SoftmaxCrossEntropy(x, targets);
  tape.Backward(loss);
  for (std::size_t c = 0; c < 5; ++c) EXPECT_EQ(tape.Grad(x).at(1, c), 0.0);

  CrossEntropyStats stats = EvaluateLogits(logits, targets);
  EXPECT_EQ(stats.count, 2u);
  EXPECT_NEAR(stats.total_nll / 2.0, loss.value()[0], 1e-12);
}

TEST(SoftmaxCrossEntropyTest, OutOfRangeTargetThrows) {
  Tape tape;
  Var x = tape.Constant(Tensor({2, 3}));
  const std::vector<int> targets = {0, 3};
  EXPECT_THROW(SoftmaxCrossEntropy(x, targets), std::out_of_range);
}

TEST(BackwardTest, SumGivesOnes) {
  Tape tape;
  Var x = tape.Leaf(Tensor({2, 3}, 0.7));
  tape.Backward(Sum(x));
  for (double g : tape.Grad(x).values()) EXPECT_EQ(g, 1.0);
}

TEST(BackwardTest, SumOfSquaresGivesTwoX) {
  std::mt19937_64 gen(8);
  Tensor xv = RandomTensor({3, 3}, gen);
  Tape tape;
  Var x = tape.Leaf(xv);
  tape.Backward(Sum(Mul(x, x)));
  for (std::size_t i = 0; i < xv.size(); ++i) {
    EXPECT_DOUBLE_EQ(tape.Grad(x)[i], 2.0 * xv[i]);
  }
}

TEST(BackwardTest, NonScalarLossThrows) {
  Tape tape;
  Var x = tape.Leaf(Tensor({2, 2}, 1.0));
  EXPECT_THROW(tape.Backward(x), ShapeError);
}

TEST(BackwardTest, SharedSubexpressionsAccumulate) {
  std::mt19937_64 gen(9);
  Tensor xv = RandomTensor({2, 3}, gen);
  auto grad_of = [&](int which) {
    Tape tape;
    Var x = tape.Leaf(xv);
    Var f = Sum(Tanh(x));
    Var g = Sum(Mul(Sigmoid(x), x));
    Var loss = which == 0 ? f : which == 1 ? g : Add(f, g);
    tape.Backward(loss);
    return tape.Grad(x);
  };
  Tensor gf = grad_of(0);
  Tensor gg = grad_of(1);
  Tensor both = grad_of(2);
  for (std::size_t i = 0; i < xv.size(); ++i) {
    EXPECT_NEAR(both[i], gf[i] + gg[i], 1e-15);
  }
}

TEST(BackwardTest, ParameterGradientsAccumulateAcrossUses) {
  Parameter p("w", Tensor({2}, 3.0));
  Tape tape;
  Var a = tape.Param(p);
  Var b = tape.Param(p);
  tape.Backward(Sum(Mul(a, b)));
  EXPECT_EQ(p.grad.shape(), p.value.shape());
  EXPECT_EQ(p.grad[0], 6.0);
  EXPECT_EQ(p.grad[1], 6.0);
}

TEST(BackwardTest, DetachCutsTheGradientPath) {
  Tape first;
  Var x = first.Leaf(Tensor({2}, 0.5));
  Var y = Tanh(x);
  Tape second;
  Var y2 = Detach(y, second);
  EXPECT_FALSE(second.RequiresGrad(y2));
  EXPECT_EQ(y2.value()[0], y.value()[0]);
}

TEST(BackwardTest, DeterministicForIdenticalInputs) {
  auto run = []() {
    std::mt19937_64 gen(10);
    Tensor a = RandomTensor({5, 6}, gen);
    Tensor b = RandomTensor({6, 4}, gen);
    Tape tape;
    Var va = tape.Leaf(a);
    Var vb = tape.Leaf(b);
    const std::vector<int> targets = {0, 1, 2, 3, 0};
    tape.Backward(SoftmaxCrossEntropy(Tanh(MatMul(va, vb)), targets));
    std::vector<double> out(tape.Grad(va).values().begin(),
                            tape.Grad(va).values().end());
    out.insert(out.end(), tape.Grad(vb).values().begin(),
               tape.Grad(vb).values().end());
    return out;
  };
  EXPECT_EQ(run(), run());
}

TEST(TensorTest, ShapeDataMismatchThrows) {
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>(3)), ShapeError);
  Tensor t({3, 2});
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rows(), 3u);
  EXPECT_EQ(t.cols(), 2u);
}

}  // namespace
}  // namespace sparseseq
