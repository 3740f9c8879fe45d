#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "hyloc/autodiff.hpp"
#include "hyloc/errors.hpp"
#include "hyloc/gradcheck.hpp"
#include "hyloc/rng.hpp"

using namespace hyloc;
using namespace hyloc::nn;

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Tensor random_tensor(std::vector<std::size_t> shape, RngStream& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.next_gauss(0.0, 1.0);
  return t;
}

}  // namespace

TEST(Tensor, ShapeAndData) {
  Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.shape_str(), "[2x3]");
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  EXPECT_TRUE(t.all_finite());
  t[4] = NAN;
  EXPECT_FALSE(t.all_finite());
}

TEST(Ops, DenseHandComputed) {
  Tape tape;
  const Var x = tape.constant(Tensor({2, 2}, {1, 2, 3, 4}));
  const Var w = tape.leaf(Tensor({3, 2}, {1, 0, 0, 1, 1, -1}));
  const Var b = tape.leaf(Tensor::vec({0.5, 0.0, -1.0}));
  const Var y = dense(x, w, b);
  EXPECT_EQ(tape.value(y), Tensor({2, 3}, {1.5, 2, -2, 3.5, 4, -2}));
  tape.backward(sum(y));
  // d sum / dW[o, i] = sum over rows of x[:, i].
  EXPECT_EQ(tape.grad(w), Tensor({3, 2}, {4, 6, 4, 6, 4, 6}));
  EXPECT_EQ(tape.grad(b), Tensor::vec({2, 2, 2}));
}

TEST(Ops, ShapeMismatchThrows) {
  Tape tape;
  const Var a = tape.constant(Tensor({2, 3}));
  const Var b = tape.constant(Tensor({3, 2}));
  EXPECT_THROW(add(a, b), ShapeError);
  EXPECT_THROW(dense(a, b, tape.constant(Tensor({3}))), ShapeError);
  EXPECT_THROW(conv1d(tape.constant(Tensor({2, 5})), tape.constant(Tensor({1, 2, 2})), tape.constant(Tensor({1}))),
               ShapeError);
}

TEST(Conv1d, HandComputedSamePadding) {
  Tape tape;
  const Var x = tape.constant(Tensor({1, 5}, {1, 2, 3, 4, 5}));
  const Var w = tape.constant(Tensor({1, 1, 3}, {1, 0, -1}));
  const Var b = tape.constant(Tensor::vec({0.5}));
  // y[t] = x[t-1] - x[t+1] + 0.5 with zeros outside.
  EXPECT_EQ(tape.value(conv1d(x, w, b)), Tensor({1, 5}, {-1.5, -1.5, -1.5, -1.5, 4.5}));
}

TEST(Conv1d, MatchesDirectLoops) {
  RngStream rng(1, 0);
  const std::size_t B = 2, ci = 3, co = 4, L = 6, K = 5;
  const Tensor x = random_tensor({B, ci, L}, rng), w = random_tensor({co, ci, K}, rng), b = random_tensor({co}, rng);
  Tape tape;
  const Tensor y = tape.value(conv1d(tape.constant(x), tape.constant(w), tape.constant(b)));
  for (std::size_t n = 0; n < B; ++n)
    for (std::size_t o = 0; o < co; ++o)
      for (std::size_t t = 0; t < L; ++t) {
        double acc = b[o];
        for (std::size_t i = 0; i < ci; ++i)
          for (std::size_t j = 0; j < K; ++j) {
            const long src = static_cast<long>(t + j) - static_cast<long>((K - 1) / 2);
            if (src >= 0 && src < static_cast<long>(L)) acc += w[(o * ci + i) * K + j] * x[(n * ci + i) * L + src];
          }
        EXPECT_NEAR(y[(n * co + o) * L + t], acc, 1e-12);
      }
}

TEST(Lstm, ScalarCellMatchesHandComputation) {
  // One input, one hidden unit; gate rows i, f, g, o.
  const double wx[4] = {0.5, -0.3, 0.8, 0.1};
  const double wh[4] = {-0.2, 0.4, 0.3, -0.6};
  const double bb[4] = {0.1, 1.0, -0.1, 0.2};
  const double x = 0.7, h0 = -0.4, c0 = 0.9;

  const double i = sig(wx[0] * x + wh[0] * h0 + bb[0]);
  const double f = sig(wx[1] * x + wh[1] * h0 + bb[1]);
  const double g = std::tanh(wx[2] * x + wh[2] * h0 + bb[2]);
  const double o = sig(wx[3] * x + wh[3] * h0 + bb[3]);
  const double c1 = f * c0 + i * g;
  const double h1 = o * std::tanh(c1);

  Tape tape;
  LstmParams p{tape.constant(Tensor({4, 1}, {wx[0], wx[1], wx[2], wx[3]})),
               tape.constant(Tensor({4, 1}, {wh[0], wh[1], wh[2], wh[3]})),
               tape.constant(Tensor::vec({bb[0], bb[1], bb[2], bb[3]}))};
  const auto [h, c] = lstm_cell(tape.constant(Tensor({1, 1}, {x})), tape.constant(Tensor({1, 1}, {h0})),
                                tape.constant(Tensor({1, 1}, {c0})), p);
  EXPECT_NEAR(tape.value(h)[0], h1, 1e-12);
  EXPECT_NEAR(tape.value(c)[0], c1, 1e-12);
}

TEST(Tape, GradientsAccumulateOverReuse) {
  Tape tape;
  const Var x = tape.leaf(Tensor::vec({3.0, -2.0}));
  const Var y = add(mul(x, x), scale(x, 4.0));  // x^2 + 4x
  tape.backward(sum(y));
  EXPECT_EQ(tape.grad(x), Tensor::vec({10.0, 0.0}));
  tape.backward(sum(y));
  EXPECT_EQ(tape.grad(x), Tensor::vec({10.0, 0.0}));
  EXPECT_THROW(tape.backward(y), ArgumentError);
}

TEST(Tape, ConstantsReceiveNoGradient) {
  Tape tape;
  const Var c = tape.constant(Tensor::vec({1.0, 2.0}));
  const Var x = tape.leaf(Tensor::vec({0.5, 0.5}));
  const Var y = sum(mul(c, x));
  EXPECT_FALSE(tape.requires_grad(mul(c, c)));
  tape.backward(y);
  EXPECT_EQ(tape.grad(c), Tensor::vec({0.0, 0.0}));
  EXPECT_EQ(tape.grad(x), Tensor::vec({1.0, 2.0}));
}

TEST(Reshaping, StepLayouts) {
  Tape tape;
  // [B=1, C=2, L=3]
  const Var x = tape.constant(Tensor({1, 2, 3}, {1, 2, 3, 4, 5, 6}));
  EXPECT_EQ(tape.value(channels_last(x)), Tensor({3, 2}, {1, 4, 2, 5, 3, 6}));
  EXPECT_EQ(tape.value(gather_step(channels_last(x), 2, 3)), Tensor({1, 2}, {3, 6}));
  EXPECT_EQ(tape.value(unflatten_steps(flatten_batch(x), 2, 3)), tape.value(channels_last(x)));
  EXPECT_EQ(tape.value(slice_last(x, 1, 3)), Tensor({1, 2, 2}, {2, 3, 5, 6}));
  EXPECT_EQ(tape.value(mean_squared_error(tape.constant(Tensor({2, 2}, {0, 0, 1, 1})),
                                          tape.constant(Tensor({2, 2}, {3, 4, 1, 1})))),
            Tensor::vec({12.5}));
}

TEST(GradientCheck, EveryBlockAgreesWithFiniteDifferences) {
  const auto checks = run_gradient_checks(0);
  ASSERT_GE(checks.size(), 18u);
  for (const auto& c : checks) {
    EXPECT_GT(c.checked, 0u) << c.block;
    EXPECT_LT(c.max_rel_error, 1e-4) << c.block;
  }
  for (std::uint64_t seed : {1u, 2u})
    for (const auto& c : run_gradient_checks(seed)) EXPECT_LT(c.max_rel_error, 1e-4) << c.block << " seed " << seed;
}

TEST(GradientCheck, DetectsAWrongGradient) {
  // The scale factor is read off the value, so the tape misses its dependence on x.
  LossFn fn = [](Tape& t, std::span<const Var> v) {
    const double k = t.value(v[0])[0];
    return sum(scale(v[0], k));  // true derivative of x^2 is 2x, tape sees k
  };
  const Tensor in = Tensor::vec({1.5});
  const std::vector<Tensor> inputs{in};
  EXPECT_GT(gradient_check(fn, inputs).max_rel_error, 0.1);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParamStore ps;
  ps.add("w", Tensor::vec({1.0, -2.0, 0.5}));
  const std::vector<Tensor> g{Tensor::vec({0.3, -4.0, 0.0})};
  AdamState st;
  st.lr = 0.01;
  adam_step(ps, g, st);
  // Bias-corrected moments equal g and g^2 after one step.
  EXPECT_NEAR(ps.get("w")[0], 1.0 - 0.01 * 0.3 / (0.3 + 1e-8), 1e-15);
  EXPECT_NEAR(ps.get("w")[1], -2.0 + 0.01 * 4.0 / (4.0 + 1e-8), 1e-15);
  EXPECT_EQ(ps.get("w")[2], 0.5);
  EXPECT_EQ(st.step, 1);

  // Second step with the same gradient, from the textbook recurrences.
  adam_step(ps, g, st);
  const double m = 0.9 * 0.1 * 0.3 + 0.1 * 0.3;
  const double v = 0.999 * 0.001 * 0.09 + 0.001 * 0.09;
  const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
  EXPECT_NEAR(ps.get("w")[0], 1.0 - 0.01 * 0.3 / (0.3 + 1e-8) - 0.01 * mh / (std::sqrt(vh) + 1e-8), 1e-14);
}

TEST(ClipGradNorm, ScalesToMaxNorm) {
  std::vector<Tensor> g{Tensor::vec({3.0}), Tensor::vec({4.0})};
  EXPECT_DOUBLE_EQ(clip_grad_norm(g, 1.0), 5.0);
  EXPECT_NEAR(g[0][0], 0.6, 1e-15);
  EXPECT_NEAR(g[1][0], 0.8, 1e-15);
  EXPECT_NEAR(clip_grad_norm(g, 10.0), 1.0, 1e-15);
  EXPECT_NEAR(g[0][0], 0.6, 1e-15);
}

TEST(ParamStore, SerializationRoundTrip) {
  ParamStore ps;
  ps.add("layer.w", Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  ps.add("layer.b", Tensor::vec({-0.125, 1e-300}));
  EXPECT_EQ(ps.count(), 8u);
  const std::string bytes = ps.serialize();
  EXPECT_EQ(bytes.substr(0, 4), "HYNN");
  EXPECT_EQ(ParamStore::deserialize(bytes), ps);

  const auto path = std::filesystem::temp_directory_path() / "hyloc_params.bin";
  ps.save(path);
  EXPECT_EQ(ParamStore::load(path), ps);
  std::filesystem::remove(path);

  EXPECT_THROW(ParamStore::deserialize("XXXX"), ValidationError);
  EXPECT_THROW(ParamStore::deserialize(bytes.substr(0, bytes.size() - 3)), ValidationError);
  EXPECT_THROW(ParamStore::load("/nonexistent/p.bin"), IoError);
  EXPECT_THROW(ps.add("layer.w", Tensor::vec({1.0})), ArgumentError);
}
