#include "hyloc/gradcheck.hpp"

#include <cmath>

#include "hyloc/autodiff.hpp"
#include "hyloc/baselines.hpp"
#include "hyloc/fusion.hpp"
#include "hyloc/rng.hpp"

namespace hyloc {

using nn::Tape;
using nn::Tensor;
using nn::Var;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, RngStream& rng, double away_from_zero = 0.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) {
    double x = rng.next_gauss(0.0, 1.0);
    if (std::abs(x) < away_from_zero) x = std::copysign(away_from_zero + std::abs(x), x);
    v = x;
  }
  return t;
}

/// Non-trivial scalar readout: sum(y * y * 0.5 + y).
Var readout(Var y) { return nn::sum(nn::add(nn::scale(nn::mul(y, y), 0.5), y)); }

BlockCheck check(const std::string& name, const nn::LossFn& fn, const std::vector<Tensor>& inputs,
                 std::size_t max_entries = 0) {
  const auto r = nn::gradient_check(fn, inputs, 1e-5, max_entries);
  return {name, r.max_rel_error, r.checked};
}

BlockCheck check_model(const std::string& name, const WindowModel& model, RngStream& rng, std::size_t batch) {
  const std::size_t l = model.window();
  const Tensor a = random_tensor({batch, model.a_dim(), l}, rng);
  const Tensor b = random_tensor({batch, model.b_dim(), l}, rng);
  const Tensor target = random_tensor({batch, 2}, rng);
  // Random parameters instead of the initializer: zero biases put relu
  // pre-activations exactly on the kink.
  std::vector<Tensor> inputs;
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    Tensor p = random_tensor(model.params.at(i).shape(), rng);
    for (auto& v : p.values()) v *= 0.5;
    inputs.push_back(std::move(p));
  }
  inputs.push_back(a);
  inputs.push_back(b);
  const std::size_t n = model.params.size();
  auto fn = [&](Tape& t, std::span<const Var> v) {
    nn::BoundParams p(model.params, std::vector<Var>(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n)));
    const auto fp = model.forward(t, p, v[n], v[n + 1]);
    return nn::mean_squared_error(fp.position, t.constant(target));
  };
  return check(name, fn, inputs, 24);
}

}  // namespace

std::vector<BlockCheck> run_gradient_checks(std::uint64_t seed) {
  auto rng = RngStream::named(seed, "gradcheck/inputs");
  std::vector<BlockCheck> out;
  auto r = [&](std::vector<std::size_t> shape, double away = 0.0) { return random_tensor(std::move(shape), rng, away); };

  out.push_back(check("dense", [](Tape&, std::span<const Var> v) { return readout(nn::dense(v[0], v[1], v[2])); },
                      {r({3, 4}), r({5, 4}), r({5})}));
  out.push_back(check("matmul_t", [](Tape&, std::span<const Var> v) { return readout(nn::matmul_t(v[0], v[1])); },
                      {r({4}), r({3, 4})}));
  out.push_back(check("add", [](Tape&, std::span<const Var> v) { return readout(nn::add(v[0], v[1])); },
                      {r({2, 3}), r({2, 3})}));
  out.push_back(check("sub", [](Tape&, std::span<const Var> v) { return readout(nn::sub(v[0], v[1])); },
                      {r({2, 3}), r({2, 3})}));
  out.push_back(check("mul", [](Tape&, std::span<const Var> v) { return readout(nn::mul(v[0], v[1])); },
                      {r({2, 3}), r({2, 3})}));
  out.push_back(check("scale", [](Tape&, std::span<const Var> v) { return readout(nn::scale(v[0], -1.7)); }, {r({5})}));
  out.push_back(check("sigmoid", [](Tape&, std::span<const Var> v) { return readout(nn::sigmoid(v[0])); }, {r({2, 4})}));
  out.push_back(check("tanh", [](Tape&, std::span<const Var> v) { return readout(nn::tanh(v[0])); }, {r({2, 4})}));
  out.push_back(check("relu", [](Tape&, std::span<const Var> v) { return readout(nn::relu(v[0])); }, {r({2, 4}, 0.1)}));
  out.push_back(check("concat", [](Tape&, std::span<const Var> v) { return readout(nn::concat(v[0], v[1])); },
                      {r({2, 3}), r({2, 2})}));
  out.push_back(check("slice_last", [](Tape&, std::span<const Var> v) { return readout(nn::slice_last(v[0], 1, 3)); },
                      {r({2, 4})}));
  out.push_back(check("conv1d", [](Tape&, std::span<const Var> v) { return readout(nn::conv1d(v[0], v[1], v[2])); },
                      {r({2, 3, 5}), r({4, 3, 3}), r({4})}));
  out.push_back(check("channels_last", [](Tape&, std::span<const Var> v) { return readout(nn::channels_last(v[0])); },
                      {r({2, 3, 4})}));
  out.push_back(check("gather_step", [](Tape&, std::span<const Var> v) { return readout(nn::gather_step(v[0], 1, 3)); },
                      {r({6, 2})}));
  out.push_back(check("flatten_unflatten",
                      [](Tape&, std::span<const Var> v) {
                        return readout(nn::unflatten_steps(nn::flatten_batch(v[0]), 3, 4));
                      },
                      {r({2, 3, 4})}));
  out.push_back(check("mean_squared_error",
                      [](Tape&, std::span<const Var> v) { return nn::mean_squared_error(v[0], v[1]); },
                      {r({3, 2}), r({3, 2})}));
  out.push_back(check("lstm_cell",
                      [](Tape&, std::span<const Var> v) {
                        auto [h, c] = nn::lstm_cell(v[0], v[1], v[2], {v[3], v[4], v[5]});
                        return nn::add(readout(h), readout(c));
                      },
                      {r({2, 3}), r({2, 4}), r({2, 4}), r({16, 3}), r({16, 4}), r({16})}));
  out.push_back(check("attention_mask",
                      [](Tape&, std::span<const Var> v) { return readout(attention_mask(v[0], v[1], v[2])); },
                      {r({4, 3}), r({3, 3}), r({3, 3})}));

  FusionConfig fc;
  fc.window = 3;
  fc.conv1 = 2;
  fc.conv2 = 3;
  fc.lstm_hidden = 3;
  fc.fc_hidden = 3;
  out.push_back(check_model("fusion_forward", FusionModel(fc, 5, seed), rng, 2));

  BlackboxConfig bc;
  bc.window = 3;
  bc.rf_conv[0] = 2;
  bc.rf_conv[1] = 2;
  bc.rf_conv[2] = 2;
  bc.vo_conv[0] = 2;
  bc.vo_conv[1] = 2;
  bc.vo_conv[2] = 2;
  bc.rf_dense = 4;
  bc.vo_dense = 4;
  bc.embed = 2;
  bc.lstm_hidden = 3;
  bc.fc_hidden = 3;
  out.push_back(check_model("blackbox_forward", BlackboxModel(bc, 5, seed), rng, 2));
  return out;
}

}  // namespace hyloc
