#include "hyloc/layers.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hyloc/errors.hpp"

namespace hyloc::layers {

using nn::Tensor;
using nn::Var;

namespace {

Tensor glorot(std::vector<std::size_t> shape, std::size_t fan_in, std::size_t fan_out, RngStream& rng) {
  Tensor t(std::move(shape));
  const double sigma = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.values()) v = rng.next_gauss(0.0, sigma);
  return t;
}

}  // namespace

void add_dense(nn::ParamStore& store, const std::string& name, std::size_t in, std::size_t out, RngStream& rng) {
  store.add(name + ".w", glorot({out, in}, in, out, rng));
  store.add(name + ".b", Tensor({out}));
}

void add_conv(nn::ParamStore& store, const std::string& name, std::size_t c_in, std::size_t c_out, std::size_t k,
              RngStream& rng) {
  store.add(name + ".w", glorot({c_out, c_in, k}, c_in * k, c_out * k, rng));
  store.add(name + ".b", Tensor({c_out}));
}

void add_attention(nn::ParamStore& store, const std::string& name, std::size_t c, RngStream& rng) {
  store.add(name + ".w1", glorot({c, c}, c, c, rng));
  store.add(name + ".w2", glorot({c, c}, c, c, rng));
}

void add_lstm(nn::ParamStore& store, const std::string& name, std::size_t in, std::size_t hidden, RngStream& rng) {
  store.add(name + ".wx", glorot({4 * hidden, in}, in, hidden, rng));
  store.add(name + ".wh", glorot({4 * hidden, hidden}, hidden, hidden, rng));
  Tensor b({4 * hidden});
  for (std::size_t j = hidden; j < 2 * hidden; ++j) b[j] = 1.0;
  store.add(name + ".b", std::move(b));
}

void add_recurrent_head(nn::ParamStore& store, std::size_t in, std::size_t hidden, std::size_t layers,
                        std::size_t fc_hidden, RngStream& rng) {
  for (std::size_t l = 0; l < layers; ++l) add_lstm(store, "lstm" + std::to_string(l), l == 0 ? in : hidden, hidden, rng);
  add_dense(store, "fc1", hidden, fc_hidden, rng);
  add_dense(store, "fc2", fc_hidden, 2, rng);
}

Var dense(const nn::BoundParams& p, const std::string& name, Var x) { return nn::dense(x, p[name + ".w"], p[name + ".b"]); }

Var conv(const nn::BoundParams& p, const std::string& name, Var x) {
  return nn::conv1d(x, p[name + ".w"], p[name + ".b"]);
}

Var recurrent_head(nn::Tape& tape, const nn::BoundParams& p, Var seq, std::size_t batch, std::size_t steps,
                   std::size_t layers) {
  if (layers == 0) throw ArgumentError("recurrent_head needs at least one layer");
  std::vector<Var> inputs;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string name = "lstm" + std::to_string(l);
    nn::LstmParams lp{p[name + ".wx"], p[name + ".wh"], p[name + ".b"]};
    const std::size_t hidden = lp.w_h.shape()[1];
    Var h = tape.constant(Tensor({batch, hidden}));
    Var c = tape.constant(Tensor({batch, hidden}));
    std::vector<Var> outputs;
    if (l == 0) {
      // Project every step at once, then slice per step.
      Var proj = nn::matmul_t(seq, lp.w_x);
      for (std::size_t t = 0; t < steps; ++t) {
        std::tie(h, c) = nn::lstm_cell_projected(nn::gather_step(proj, t, steps), h, c, lp);
        outputs.push_back(h);
      }
    } else {
      for (std::size_t t = 0; t < steps; ++t) {
        std::tie(h, c) = nn::lstm_cell(inputs[t], h, c, lp);
        outputs.push_back(h);
      }
    }
    inputs = std::move(outputs);
  }
  return dense(p, "fc2", nn::relu(dense(p, "fc1", inputs.back())));
}

// --- checkpoint helpers -------------------------------------------------------------

using json = nlohmann::ordered_json;

std::string normalizer_to_json(const Normalizer& n) {
  json j = {{"a_mean", n.a_mean},
            {"a_scale", n.a_scale},
            {"b_mean", n.b_mean},
            {"b_scale", n.b_scale},
            {"target_mean", {n.target_mean[0], n.target_mean[1]}},
            {"target_scale", {n.target_scale[0], n.target_scale[1]}}};
  return j.dump();
}

Normalizer normalizer_from_json(const std::string& text) {
  const auto j = json::parse(text);
  Normalizer n;
  n.a_mean = j.at("a_mean").get<std::vector<double>>();
  n.a_scale = j.at("a_scale").get<std::vector<double>>();
  n.b_mean = j.at("b_mean").get<std::vector<double>>();
  n.b_scale = j.at("b_scale").get<std::vector<double>>();
  for (int i = 0; i < 2; ++i) {
    n.target_mean[i] = j.at("target_mean").at(i).get<double>();
    n.target_scale[i] = j.at("target_scale").at(i).get<double>();
  }
  return n;
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  auto s = path;
  s += ".json";
  return s;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

void check_params_match(const nn::ParamStore& expected, const nn::ParamStore& loaded) {
  if (expected.size() != loaded.size()) throw ValidationError("checkpoint tensor count does not match its configuration");
  for (std::size_t i = 0; i < expected.size(); ++i)
    if (expected.name(i) != loaded.name(i) || expected.at(i).shape() != loaded.at(i).shape())
      throw ValidationError("checkpoint tensor " + loaded.name(i) + " does not match its configuration");
}

}  // namespace hyloc::layers
