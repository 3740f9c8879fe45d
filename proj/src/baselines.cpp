#include "hyloc/baselines.hpp"

#include <cmath>

#include <json.hpp>

#include "hyloc/errors.hpp"
#include "hyloc/layers.hpp"
#include "hyloc/vo_track.hpp"

namespace hyloc {

using nn::Tensor;
using nn::Var;

Trajectory rf_only(const Trace& trace, const AnchorSelectorModel* selector) {
  std::vector<Trajectory::Sample> out;
  for (const auto& sample : trace.rf) {
    try {
      out.push_back({sample.t, localize_epoch(sample, trace.layout, selector).mlr.position});
    } catch (const GeometryError&) {
      // missing epoch
    }
  }
  if (out.empty()) throw GeometryError("no RF epoch could be localized");
  return Trajectory(std::move(out));
}

Trajectory vo_only(const Trace& trace) {
  std::vector<PolarStep> steps;
  std::vector<double> times;
  for (std::size_t e = 0; e < trace.epochs(); ++e) {
    times.push_back(trace.rf[e].t);
    if (e > 0) steps.push_back({trace.vo[e].r, trace.vo[e].theta});
  }
  return integrate_steps({trace.gt.front().value, 0.0}, steps, times);
}

// --- EKF ----------------------------------------------------------------------------

void ekf_predict(EkfState& s, double r, double theta, const Eigen::Matrix2d& q) {
  const double h = s.x(2) + theta;
  const double c = std::cos(h);
  const double sn = std::sin(h);
  Eigen::Matrix3d f = Eigen::Matrix3d::Identity();
  f(0, 2) = -r * sn;
  f(1, 2) = r * c;
  Eigen::Matrix<double, 3, 2> g;
  g << c, -r * sn, sn, r * c, 0.0, 1.0;
  s.x << s.x(0) + r * c, s.x(1) + r * sn, h;
  s.P = f * s.P * f.transpose() + g * q * g.transpose();
  s.P = 0.5 * (s.P + s.P.transpose()).eval();
}

bool ekf_update(EkfState& s, Position2D z, const Eigen::Matrix2d& r) {
  Eigen::Matrix<double, 2, 3> hm = Eigen::Matrix<double, 2, 3>::Zero();
  hm(0, 0) = 1.0;
  hm(1, 1) = 1.0;
  const Eigen::Matrix2d sm = hm * s.P * hm.transpose() + r;
  const Eigen::FullPivLU<Eigen::Matrix2d> lu(sm);
  if (!lu.isInvertible()) return false;
  const Eigen::Matrix<double, 3, 2> k = s.P * hm.transpose() * lu.inverse();
  const Eigen::Vector2d innovation(z.x - s.x(0), z.y - s.x(1));
  s.x += k * innovation;
  s.P = (Eigen::Matrix3d::Identity() - k * hm) * s.P;
  s.P = 0.5 * (s.P + s.P.transpose()).eval();
  return true;
}

Trajectory ekf_fuse(const Trace& trace, const EkfOptions& options) {
  const double rf_sigma = options.rf_sigma.value_or(trace.noise.sigma_los);
  const double r_sigma = options.vo_r_sigma.value_or(trace.noise.vo_r_sigma0);
  const double th_sigma = options.vo_theta_sigma.value_or(trace.noise.vo_theta_sigma0);
  if (rf_sigma < 0.0 || r_sigma < 0.0 || th_sigma < 0.0 || options.heading_sigma0 < 0.0)
    throw ArgumentError("EKF noise levels must be non-negative");
  const Eigen::Matrix2d rm = rf_sigma * rf_sigma * Eigen::Matrix2d::Identity();

  std::vector<Trajectory::Sample> out;
  EkfState s;
  bool started = false;
  for (std::size_t e = 0; e < trace.epochs(); ++e) {
    std::optional<Position2D> fix;
    try {
      fix = localize_epoch(trace.rf[e], trace.layout, nullptr).mlr.position;
    } catch (const GeometryError&) {
    }
    if (!started) {
      if (!fix) continue;
      s.x << fix->x, fix->y, 0.0;
      s.P = Eigen::Matrix3d::Zero();
      s.P.topLeftCorner<2, 2>() = rm;
      s.P(2, 2) = options.heading_sigma0 * options.heading_sigma0;
      started = true;
    } else {
      const auto& vo = trace.vo[e];
      const double scale = vo_noise_scale(vo.keypoints);
      Eigen::Matrix2d q = Eigen::Matrix2d::Zero();
      q(0, 0) = std::pow(r_sigma * scale, 2);
      q(1, 1) = std::pow(th_sigma * scale, 2);
      ekf_predict(s, vo.r, vo.theta, q);
      if (fix) ekf_update(s, *fix, rm);
    }
    if (!s.P.allFinite() || !s.x.allFinite())
      throw NumericalError("EKF covariance became non-finite at epoch " + std::to_string(e));
    out.push_back({trace.rf[e].t, {s.x(0), s.x(1)}});
  }
  if (out.empty()) throw GeometryError("no RF epoch could be localized");
  return Trajectory(std::move(out));
}

// --- blackbox -------------------------------------------------------------------------

void BlackboxConfig::validate() const {
  if (window < 2) throw ArgumentError("window length must be at least 2");
  if (kernel % 2 == 0) throw ArgumentError("kernel size must be odd");
  for (auto c : rf_conv)
    if (c == 0) throw ArgumentError("layer sizes must be positive");
  for (auto c : vo_conv)
    if (c == 0) throw ArgumentError("layer sizes must be positive");
  if (rf_dense == 0 || vo_dense == 0 || embed == 0 || lstm_hidden == 0 || lstm_layers == 0 || fc_hidden == 0)
    throw ArgumentError("layer sizes must be positive");
}

SensorSequence blackbox_sequence(const Trace& trace) {
  SensorSequence seq;
  for (std::size_t e = 0; e < trace.epochs(); ++e) {
    std::vector<double> a;
    for (const auto& en : trace.rf[e].entries) a.push_back(en.range);
    for (const auto& en : trace.rf[e].entries) a.push_back(en.power);
    seq.a.push_back(std::move(a));
    const auto& vo = trace.vo[e];
    seq.b.push_back({vo.r, vo.theta, static_cast<double>(vo.keypoints)});
    seq.gt.push_back(trace.gt[e].value);
    seq.t.push_back(trace.rf[e].t);
  }
  return seq;
}

BlackboxModel::BlackboxModel(BlackboxConfig config, std::size_t num_anchors, std::uint64_t seed)
    : config_(config), num_anchors_(num_anchors) {
  config_.validate();
  if (num_anchors < 3) throw ArgumentError("blackbox needs at least three anchors");
  auto rng = RngStream::named(seed, "blackbox/init");
  const auto& c = config_;
  const std::size_t l = c.window;
  auto encoder = [&](const std::string& side, std::size_t in, const std::size_t* conv, std::size_t hidden) {
    layers::add_conv(params, side + ".conv1", in, conv[0], c.kernel, rng);
    layers::add_conv(params, side + ".conv2", conv[0], conv[1], c.kernel, rng);
    layers::add_conv(params, side + ".conv3", conv[1], conv[2], c.kernel, rng);
    layers::add_dense(params, side + ".fc1", conv[2] * l, hidden, rng);
    layers::add_dense(params, side + ".fc2", hidden, c.embed * l, rng);
  };
  encoder("rf", 2 * num_anchors, c.rf_conv, c.rf_dense);
  encoder("vo", 3, c.vo_conv, c.vo_dense);
  layers::add_attention(params, "self.rf", c.embed, rng);
  layers::add_attention(params, "self.vo", c.embed, rng);
  layers::add_attention(params, "att.rv", c.embed, rng);
  layers::add_attention(params, "att.vr", c.embed, rng);
  layers::add_recurrent_head(params, 2 * c.embed, c.lstm_hidden, c.lstm_layers, c.fc_hidden, rng);
}

ForwardPass BlackboxModel::forward(nn::Tape& tape, const nn::BoundParams& p, Var a, Var b) const {
  const auto& as = a.shape();
  const auto& bs = b.shape();
  const std::size_t l = config_.window;
  if (as.size() != 3 || bs.size() != 3 || as[1] != a_dim() || bs[1] != 3 || as[2] != l || bs[2] != l ||
      as[0] != bs[0])
    throw ArgumentError("blackbox forward: expected windows [B x " + std::to_string(a_dim()) + " x " +
                        std::to_string(l) + "] and [B x 3 x " + std::to_string(l) + "], got " + nn::shape_str(as) +
                        " and " + nn::shape_str(bs));
  auto encode = [&](const std::string& side, Var x) {
    for (const char* layer : {".conv1", ".conv2", ".conv3"}) x = nn::relu(layers::conv(p, side + layer, x));
    Var h = nn::relu(layers::dense(p, side + ".fc1", nn::flatten_batch(x)));
    h = nn::relu(layers::dense(p, side + ".fc2", h));
    return nn::unflatten_steps(h, config_.embed, l);  // [B*L x E]
  };
  Var fr = encode("rf", a);
  Var fv = encode("vo", b);
  fr = nn::mul(attention_mask(fr, p["self.rf.w1"], p["self.rf.w2"]), fr);
  fv = nn::mul(attention_mask(fv, p["self.vo.w1"], p["self.vo.w2"]), fv);
  Var a_rv = attention_mask(fv, p["att.rv.w1"], p["att.rv.w2"]);
  Var a_vr = attention_mask(fr, p["att.vr.w1"], p["att.vr.w2"]);
  ForwardPass out;
  out.mask_a = a_vr;
  out.mask_b = a_rv;
  Var fused = nn::concat(nn::mul(a_rv, fv), nn::mul(a_vr, fr));
  out.position = layers::recurrent_head(tape, p, fused, as[0], l, config_.lstm_layers);
  return out;
}

SensorSequence BlackboxModel::sequence(const Trace& trace) const {
  if (trace.layout.size() != num_anchors_)
    throw ArgumentError("trace has " + std::to_string(trace.layout.size()) + " anchors, model expects " +
                        std::to_string(num_anchors_));
  return blackbox_sequence(trace);
}

namespace {

using json = nlohmann::ordered_json;

json config_to_json(const BlackboxConfig& c) {
  return {{"window", c.window},
          {"rf_conv", {c.rf_conv[0], c.rf_conv[1], c.rf_conv[2]}},
          {"rf_dense", c.rf_dense},
          {"vo_conv", {c.vo_conv[0], c.vo_conv[1], c.vo_conv[2]}},
          {"vo_dense", c.vo_dense},
          {"embed", c.embed},
          {"kernel", c.kernel},
          {"lstm_hidden", c.lstm_hidden},
          {"lstm_layers", c.lstm_layers},
          {"fc_hidden", c.fc_hidden}};
}

BlackboxConfig config_from_json(const json& j) {
  BlackboxConfig c;
  c.window = j.at("window").get<std::size_t>();
  for (int i = 0; i < 3; ++i) {
    c.rf_conv[i] = j.at("rf_conv").at(i).get<std::size_t>();
    c.vo_conv[i] = j.at("vo_conv").at(i).get<std::size_t>();
  }
  c.rf_dense = j.at("rf_dense").get<std::size_t>();
  c.vo_dense = j.at("vo_dense").get<std::size_t>();
  c.embed = j.at("embed").get<std::size_t>();
  c.kernel = j.at("kernel").get<std::size_t>();
  c.lstm_hidden = j.at("lstm_hidden").get<std::size_t>();
  c.lstm_layers = j.at("lstm_layers").get<std::size_t>();
  c.fc_hidden = j.at("fc_hidden").get<std::size_t>();
  return c;
}

}  // namespace

void BlackboxModel::save(const std::filesystem::path& path) const {
  params.save(path);
  json j = {{"kind", kind()},
            {"version", 1},
            {"num_anchors", num_anchors_},
            {"config", config_to_json(config_)},
            {"normalizer", json::parse(layers::normalizer_to_json(normalizer))}};
  layers::write_text_file(layers::sidecar_path(path), j.dump(2) + "\n");
}

BlackboxModel BlackboxModel::load(const std::filesystem::path& path) {
  try {
    const auto j = json::parse(layers::read_text_file(layers::sidecar_path(path)));
    if (j.at("kind").get<std::string>() != "blackbox") throw ValidationError("checkpoint is not a blackbox model");
    BlackboxModel model(config_from_json(j.at("config")), j.at("num_anchors").get<std::size_t>(), 0);
    auto loaded = nn::ParamStore::load(path);
    layers::check_params_match(model.params, loaded);
    model.params = std::move(loaded);
    model.normalizer = layers::normalizer_from_json(j.at("normalizer").dump());
    return model;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint sidecar: ") + e.what());
  }
}

Trajectory predict_trace(const BlackboxModel& model, const Trace& trace) {
  return predict_trace(static_cast<const WindowModel&>(model), model.sequence(trace));
}

std::string checkpoint_kind(const std::filesystem::path& path) {
  try {
    return json::parse(layers::read_text_file(layers::sidecar_path(path))).at("kind").get<std::string>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint sidecar: ") + e.what());
  }
}

}  // namespace hyloc
