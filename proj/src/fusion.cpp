#include "hyloc/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "hyloc/errors.hpp"
#include "hyloc/layers.hpp"
#include "hyloc/vo_track.hpp"

namespace hyloc {

using nn::Tensor;
using nn::Var;

// --- windows ----------------------------------------------------------------------------

void SplitFractions::validate() const {
  if (train <= 0.0 || val <= 0.0 || test < 0.0) throw ArgumentError("split fractions must be positive");
  if (std::abs(train + val + test - 1.0) > 1e-9) throw ArgumentError("split fractions must sum to 1");
}

std::vector<WindowRef> all_windows(const std::vector<SensorSequence>& seqs, std::size_t window) {
  if (window < 2) throw ArgumentError("window length must be at least 2");
  std::vector<WindowRef> out;
  for (std::size_t s = 0; s < seqs.size(); ++s)
    for (std::size_t e = window - 1; e < seqs[s].size(); ++e) out.push_back({s, e});
  return out;
}

DatasetSplit split_windows(const std::vector<SensorSequence>& seqs, std::size_t window, const SplitFractions& fractions,
                           std::size_t block) {
  fractions.validate();
  if (block == 0) throw ArgumentError("block size must be positive");
  constexpr std::size_t kCycle = 20;
  const auto train_slots = static_cast<std::size_t>(std::lround(fractions.train * kCycle));
  const auto val_slots = static_cast<std::size_t>(std::lround((fractions.train + fractions.val) * kCycle));
  DatasetSplit split;
  std::size_t index = 0;
  for (const auto& w : all_windows(seqs, window)) {
    const std::size_t slot = (index++ / block) % kCycle;
    if (slot < train_slots)
      split.train.push_back(w);
    else if (slot < val_slots)
      split.val.push_back(w);
    else
      split.test.push_back(w);
  }
  if (split.train.empty() || split.val.empty() || (fractions.test > 0.0 && split.test.empty()))
    throw ArgumentError("not enough windows for the requested split (" + std::to_string(index) + " windows)");
  return split;
}

std::vector<WindowRef> subsample_windows(const std::vector<WindowRef>& windows, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ArgumentError("train fraction must lie in (0, 1]");
  if (windows.empty()) throw ArgumentError("no windows to subsample");
  const auto keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(fraction * windows.size())));
  std::vector<std::size_t> idx(windows.size());
  std::iota(idx.begin(), idx.end(), 0);
  auto rng = RngStream::named(seed, "fusion/subset");
  for (std::size_t i = 0; i < keep; ++i) std::swap(idx[i], idx[i + rng.next_below(idx.size() - i)]);
  idx.resize(keep);
  std::sort(idx.begin(), idx.end());
  std::vector<WindowRef> out;
  for (auto i : idx) out.push_back(windows[i]);
  return out;
}

// --- normalization -------------------------------------------------------------------------

namespace {

void fit_stream(const std::vector<const std::vector<double>*>& rows, std::vector<double>& mean,
                std::vector<double>& scale) {
  const std::size_t d = rows.front()->size();
  mean.assign(d, 0.0);
  scale.assign(d, 0.0);
  for (const auto* r : rows) {
    if (r->size() != d) throw ShapeError("feature rows have inconsistent widths");
    for (std::size_t j = 0; j < d; ++j) mean[j] += (*r)[j];
  }
  for (auto& m : mean) m /= static_cast<double>(rows.size());
  for (const auto* r : rows)
    for (std::size_t j = 0; j < d; ++j) scale[j] += ((*r)[j] - mean[j]) * ((*r)[j] - mean[j]);
  for (auto& s : scale) {
    s = std::sqrt(s / static_cast<double>(rows.size()));
    if (s < 1e-12) s = 1.0;
  }
}

}  // namespace

Normalizer fit_normalizer(const std::vector<SensorSequence>& seqs, const std::vector<WindowRef>& train,
                          std::size_t window) {
  if (train.empty()) throw ArgumentError("cannot normalize over an empty training split");
  std::vector<std::vector<bool>> used(seqs.size());
  for (std::size_t s = 0; s < seqs.size(); ++s) used[s].assign(seqs[s].size(), false);
  for (const auto& w : train)
    for (std::size_t e = w.end + 1 - window; e <= w.end; ++e) used[w.seq][e] = true;

  std::vector<const std::vector<double>*> a_rows, b_rows;
  for (std::size_t s = 0; s < seqs.size(); ++s)
    for (std::size_t e = 0; e < seqs[s].size(); ++e) {
      if (!used[s][e]) continue;
      a_rows.push_back(&seqs[s].a[e]);
      b_rows.push_back(&seqs[s].b[e]);
    }
  Normalizer n;
  fit_stream(a_rows, n.a_mean, n.a_scale);
  fit_stream(b_rows, n.b_mean, n.b_scale);
  // Targets use the window-end epochs only.
  std::vector<std::vector<double>> targets;
  for (const auto& w : train) targets.push_back({seqs[w.seq].gt[w.end].x, seqs[w.seq].gt[w.end].y});
  std::vector<const std::vector<double>*> t_rows;
  for (const auto& t : targets) t_rows.push_back(&t);
  std::vector<double> tm, ts;
  fit_stream(t_rows, tm, ts);
  n.target_mean[0] = tm[0];
  n.target_mean[1] = tm[1];
  n.target_scale[0] = ts[0];
  n.target_scale[1] = ts[1];
  return n;
}

std::vector<SensorSequence> normalize_sequences(const std::vector<SensorSequence>& seqs, const Normalizer& norm) {
  std::vector<SensorSequence> out = seqs;
  for (auto& s : out) {
    for (auto& row : s.a) {
      if (row.size() != norm.a_mean.size()) throw ShapeError("RF-side feature width does not match the normalizer");
      for (std::size_t j = 0; j < row.size(); ++j) row[j] = (row[j] - norm.a_mean[j]) / norm.a_scale[j];
    }
    for (auto& row : s.b) {
      if (row.size() != norm.b_mean.size()) throw ShapeError("VO-side feature width does not match the normalizer");
      for (std::size_t j = 0; j < row.size(); ++j) row[j] = (row[j] - norm.b_mean[j]) / norm.b_scale[j];
    }
    for (auto& p : s.gt) {
      p.x = (p.x - norm.target_mean[0]) / norm.target_scale[0];
      p.y = (p.y - norm.target_mean[1]) / norm.target_scale[1];
    }
  }
  return out;
}

// --- batches, training, inference ----------------------------------------------------------

std::pair<Tensor, Tensor> window_batch(const std::vector<SensorSequence>& normalized, std::span<const WindowRef> windows,
                                       std::size_t window) {
  const auto& first = normalized.at(windows.front().seq);
  const std::size_t da = first.a.front().size();
  const std::size_t db = first.b.front().size();
  const std::size_t batch = windows.size();
  Tensor a({batch, da, window});
  Tensor b({batch, db, window});
  for (std::size_t i = 0; i < batch; ++i) {
    const auto& s = normalized[windows[i].seq];
    const std::size_t start = windows[i].end + 1 - window;
    for (std::size_t t = 0; t < window; ++t) {
      for (std::size_t j = 0; j < da; ++j) a[(i * da + j) * window + t] = s.a[start + t][j];
      for (std::size_t j = 0; j < db; ++j) b[(i * db + j) * window + t] = s.b[start + t][j];
    }
  }
  return {std::move(a), std::move(b)};
}

namespace {

Tensor target_batch(const std::vector<SensorSequence>& normalized, std::span<const WindowRef> windows) {
  Tensor t({windows.size(), 2});
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto p = normalized[windows[i].seq].gt[windows[i].end];
    t[2 * i] = p.x;
    t[2 * i + 1] = p.y;
  }
  return t;
}

constexpr std::size_t kInferenceBatch = 256;

template <class Fn>
void for_batches(const std::vector<WindowRef>& windows, std::size_t size, Fn fn) {
  for (std::size_t i = 0; i < windows.size(); i += size) {
    const std::size_t n = std::min(size, windows.size() - i);
    fn(std::span<const WindowRef>(windows.data() + i, n));
  }
}

double normalized_loss(const WindowModel& model, const std::vector<SensorSequence>& normalized,
                       const std::vector<WindowRef>& windows) {
  double total = 0.0;
  for_batches(windows, kInferenceBatch, [&](std::span<const WindowRef> chunk) {
    nn::Tape tape;
    nn::BoundParams p(tape, model.params);
    auto [a, b] = window_batch(normalized, chunk, model.window());
    const auto fp = model.forward(tape, p, tape.constant(std::move(a)), tape.constant(std::move(b)));
    const auto loss = nn::mean_squared_error(fp.position, tape.constant(target_batch(normalized, chunk)));
    total += loss.value()[0] * static_cast<double>(chunk.size());
  });
  return total / static_cast<double>(windows.size());
}

void check_windows(const WindowModel& model, const std::vector<SensorSequence>& seqs,
                   const std::vector<WindowRef>& windows) {
  for (const auto& w : windows)
    if (w.seq >= seqs.size() || w.end >= seqs[w.seq].size() || w.end + 1 < model.window())
      throw ArgumentError("window does not fit its sequence");
}

}  // namespace

TrainResult train_network(WindowModel& model, const std::vector<SensorSequence>& seqs,
                          const std::vector<WindowRef>& train, const std::vector<WindowRef>& val,
                          const TrainOptions& options) {
  if (train.empty() || val.empty()) throw ArgumentError("training needs non-empty train and validation splits");
  if (options.batch_size == 0 || options.epochs < 1 || !(options.learning_rate > 0.0))
    throw ArgumentError("invalid training options");
  check_windows(model, seqs, train);
  check_windows(model, seqs, val);

  model.normalizer = fit_normalizer(seqs, train, model.window());
  const auto normalized = normalize_sequences(seqs, model.normalizer);

  nn::AdamState adam;
  adam.lr = options.learning_rate;
  auto shuffle_rng = RngStream::named(options.seed, "fusion/shuffle");
  std::vector<WindowRef> order = train;

  TrainResult result;
  result.best_val_loss = std::numeric_limits<double>::infinity();
  nn::ParamStore best = model.params;
  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.next_below(i)]);
    double total = 0.0;
    for_batches(order, options.batch_size, [&](std::span<const WindowRef> chunk) {
      nn::Tape tape;
      nn::BoundParams p(tape, model.params);
      auto [a, b] = window_batch(normalized, chunk, model.window());
      const auto fp = model.forward(tape, p, tape.constant(std::move(a)), tape.constant(std::move(b)));
      const auto loss = nn::mean_squared_error(fp.position, tape.constant(target_batch(normalized, chunk)));
      const double value = loss.value()[0];
      if (!std::isfinite(value)) throw NumericalError("training loss became non-finite at epoch " + std::to_string(epoch));
      tape.backward(loss);
      auto grads = p.grads();
      if (options.grad_clip > 0.0) nn::clip_grad_norm(grads, options.grad_clip);
      nn::adam_step(model.params, grads, adam);
      total += value * static_cast<double>(chunk.size());
    });
    TrainLogRow row{epoch, total / static_cast<double>(order.size()), normalized_loss(model, normalized, val)};
    result.log.push_back(row);
    if (row.val_loss < result.best_val_loss) {
      result.best_val_loss = row.val_loss;
      result.best_epoch = epoch;
      best = model.params;
    }
    adam.lr *= options.lr_decay;
  }
  model.params = std::move(best);
  return result;
}

double evaluate_loss(const WindowModel& model, const std::vector<SensorSequence>& seqs,
                     const std::vector<WindowRef>& windows) {
  if (windows.empty()) throw ArgumentError("no windows to evaluate");
  check_windows(model, seqs, windows);
  return normalized_loss(model, normalize_sequences(seqs, model.normalizer), windows);
}

std::vector<Position2D> predict_windows(const WindowModel& model, const std::vector<SensorSequence>& seqs,
                                        const std::vector<WindowRef>& windows) {
  check_windows(model, seqs, windows);
  const auto normalized = normalize_sequences(seqs, model.normalizer);
  std::vector<Position2D> out;
  out.reserve(windows.size());
  const auto& n = model.normalizer;
  for_batches(windows, kInferenceBatch, [&](std::span<const WindowRef> chunk) {
    nn::Tape tape;
    nn::BoundParams p(tape, model.params);
    auto [a, b] = window_batch(normalized, chunk, model.window());
    const auto fp = model.forward(tape, p, tape.constant(std::move(a)), tape.constant(std::move(b)));
    const Tensor& y = fp.position.value();
    for (std::size_t i = 0; i < chunk.size(); ++i)
      out.push_back({y[2 * i] * n.target_scale[0] + n.target_mean[0], y[2 * i + 1] * n.target_scale[1] + n.target_mean[1]});
  });
  return out;
}

std::vector<double> window_errors(const WindowModel& model, const std::vector<SensorSequence>& seqs,
                                  const std::vector<WindowRef>& windows) {
  const auto est = predict_windows(model, seqs, windows);
  std::vector<double> out;
  out.reserve(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) out.push_back(distance(est[i], seqs[windows[i].seq].gt[windows[i].end]));
  return out;
}

Trajectory windows_trajectory(const SensorSequence& seq, const std::vector<WindowRef>& windows,
                              const std::vector<Position2D>& estimates) {
  if (windows.size() != estimates.size() || windows.empty())
    throw ArgumentError("windows and estimates must be non-empty and aligned");
  std::vector<Trajectory::Sample> samples;
  for (std::size_t i = 0; i < windows.size(); ++i) samples.push_back({seq.t.at(windows[i].end), estimates[i]});
  return Trajectory(std::move(samples));
}

void write_train_log(const TrainResult& result, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch,train_loss,val_loss\n";
  out.precision(17);
  for (const auto& r : result.log) out << r.epoch << ',' << r.train_loss << ',' << r.val_loss << '\n';
}

Trajectory predict_trace(const WindowModel& model, const SensorSequence& seq) {
  if (seq.size() < model.window())
    throw ArgumentError("trace has " + std::to_string(seq.size()) + " epochs, fewer than the window of " +
                        std::to_string(model.window()));
  std::vector<SensorSequence> one{seq};
  const auto windows = all_windows(one, model.window());
  return windows_trajectory(seq, windows, predict_windows(model, one, windows));
}

// --- fusion network ----------------------------------------------------------------------------

void FusionConfig::validate() const {
  if (window < 2) throw ArgumentError("window length must be at least 2");
  if (k < 3) throw ArgumentError("fusion needs K >= 3 anchors");
  if (kernel % 2 == 0) throw ArgumentError("kernel size must be odd");
  if (conv1 == 0 || conv2 == 0 || lstm_hidden == 0 || lstm_layers == 0 || fc_hidden == 0)
    throw ArgumentError("layer sizes must be positive");
}

SensorSequence fusion_sequence(const Trace& trace, const FusionConfig& config, const AnchorSelectorModel* selector) {
  const std::size_t n = trace.layout.size();
  if (!config.no_anchor_selection && static_cast<std::size_t>(config.k) > n)
    throw ArgumentError("K exceeds the number of anchors");
  if (selector && !config.no_anchor_selection && selector->k() != config.k)
    throw ArgumentError("selector K does not match the fusion configuration");
  SensorSequence seq;
  for (std::size_t e = 0; e < trace.epochs(); ++e) {
    const auto& sample = trace.rf[e];
    RfEpochEstimate est;
    if (config.no_anchor_selection)
      est = localize_epoch(sample, trace.layout, nullptr);
    else if (selector)
      est = localize_epoch(sample, trace.layout, selector);
    else
      est = localize_ranked(sample, trace.layout, rank_by_power(sample), static_cast<std::size_t>(config.k));
    seq.a.push_back(compose_rf_features(est.mlr, est.used, est.used.size()));
    const auto& vo = trace.vo[e];
    const auto f = compose_vo_features({vo.r, vo.theta}, vo.keypoints, NoiseModel{}.m_well_lit);
    seq.b.emplace_back(f.begin(), f.end());
    seq.gt.push_back(trace.gt[e].value);
    seq.t.push_back(sample.t);
  }
  return seq;
}

FusionModel::FusionModel(FusionConfig config, std::size_t num_anchors, std::uint64_t seed,
                         std::optional<AnchorSelectorModel> selector)
    : config_(config), num_anchors_(num_anchors), selector_(std::move(selector)) {
  config_.validate();
  if (num_anchors < 3) throw ArgumentError("fusion needs at least three anchors");
  const std::size_t used = config_.no_anchor_selection ? num_anchors : static_cast<std::size_t>(config_.k);
  if (used > num_anchors) throw ArgumentError("K exceeds the number of anchors");
  rf_dim_ = 2 + 2 * used;

  auto rng = RngStream::named(seed, "fusion/init");
  const auto kk = config_.kernel;
  layers::add_conv(params, "rf.conv1", rf_dim_, config_.conv1, kk, rng);
  layers::add_conv(params, "rf.conv2", config_.conv1, config_.conv2, kk, rng);
  layers::add_conv(params, "vo.conv1", 3, config_.conv1, kk, rng);
  layers::add_conv(params, "vo.conv2", config_.conv1, config_.conv2, kk, rng);
  if (!config_.no_cross_attention) {
    layers::add_attention(params, "att.rv", config_.conv2, rng);
    layers::add_attention(params, "att.vr", config_.conv2, rng);
  }
  layers::add_recurrent_head(params, 2 * config_.conv2, config_.lstm_hidden, config_.lstm_layers, config_.fc_hidden,
                             rng);
}

Var attention_mask(Var x, Var w1, Var w2) { return nn::sigmoid(nn::mul(nn::matmul_t(x, w1), nn::matmul_t(x, w2))); }

ForwardPass FusionModel::forward(nn::Tape& tape, const nn::BoundParams& p, Var a, Var b) const {
  const auto& as = a.shape();
  const auto& bs = b.shape();
  if (as.size() != 3 || bs.size() != 3 || as[1] != rf_dim_ || bs[1] != 3 || as[2] != config_.window ||
      bs[2] != config_.window || as[0] != bs[0])
    throw ArgumentError("fusion forward: expected windows [B x " + std::to_string(rf_dim_) + " x " +
                        std::to_string(config_.window) + "] and [B x 3 x " + std::to_string(config_.window) +
                        "], got " + nn::shape_str(as) + " and " + nn::shape_str(bs));
  const std::size_t batch = as[0];
  Var er = nn::relu(layers::conv(p, "rf.conv2", nn::relu(layers::conv(p, "rf.conv1", a))));
  Var ev = nn::relu(layers::conv(p, "vo.conv2", nn::relu(layers::conv(p, "vo.conv1", b))));
  Var fr = nn::channels_last(er);  // [B*L x C]
  Var fv = nn::channels_last(ev);

  ForwardPass out;
  Var gated_v = fv;
  Var gated_r = fr;
  if (!config_.no_cross_attention) {
    // A_rv gates the VO encoding, A_vr gates the RF encoding.
    Var a_rv = attention_mask(config_.swap_attention ? fr : fv, p["att.rv.w1"], p["att.rv.w2"]);
    Var a_vr = attention_mask(config_.swap_attention ? fv : fr, p["att.vr.w1"], p["att.vr.w2"]);
    gated_v = nn::mul(a_rv, fv);
    gated_r = nn::mul(a_vr, fr);
    out.mask_a = a_vr;
    out.mask_b = a_rv;
  }
  Var fused = nn::concat(gated_v, gated_r);
  out.position = layers::recurrent_head(tape, p, fused, batch, config_.window, config_.lstm_layers);
  return out;
}

SensorSequence FusionModel::sequence(const Trace& trace) const {
  if (trace.layout.size() != num_anchors_)
    throw ArgumentError("trace has " + std::to_string(trace.layout.size()) + " anchors, model expects " +
                        std::to_string(num_anchors_));
  return fusion_sequence(trace, config_, selector_ ? &*selector_ : nullptr);
}

using json = nlohmann::ordered_json;
using layers::check_params_match;
using layers::normalizer_from_json;
using layers::normalizer_to_json;
using layers::read_text_file;
using layers::sidecar_path;
using layers::write_text_file;

namespace {

json config_to_json(const FusionConfig& c) {
  return {{"window", c.window},
          {"k", c.k},
          {"conv1", c.conv1},
          {"conv2", c.conv2},
          {"kernel", c.kernel},
          {"lstm_hidden", c.lstm_hidden},
          {"lstm_layers", c.lstm_layers},
          {"fc_hidden", c.fc_hidden},
          {"no_cross_attention", c.no_cross_attention},
          {"no_anchor_selection", c.no_anchor_selection},
          {"swap_attention", c.swap_attention}};
}

FusionConfig config_from_json(const json& j) {
  FusionConfig c;
  c.window = j.at("window").get<std::size_t>();
  c.k = j.at("k").get<int>();
  c.conv1 = j.at("conv1").get<std::size_t>();
  c.conv2 = j.at("conv2").get<std::size_t>();
  c.kernel = j.at("kernel").get<std::size_t>();
  c.lstm_hidden = j.at("lstm_hidden").get<std::size_t>();
  c.lstm_layers = j.at("lstm_layers").get<std::size_t>();
  c.fc_hidden = j.at("fc_hidden").get<std::size_t>();
  c.no_cross_attention = j.at("no_cross_attention").get<bool>();
  c.no_anchor_selection = j.at("no_anchor_selection").get<bool>();
  c.swap_attention = j.at("swap_attention").get<bool>();
  return c;
}

}  // namespace

void FusionModel::save(const std::filesystem::path& path) const {
  params.save(path);
  json j = {{"kind", kind()},
            {"version", 1},
            {"num_anchors", num_anchors_},
            {"config", config_to_json(config_)},
            {"normalizer", json::parse(normalizer_to_json(normalizer))},
            {"selector", selector_ ? json::parse(selector_->to_json()) : json()}};
  write_text_file(sidecar_path(path), j.dump(2) + "\n");
}

FusionModel FusionModel::load(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(sidecar_path(path)));
    if (j.at("kind").get<std::string>() != "fusion") throw ValidationError("checkpoint is not a fusion model");
    std::optional<AnchorSelectorModel> selector;
    if (!j.at("selector").is_null()) selector = AnchorSelectorModel::from_json(j.at("selector").dump());
    FusionModel model(config_from_json(j.at("config")), j.at("num_anchors").get<std::size_t>(), 0, std::move(selector));
    auto loaded = nn::ParamStore::load(path);
    check_params_match(model.params, loaded);
    model.params = std::move(loaded);
    model.normalizer = normalizer_from_json(j.at("normalizer").dump());
    return model;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint sidecar: ") + e.what());
  }
}

FusionDataset build_fusion_dataset(const std::vector<Trace>& traces, const FusionModel& model,
                                   const SplitFractions& fractions) {
  if (traces.empty()) throw ArgumentError("at least one trace is required");
  FusionDataset ds;
  for (const auto& t : traces) ds.sequences.push_back(model.sequence(t));
  ds.split = split_windows(ds.sequences, model.window(), fractions);
  return ds;
}

Trajectory predict_trace(const FusionModel& model, const Trace& trace) {
  return predict_trace(static_cast<const WindowModel&>(model), model.sequence(trace));
}

std::vector<AttentionRow> attention_report(const FusionModel& model, const Trace& trace) {
  const auto seq = model.sequence(trace);
  if (seq.size() < model.window()) throw ArgumentError("trace is shorter than the window");
  std::vector<SensorSequence> one{seq};
  const auto normalized = normalize_sequences(one, model.normalizer);
  const auto windows = all_windows(one, model.window());
  const std::size_t steps = model.window();
  std::vector<AttentionRow> rows;
  auto newest_mean = [&](const std::optional<Var>& mask, std::size_t i) {
    if (!mask) return 1.0;
    const Tensor& m = mask->value();
    const std::size_t c = m.dim(1);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += m[(i * steps + steps - 1) * c + j];
    return s / static_cast<double>(c);
  };
  for_batches(windows, kInferenceBatch, [&](std::span<const WindowRef> chunk) {
    nn::Tape tape;
    nn::BoundParams p(tape, model.params);
    auto [a, b] = window_batch(normalized, chunk, steps);
    const auto fp = model.forward(tape, p, tape.constant(std::move(a)), tape.constant(std::move(b)));
    for (std::size_t i = 0; i < chunk.size(); ++i)
      rows.push_back({seq.t[chunk[i].end], newest_mean(fp.mask_a, i), newest_mean(fp.mask_b, i)});
  });
  return rows;
}

}  // namespace hyloc
