#include "hyloc/rf_loc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>
#include <json.hpp>

#include "hyloc/errors.hpp"

namespace hyloc {

double received_power(double cir_power, double preamble_count, double a_const) {
  if (!(cir_power > 0.0)) throw ArgumentError("received_power: CIR power must be > 0");
  if (!(preamble_count > 0.0)) throw ArgumentError("received_power: preamble count must be > 0");
  return 10.0 * std::log10(cir_power * 131072.0 / (preamble_count * preamble_count)) - a_const;
}

// --- multilateration ------------------------------------------------------------

double multilateration_objective(std::span<const RangeObservation> obs, Position2D p) {
  double s = 0.0;
  for (const auto& o : obs) {
    const double f = o.range - distance(p, o.anchor);
    s += f * f;
  }
  return s;
}

namespace {

void check_geometry(std::span<const RangeObservation> obs) {
  if (obs.size() < 3) throw GeometryError("multilateration needs at least 3 anchors");
  std::vector<Position2D> pts;
  pts.reserve(obs.size());
  for (const auto& o : obs) pts.push_back(o.anchor);
  if (collinear(pts)) throw GeometryError("multilateration anchors are collinear");
}

/// Subtracting the first range equation from the others gives a linear system.
std::optional<Position2D> linearized_solution(std::span<const RangeObservation> obs) {
  const std::size_t m = obs.size() - 1;
  Eigen::MatrixXd a(m, 2);
  Eigen::VectorXd b(m);
  const auto& o0 = obs[0];
  const double k0 = o0.anchor.x * o0.anchor.x + o0.anchor.y * o0.anchor.y;
  for (std::size_t i = 1; i < obs.size(); ++i) {
    const auto& o = obs[i];
    a(i - 1, 0) = 2.0 * (o.anchor.x - o0.anchor.x);
    a(i - 1, 1) = 2.0 * (o.anchor.y - o0.anchor.y);
    b(i - 1) = o0.range * o0.range - o.range * o.range + o.anchor.x * o.anchor.x + o.anchor.y * o.anchor.y - k0;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < 2) return std::nullopt;
  const Eigen::Vector2d p = qr.solve(b);
  if (!p.allFinite()) return std::nullopt;
  return Position2D{p.x(), p.y()};
}

MultilaterationResult solve_from(std::span<const RangeObservation> obs, Position2D start,
                                 const MultilaterationOptions& opt) {
  Eigen::Vector2d p(start.x, start.y);
  double cost = multilateration_objective(obs, start);
  double lambda = 1e-3;
  MultilaterationResult res;
  const std::size_t n = obs.size();
  Eigen::MatrixXd jac(n, 2);
  Eigen::VectorXd f(n);

  for (int it = 1; it <= opt.max_iterations; ++it) {
    res.iterations = it;
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Vector2d d = p - Eigen::Vector2d(obs[i].anchor.x, obs[i].anchor.y);
      const double r = d.norm();
      f(i) = obs[i].range - r;
      if (r > 0.0)
        jac.row(i) = -d.transpose() / r;
      else
        jac.row(i).setZero();
    }
    const Eigen::Matrix2d jtj = jac.transpose() * jac;
    const Eigen::Vector2d g = jac.transpose() * f;
    if (cost == 0.0 || g.norm() < 1e-15) {
      res.converged = true;
      break;
    }

    bool accepted = false;
    Eigen::Vector2d step = Eigen::Vector2d::Zero();
    while (lambda < 1e12) {
      Eigen::Matrix2d lhs = jtj;
      lhs.diagonal().array() += lambda;
      step = lhs.ldlt().solve(-g);
      const Eigen::Vector2d cand = p + step;
      const double c = multilateration_objective(obs, {cand.x(), cand.y()});
      if (c <= cost) {
        p = cand;
        cost = c;
        lambda = std::max(lambda * 0.1, 1e-12);
        accepted = true;
        break;
      }
      lambda *= 10.0;
    }
    // Damping ran away without finding descent: p is a stationary point.
    if (!accepted || step.norm() < opt.step_tolerance) {
      res.converged = true;
      break;
    }
  }
  res.position = {p.x(), p.y()};
  res.residual_rms = std::sqrt(cost / static_cast<double>(n));
  return res;
}

}  // namespace

MultilaterationResult multilaterate(std::span<const RangeObservation> obs, std::optional<Position2D> init,
                                    const MultilaterationOptions& options) {
  check_geometry(obs);
  if (init) return solve_from(obs, *init, options);

  Position2D centroid{};
  for (const auto& o : obs) centroid = centroid + o.anchor;
  centroid = (1.0 / static_cast<double>(obs.size())) * centroid;
  MultilaterationResult best = solve_from(obs, centroid, options);
  if (const auto lin = linearized_solution(obs)) {
    const MultilaterationResult alt = solve_from(obs, *lin, options);
    if (alt.residual_rms < best.residual_rms) best = alt;
  }
  return best;
}

std::vector<std::vector<std::size_t>> combinations(std::size_t n, std::size_t k) {
  std::vector<std::vector<std::size_t>> out;
  if (k > n) return out;
  std::vector<std::size_t> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  for (;;) {
    out.push_back(idx);
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == n - k + (i - 1)) --i;
    if (i == 0) break;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
  return out;
}

std::vector<int> label_best_anchors(const RfSample& sample, const AnchorLayout& layout, Position2D gt, int k) {
  const std::size_t n = layout.size();
  if (k < 3 || static_cast<std::size_t>(k) > n) throw ArgumentError("label_best_anchors needs 3 <= K <= n");
  if (sample.entries.size() != n) throw ArgumentError("label_best_anchors: sample does not cover the layout");

  double best_err = std::numeric_limits<double>::infinity();
  const std::vector<std::size_t>* best = nullptr;
  const auto subsets = combinations(n, static_cast<std::size_t>(k));
  std::vector<RangeObservation> obs(static_cast<std::size_t>(k));
  for (const auto& subset : subsets) {
    for (std::size_t j = 0; j < subset.size(); ++j)
      obs[j] = {layout[subset[j]].position, sample.entries[subset[j]].range};
    try {
      const auto res = multilaterate(obs);
      const double err = distance(res.position, gt);
      if (err < best_err - 1e-9) {
        best_err = err;
        best = &subset;
      }
    } catch (const GeometryError&) {
      continue;
    }
  }
  if (!best) throw GeometryError("label_best_anchors: every subset is degenerate");
  std::vector<int> labels(n, 0);
  for (auto i : *best) labels[i] = 1;
  return labels;
}

// --- anchor selector ------------------------------------------------------------------

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double log_loss(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w, double b, double l2) {
  double loss = 0.0;
  const Eigen::VectorXd z = (x * w).array() + b;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    // log(1 + exp(z)) - y z, computed stably
    const double zi = z(i);
    loss += std::max(zi, 0.0) + std::log1p(std::exp(-std::abs(zi))) - y(i) * zi;
  }
  return loss / static_cast<double>(z.size()) + 0.5 * l2 * w.squaredNorm();
}

}  // namespace

AnchorSelectorModel::AnchorSelectorModel(int k, std::vector<int> anchor_ids, std::vector<int> chain_order,
                                         std::vector<double> input_mean, std::vector<double> input_std,
                                         std::vector<Link> links)
    : k_(k),
      anchor_ids_(std::move(anchor_ids)),
      chain_order_(std::move(chain_order)),
      input_mean_(std::move(input_mean)),
      input_std_(std::move(input_std)),
      links_(std::move(links)) {
  const std::size_t n = anchor_ids_.size();
  if (k_ < 3 || static_cast<std::size_t>(k_) > n) throw ValidationError("selector K must satisfy 3 <= K <= n");
  if (chain_order_.size() != n || links_.size() != n) throw ValidationError("selector chain must cover every anchor");
  if (input_mean_.size() != 2 * n || input_std_.size() != 2 * n) throw ValidationError("selector input scaling size");
  for (std::size_t j = 0; j < n; ++j) {
    if (links_[j].weights.size() != 2 * n + j) throw ValidationError("selector link weight size");
    for (double w : links_[j].weights)
      if (!std::isfinite(w)) throw ValidationError("selector weights must be finite");
  }
}

std::vector<double> AnchorSelectorModel::run_chain(std::span<const double> ranges,
                                                   std::span<const double> powers) const {
  const std::size_t n = anchor_ids_.size();
  if (ranges.size() != n || powers.size() != n) throw ArgumentError("selector input does not match anchor count");
  std::vector<double> x(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = (ranges[i] - input_mean_[i]) / input_std_[i];
    x[n + i] = (powers[i] - input_mean_[n + i]) / input_std_[n + i];
  }
  std::vector<double> prob_by_link(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto& link = links_[j];
    double p;
    if (link.constant) {
      p = *link.constant;
    } else {
      double z = link.bias;
      for (std::size_t i = 0; i < x.size(); ++i) z += link.weights[i] * x[i];
      p = sigmoid(z);
    }
    prob_by_link[j] = p;
    x.push_back(p >= 0.5 ? 1.0 : 0.0);
  }
  std::vector<double> by_anchor(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto it = std::find(anchor_ids_.begin(), anchor_ids_.end(), chain_order_[j]);
    by_anchor[static_cast<std::size_t>(it - anchor_ids_.begin())] = prob_by_link[j];
  }
  return by_anchor;
}

std::vector<double> AnchorSelectorModel::scores(std::span<const double> ranges, std::span<const double> powers) const {
  return run_chain(ranges, powers);
}

std::vector<int> AnchorSelectorModel::predict(std::span<const double> ranges, std::span<const double> powers) const {
  std::vector<int> out;
  for (double p : run_chain(ranges, powers)) out.push_back(p >= 0.5 ? 1 : 0);
  return out;
}

std::string AnchorSelectorModel::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "hyloc-anchor-selector";
  j["version"] = 1;
  j["k"] = k_;
  j["anchor_ids"] = anchor_ids_;
  j["chain_order"] = chain_order_;
  j["input_mean"] = input_mean_;
  j["input_std"] = input_std_;
  auto links = nlohmann::ordered_json::array();
  for (const auto& l : links_) {
    nlohmann::ordered_json jl;
    jl["anchor_id"] = l.anchor_id;
    jl["weights"] = l.weights;
    jl["bias"] = l.bias;
    jl["constant"] = l.constant ? nlohmann::ordered_json(*l.constant) : nlohmann::ordered_json(nullptr);
    links.push_back(jl);
  }
  j["links"] = links;
  return j.dump(2);
}

AnchorSelectorModel AnchorSelectorModel::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format").get<std::string>() != "hyloc-anchor-selector") throw ValidationError("not an anchor selector");
    if (j.at("version").get<int>() != 1) throw ValidationError("unsupported anchor selector version");
    std::vector<Link> links;
    for (const auto& jl : j.at("links")) {
      Link l;
      l.anchor_id = jl.at("anchor_id").get<int>();
      l.weights = jl.at("weights").get<std::vector<double>>();
      l.bias = jl.at("bias").get<double>();
      if (!jl.at("constant").is_null()) l.constant = jl.at("constant").get<double>();
      links.push_back(std::move(l));
    }
    return AnchorSelectorModel(j.at("k").get<int>(), j.at("anchor_ids").get<std::vector<int>>(),
                               j.at("chain_order").get<std::vector<int>>(),
                               j.at("input_mean").get<std::vector<double>>(),
                               j.at("input_std").get<std::vector<double>>(), std::move(links));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("anchor selector json: ") + e.what());
  }
}

AnchorSelectorModel train_anchor_selector(std::span<const SelectorExample> dataset, std::span<const int> anchor_ids,
                                          int k, std::vector<int> chain_order, RngStream& rng,
                                          const SelectorTrainOptions& options, std::vector<std::string>* warnings) {
  if (dataset.empty()) throw ArgumentError("train_anchor_selector: empty dataset");
  const std::size_t n = anchor_ids.size();
  for (const auto& ex : dataset)
    if (ex.ranges.size() != n || ex.powers.size() != n || ex.labels.size() != n)
      throw ArgumentError("train_anchor_selector: inconsistent anchor count");
  std::vector<int> ids(anchor_ids.begin(), anchor_ids.end());
  if (chain_order.empty()) {
    chain_order = ids;
    std::sort(chain_order.begin(), chain_order.end());
  }
  {
    auto a = chain_order, b = ids;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a != b) throw ArgumentError("train_anchor_selector: chain order must permute the anchor ids");
  }

  const auto rows = static_cast<Eigen::Index>(dataset.size());
  Eigen::MatrixXd x(rows, static_cast<Eigen::Index>(2 * n));
  for (Eigen::Index r = 0; r < rows; ++r)
    for (std::size_t i = 0; i < n; ++i) {
      x(r, i) = dataset[r].ranges[i];
      x(r, n + i) = dataset[r].powers[i];
    }
  std::vector<double> mean(2 * n), stdev(2 * n);
  for (std::size_t c = 0; c < 2 * n; ++c) {
    mean[c] = x.col(c).mean();
    const double var = (x.col(c).array() - mean[c]).square().mean();
    stdev[c] = var > 1e-24 ? std::sqrt(var) : 1.0;
    x.col(c) = (x.col(c).array() - mean[c]) / stdev[c];
  }

  std::vector<AnchorSelectorModel::Link> links;
  Eigen::MatrixXd feats = x;
  for (std::size_t j = 0; j < n; ++j) {
    const int id = chain_order[j];
    const auto col = static_cast<std::size_t>(std::find(ids.begin(), ids.end(), id) - ids.begin());
    Eigen::VectorXd y(rows);
    for (Eigen::Index r = 0; r < rows; ++r) y(r) = dataset[r].labels[col];

    AnchorSelectorModel::Link link;
    link.anchor_id = id;
    const double pos = y.sum();
    if (pos == 0.0 || pos == static_cast<double>(rows)) {
      link.constant = pos == 0.0 ? 0.0 : 1.0;
      link.weights.assign(static_cast<std::size_t>(feats.cols()), 0.0);
      if (warnings)
        warnings->push_back("anchor " + std::to_string(id) + ": single-class labels, link is a constant predictor");
    } else {
      Eigen::VectorXd w(feats.cols());
      for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = rng.next_gauss(0.0, 0.01);
      double b = 0.0;
      for (int epoch = 0; epoch < options.epochs; ++epoch) {
        link.loss_history.push_back(log_loss(feats, y, w, b, options.l2));
        const Eigen::VectorXd z = (feats * w).array() + b;
        const Eigen::VectorXd err = z.unaryExpr([](double v) { return sigmoid(v); }) - y;
        const Eigen::VectorXd gw = feats.transpose() * err / static_cast<double>(rows) + options.l2 * w;
        const double gb = err.mean();
        w -= options.learning_rate * gw;
        b -= options.learning_rate * gb;
      }
      link.loss_history.push_back(log_loss(feats, y, w, b, options.l2));
      link.weights.assign(w.data(), w.data() + w.size());
      link.bias = b;
    }
    links.push_back(std::move(link));
    // Later links condition on this link's true label during training.
    feats.conservativeResize(Eigen::NoChange, feats.cols() + 1);
    feats.col(feats.cols() - 1) = y;
  }
  return AnchorSelectorModel(k, ids, chain_order, mean, stdev, std::move(links));
}

SelectorExample to_selector_input(const RfSample& sample) {
  SelectorExample ex;
  for (const auto& e : sample.entries) {
    ex.ranges.push_back(e.range);
    ex.powers.push_back(e.power);
  }
  return ex;
}

std::vector<SelectorExample> selector_dataset(const Trace& trace, int k) {
  std::vector<SelectorExample> out;
  out.reserve(trace.epochs());
  for (std::size_t i = 0; i < trace.epochs(); ++i) {
    auto ex = to_selector_input(trace.rf[i]);
    ex.labels = label_best_anchors(trace.rf[i], trace.layout, trace.gt[i].value, k);
    out.push_back(std::move(ex));
  }
  return out;
}

namespace {

std::vector<std::size_t> rank_by_score(const std::vector<double>& scores, std::span<const int> ids) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return ids[a] < ids[b];
  });
  return order;
}

}  // namespace

std::vector<int> select_anchors(const AnchorSelectorModel& model, const RfSample& sample) {
  const auto in = to_selector_input(sample);
  const auto scores = model.scores(in.ranges, in.powers);
  const auto order = rank_by_score(scores, model.anchor_ids());
  std::vector<int> out;
  for (std::size_t i = 0; i < static_cast<std::size_t>(model.k()); ++i) out.push_back(model.anchor_ids()[order[i]]);
  std::sort(out.begin(), out.end());
  return out;
}

RfFeature compose_rf_features(const MultilaterationResult& mlr, std::span<const RfEntry> selected, std::size_t k) {
  if (selected.size() != k) throw ArgumentError("compose_rf_features: expected " + std::to_string(k) + " anchors");
  std::vector<RfEntry> sorted(selected.begin(), selected.end());
  std::sort(sorted.begin(), sorted.end(), [](const RfEntry& a, const RfEntry& b) { return a.anchor_id < b.anchor_id; });
  RfFeature f;
  f.reserve(2 + 2 * k);
  f.push_back(mlr.position.x);
  f.push_back(mlr.position.y);
  for (const auto& e : sorted) f.push_back(e.range);
  for (const auto& e : sorted) f.push_back(e.power);
  return f;
}

RfEpochEstimate localize_ranked(const RfSample& sample, const AnchorLayout& layout,
                                std::span<const std::size_t> ranking, std::size_t k) {
  if (k < 3 || k > ranking.size()) throw ArgumentError("localize_ranked: k must lie in [3, ranking size]");
  std::vector<std::size_t> chosen(ranking.begin(), ranking.begin() + static_cast<std::ptrdiff_t>(k));
  // Swap the weakest pick for the next candidate until the set spans the plane.
  std::size_t next = k;
  auto degenerate = [&] {
    std::vector<Position2D> pts;
    for (auto i : chosen) pts.push_back(layout[i].position);
    return collinear(pts);
  };
  while (degenerate() && next < ranking.size()) chosen[k - 1] = ranking[next++];
  std::sort(chosen.begin(), chosen.end());
  RfEpochEstimate est;
  std::vector<RangeObservation> obs;
  for (auto i : chosen) {
    obs.push_back({layout[i].position, sample.entries[i].range});
    est.used.push_back(sample.entries[i]);
  }
  est.mlr = multilaterate(obs);
  return est;
}

std::vector<std::size_t> rank_by_power(const RfSample& sample) {
  std::vector<double> powers;
  std::vector<int> ids;
  for (const auto& e : sample.entries) {
    powers.push_back(e.power);
    ids.push_back(e.anchor_id);
  }
  return rank_by_score(powers, ids);
}

RfEpochEstimate localize_epoch(const RfSample& sample, const AnchorLayout& layout,
                               const AnchorSelectorModel* selector) {
  if (sample.entries.size() != layout.size())
    throw ArgumentError("localize_epoch: sample has " + std::to_string(sample.entries.size()) + " entries for " +
                        std::to_string(layout.size()) + " anchors");
  if (!selector) {
    std::vector<std::size_t> all(layout.size());
    std::iota(all.begin(), all.end(), 0);
    return localize_ranked(sample, layout, all, all.size());
  }
  if (!std::equal(layout.anchors().begin(), layout.anchors().end(), selector->anchor_ids().begin(),
                  selector->anchor_ids().end(), [](const Anchor& a, int id) { return a.id == id; }))
    throw ArgumentError("anchor selector was trained on a different anchor layout");
  const auto in = to_selector_input(sample);
  const auto order = rank_by_score(selector->scores(in.ranges, in.powers), selector->anchor_ids());
  return localize_ranked(sample, layout, order, static_cast<std::size_t>(selector->k()));
}

}  // namespace hyloc
