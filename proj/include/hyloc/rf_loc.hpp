#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hyloc/core.hpp"
#include "hyloc/rng.hpp"
#include "hyloc/world_sim.hpp"

namespace hyloc {

/// Receive power from DW1000-style diagnostics:
/// 10 log10(C * 2^17 / N^2) - A, in dBm. Throws ArgumentError unless C, N > 0.
double received_power(double cir_power, double preamble_count, double a_const);

struct RangeObservation {
  Position2D anchor;
  double range = 0.0;
};

struct MultilaterationResult {
  Position2D position;
  double residual_rms = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct MultilaterationOptions {
  double step_tolerance = 1e-9;  // m
  int max_iterations = 100;
};

/// Sum of squared range residuals R_i - |p - a_i|.
double multilateration_objective(std::span<const RangeObservation> obs, Position2D p);

/// Levenberg-damped Gauss-Newton on the squared range residuals.
///
/// Without `init`, two starts are run (the anchor centroid and the linearized
/// least-squares solution) and the lower objective wins. Throws GeometryError
/// for fewer than three anchors or a collinear set. A run that exhausts
/// max_iterations returns its best iterate with converged = false.
MultilaterationResult multilaterate(std::span<const RangeObservation> obs,
                                    std::optional<Position2D> init = std::nullopt,
                                    const MultilaterationOptions& options = {});

/// All k-subsets of {0..n-1} in lexicographic order.
std::vector<std::vector<std::size_t>> combinations(std::size_t n, std::size_t k);

/// Brute-force label: the K-subset whose multilateration lands closest to
/// `gt`. Returns one 0/1 flag per anchor in layout (id) order. Ties within
/// 1e-9 m keep the lexicographically first subset; collinear subsets are skipped.
std::vector<int> label_best_anchors(const RfSample& sample, const AnchorLayout& layout, Position2D gt, int k);

/// One training row for the anchor selector: inputs in anchor-id order.
struct SelectorExample {
  std::vector<double> ranges;
  std::vector<double> powers;
  std::vector<int> labels;  // 0/1 per anchor
};

struct SelectorTrainOptions {
  int epochs = 400;
  double learning_rate = 0.5;
  double l2 = 1e-4;
};

/// Classifier chain of logistic regressions. Link j predicts anchor
/// chain_order[j] from the standardized ranges and powers of all anchors plus
/// the outputs of links 0..j-1.
class AnchorSelectorModel {
 public:
  struct Link {
    int anchor_id = 0;
    std::vector<double> weights;  // 2n + j
    double bias = 0.0;
    std::optional<double> constant;  // set when the link saw one class only
    std::vector<double> loss_history;  // training only, not serialized

    friend bool operator==(const Link& a, const Link& b) {
      return a.anchor_id == b.anchor_id && a.weights == b.weights && a.bias == b.bias && a.constant == b.constant;
    }
  };

  AnchorSelectorModel() = default;
  AnchorSelectorModel(int k, std::vector<int> anchor_ids, std::vector<int> chain_order, std::vector<double> input_mean,
                      std::vector<double> input_std, std::vector<Link> links);

  int k() const { return k_; }
  std::span<const int> anchor_ids() const { return anchor_ids_; }
  std::span<const int> chain_order() const { return chain_order_; }
  std::span<const Link> links() const { return links_; }

  /// Per-anchor selection probability, in anchor-id order.
  std::vector<double> scores(std::span<const double> ranges, std::span<const double> powers) const;
  /// Chain's 0/1 predictions in anchor-id order.
  std::vector<int> predict(std::span<const double> ranges, std::span<const double> powers) const;

  std::string to_json() const;
  static AnchorSelectorModel from_json(const std::string& text);

  friend bool operator==(const AnchorSelectorModel&, const AnchorSelectorModel&) = default;

 private:
  std::vector<double> run_chain(std::span<const double> ranges, std::span<const double> powers) const;

  int k_ = 3;
  std::vector<int> anchor_ids_;
  std::vector<int> chain_order_;
  std::vector<double> input_mean_;
  std::vector<double> input_std_;
  std::vector<Link> links_;
};

/// Gradient descent on the per-link log-loss, each link conditioned on the
/// true labels of the previous links. An empty chain_order means ascending id.
/// Single-class links become constant predictors and append to `warnings`.
AnchorSelectorModel train_anchor_selector(std::span<const SelectorExample> dataset, std::span<const int> anchor_ids,
                                          int k, std::vector<int> chain_order, RngStream& rng,
                                          const SelectorTrainOptions& options = {},
                                          std::vector<std::string>* warnings = nullptr);

/// Builds selector rows from a trace using label_best_anchors on every epoch.
std::vector<SelectorExample> selector_dataset(const Trace& trace, int k);

SelectorExample to_selector_input(const RfSample& sample);

/// Top-K anchors by chain score, ties broken by lower id. Ids ascending.
std::vector<int> select_anchors(const AnchorSelectorModel& model, const RfSample& sample);

/// [X_u, Y_u, R_1..R_K, P_1..P_K], entries ordered by anchor id.
using RfFeature = std::vector<double>;

/// Throws ArgumentError when selected.size() != k.
RfFeature compose_rf_features(const MultilaterationResult& mlr, std::span<const RfEntry> selected, std::size_t k);

/// Anchors used for one epoch and the position they produce.
struct RfEpochEstimate {
  MultilaterationResult mlr;
  std::vector<RfEntry> used;  // ascending id
};

/// Multilaterates one epoch, after anchor selection when a model is given.
/// A collinear selection is repaired by swapping in the next-best anchor.
RfEpochEstimate localize_epoch(const RfSample& sample, const AnchorLayout& layout,
                               const AnchorSelectorModel* selector);

/// Multilaterates with the first k entries of `ranking` (layout indices, best
/// first). While the picks are collinear the last one is replaced by the next
/// candidate. Throws ArgumentError unless 3 <= k <= ranking.size().
RfEpochEstimate localize_ranked(const RfSample& sample, const AnchorLayout& layout,
                                std::span<const std::size_t> ranking, std::size_t k);

/// Layout indices by descending power, ties to the lower id.
std::vector<std::size_t> rank_by_power(const RfSample& sample);

}  // namespace hyloc
