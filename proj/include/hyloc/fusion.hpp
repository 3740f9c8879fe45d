#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hyloc/autodiff.hpp"
#include "hyloc/core.hpp"
#include "hyloc/rf_loc.hpp"
#include "hyloc/world_sim.hpp"

namespace hyloc {

// --- windowed sequence data --------------------------------------------------------

/// Two per-epoch input streams ("a" = RF side, "b" = VO side) with ground truth.
struct SensorSequence {
  std::vector<std::vector<double>> a;
  std::vector<std::vector<double>> b;
  std::vector<Position2D> gt;
  std::vector<double> t;

  std::size_t size() const { return t.size(); }
};

/// Window of `L` epochs of sequence `seq` ending at epoch `end` (inclusive).
struct WindowRef {
  std::size_t seq = 0;
  std::size_t end = 0;

  friend bool operator==(const WindowRef&, const WindowRef&) = default;
};

struct SplitFractions {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;

  void validate() const;
};

struct DatasetSplit {
  std::vector<WindowRef> train;
  std::vector<WindowRef> val;
  std::vector<WindowRef> test;
};

/// Every window of length L in every sequence, in order.
std::vector<WindowRef> all_windows(const std::vector<SensorSequence>& seqs, std::size_t window);

/// Block-interleaved split: consecutive windows are grouped into blocks of
/// `block` and blocks are dealt out over a cycle of 20 in proportion to the
/// fractions (train first, then val, then test). Throws ArgumentError when any
/// split would be empty.
DatasetSplit split_windows(const std::vector<SensorSequence>& seqs, std::size_t window, const SplitFractions& fractions,
                           std::size_t block = 40);

/// Seeded random subset holding round(fraction * n) windows (at least one),
/// kept in original order.
std::vector<WindowRef> subsample_windows(const std::vector<WindowRef>& windows, double fraction, std::uint64_t seed);

/// Per-feature shift and scale. Means come from the training epochs only; the
/// scale is the training standard deviation (1 when below 1e-12).
struct Normalizer {
  std::vector<double> a_mean, a_scale;
  std::vector<double> b_mean, b_scale;
  double target_mean[2] = {0.0, 0.0};
  double target_scale[2] = {1.0, 1.0};

  friend bool operator==(const Normalizer&, const Normalizer&) = default;
};

/// Statistics over the distinct epochs covered by `train`. Throws
/// ArgumentError when `train` is empty.
Normalizer fit_normalizer(const std::vector<SensorSequence>& seqs, const std::vector<WindowRef>& train,
                          std::size_t window);

/// Copy of `seqs` with the normalizer applied to both streams and targets.
std::vector<SensorSequence> normalize_sequences(const std::vector<SensorSequence>& seqs, const Normalizer& norm);

// --- window models ------------------------------------------------------------------

/// Forward outputs for a batch of B windows. Masks are [B*L x C] (row b*L + t)
/// and absent when the model has no mask on that side.
struct ForwardPass {
  nn::Var position;  // [B x 2], normalized units
  std::optional<nn::Var> mask_a;
  std::optional<nn::Var> mask_b;
};

/// A network mapping a window of both streams to the position at its last epoch.
class WindowModel {
 public:
  virtual ~WindowModel() = default;

  virtual std::string kind() const = 0;
  virtual std::size_t window() const = 0;
  virtual std::size_t a_dim() const = 0;
  virtual std::size_t b_dim() const = 0;
  /// a [B x a_dim x L], b [B x b_dim x L], already normalized.
  virtual ForwardPass forward(nn::Tape& tape, const nn::BoundParams& p, nn::Var a, nn::Var b) const = 0;

  nn::ParamStore params;
  Normalizer normalizer;
};

/// Assembles normalized batch tensors for the given windows.
std::pair<nn::Tensor, nn::Tensor> window_batch(const std::vector<SensorSequence>& normalized,
                                               std::span<const WindowRef> windows, std::size_t window);

struct TrainOptions {
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double lr_decay = 0.93;      // per epoch
  int epochs = 30;
  double grad_clip = 5.0;      // global norm; <= 0 disables
  std::uint64_t seed = 0;
};

struct TrainLogRow {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  std::vector<TrainLogRow> log;
  int best_epoch = 0;
  double best_val_loss = 0.0;
};

/// Fits the normalizer on the training windows, then runs Adam on the mean
/// squared position error. Keeps the parameters of the epoch with the lowest
/// validation loss. Throws ArgumentError for an empty train or val split.
TrainResult train_network(WindowModel& model, const std::vector<SensorSequence>& seqs,
                          const std::vector<WindowRef>& train, const std::vector<WindowRef>& val,
                          const TrainOptions& options);

/// Mean squared error (normalized units) of the model over `windows`.
double evaluate_loss(const WindowModel& model, const std::vector<SensorSequence>& seqs,
                     const std::vector<WindowRef>& windows);

/// Denormalized position estimates for the windows.
std::vector<Position2D> predict_windows(const WindowModel& model, const std::vector<SensorSequence>& seqs,
                                        const std::vector<WindowRef>& windows);

/// Euclidean error of predict_windows against the ground truth at each
/// window's last epoch.
std::vector<double> window_errors(const WindowModel& model, const std::vector<SensorSequence>& seqs,
                                  const std::vector<WindowRef>& windows);

/// Estimates at the windows' last epochs as a trajectory (windows of one
/// sequence, ascending end).
Trajectory windows_trajectory(const SensorSequence& seq, const std::vector<WindowRef>& windows,
                              const std::vector<Position2D>& estimates);

/// Writes epoch,train_loss,val_loss.
void write_train_log(const TrainResult& result, const std::filesystem::path& path);

// --- fusion network --------------------------------------------------------------------

struct FusionConfig {
  std::size_t window = 8;
  int k = 3;                    // anchors kept by the selector
  std::size_t conv1 = 8;
  std::size_t conv2 = 16;
  std::size_t kernel = 3;
  std::size_t lstm_hidden = 64;
  std::size_t lstm_layers = 2;
  std::size_t fc_hidden = 32;
  bool no_cross_attention = false;   // masks replaced by ones
  bool no_anchor_selection = false;  // multilaterate with every anchor
  /// Mask A_rv from the RF encoding and A_vr from the VO encoding instead of
  /// the default where each mask is computed from the stream it gates.
  bool swap_attention = false;

  void validate() const;
  friend bool operator==(const FusionConfig&, const FusionConfig&) = default;
};

/// Per-epoch RF and VO features of a trace. The RF side is
/// [X_u, Y_u, R_1..R_K, P_1..P_K] from localize_epoch with `selector`; with
/// no_anchor_selection every anchor is used. Without a selector the K
/// strongest-power anchors are taken (ties to the lower id).
SensorSequence fusion_sequence(const Trace& trace, const FusionConfig& config, const AnchorSelectorModel* selector);

class FusionModel : public WindowModel {
 public:
  /// Random initialization from the "fusion/init" stream of `seed`.
  FusionModel(FusionConfig config, std::size_t num_anchors, std::uint64_t seed,
              std::optional<AnchorSelectorModel> selector = std::nullopt);

  std::string kind() const override { return "fusion"; }
  std::size_t window() const override { return config_.window; }
  std::size_t a_dim() const override { return rf_dim_; }
  std::size_t b_dim() const override { return 3; }
  ForwardPass forward(nn::Tape& tape, const nn::BoundParams& p, nn::Var a, nn::Var b) const override;

  const FusionConfig& config() const { return config_; }
  std::size_t num_anchors() const { return num_anchors_; }
  const std::optional<AnchorSelectorModel>& selector() const { return selector_; }
  std::size_t parameter_count() const { return params.count(); }

  SensorSequence sequence(const Trace& trace) const;

  /// Writes `path` (tensor container) and `path`.json (config, normalizer,
  /// selector).
  void save(const std::filesystem::path& path) const;
  static FusionModel load(const std::filesystem::path& path);

 private:
  FusionConfig config_;
  std::size_t num_anchors_ = 0;
  std::size_t rf_dim_ = 0;
  std::optional<AnchorSelectorModel> selector_;
};

/// Sigmoid((x W'^T) * (x W''^T)) elementwise, x [rows x C].
nn::Var attention_mask(nn::Var x, nn::Var w1, nn::Var w2);

/// Fusion-specific dataset: sequences for each trace and a split over them.
struct FusionDataset {
  std::vector<SensorSequence> sequences;
  DatasetSplit split;
};

FusionDataset build_fusion_dataset(const std::vector<Trace>& traces, const FusionModel& model,
                                   const SplitFractions& fractions = {});

/// Position per epoch from index L-1 on, timestamps from the RF epochs.
/// Throws ArgumentError when the trace has fewer than L epochs.
Trajectory predict_trace(const WindowModel& model, const SensorSequence& seq);
Trajectory predict_trace(const FusionModel& model, const Trace& trace);

struct AttentionRow {
  double t = 0.0;
  double rf_mask = 0.0;  // mean of the mask gating the RF encoding, newest epoch
  double vo_mask = 0.0;  // mean of the mask gating the VO encoding, newest epoch
};

/// One row per prediction. Masks are 1 under no_cross_attention.
std::vector<AttentionRow> attention_report(const FusionModel& model, const Trace& trace);

}  // namespace hyloc
