#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "hyloc/core.hpp"
#include "hyloc/fusion.hpp"
#include "hyloc/rf_loc.hpp"
#include "hyloc/world_sim.hpp"

namespace hyloc {

/// Multilateration at every RF epoch, after anchor selection when a selector
/// is given. Epochs whose anchor geometry is degenerate are dropped; throws
/// GeometryError when every epoch is.
Trajectory rf_only(const Trace& trace, const AnchorSelectorModel* selector = nullptr);

/// Dead reckoning of the VO steps from the ground-truth start, heading 0.
Trajectory vo_only(const Trace& trace);

// --- EKF ----------------------------------------------------------------------------

struct EkfOptions {
  /// Std of each coordinate of the multilaterated fix; defaults to the
  /// trace's sigma_los when unset.
  std::optional<double> rf_sigma;
  /// Per-step VO noise at full keypoint count; default to the trace's
  /// noise model, scaled per epoch by vo_noise_scale(M).
  std::optional<double> vo_r_sigma;
  std::optional<double> vo_theta_sigma;
  /// Initial heading std (rad). The VO frame defines heading 0, so 0 by default.
  double heading_sigma0 = 0.0;
};

struct EkfState {
  Eigen::Vector3d x = Eigen::Vector3d::Zero();  // px, py, heading
  Eigen::Matrix3d P = Eigen::Matrix3d::Zero();
};

/// Prediction with polar step (r, theta) as control input. `q` is the 2x2
/// control noise covariance; the state covariance is symmetrized.
void ekf_predict(EkfState& s, double r, double theta, const Eigen::Matrix2d& q);

/// Update with a position fix. Skipped (returns false) when the innovation
/// covariance is singular.
bool ekf_update(EkfState& s, Position2D z, const Eigen::Matrix2d& r);

/// EKF over [px, py, heading]: VO polar steps drive the prediction, the
/// all-anchor multilateration result is the measurement. The filter starts
/// at the first fix. Throws NumericalError naming the epoch when the
/// covariance becomes non-finite.
Trajectory ekf_fuse(const Trace& trace, const EkfOptions& options = {});

// --- blackbox network ---------------------------------------------------------------

struct BlackboxConfig {
  std::size_t window = 8;
  std::size_t rf_conv[3] = {32, 64, 64};
  std::size_t rf_dense = 768;
  std::size_t vo_conv[3] = {16, 32, 32};
  std::size_t vo_dense = 256;
  std::size_t embed = 32;  // per-epoch width after each encoder
  std::size_t kernel = 3;
  std::size_t lstm_hidden = 64;
  std::size_t lstm_layers = 2;
  std::size_t fc_hidden = 32;

  void validate() const;
  friend bool operator==(const BlackboxConfig&, const BlackboxConfig&) = default;
};

/// Raw streams: a = [R_1..R_n, P_1..P_n], b = [r, theta, M].
SensorSequence blackbox_sequence(const Trace& trace);

/// Deep raw-input model: per-sensor conv + dense encoders, self-attention
/// on each stream, then the fusion network's attention, LSTM and FC head.
class BlackboxModel : public WindowModel {
 public:
  BlackboxModel(BlackboxConfig config, std::size_t num_anchors, std::uint64_t seed);

  std::string kind() const override { return "blackbox"; }
  std::size_t window() const override { return config_.window; }
  std::size_t a_dim() const override { return 2 * num_anchors_; }
  std::size_t b_dim() const override { return 3; }
  ForwardPass forward(nn::Tape& tape, const nn::BoundParams& p, nn::Var a, nn::Var b) const override;

  const BlackboxConfig& config() const { return config_; }
  std::size_t num_anchors() const { return num_anchors_; }
  std::size_t parameter_count() const { return params.count(); }

  SensorSequence sequence(const Trace& trace) const;

  void save(const std::filesystem::path& path) const;
  static BlackboxModel load(const std::filesystem::path& path);

 private:
  BlackboxConfig config_;
  std::size_t num_anchors_ = 0;
};

Trajectory predict_trace(const BlackboxModel& model, const Trace& trace);

/// Reads the "kind" tag of a checkpoint sidecar.
std::string checkpoint_kind(const std::filesystem::path& path);

}  // namespace hyloc
