#pragma once

// Desk-scale training harness: synthetic phantoms, a small per-voxel
// classifier over fixed local features, an Adam trainer driven by any loss
// variant, and DSC evaluation.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cwseg/losses.hpp"
#include "cwseg/volgrid.hpp"

namespace cwseg::trainkit {

/// Background, a rounded-box blob, and a small thin spherical shell.
struct PhantomSpec {
  Dims dims{32, 32, 32};
  int num_classes = 3;
  double blob_radius_min = 7.5;
  double blob_radius_max = 9.5;
  double shell_radius_min = 2.5;
  double shell_radius_max = 3.25;
  int shell_thickness_min = 1;
  int shell_thickness_max = 2;
  std::vector<double> class_intensity{0.0, 1.0, 2.5};
  double noise_sigma = 0.25;
  double blur_sigma = 0.0;  // Gaussian point spread applied before noise
  int count = 40;
  std::uint64_t seed = 1;
  int margin = 2;

  void validate() const;
};

struct Phantom {
  ScalarVolume image;
  LabelVolume truth;
  std::vector<double> class_fractions;
};

/// Deterministic in `spec.seed`. Every volume has a background fraction above
/// 0.8 and a shell below 5% of the foreground. Throws std::runtime_error when
/// the shapes cannot be placed.
std::vector<Phantom> generate_phantoms(const PhantomSpec& spec);

/// Fixed per-voxel features, channel-major: z-scored intensity, 6-neighbour
/// mean and central-difference gradient magnitude, each z-scored.
struct FeatureVolume {
  Dims dims;
  std::vector<double> channels;
  static constexpr int kChannels = 3;
};

FeatureVolume compute_features(const ScalarVolume& image);

/// Softmax Jacobian-vector product per voxel:
/// dL/dz_c = p_c * (dL/dp_c - sum_k p_k dL/dp_k).
/// Throws std::invalid_argument if `probs` is not normalized.
std::vector<double> softmax_backprop(const ProbVolume& probs, std::span<const double> grad_probs);

/// features -> tanh hidden layer -> per-class affine head -> softmax.
/// Parameters are stored as [W1 (H x K), b1 (H), W2 (C x H), b2 (C)].
class TinyModel {
 public:
  TinyModel(int num_classes, int hidden, std::uint64_t seed);
  TinyModel(int num_classes, int hidden, std::vector<double> params);

  int num_classes() const { return num_classes_; }
  int hidden() const { return hidden_; }
  static std::size_t param_count(int num_classes, int hidden);

  std::span<const double> params() const { return params_; }
  std::span<double> params() { return params_; }

  ProbVolume forward(const FeatureVolume& features) const;

  struct Evaluation {
    LossReport report;
    std::vector<double> param_gradient;
  };
  /// Loss of the model's output and its gradient with respect to the parameters.
  Evaluation loss_and_gradient(const FeatureVolume& features, const PreparedTruth& truth,
                               const LossConfig& cfg) const;

 private:
  struct Activations {
    std::vector<double> hidden;  // tanh outputs, H x N
    std::vector<double> probs;   // C x N
  };
  Activations run(const FeatureVolume& features) const;

  int num_classes_;
  int hidden_;
  std::vector<double> params_;
};

struct Sample {
  FeatureVolume features;
  PreparedTruth truth;
};

Sample make_sample(const Phantom& phantom, const ContourSpec& spec);

struct TrainConfig {
  int epochs = 50;
  double learning_rate = 3e-4;
  std::vector<int> lr_halving_epochs{20, 40};
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int hidden = 16;
  std::uint64_t seed = 1;
  LossConfig loss{};

  void validate() const;
  /// Learning rate used for 0-based epoch `epoch`.
  double lr_at(int epoch) const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  std::string variant;
  double learning_rate = 0.0;
  double total = 0.0;
  double contour = 0.0;
  double noncontour = 0.0;
  double ce = 0.0;
  double val_dsc = 0.0;
};

/// One JSON object per line.
std::string format_log_line(const EpochRecord& rec);

struct TrainResult {
  TinyModel best;
  TinyModel last;
  int best_epoch = 0;  // 0 when no epoch ran
  double best_val_dsc = 0.0;
  std::vector<EpochRecord> log;
};

/// Full-volume batches of one, fixed sample order, Adam updates. The returned
/// `best` model has the highest validation DSC (earliest on ties). Throws
/// std::runtime_error on a non-finite loss.
TrainResult train(const TinyModel& init, std::span<const Sample> train_set,
                  std::span<const Sample> val_set, const TrainConfig& cfg);

struct DscTable {
  std::vector<std::vector<std::optional<double>>> per_volume;  // [volume][class]
  std::vector<std::optional<double>> per_class_mean;           // over volumes where present
  double mean = 0.0;                                           // over classes with a mean
  std::vector<std::optional<double>> per_class_contour_mean;   // DSC inside the truth contour union
  double contour_mean = 0.0;
};

/// Hard-argmax labels.
LabelVolume predict_labels(const ProbVolume& probs);

/// Binary DSC per present foreground class, plus the same restricted to the
/// union of ground-truth foreground contour voxels.
DscTable evaluate_dsc(const TinyModel& model, std::span<const Sample> data, double epsilon = 1e-5);
DscTable evaluate_labels(std::span<const LabelVolume> predictions, std::span<const Sample> data,
                         double epsilon = 1e-5);

struct CheckpointMeta {
  LossVariant variant = LossVariant::CWCD;
  double contour_gain = 2.0;
  double lambda = 0.5;
  int iterations = 6;
};

void save_checkpoint(const std::filesystem::path& path, const TinyModel& model,
                     const CheckpointMeta& meta);
struct Checkpoint {
  TinyModel model;
  CheckpointMeta meta;
};
/// Throws std::runtime_error on a bad magic, version or length.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cwseg::trainkit
