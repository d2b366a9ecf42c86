#pragma once

// Segmentation losses with analytical gradients with respect to the predicted
// probabilities: soft dice, separable (contour / non-contour) dice,
// cross-entropy with optional per-voxel weights, and their compounds.
//
// Conventions:
//  * Dice-family terms average over foreground classes present in the truth.
//  * Separable dice splits every present class j by its ground-truth erosion:
//    the non-contour term is evaluated on the eroded interior of j, the contour
//    term on every other voxel (the contour of j plus everything outside j), so
//    the two regions tile the volume. A class with an empty interior drops out
//    of the non-contour average; if no class has an interior the separable
//    dice equals the contour term.
//  * Cross-entropy is divided by num_classes * voxel count. Probabilities are
//    clamped to [prob_clamp, 1 - prob_clamp] before the log and the gradient is
//    -w / clamp(p) on the true-class channel.

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cwseg/morphology.hpp"
#include "cwseg/volgrid.hpp"

namespace cwseg {

enum class LossVariant {
  CE,    ///< plain cross-entropy
  CWCE,  ///< contour-weighted cross-entropy
  DL,    ///< soft dice
  SDL,   ///< separable dice
  CWCD,  ///< separable dice + contour-weighted cross-entropy
  CEDL,  ///< soft dice + plain cross-entropy (baseline compound)
};

std::string_view variant_name(LossVariant v);
/// Throws std::invalid_argument for an unknown name.
LossVariant parse_variant(std::string_view name);

enum class NumeratorForm {
  StandardPG,       ///< 2 * sum(p * g)
  PaperLiteralP2G2  ///< 2 * sum(p^2 * g^2)
};

struct LossConfig {
  double epsilon = 1e-5;
  double lambda = 0.5;
  double contour_gain = 2.0;
  ContourSpec contour_spec{};
  NumeratorForm numerator = NumeratorForm::StandardPG;
  double prob_clamp = 1e-7;
  LossVariant variant = LossVariant::CWCD;

  /// Throws std::invalid_argument on out-of-range fields.
  void validate() const;
};

struct LossReport {
  double total = 0.0;
  double dice_term = 0.0;
  double contour_term = 0.0;     // mean L_c over present classes
  double noncontour_term = 0.0;  // mean L_noc over classes with an interior
  double sdl_term = 0.0;
  double ce_term = 0.0;
  // Indexed by class id; std::nullopt for background and skipped classes.
  std::vector<std::optional<double>> per_class_dice;
  std::vector<std::optional<double>> per_class_contour;
  std::vector<std::optional<double>> per_class_noncontour;
  /// Foreground classes absent from the truth.
  std::vector<int> skipped_classes;
  /// d total / d p, same layout as ProbVolume::values().
  std::optional<std::vector<double>> gradient;
};

/// Truth-derived data reused across evaluations: class masks, contour splits
/// and the regions each separable-dice term runs over.
class PreparedTruth {
 public:
  PreparedTruth(const LabelVolume& truth, const ContourSpec& spec);

  const LabelVolume& labels() const { return labels_; }
  const ContourSpec& spec() const { return spec_; }
  int num_classes() const { return labels_.num_classes(); }

  const BinaryMask& class_mask(int c) const { return masks_[c]; }
  const BinaryMask& contour(int c) const { return splits_[c].contour; }
  const BinaryMask& interior(int c) const { return splits_[c].interior; }
  /// Complement of the interior: where the contour term of class c is evaluated.
  const BinaryMask& contour_region(int c) const { return contour_regions_[c]; }

  /// Foreground classes with at least one voxel, ascending.
  const std::vector<int>& present_classes() const { return present_; }
  /// Foreground classes absent from the truth, ascending.
  const std::vector<int>& absent_classes() const { return absent_; }
  bool has_interior(int c) const { return !splits_[c].interior.empty(); }

  ScalarVolume weight_map(double contour_gain) const;

 private:
  LabelVolume labels_;
  ContourSpec spec_;
  std::vector<BinaryMask> masks_;
  std::vector<ContourSplit> splits_;
  std::vector<BinaryMask> contour_regions_;
  std::vector<int> present_;
  std::vector<int> absent_;
};

/// 2 sum(p g) / (sum(p^2) + sum(g^2) + epsilon).
double dsc(std::span<const double> pred, const BinaryMask& truth, double epsilon);
double dsc(const BinaryMask& pred, const BinaryMask& truth, double epsilon);

LossReport dice_loss(const ProbVolume& pred, const PreparedTruth& truth, const LossConfig& cfg,
                     bool with_gradient = false);
LossReport separable_dice_loss(const ProbVolume& pred, const PreparedTruth& truth,
                               const LossConfig& cfg, bool with_gradient = false);
/// Unweighted when `weight` is null. Throws std::domain_error on weights <= 0.
LossReport cross_entropy(const ProbVolume& pred, const LabelVolume& truth,
                         const ScalarVolume* weight, const LossConfig& cfg,
                         bool with_gradient = false);
/// Separable dice plus cross-entropy weighted by the truth's contour map.
LossReport compound_loss(const ProbVolume& pred, const PreparedTruth& truth,
                         const LossConfig& cfg, bool with_gradient = false);
/// Routes on cfg.variant.
LossReport evaluate_variant(const ProbVolume& pred, const PreparedTruth& truth,
                            const LossConfig& cfg, bool with_gradient = false);

// Conveniences that prepare the truth on every call.
LossReport dice_loss(const ProbVolume& pred, const LabelVolume& truth, const LossConfig& cfg,
                     bool with_gradient = false);
LossReport separable_dice_loss(const ProbVolume& pred, const LabelVolume& truth,
                               const LossConfig& cfg, bool with_gradient = false);
LossReport compound_loss(const ProbVolume& pred, const LabelVolume& truth, const LossConfig& cfg,
                         bool with_gradient = false);
LossReport evaluate_variant(const ProbVolume& pred, const LabelVolume& truth,
                            const LossConfig& cfg, bool with_gradient = false);

}  // namespace cwseg
