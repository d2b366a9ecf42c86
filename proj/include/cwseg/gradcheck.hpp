#pragma once

// Independent oracles: central finite differences for every analytical
// gradient and a brute-force neighbourhood scan for erosion. Nothing here
// calls into the analytical gradient code; loss closures are evaluated for
// their value only.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cwseg/losses.hpp"
#include "cwseg/volgrid.hpp"

namespace cwseg::gradcheck {

struct CheckConfig {
  double step = 1e-4;
  double rel_tol = 1e-4;
  double abs_floor = 1e-8;
  int trials = 20;
  std::uint64_t seed = 7;

  void validate() const;
};

using LossFn = std::function<double(const ProbVolume&)>;

struct FiniteDiff {
  std::vector<double> gradient;  // ProbVolume layout; 0 at skipped coordinates
  std::vector<std::size_t> skipped;
};

/// (L(p + h e_i) - L(p - h e_i)) / 2h for every coordinate. Coordinates whose
/// perturbation leaves [0, 1] are skipped.
FiniteDiff finite_diff_gradient(const LossFn& loss, const ProbVolume& pred, double step);

/// Central differences of an unconstrained scalar function.
std::vector<double> finite_diff(const std::function<double(std::span<const double>)>& fn,
                                std::span<const double> x, double step);

struct Comparison {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

/// |a - f| / max(|a|, |f|) over coordinates where max(|a|, |f|) > abs_floor,
/// excluding `skipped`. Ties resolve to the lowest index.
Comparison compare_gradients(std::span<const double> analytic, std::span<const double> numeric,
                             double abs_floor, std::span<const std::size_t> skipped = {});

/// Per-voxel neighbourhood scan, one erosion pass per iteration.
BinaryMask erode_bruteforce(const BinaryMask& mask, const ContourSpec& spec);

struct Instance {
  ProbVolume pred;
  LabelVolume truth;
  LossConfig cfg;
};

/// Seeded random loss instance: dims <= 8^3, 2-4 classes, probabilities drawn
/// from [0.05, 0.95] and sometimes renormalized per voxel.
Instance random_instance(std::uint64_t seed, LossVariant variant);

struct TrialResult {
  std::string check;  // variant name or "morphology"
  std::uint64_t seed = 0;
  double max_rel_error = 0.0;
  bool pass = true;
};

struct CheckReport {
  double max_rel_error = 0.0;
  std::string worst_check;
  std::uint64_t worst_seed = 0;
  int worst_class = -1;
  std::size_t worst_voxel = 0;
  std::size_t morphology_mismatches = 0;
  bool pass = true;
  std::vector<TrialResult> per_trial;
};

inline constexpr LossVariant kSuiteVariants[] = {LossVariant::CE, LossVariant::CWCE,
                                                 LossVariant::DL, LossVariant::SDL,
                                                 LossVariant::CWCD};

/// Gradient checks for each variant plus erosion-oracle equivalence, `trials`
/// seeded instances each.
CheckReport run_suite(const CheckConfig& cfg,
                      std::span<const LossVariant> variants = kSuiteVariants);

}  // namespace cwseg::gradcheck
