#include "cwseg/losses.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "cwseg/simd.hpp"

namespace cwseg {

namespace {

constexpr std::array<std::pair<LossVariant, std::string_view>, 6> kVariantNames{{
    {LossVariant::CE, "CE"},
    {LossVariant::CWCE, "CWCE"},
    {LossVariant::DL, "DL"},
    {LossVariant::SDL, "SDL"},
    {LossVariant::CWCD, "CWCD"},
    {LossVariant::CEDL, "CEDL"},
}};

void check_pair(const ProbVolume& pred, const LabelVolume& truth) {
  if (!(pred.dims() == truth.dims()))
    throw std::invalid_argument("prediction and truth dims differ");
  if (pred.num_classes() != truth.num_classes())
    throw std::invalid_argument("prediction has " + std::to_string(pred.num_classes()) +
                                " channels but truth has " + std::to_string(truth.num_classes()) +
                                " classes");
}

// Soft dice of one channel restricted to `region` (nullptr for every voxel),
// with an optional gradient scaled by `coef` and accumulated into `grad`.
double region_dice(std::span<const double> p, const BinaryMask& g, const BinaryMask* region,
                   const LossConfig& cfg, double coef, double* grad) {
  const auto& k = simd::kernels();
  const std::size_t n = p.size();
  const std::uint8_t* r = region ? region->bits().data() : nullptr;
  const simd::Moments m = k.masked_moments(p.data(), g.bits().data(), r, n);
  const double denom = m.pp + m.g + cfg.epsilon;

  double numer;
  if (cfg.numerator == NumeratorForm::StandardPG) {
    numer = 2.0 * m.pg;
  } else {
    // sum(p^2 g) is the p^2 moment over region AND g.
    const BinaryMask support = region ? mask_and(*region, g) : g;
    numer = 2.0 * k.masked_moments(p.data(), g.bits().data(), support.bits().data(), n).pp;
  }
  const double value = numer / denom;

  if (grad) {
    const auto gb = g.bits();
    const double d2 = denom * denom;
    for (std::size_t i = 0; i < n; ++i) {
      if (r && !r[i]) continue;
      const double gi = static_cast<double>(gb[i]);
      double dd;
      if (cfg.numerator == NumeratorForm::StandardPG)
        dd = 2.0 * (gi * denom - 2.0 * p[i] * m.pg) / d2;
      else
        dd = 2.0 * p[i] * (2.0 * gi * denom - numer) / d2;
      grad[i] -= coef * dd;
    }
  }
  return value;
}

double mean_of(const std::vector<double>& v) {
  return reduce_sum(v) / static_cast<double>(v.size());
}

LossReport empty_report(const ProbVolume& pred, const PreparedTruth& truth, bool with_gradient) {
  LossReport rep;
  const auto c = static_cast<std::size_t>(truth.num_classes());
  rep.per_class_dice.assign(c, std::nullopt);
  rep.per_class_contour.assign(c, std::nullopt);
  rep.per_class_noncontour.assign(c, std::nullopt);
  rep.skipped_classes = truth.absent_classes();
  if (with_gradient) rep.gradient.emplace(pred.values().size(), 0.0);
  return rep;
}

void require_targets(const PreparedTruth& truth) {
  if (truth.present_classes().empty()) throw std::domain_error("no target regions");
}

void add_into(std::vector<double>& dst, const std::vector<double>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

std::string_view variant_name(LossVariant v) {
  for (const auto& [variant, name] : kVariantNames)
    if (variant == v) return name;
  return "?";
}

LossVariant parse_variant(std::string_view name) {
  for (const auto& [variant, n] : kVariantNames)
    if (n == name) return variant;
  throw std::invalid_argument("unknown loss variant: " + std::string(name));
}

void LossConfig::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw std::invalid_argument("epsilon must be > 0");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("lambda must lie in [0, 1]");
  if (!(contour_gain >= 1.0) || !std::isfinite(contour_gain))
    throw std::invalid_argument("contour_gain must be finite and >= 1");
  if (!(prob_clamp > 0.0 && prob_clamp < 0.5))
    throw std::invalid_argument("prob_clamp must lie in (0, 0.5)");
  contour_spec.validate();
}

PreparedTruth::PreparedTruth(const LabelVolume& truth, const ContourSpec& spec)
    : labels_(truth), spec_(spec) {
  spec_.validate();
  const int c = truth.num_classes();
  masks_.reserve(static_cast<std::size_t>(c));
  splits_.reserve(static_cast<std::size_t>(c));
  contour_regions_.reserve(static_cast<std::size_t>(c));
  for (int j = 0; j < c; ++j) {
    masks_.push_back(one_hot(truth, j));
    if (j == 0) {
      splits_.push_back({BinaryMask(truth.dims()), BinaryMask(truth.dims())});
      contour_regions_.emplace_back(truth.dims());
      continue;
    }
    splits_.push_back(extract_contour(masks_.back(), spec_));
    contour_regions_.push_back(mask_not(splits_.back().interior));
    (masks_.back().empty() ? absent_ : present_).push_back(j);
  }
}

ScalarVolume PreparedTruth::weight_map(double contour_gain) const {
  return weight_map_from_contours(labels_.dims(), splits_, contour_gain);
}

double dsc(std::span<const double> pred, const BinaryMask& truth, double epsilon) {
  if (pred.size() != truth.dims().voxels())
    throw std::invalid_argument("prediction and truth sizes differ");
  const simd::Moments m =
      simd::kernels().masked_moments(pred.data(), truth.bits().data(), nullptr, pred.size());
  return 2.0 * m.pg / (m.pp + m.g + epsilon);
}

double dsc(const BinaryMask& pred, const BinaryMask& truth, double epsilon) {
  if (!(pred.dims() == truth.dims())) throw std::invalid_argument("prediction and truth dims differ");
  const double inter = static_cast<double>(mask_and(pred, truth).count());
  return 2.0 * inter / (static_cast<double>(pred.count() + truth.count()) + epsilon);
}

LossReport dice_loss(const ProbVolume& pred, const PreparedTruth& truth, const LossConfig& cfg,
                     bool with_gradient) {
  cfg.validate();
  check_pair(pred, truth.labels());
  require_targets(truth);
  LossReport rep = empty_report(pred, truth, with_gradient);
  const std::size_t n = pred.dims().voxels();
  const auto& present = truth.present_classes();
  const double coef = 1.0 / static_cast<double>(present.size());

  std::vector<double> terms;
  for (int j : present) {
    double* g = with_gradient ? rep.gradient->data() + j * n : nullptr;
    const double term = 1.0 - region_dice(pred.channel(j), truth.class_mask(j), nullptr, cfg, coef, g);
    rep.per_class_dice[j] = term;
    terms.push_back(term);
  }
  rep.dice_term = mean_of(terms);
  rep.total = rep.dice_term;
  return rep;
}

LossReport separable_dice_loss(const ProbVolume& pred, const PreparedTruth& truth,
                               const LossConfig& cfg, bool with_gradient) {
  cfg.validate();
  check_pair(pred, truth.labels());
  require_targets(truth);
  if (!(truth.spec() == cfg.contour_spec))
    throw std::invalid_argument("prepared truth was built with a different contour spec");
  LossReport rep = empty_report(pred, truth, with_gradient);
  const std::size_t n = pred.dims().voxels();
  const auto& present = truth.present_classes();

  std::vector<int> with_interior;
  for (int j : present)
    if (truth.has_interior(j)) with_interior.push_back(j);

  const double contour_weight = with_interior.empty() ? 1.0 : cfg.lambda;
  const double interior_weight = with_interior.empty() ? 0.0 : 1.0 - cfg.lambda;
  const double c_coef = contour_weight / static_cast<double>(present.size());
  const double i_coef =
      with_interior.empty() ? 0.0 : interior_weight / static_cast<double>(with_interior.size());

  std::vector<double> c_terms, i_terms;
  for (int j : present) {
    double* g = with_gradient ? rep.gradient->data() + j * n : nullptr;
    const auto p = pred.channel(j);
    const double lc =
        1.0 - region_dice(p, truth.class_mask(j), &truth.contour_region(j), cfg, c_coef, g);
    rep.per_class_contour[j] = lc;
    c_terms.push_back(lc);
    if (truth.has_interior(j)) {
      const double lnoc =
          1.0 - region_dice(p, truth.class_mask(j), &truth.interior(j), cfg, i_coef, g);
      rep.per_class_noncontour[j] = lnoc;
      i_terms.push_back(lnoc);
    }
  }
  rep.contour_term = mean_of(c_terms);
  rep.noncontour_term = i_terms.empty() ? 0.0 : mean_of(i_terms);
  rep.sdl_term = i_terms.empty()
                     ? rep.contour_term
                     : cfg.lambda * rep.contour_term + (1.0 - cfg.lambda) * rep.noncontour_term;
  rep.total = rep.sdl_term;
  return rep;
}

LossReport cross_entropy(const ProbVolume& pred, const LabelVolume& truth,
                         const ScalarVolume* weight, const LossConfig& cfg, bool with_gradient) {
  cfg.validate();
  check_pair(pred, truth);
  if (weight) {
    if (!(weight->dims() == truth.dims())) throw std::invalid_argument("weight map dims differ");
    for (double w : weight->values())
      if (!(w > 0.0)) throw std::domain_error("weights must be positive");
  }
  LossReport rep;
  const auto c = static_cast<std::size_t>(truth.num_classes());
  rep.per_class_dice.assign(c, std::nullopt);
  rep.per_class_contour.assign(c, std::nullopt);
  rep.per_class_noncontour.assign(c, std::nullopt);
  for (int j = 1; j < truth.num_classes(); ++j)
    if (truth.count(j) == 0) rep.skipped_classes.push_back(j);

  const std::size_t n = pred.dims().voxels();
  const double norm = static_cast<double>(c) * static_cast<double>(n);
  const double lo = cfg.prob_clamp, hi = 1.0 - cfg.prob_clamp;
  const auto values = pred.values();
  std::vector<double> terms(n);
  if (with_gradient) rep.gradient.emplace(values.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t at = truth[i] * n + i;
    const double p = std::min(std::max(values[at], lo), hi);
    const double w = weight ? (*weight)[i] : 1.0;
    terms[i] = -w * std::log(p);
    if (with_gradient) (*rep.gradient)[at] = -w / (p * norm);
  }
  rep.ce_term = reduce_sum(terms) / norm;
  rep.total = rep.ce_term;
  return rep;
}

LossReport compound_loss(const ProbVolume& pred, const PreparedTruth& truth,
                         const LossConfig& cfg, bool with_gradient) {
  LossReport rep = separable_dice_loss(pred, truth, cfg, with_gradient);
  const ScalarVolume w = truth.weight_map(cfg.contour_gain);
  const LossReport ce = cross_entropy(pred, truth.labels(), &w, cfg, with_gradient);
  rep.ce_term = ce.ce_term;
  rep.total = rep.sdl_term + rep.ce_term;
  if (with_gradient) add_into(*rep.gradient, *ce.gradient);
  return rep;
}

LossReport evaluate_variant(const ProbVolume& pred, const PreparedTruth& truth,
                            const LossConfig& cfg, bool with_gradient) {
  switch (cfg.variant) {
    case LossVariant::CE:
      return cross_entropy(pred, truth.labels(), nullptr, cfg, with_gradient);
    case LossVariant::CWCE: {
      const ScalarVolume w = truth.weight_map(cfg.contour_gain);
      return cross_entropy(pred, truth.labels(), &w, cfg, with_gradient);
    }
    case LossVariant::DL:
      return dice_loss(pred, truth, cfg, with_gradient);
    case LossVariant::SDL:
      return separable_dice_loss(pred, truth, cfg, with_gradient);
    case LossVariant::CWCD:
      return compound_loss(pred, truth, cfg, with_gradient);
    case LossVariant::CEDL: {
      LossReport rep = dice_loss(pred, truth, cfg, with_gradient);
      const LossReport ce = cross_entropy(pred, truth.labels(), nullptr, cfg, with_gradient);
      rep.ce_term = ce.ce_term;
      rep.total = rep.dice_term + rep.ce_term;
      if (with_gradient) add_into(*rep.gradient, *ce.gradient);
      return rep;
    }
  }
  throw std::invalid_argument("unknown loss variant");
}

LossReport dice_loss(const ProbVolume& pred, const LabelVolume& truth, const LossConfig& cfg,
                     bool with_gradient) {
  return dice_loss(pred, PreparedTruth(truth, cfg.contour_spec), cfg, with_gradient);
}

LossReport separable_dice_loss(const ProbVolume& pred, const LabelVolume& truth,
                               const LossConfig& cfg, bool with_gradient) {
  return separable_dice_loss(pred, PreparedTruth(truth, cfg.contour_spec), cfg, with_gradient);
}

LossReport compound_loss(const ProbVolume& pred, const LabelVolume& truth, const LossConfig& cfg,
                         bool with_gradient) {
  return compound_loss(pred, PreparedTruth(truth, cfg.contour_spec), cfg, with_gradient);
}

LossReport evaluate_variant(const ProbVolume& pred, const LabelVolume& truth,
                            const LossConfig& cfg, bool with_gradient) {
  return evaluate_variant(pred, PreparedTruth(truth, cfg.contour_spec), cfg, with_gradient);
}

}  // namespace cwseg
