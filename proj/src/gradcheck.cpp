#include "cwseg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cwseg/rng.hpp"

namespace cwseg::gradcheck {

void CheckConfig::validate() const {
  if (!(step > 0.0)) throw std::invalid_argument("step must be > 0");
  if (!(rel_tol >= 0.0)) throw std::invalid_argument("rel_tol must be >= 0");
  if (!(abs_floor >= 0.0)) throw std::invalid_argument("abs_floor must be >= 0");
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
}

FiniteDiff finite_diff_gradient(const LossFn& loss, const ProbVolume& pred, double step) {
  FiniteDiff out;
  std::vector<double> work(pred.values().begin(), pred.values().end());
  out.gradient.assign(work.size(), 0.0);
  for (std::size_t i = 0; i < work.size(); ++i) {
    const double p = work[i];
    if (p - step < 0.0 || p + step > 1.0) {
      out.skipped.push_back(i);
      continue;
    }
    work[i] = p + step;
    const double up = loss(ProbVolume(pred.dims(), pred.num_classes(), work));
    work[i] = p - step;
    const double down = loss(ProbVolume(pred.dims(), pred.num_classes(), work));
    work[i] = p;
    out.gradient[i] = (up - down) / (2.0 * step);
  }
  return out;
}

std::vector<double> finite_diff(const std::function<double(std::span<const double>)>& fn,
                                std::span<const double> x, double step) {
  std::vector<double> work(x.begin(), x.end());
  std::vector<double> grad(work.size());
  for (std::size_t i = 0; i < work.size(); ++i) {
    const double v = work[i];
    work[i] = v + step;
    const double up = fn(work);
    work[i] = v - step;
    const double down = fn(work);
    work[i] = v;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

Comparison compare_gradients(std::span<const double> analytic, std::span<const double> numeric,
                             double abs_floor, std::span<const std::size_t> skipped) {
  if (analytic.size() != numeric.size()) throw std::invalid_argument("gradient sizes differ");
  std::vector<bool> skip(analytic.size(), false);
  for (auto i : skipped) skip[i] = true;
  Comparison c;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    if (skip[i]) continue;
    const double scale = std::max(std::abs(analytic[i]), std::abs(numeric[i]));
    if (!(scale > abs_floor)) continue;
    ++c.checked;
    const double rel = std::abs(analytic[i] - numeric[i]) / scale;
    if (rel > c.max_rel_error || std::isnan(rel)) {
      c.max_rel_error = std::isnan(rel) ? INFINITY : rel;
      c.worst_index = i;
    }
  }
  return c;
}

BinaryMask erode_bruteforce(const BinaryMask& mask, const ContourSpec& spec) {
  const Dims& d = mask.dims();
  const long rz = d.depth == 1 ? 0 : spec.element.depth / 2;
  const long ry = spec.element.height / 2;
  const long rx = spec.element.width / 2;
  const bool replicate = spec.boundary == BoundaryPolicy::ReplicateEdge;
  const long dd = static_cast<long>(d.depth), hh = static_cast<long>(d.height),
             ww = static_cast<long>(d.width);

  std::vector<std::uint8_t> cur(mask.bits().begin(), mask.bits().end());
  for (int it = 0; it < spec.iterations; ++it) {
    std::vector<std::uint8_t> next(cur.size(), 0);
    for (long z = 0; z < dd; ++z)
      for (long y = 0; y < hh; ++y)
        for (long x = 0; x < ww; ++x) {
          bool keep = true;
          for (long oz = -rz; oz <= rz && keep; ++oz)
            for (long oy = -ry; oy <= ry && keep; ++oy)
              for (long ox = -rx; ox <= rx && keep; ++ox) {
                long qz = z + oz, qy = y + oy, qx = x + ox;
                const bool inside = qz >= 0 && qz < dd && qy >= 0 && qy < hh && qx >= 0 && qx < ww;
                if (!inside) {
                  if (!replicate) {
                    keep = false;
                    break;
                  }
                  qz = std::clamp(qz, 0L, dd - 1);
                  qy = std::clamp(qy, 0L, hh - 1);
                  qx = std::clamp(qx, 0L, ww - 1);
                }
                if (cur[static_cast<std::size_t>((qz * hh + qy) * ww + qx)] == 0) keep = false;
              }
          next[static_cast<std::size_t>((z * hh + y) * ww + x)] = keep ? 1 : 0;
        }
    cur.swap(next);
  }
  return BinaryMask(d, std::move(cur));
}

namespace {

// Union of random axis-aligned boxes painted with `value`.
void paint_boxes(std::vector<std::uint8_t>& vol, const Dims& d, Rng& rng, int boxes,
                 std::uint8_t value) {
  for (int b = 0; b < boxes; ++b) {
    std::size_t lo[3], hi[3];
    const std::size_t ext[3] = {d.depth, d.height, d.width};
    for (int a = 0; a < 3; ++a) {
      lo[a] = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(ext[a]) - 1));
      hi[a] = static_cast<std::size_t>(
          rng.uniform_int(static_cast<std::int64_t>(lo[a]), static_cast<std::int64_t>(ext[a]) - 1));
    }
    for (std::size_t z = lo[0]; z <= hi[0]; ++z)
      for (std::size_t y = lo[1]; y <= hi[1]; ++y)
        for (std::size_t x = lo[2]; x <= hi[2]; ++x) vol[d.index(z, y, x)] = value;
  }
}

}  // namespace

Instance random_instance(std::uint64_t seed, LossVariant variant) {
  Rng rng(seed);
  const Dims dims(static_cast<std::size_t>(rng.uniform_int(2, 8)),
                  static_cast<std::size_t>(rng.uniform_int(3, 8)),
                  static_cast<std::size_t>(rng.uniform_int(3, 8)));
  const int classes = static_cast<int>(rng.uniform_int(2, 4));

  std::vector<std::uint8_t> labels(dims.voxels(), 0);
  for (int c = 1; c < classes; ++c)
    if (c == 1 || rng.bernoulli(0.8))
      paint_boxes(labels, dims, rng, static_cast<int>(rng.uniform_int(1, 2)),
                  static_cast<std::uint8_t>(c));
  if (std::none_of(labels.begin(), labels.end(), [](auto v) { return v != 0; }))
    labels[dims.voxels() / 2] = 1;

  const std::size_t n = dims.voxels();
  std::vector<double> probs(n * static_cast<std::size_t>(classes));
  for (auto& p : probs) p = rng.uniform(0.05, 0.95);
  if (rng.bernoulli(0.5)) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (int c = 0; c < classes; ++c) s += probs[c * n + i];
      for (int c = 0; c < classes; ++c) probs[c * n + i] /= s;
    }
  }

  LossConfig cfg;
  cfg.variant = variant;
  cfg.lambda = rng.bernoulli(0.5) ? 0.5 : rng.uniform();
  cfg.contour_gain = rng.uniform(1.0, 4.0);
  cfg.contour_spec.iterations = static_cast<int>(rng.uniform_int(1, 2));
  cfg.contour_spec.boundary =
      rng.bernoulli(0.5) ? BoundaryPolicy::ZeroOutside : BoundaryPolicy::ReplicateEdge;
  cfg.numerator = rng.bernoulli(0.75) ? NumeratorForm::StandardPG : NumeratorForm::PaperLiteralP2G2;

  return {ProbVolume(dims, classes, std::move(probs)), LabelVolume(dims, std::move(labels), classes),
          cfg};
}

namespace {

BinaryMask random_mask(Rng& rng) {
  const Dims dims(static_cast<std::size_t>(rng.uniform_int(1, 16)),
                  static_cast<std::size_t>(rng.uniform_int(1, 16)),
                  static_cast<std::size_t>(rng.uniform_int(1, 16)));
  std::vector<std::uint8_t> bits(dims.voxels(), 0);
  paint_boxes(bits, dims, rng, static_cast<int>(rng.uniform_int(1, 4)), 1);
  const double noise = rng.uniform(0.0, 0.1);
  for (auto& b : bits)
    if (rng.bernoulli(noise)) b ^= 1;
  return BinaryMask(dims, std::move(bits));
}

ContourSpec random_spec(Rng& rng) {
  ContourSpec spec;
  const int extents[] = {1, 3, 3, 5};
  spec.element = {extents[rng.uniform_int(0, 3)], extents[rng.uniform_int(0, 3)],
                  extents[rng.uniform_int(0, 3)]};
  spec.iterations = static_cast<int>(rng.uniform_int(1, 3));
  spec.boundary = rng.bernoulli(0.5) ? BoundaryPolicy::ZeroOutside : BoundaryPolicy::ReplicateEdge;
  return spec;
}

void record(CheckReport& rep, TrialResult trial) {
  rep.pass = rep.pass && trial.pass;
  rep.per_trial.push_back(std::move(trial));
}

}  // namespace

CheckReport run_suite(const CheckConfig& cfg, std::span<const LossVariant> variants) {
  cfg.validate();
  CheckReport rep;
  bool have_worst = false;

  for (std::size_t v = 0; v < variants.size(); ++v) {
    for (int t = 0; t < cfg.trials; ++t) {
      const std::uint64_t seed = mix_seed(cfg.seed, v * 100000 + static_cast<std::uint64_t>(t));
      const Instance inst = random_instance(seed, variants[v]);
      const PreparedTruth truth(inst.truth, inst.cfg.contour_spec);
      const LossReport analytic = evaluate_variant(inst.pred, truth, inst.cfg, true);
      const FiniteDiff fd = finite_diff_gradient(
          [&](const ProbVolume& p) { return evaluate_variant(p, truth, inst.cfg).total; }, inst.pred,
          cfg.step);
      const Comparison cmp = compare_gradients(*analytic.gradient, fd.gradient, cfg.abs_floor, fd.skipped);

      const bool ok = cmp.checked > 0 && cmp.max_rel_error < cfg.rel_tol;
      record(rep, {std::string(variant_name(variants[v])), seed, cmp.max_rel_error, ok});
      if (!have_worst || cmp.max_rel_error > rep.max_rel_error) {
        have_worst = true;
        const std::size_t n = inst.pred.dims().voxels();
        rep.max_rel_error = cmp.max_rel_error;
        rep.worst_check = std::string(variant_name(variants[v]));
        rep.worst_seed = seed;
        rep.worst_class = static_cast<int>(cmp.worst_index / n);
        rep.worst_voxel = cmp.worst_index % n;
      }
    }
  }

  for (int t = 0; t < cfg.trials; ++t) {
    const std::uint64_t seed = mix_seed(cfg.seed ^ 0x6d6f7270ULL, static_cast<std::uint64_t>(t));
    Rng rng(seed);
    const BinaryMask mask = random_mask(rng);
    const ContourSpec spec = random_spec(rng);
    const BinaryMask expected = erode_bruteforce(mask, spec);
    const ContourSplit split = extract_contour(mask, spec);
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < mask.bits().size(); ++i) {
      const bool bad_interior = split.interior[i] != expected[i];
      const bool bad_partition =
          (split.contour[i] | split.interior[i]) != mask[i] || (split.contour[i] & split.interior[i]);
      if (bad_interior || bad_partition) ++mismatches;
    }
    rep.morphology_mismatches += mismatches;
    record(rep, {"morphology", seed, mismatches == 0 ? 0.0 : 1.0, mismatches == 0});
  }

  rep.pass = rep.pass && rep.max_rel_error < cfg.rel_tol;
  return rep;
}

}  // namespace cwseg::gradcheck
