#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "cwseg/rng.hpp"
#include "cwseg/trainkit.hpp"

namespace cwseg::trainkit {

void PhantomSpec::validate() const {
  if (num_classes != 3) throw std::invalid_argument("phantoms have exactly 3 classes");
  if (static_cast<int>(class_intensity.size()) != num_classes)
    throw std::invalid_argument("one intensity per class required");
  if (!(blob_radius_min > 0.0 && blob_radius_min <= blob_radius_max))
    throw std::invalid_argument("invalid blob radius range");
  if (shell_thickness_min < 1 || shell_thickness_min > shell_thickness_max)
    throw std::invalid_argument("invalid shell thickness range");
  if (!(shell_radius_min > shell_thickness_max - 1 && shell_radius_min <= shell_radius_max))
    throw std::invalid_argument("invalid shell radius range");
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("noise_sigma must be >= 0");
  if (!(blur_sigma >= 0.0) || blur_sigma > 4.0)
    throw std::invalid_argument("blur_sigma must lie in [0, 4]");
  if (count < 0) throw std::invalid_argument("count must be >= 0");
  // Shapes keep at least one voxel of background between themselves and the
  // volume border, so zero-outside erosion never sees a clipped object.
  if (margin < 1) throw std::invalid_argument("margin must be >= 1");
  for (std::size_t e : {dims.depth, dims.height, dims.width}) {
    const double need = 2.0 * (blob_radius_max + margin) + 1.0;
    if (static_cast<double>(e) < need)
      throw std::runtime_error("blob cannot fit: extent " + std::to_string(e) + " < " +
                               std::to_string(need));
  }
}

namespace {

constexpr int kMaxAttempts = 200;

double sq(double x) { return x * x; }

struct Candidate {
  std::vector<std::uint8_t> labels;
  std::size_t blob = 0;
  std::size_t shell = 0;
};

std::optional<Candidate> try_place(const PhantomSpec& spec, Rng& rng) {
  const Dims& d = spec.dims;
  const double ext[3] = {static_cast<double>(d.depth), static_cast<double>(d.height),
                         static_cast<double>(d.width)};
  Candidate c;
  c.labels.assign(d.voxels(), 0);

  double semi[3], center[3];
  for (int a = 0; a < 3; ++a) {
    semi[a] = rng.uniform(spec.blob_radius_min, spec.blob_radius_max);
    const double lo = spec.margin + semi[a];
    const double hi = ext[a] - 1.0 - spec.margin - semi[a];
    center[a] = rng.uniform(lo, hi);
  }
  // Rounded box: |dz/a|^4 + |dy/b|^4 + |dx/c|^4 <= 1.
  for (std::size_t z = 0; z < d.depth; ++z)
    for (std::size_t y = 0; y < d.height; ++y)
      for (std::size_t x = 0; x < d.width; ++x) {
        const double q = sq(sq((z - center[0]) / semi[0])) + sq(sq((y - center[1]) / semi[1])) +
                         sq(sq((x - center[2]) / semi[2]));
        if (q <= 1.0) {
          c.labels[d.index(z, y, x)] = 1;
          ++c.blob;
        }
      }

  const double outer = rng.uniform(spec.shell_radius_min, spec.shell_radius_max);
  const int thickness =
      static_cast<int>(rng.uniform_int(spec.shell_thickness_min, spec.shell_thickness_max));
  const double inner = outer - thickness;
  double sc[3];
  for (int a = 0; a < 3; ++a) {
    const double lo = spec.margin + outer;
    const double hi = ext[a] - 1.0 - spec.margin - outer;
    if (hi < lo) return std::nullopt;
    sc[a] = rng.uniform(lo, hi);
  }
  const auto lo_of = [&](int a) { return static_cast<long>(std::floor(sc[a] - outer)) - 1; };
  const auto hi_of = [&](int a) { return static_cast<long>(std::ceil(sc[a] + outer)) + 1; };
  const long dd = static_cast<long>(d.depth), hh = static_cast<long>(d.height),
             ww = static_cast<long>(d.width);

  // Shell plus a one-voxel gap must not touch the blob.
  for (long z = std::max(0L, lo_of(0)); z <= std::min(dd - 1, hi_of(0)); ++z)
    for (long y = std::max(0L, lo_of(1)); y <= std::min(hh - 1, hi_of(1)); ++y)
      for (long x = std::max(0L, lo_of(2)); x <= std::min(ww - 1, hi_of(2)); ++x) {
        const double r = std::sqrt(sq(z - sc[0]) + sq(y - sc[1]) + sq(x - sc[2]));
        if (r <= outer + std::sqrt(3.0) &&
            c.labels[static_cast<std::size_t>((z * hh + y) * ww + x)] != 0)
          return std::nullopt;
      }
  for (long z = std::max(0L, lo_of(0)); z <= std::min(dd - 1, hi_of(0)); ++z)
    for (long y = std::max(0L, lo_of(1)); y <= std::min(hh - 1, hi_of(1)); ++y)
      for (long x = std::max(0L, lo_of(2)); x <= std::min(ww - 1, hi_of(2)); ++x) {
        const double r = std::sqrt(sq(z - sc[0]) + sq(y - sc[1]) + sq(x - sc[2]));
        if (r <= outer && r > inner) {
          c.labels[static_cast<std::size_t>((z * hh + y) * ww + x)] = 2;
          ++c.shell;
        }
      }

  const double fg = static_cast<double>(c.blob + c.shell);
  if (c.shell == 0 || static_cast<double>(c.shell) >= 0.05 * fg) return std::nullopt;
  if (1.0 - fg / static_cast<double>(d.voxels()) <= 0.8) return std::nullopt;
  return c;
}

// Separable Gaussian, replicate edge.
void blur(std::vector<double>& image, const Dims& d, double sigma) {
  if (sigma <= 0.0) return;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(2 * radius + 1);
  double total = 0.0;
  for (int t = -radius; t <= radius; ++t) total += taps[t + radius] = std::exp(-0.5 * sq(t / sigma));
  for (double& t : taps) t /= total;

  const long ext[3] = {static_cast<long>(d.depth), static_cast<long>(d.height),
                       static_cast<long>(d.width)};
  const long stride[3] = {ext[1] * ext[2], ext[2], 1};
  std::vector<double> tmp(image.size());
  for (int axis = 0; axis < 3; ++axis) {
    for (long z = 0; z < ext[0]; ++z)
      for (long y = 0; y < ext[1]; ++y)
        for (long x = 0; x < ext[2]; ++x) {
          const long pos[3] = {z, y, x};
          const long base = z * stride[0] + y * stride[1] + x - pos[axis] * stride[axis];
          double acc = 0.0;
          for (int t = -radius; t <= radius; ++t) {
            const long q = std::clamp(pos[axis] + t, 0L, ext[axis] - 1);
            acc += taps[t + radius] * image[static_cast<std::size_t>(base + q * stride[axis])];
          }
          tmp[static_cast<std::size_t>(z * stride[0] + y * stride[1] + x)] = acc;
        }
    image.swap(tmp);
  }
}

}  // namespace

std::vector<Phantom> generate_phantoms(const PhantomSpec& spec) {
  spec.validate();
  std::vector<Phantom> out;
  out.reserve(static_cast<std::size_t>(spec.count));
  const std::size_t n = spec.dims.voxels();
  for (int v = 0; v < spec.count; ++v) {
    Rng rng(mix_seed(spec.seed, static_cast<std::uint64_t>(v)));
    std::optional<Candidate> placed;
    for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) placed = try_place(spec, rng);
    if (!placed)
      throw std::runtime_error("phantom " + std::to_string(v) + ": shapes cannot fit");

    std::vector<double> image(n);
    for (std::size_t i = 0; i < n; ++i) image[i] = spec.class_intensity[placed->labels[i]];
    blur(image, spec.dims, spec.blur_sigma);
    for (std::size_t i = 0; i < n; ++i) image[i] += spec.noise_sigma * rng.normal();

    std::vector<double> fractions(3);
    fractions[1] = static_cast<double>(placed->blob) / static_cast<double>(n);
    fractions[2] = static_cast<double>(placed->shell) / static_cast<double>(n);
    fractions[0] = 1.0 - fractions[1] - fractions[2];

    out.push_back({ScalarVolume(spec.dims, std::move(image)),
                   LabelVolume(spec.dims, std::move(placed->labels), spec.num_classes),
                   std::move(fractions)});
  }
  return out;
}

FeatureVolume compute_features(const ScalarVolume& image) {
  const Dims d = image.dims();
  const std::size_t n = d.voxels();
  const ScalarVolume y = zscore_normalize(image);
  const long dd = static_cast<long>(d.depth), hh = static_cast<long>(d.height),
             ww = static_cast<long>(d.width);
  const auto at = [&](long z, long yy, long x) {
    z = std::clamp(z, 0L, dd - 1);
    yy = std::clamp(yy, 0L, hh - 1);
    x = std::clamp(x, 0L, ww - 1);
    return y[static_cast<std::size_t>((z * hh + yy) * ww + x)];
  };

  std::vector<double> mean6(n), grad(n);
  for (long z = 0; z < dd; ++z)
    for (long yy = 0; yy < hh; ++yy)
      for (long x = 0; x < ww; ++x) {
        const double zm = at(z - 1, yy, x), zp = at(z + 1, yy, x);
        const double ym = at(z, yy - 1, x), yp = at(z, yy + 1, x);
        const double xm = at(z, yy, x - 1), xp = at(z, yy, x + 1);
        const auto i = static_cast<std::size_t>((z * hh + yy) * ww + x);
        mean6[i] = (zm + zp + ym + yp + xm + xp) / 6.0;
        const double gz = 0.5 * (zp - zm), gy = 0.5 * (yp - ym), gx = 0.5 * (xp - xm);
        grad[i] = std::sqrt(gz * gz + gy * gy + gx * gx);
      }

  FeatureVolume f{d, {}};
  f.channels.reserve(n * FeatureVolume::kChannels);
  for (const ScalarVolume& ch : {y, zscore_normalize(ScalarVolume(d, std::move(mean6))),
                                 zscore_normalize(ScalarVolume(d, std::move(grad)))})
    f.channels.insert(f.channels.end(), ch.values().begin(), ch.values().end());
  return f;
}

Sample make_sample(const Phantom& phantom, const ContourSpec& spec) {
  return {compute_features(phantom.image), PreparedTruth(phantom.truth, spec)};
}

}  // namespace cwseg::trainkit
