#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cwseg/rng.hpp"
#include "cwseg/simd.hpp"
#include "cwseg/trainkit.hpp"

namespace cwseg::trainkit {

namespace {
constexpr int kK = FeatureVolume::kChannels;
}

std::vector<double> softmax_backprop(const ProbVolume& probs, std::span<const double> grad_probs) {
  if (grad_probs.size() != probs.values().size())
    throw std::invalid_argument("gradient size does not match probabilities");
  if (!probs.normalized(1e-5)) throw std::invalid_argument("softmax_backprop needs normalized probabilities");
  const std::size_t n = probs.dims().voxels();
  const int c = probs.num_classes();
  const auto p = probs.values();
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < n; ++i) {
    double inner = 0.0;
    for (int k = 0; k < c; ++k) inner += p[k * n + i] * grad_probs[k * n + i];
    for (int k = 0; k < c; ++k) out[k * n + i] = p[k * n + i] * (grad_probs[k * n + i] - inner);
  }
  return out;
}

std::size_t TinyModel::param_count(int num_classes, int hidden) {
  const auto c = static_cast<std::size_t>(num_classes), h = static_cast<std::size_t>(hidden);
  return h * kK + h + c * h + c;
}

TinyModel::TinyModel(int num_classes, int hidden, std::uint64_t seed)
    : num_classes_(num_classes), hidden_(hidden) {
  if (num_classes < 2 || hidden < 1) throw std::invalid_argument("invalid model shape");
  params_.assign(param_count(num_classes, hidden), 0.0);
  Rng rng(seed);
  const double a1 = std::sqrt(6.0 / (kK + hidden));
  const double a2 = std::sqrt(6.0 / (hidden + num_classes));
  auto it = params_.begin();
  for (int i = 0; i < hidden * kK; ++i) *it++ = rng.uniform(-a1, a1);
  for (int i = 0; i < hidden; ++i) *it++ = rng.uniform(-0.1, 0.1);
  for (int i = 0; i < num_classes * hidden; ++i) *it++ = rng.uniform(-a2, a2);
}

TinyModel::TinyModel(int num_classes, int hidden, std::vector<double> params)
    : num_classes_(num_classes), hidden_(hidden), params_(std::move(params)) {
  if (num_classes < 2 || hidden < 1) throw std::invalid_argument("invalid model shape");
  if (params_.size() != param_count(num_classes, hidden))
    throw std::invalid_argument("parameter count does not match model shape");
}

TinyModel::Activations TinyModel::run(const FeatureVolume& features) const {
  const auto& k = simd::kernels();
  const std::size_t n = features.dims.voxels();
  const auto h = static_cast<std::size_t>(hidden_), c = static_cast<std::size_t>(num_classes_);
  const double* w1 = params_.data();
  const double* b1 = w1 + h * kK;
  const double* w2 = b1 + h;
  const double* b2 = w2 + c * h;

  Activations act;
  act.hidden.resize(h * n);
  k.affine(features.channels.data(), kK, w1, b1, h, act.hidden.data(), n);
  k.tanh_inplace(act.hidden.data(), act.hidden.size());

  act.probs.resize(c * n);
  k.affine(act.hidden.data(), h, w2, b2, c, act.probs.data(), n);
  k.softmax(act.probs.data(), c, n);
  return act;
}

ProbVolume TinyModel::forward(const FeatureVolume& features) const {
  return ProbVolume(features.dims, num_classes_, run(features).probs);
}

TinyModel::Evaluation TinyModel::loss_and_gradient(const FeatureVolume& features,
                                                   const PreparedTruth& truth,
                                                   const LossConfig& cfg) const {
  const auto& k = simd::kernels();
  const std::size_t n = features.dims.voxels();
  const auto h = static_cast<std::size_t>(hidden_), c = static_cast<std::size_t>(num_classes_);

  Activations act = run(features);
  const ProbVolume probs(features.dims, num_classes_, std::move(act.probs));
  Evaluation ev{evaluate_variant(probs, truth, cfg, true), {}};
  const std::vector<double> dlogits = softmax_backprop(probs, *ev.report.gradient);

  ev.param_gradient.assign(params_.size(), 0.0);
  double* gw1 = ev.param_gradient.data();
  double* gb1 = gw1 + h * kK;
  double* gw2 = gb1 + h;
  double* gb2 = gw2 + c * h;
  const double* w2 = params_.data() + h * kK + h;

  for (std::size_t j = 0; j < c; ++j) {
    const double* dl = dlogits.data() + j * n;
    for (std::size_t r = 0; r < h; ++r) gw2[j * h + r] = k.dot(dl, act.hidden.data() + r * n, n);
    gb2[j] = k.sum(dl, n);
  }

  // Back through the head: W2^T * dlogits, then the tanh derivative.
  std::vector<double> w2t(h * c);
  for (std::size_t j = 0; j < c; ++j)
    for (std::size_t r = 0; r < h; ++r) w2t[r * c + j] = w2[j * h + r];
  const std::vector<double> zeros(h, 0.0);
  std::vector<double> dz(h * n);
  k.affine(dlogits.data(), c, w2t.data(), zeros.data(), h, dz.data(), n);
  for (std::size_t i = 0; i < dz.size(); ++i) dz[i] *= 1.0 - act.hidden[i] * act.hidden[i];

  for (std::size_t r = 0; r < h; ++r) {
    const double* d = dz.data() + r * n;
    for (std::size_t f = 0; f < static_cast<std::size_t>(kK); ++f)
      gw1[r * kK + f] = k.dot(d, features.channels.data() + f * n, n);
    gb1[r] = k.sum(d, n);
  }
  return ev;
}

}  // namespace cwseg::trainkit
