#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "cwseg/trainkit.hpp"

namespace cwseg::trainkit {

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw std::invalid_argument("learning_rate must be finite and >= 0");
  if (hidden < 1) throw std::invalid_argument("hidden width must be >= 1");
  loss.validate();
}

double TrainConfig::lr_at(int epoch) const {
  double lr = learning_rate;
  for (int m : lr_halving_epochs)
    if (epoch >= m) lr *= 0.5;
  return lr;
}

std::string format_log_line(const EpochRecord& rec) {
  nlohmann::ordered_json j;
  j["epoch"] = rec.epoch;
  j["variant"] = rec.variant;
  j["lr"] = rec.learning_rate;
  j["total"] = rec.total;
  j["L_c"] = rec.contour;
  j["L_noc"] = rec.noncontour;
  j["ce_term"] = rec.ce;
  j["val_dsc"] = rec.val_dsc;
  return j.dump();
}

LabelVolume predict_labels(const ProbVolume& probs) {
  const std::size_t n = probs.dims().voxels();
  std::vector<std::uint8_t> labels(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    int best = 0;
    for (int c = 1; c < probs.num_classes(); ++c)
      if (probs.value(c, i) > probs.value(best, i)) best = c;
    labels[i] = static_cast<std::uint8_t>(best);
  }
  return LabelVolume(probs.dims(), std::move(labels), probs.num_classes());
}

DscTable evaluate_labels(std::span<const LabelVolume> predictions, std::span<const Sample> data,
                         double epsilon) {
  if (predictions.size() != data.size()) throw std::invalid_argument("prediction count mismatch");
  DscTable table;
  if (data.empty()) return table;
  const int classes = data.front().truth.num_classes();
  std::vector<double> sums(classes, 0.0), contour_sums(classes, 0.0);
  std::vector<int> counts(classes, 0);

  for (std::size_t v = 0; v < data.size(); ++v) {
    const PreparedTruth& truth = data[v].truth;
    auto& row = table.per_volume.emplace_back(static_cast<std::size_t>(classes), std::nullopt);
    BinaryMask region(truth.labels().dims());
    for (int j : truth.present_classes())
      region = mask_or(region, truth.contour(j));
    for (int j : truth.present_classes()) {
      const BinaryMask pred = one_hot(predictions[v], j);
      row[j] = dsc(pred, truth.class_mask(j), epsilon);
      sums[j] += *row[j];
      contour_sums[j] += dsc(mask_and(pred, region), truth.contour(j), epsilon);
      ++counts[j];
    }
  }

  table.per_class_mean.assign(static_cast<std::size_t>(classes), std::nullopt);
  table.per_class_contour_mean.assign(static_cast<std::size_t>(classes), std::nullopt);
  int with_mean = 0;
  for (int j = 1; j < classes; ++j) {
    if (counts[j] == 0) continue;
    table.per_class_mean[j] = sums[j] / counts[j];
    table.per_class_contour_mean[j] = contour_sums[j] / counts[j];
    table.mean += *table.per_class_mean[j];
    table.contour_mean += *table.per_class_contour_mean[j];
    ++with_mean;
  }
  if (with_mean > 0) {
    table.mean /= with_mean;
    table.contour_mean /= with_mean;
  }
  return table;
}

DscTable evaluate_dsc(const TinyModel& model, std::span<const Sample> data, double epsilon) {
  std::vector<LabelVolume> preds;
  preds.reserve(data.size());
  for (const Sample& s : data) preds.push_back(predict_labels(model.forward(s.features)));
  return evaluate_labels(preds, data, epsilon);
}

TrainResult train(const TinyModel& init, std::span<const Sample> train_set,
                  std::span<const Sample> val_set, const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.empty()) throw std::invalid_argument("training set is empty");

  TrainResult result{init, init, 0, -std::numeric_limits<double>::infinity(), {}};
  TinyModel model = init;
  const std::size_t np = model.params().size();
  std::vector<double> m(np, 0.0), v(np, 0.0);
  long step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.lr_at(epoch);
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.variant = std::string(variant_name(cfg.loss.variant));
    rec.learning_rate = lr;

    for (std::size_t s = 0; s < train_set.size(); ++s) {
      const auto ev =
          model.loss_and_gradient(train_set[s].features, train_set[s].truth, cfg.loss);
      const LossReport& r = ev.report;
      if (!std::isfinite(r.total))
        throw std::runtime_error("non-finite loss at epoch " + std::to_string(epoch + 1) +
                                 ", sample " + std::to_string(s));
      rec.total += r.total;
      rec.contour += r.contour_term;
      rec.noncontour += r.noncontour_term;
      rec.ce += r.ce_term;

      ++step;
      const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      auto params = model.params();
      for (std::size_t i = 0; i < np; ++i) {
        const double g = ev.param_gradient[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        params[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.adam_epsilon);
      }
    }
    const double count = static_cast<double>(train_set.size());
    rec.total /= count;
    rec.contour /= count;
    rec.noncontour /= count;
    rec.ce /= count;
    rec.val_dsc = val_set.empty() ? 0.0 : evaluate_dsc(model, val_set, cfg.loss.epsilon).mean;
    result.log.push_back(rec);

    if (val_set.empty() || rec.val_dsc > result.best_val_dsc) {
      result.best = model;
      result.best_epoch = epoch + 1;
      result.best_val_dsc = rec.val_dsc;
    }
  }
  if (cfg.epochs == 0) result.best_val_dsc = 0.0;
  result.last = model;
  return result;
}

}  // namespace cwseg::trainkit
