#include "cwseg/cli.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "cwseg/gradcheck.hpp"
#include "cwseg/morphology.hpp"
#include "cwseg/trainkit.hpp"
#include "cwseg/vgf.hpp"
#include "io/atomic_write.hpp"

namespace cwseg::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

BoundaryPolicy parse_boundary(const std::string& s) {
  if (s == "zero") return BoundaryPolicy::ZeroOutside;
  if (s == "replicate") return BoundaryPolicy::ReplicateEdge;
  throw UsageError("--boundary must be 'zero' or 'replicate'");
}

ContourSpec make_spec(int iterations, int kernel, const std::string& boundary) {
  ContourSpec spec;
  spec.element = StructuringElement::cube(kernel);
  spec.iterations = iterations;
  spec.boundary = parse_boundary(boundary);
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return spec;
}

LossVariant parse_variant_flag(const std::string& s) {
  try {
    return parse_variant(s);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

ordered_json optional_list(const std::vector<std::optional<double>>& v) {
  ordered_json a = ordered_json::array();
  for (const auto& x : v) a.push_back(x ? ordered_json(*x) : ordered_json(nullptr));
  return a;
}

std::string class_name(int classes, int j) {
  if (classes == 3) {
    static const char* names[] = {"background", "blob", "shell"};
    return names[j];
  }
  return j == 0 ? "background" : "class_" + std::to_string(j);
}

struct Dataset {
  std::vector<std::string> ids;
  std::vector<trainkit::Phantom> phantoms;
};

Dataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("data directory not found: " + dir.string());
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    const std::string suffix = ".labels.vgf";
    if (name.size() > suffix.size() && name.ends_with(suffix))
      ids.push_back(name.substr(0, name.size() - suffix.size()));
  }
  std::sort(ids.begin(), ids.end());
  if (ids.empty()) throw std::runtime_error("no *.labels.vgf volumes in " + dir.string());
  Dataset ds;
  for (const auto& id : ids) {
    LabelVolume labels = io::to_labels(io::read_volume_file(dir / (id + ".labels.vgf")), 3);
    ScalarVolume image = io::to_scalar(io::read_volume_file(dir / (id + ".image.vgf")));
    if (!(image.dims() == labels.dims())) throw std::runtime_error(id + ": image and labels dims differ");
    ds.phantoms.push_back({std::move(image), std::move(labels), {}});
  }
  ds.ids = std::move(ids);
  return ds;
}

}  // namespace

int cmd_extract_contour(const ExtractContourOptions& opt, std::ostream& out) {
  const ContourSpec spec = make_spec(opt.iterations, opt.kernel, opt.boundary);
  const LabelVolume labels = io::to_labels(io::read_volume_file(opt.in));
  int max_label = 0;
  for (auto v : labels.labels()) max_label = std::max<int>(max_label, v);

  if (opt.class_id != "all") {
    int j;
    try {
      std::size_t used = 0;
      j = std::stoi(opt.class_id, &used);
      if (used != opt.class_id.size()) throw std::invalid_argument("trailing text");
    } catch (const std::exception&) {
      throw UsageError("--class must be an integer or 'all'");
    }
    if (j < 1 || j > 255) throw UsageError("--class must name a foreground class in [1, 255]");
    std::vector<std::uint8_t> bits(labels.dims().voxels());
    for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = labels[i] == j ? 1 : 0;
    const BinaryMask mask(labels.dims(), std::move(bits));
    const ContourSplit split = extract_contour(mask, spec);
    io::write_volume_file(opt.out, io::from_mask(split.contour));
    out << "class " << j << ": object " << mask.count() << " interior " << split.interior.count()
        << " contour " << split.contour.count() << '\n';
    return kExitOk;
  }

  // Every foreground class: the output labels each contour voxel with its class.
  std::vector<std::uint8_t> contour_labels(labels.dims().voxels(), 0);
  std::size_t total_obj = 0, total_int = 0, total_con = 0;
  for (int j = 1; j <= max_label; ++j) {
    std::vector<std::uint8_t> bits(labels.dims().voxels());
    for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = labels[i] == j ? 1 : 0;
    const BinaryMask mask(labels.dims(), std::move(bits));
    if (mask.empty()) continue;
    const ContourSplit split = extract_contour(mask, spec);
    for (std::size_t i = 0; i < contour_labels.size(); ++i)
      if (split.contour[i]) contour_labels[i] = static_cast<std::uint8_t>(j);
    out << "class " << j << ": object " << mask.count() << " interior " << split.interior.count()
        << " contour " << split.contour.count() << '\n';
    total_obj += mask.count();
    total_int += split.interior.count();
    total_con += split.contour.count();
  }
  io::write_volume_file(opt.out, {labels.dims(), io::DType::U8, 1, io::VolumeKind::Labels,
                                  std::move(contour_labels)});
  out << "all: object " << total_obj << " interior " << total_int << " contour " << total_con << '\n';
  return kExitOk;
}

std::string report_to_json(const LossReport& rep, LossVariant variant) {
  ordered_json j;
  j["variant"] = variant_name(variant);
  j["total"] = rep.total;
  j["dice_term"] = rep.dice_term;
  j["contour_term"] = rep.contour_term;
  j["noncontour_term"] = rep.noncontour_term;
  j["sdl_term"] = rep.sdl_term;
  j["ce_term"] = rep.ce_term;
  j["per_class_dice"] = optional_list(rep.per_class_dice);
  j["per_class_contour"] = optional_list(rep.per_class_contour);
  j["per_class_noncontour"] = optional_list(rep.per_class_noncontour);
  j["skipped_classes"] = rep.skipped_classes;
  j["gradient"] = rep.gradient ? ordered_json(*rep.gradient) : ordered_json(nullptr);
  return j.dump();
}

int cmd_loss_eval(const LossEvalOptions& opt, std::ostream& out) {
  LossConfig cfg;
  cfg.variant = parse_variant_flag(opt.variant);
  cfg.lambda = opt.lambda;
  cfg.contour_gain = opt.contour_gain;
  cfg.epsilon = opt.epsilon;
  if (opt.numerator == "standard")
    cfg.numerator = NumeratorForm::StandardPG;
  else if (opt.numerator == "paper-literal")
    cfg.numerator = NumeratorForm::PaperLiteralP2G2;
  else
    throw UsageError("--numerator must be 'standard' or 'paper-literal'");
  cfg.contour_spec = make_spec(opt.iterations, opt.kernel, opt.boundary);
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  const ProbVolume pred = io::to_probs(io::read_volume_file(opt.pred));
  const LabelVolume truth = io::to_labels(io::read_volume_file(opt.truth), pred.num_classes());
  if (!(pred.dims() == truth.dims())) throw std::runtime_error("prediction and truth dims differ");
  const LossReport rep = evaluate_variant(pred, truth, cfg, opt.gradient);

  if (opt.json) {
    out << report_to_json(rep, cfg.variant) << '\n';
    return kExitOk;
  }
  out << std::setprecision(17);
  out << "variant: " << variant_name(cfg.variant) << '\n'
      << "total: " << rep.total << '\n'
      << "dice_term: " << rep.dice_term << '\n'
      << "sdl_term: " << rep.sdl_term << " (L_c " << rep.contour_term << ", L_noc "
      << rep.noncontour_term << ")\n"
      << "ce_term: " << rep.ce_term << '\n';
  for (int j = 1; j < truth.num_classes(); ++j) {
    out << "class " << j << ':';
    const auto show = [&](const char* name, const std::optional<double>& v) {
      out << ' ' << name << '=';
      if (v)
        out << *v;
      else
        out << '-';
    };
    show("dice", rep.per_class_dice[j]);
    show("L_c", rep.per_class_contour[j]);
    show("L_noc", rep.per_class_noncontour[j]);
    out << '\n';
  }
  out << "skipped:";
  for (int j : rep.skipped_classes) out << ' ' << j;
  out << '\n';
  return kExitOk;
}

int cmd_gradcheck(const GradcheckOptions& opt, std::ostream& out) {
  gradcheck::CheckConfig cfg;
  cfg.trials = opt.trials;
  cfg.seed = opt.seed;
  cfg.step = opt.step;
  cfg.rel_tol = opt.tol;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  std::vector<LossVariant> variants;
  if (opt.variant == "all")
    variants.assign(std::begin(gradcheck::kSuiteVariants), std::end(gradcheck::kSuiteVariants));
  else
    variants.push_back(parse_variant_flag(opt.variant));

  const gradcheck::CheckReport rep = gradcheck::run_suite(cfg, variants);
  out << std::setprecision(6);
  for (const auto& t : rep.per_trial)
    if (!t.pass)
      out << "FAIL " << t.check << " seed " << t.seed << " max_rel_error " << t.max_rel_error << '\n';
  out << "trials: " << rep.per_trial.size() << '\n'
      << "max_rel_error: " << rep.max_rel_error << '\n'
      << "worst: " << rep.worst_check << " seed " << rep.worst_seed << " class " << rep.worst_class
      << " voxel " << rep.worst_voxel << '\n'
      << "morphology_mismatches: " << rep.morphology_mismatches << '\n'
      << (rep.pass ? "PASS" : "FAIL") << '\n';
  return rep.pass ? kExitOk : kExitFailure;
}

int cmd_phantom(const PhantomOptions& opt, std::ostream& out) {
  if (opt.dims < 1) throw UsageError("--dims must be positive");
  if (opt.count < 0) throw UsageError("--count must be >= 0");
  trainkit::PhantomSpec spec;
  spec.dims = Dims(static_cast<std::size_t>(opt.dims), static_cast<std::size_t>(opt.dims),
                   static_cast<std::size_t>(opt.dims));
  spec.count = opt.count;
  spec.seed = opt.seed;
  spec.noise_sigma = opt.noise;
  spec.blur_sigma = opt.blur;
  const auto phantoms = trainkit::generate_phantoms(spec);

  fs::create_directories(opt.out);
  ordered_json manifest;
  manifest["count"] = opt.count;
  manifest["dims"] = {opt.dims, opt.dims, opt.dims};
  manifest["seed"] = opt.seed;
  manifest["classes"] = {"background", "blob", "shell"};
  manifest["volumes"] = ordered_json::array();
  for (std::size_t v = 0; v < phantoms.size(); ++v) {
    std::ostringstream id;
    id << "vol_" << std::setw(3) << std::setfill('0') << v;
    io::write_volume_file(opt.out / (id.str() + ".image.vgf"),
                          io::from_scalar(phantoms[v].image, io::VolumeKind::Image));
    io::write_volume_file(opt.out / (id.str() + ".labels.vgf"), io::from_labels(phantoms[v].truth));
    manifest["volumes"].push_back({{"id", id.str()}, {"class_fractions", phantoms[v].class_fractions}});
  }
  io::write_atomic(opt.out / "manifest.json", manifest.dump(2) + "\n");
  out << "wrote " << phantoms.size() << " phantoms to " << opt.out.string() << '\n';
  return kExitOk;
}

int cmd_train(const TrainOptions& opt, std::ostream& out) {
  trainkit::TrainConfig cfg;
  cfg.epochs = opt.epochs;
  cfg.learning_rate = opt.lr;
  cfg.seed = opt.seed;
  cfg.hidden = opt.hidden;
  cfg.loss.variant = parse_variant_flag(opt.variant);
  cfg.loss.lambda = opt.lambda;
  cfg.loss.contour_gain = opt.contour_gain;
  cfg.loss.contour_spec.iterations = opt.iterations;
  if (!(opt.val_fraction >= 0.0 && opt.val_fraction < 1.0))
    throw UsageError("--val-fraction must lie in [0, 1)");
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  const Dataset ds = load_dataset(opt.data);
  std::vector<trainkit::Sample> samples;
  for (const auto& p : ds.phantoms) samples.push_back(trainkit::make_sample(p, cfg.loss.contour_spec));
  std::size_t n_val = static_cast<std::size_t>(std::lround(opt.val_fraction * samples.size()));
  if (opt.val_fraction > 0.0 && samples.size() >= 2) n_val = std::max<std::size_t>(n_val, 1);
  n_val = std::min(n_val, samples.size() - 1);
  const std::span<const trainkit::Sample> all(samples);
  const auto train_set = all.first(samples.size() - n_val);
  const auto val_set = all.last(n_val);

  const trainkit::TinyModel init(3, cfg.hidden, cfg.seed);
  const trainkit::TrainResult res = trainkit::train(init, train_set, val_set, cfg);

  std::string log;
  for (const auto& rec : res.log) log += trainkit::format_log_line(rec) + "\n";
  io::write_atomic(opt.log, log);
  trainkit::save_checkpoint(opt.out, res.best,
                            {cfg.loss.variant, cfg.loss.contour_gain, cfg.loss.lambda,
                             cfg.loss.contour_spec.iterations});
  out << "trained " << variant_name(cfg.loss.variant) << " on " << train_set.size()
      << " volumes (" << val_set.size() << " validation), " << cfg.epochs << " epochs\n"
      << std::setprecision(6) << "best epoch " << res.best_epoch << " val_dsc " << res.best_val_dsc
      << '\n';
  return kExitOk;
}

int cmd_eval(const EvalOptions& opt, std::ostream& out) {
  const trainkit::Checkpoint ck = trainkit::load_checkpoint(opt.model);
  ContourSpec spec;
  spec.iterations = ck.meta.iterations;
  const Dataset ds = load_dataset(opt.data);
  std::vector<trainkit::Sample> samples;
  for (const auto& p : ds.phantoms) samples.push_back(trainkit::make_sample(p, spec));
  const trainkit::DscTable table = trainkit::evaluate_dsc(ck.model, samples);

  std::ostringstream csv;
  csv << std::setprecision(10);
  csv << "volume_id,class_id,class_name,dsc,loss_variant,contour_gain,lambda,iterations\n";
  const int classes = ck.model.num_classes();
  for (std::size_t v = 0; v < samples.size(); ++v)
    for (int j = 1; j < classes; ++j)
      if (table.per_volume[v][j])
        csv << ds.ids[v] << ',' << j << ',' << class_name(classes, j) << ',' << *table.per_volume[v][j]
            << ',' << variant_name(ck.meta.variant) << ',' << ck.meta.contour_gain << ','
            << ck.meta.lambda << ',' << ck.meta.iterations << '\n';
  io::write_atomic(opt.csv, csv.str());

  out << std::setprecision(6);
  for (int j = 1; j < classes; ++j)
    if (table.per_class_mean[j])
      out << class_name(classes, j) << ": dsc " << *table.per_class_mean[j] << " contour_dsc "
          << *table.per_class_contour_mean[j] << '\n';
  out << "mean foreground dsc: " << table.mean << '\n';
  out << "mean contour dsc: " << table.contour_mean << '\n';
  return kExitOk;
}

}  // namespace cwseg::cli
