// cwseg: contour-weighted segmentation losses from the command line.

#include <iostream>

#include <CLI11.hpp>

#include "cwseg/cli.hpp"

int main(int argc, char** argv) {
  using namespace cwseg::cli;
  CLI::App app{"Contour-weighted segmentation loss toolkit"};
  app.require_subcommand(1);

  ExtractContourOptions ec;
  auto* extract = app.add_subcommand("extract-contour", "Contour masks by iterated erosion");
  extract->add_option("--in", ec.in, "Input labels volume")->required();
  extract->add_option("--out", ec.out, "Output contour volume")->required();
  extract->add_option("--iterations", ec.iterations, "Erosion iterations")->capture_default_str();
  extract->add_option("--kernel", ec.kernel, "Cubic element extent (odd)")->capture_default_str();
  extract->add_option("--boundary", ec.boundary, "zero | replicate")->capture_default_str();
  extract->add_option("--class", ec.class_id, "Class id or 'all'")->capture_default_str();

  LossEvalOptions le;
  auto* loss = app.add_subcommand("loss-eval", "Evaluate a loss variant on a prediction");
  loss->add_option("--pred", le.pred, "Probability volume")->required();
  loss->add_option("--truth", le.truth, "Labels volume")->required();
  loss->add_option("--variant", le.variant, "CE | CWCE | DL | SDL | CWCD | CEDL")->capture_default_str();
  loss->add_option("--lambda", le.lambda)->capture_default_str();
  loss->add_option("--contour-gain", le.contour_gain)->capture_default_str();
  loss->add_option("--epsilon", le.epsilon)->capture_default_str();
  loss->add_option("--numerator", le.numerator, "standard | paper-literal")->capture_default_str();
  loss->add_option("--iterations", le.iterations)->capture_default_str();
  loss->add_option("--kernel", le.kernel)->capture_default_str();
  loss->add_option("--boundary", le.boundary)->capture_default_str();
  loss->add_flag("--json", le.json, "Print the report as JSON");
  loss->add_flag("--gradient", le.gradient, "Include the gradient in JSON output");

  GradcheckOptions gc;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient and morphology checks");
  grad->add_option("--variant", gc.variant, "Variant name or 'all'")->capture_default_str();
  grad->add_option("--trials", gc.trials)->capture_default_str();
  grad->add_option("--seed", gc.seed)->capture_default_str();
  grad->add_option("--step", gc.step)->capture_default_str();
  grad->add_option("--tol", gc.tol)->capture_default_str();

  PhantomOptions ph;
  auto* phantom = app.add_subcommand("phantom", "Generate synthetic phantom volumes");
  phantom->add_option("--out", ph.out, "Output directory")->required();
  phantom->add_option("--count", ph.count)->capture_default_str();
  phantom->add_option("--dims", ph.dims, "Cube edge length")->capture_default_str();
  phantom->add_option("--seed", ph.seed)->capture_default_str();
  phantom->add_option("--noise", ph.noise, "Gaussian noise sigma")->capture_default_str();
  phantom->add_option("--blur", ph.blur, "Gaussian point-spread sigma")->capture_default_str();

  TrainOptions tr;
  auto* trn = app.add_subcommand("train", "Train the per-voxel model on a phantom directory");
  trn->add_option("--data", tr.data)->required();
  trn->add_option("--variant", tr.variant)->capture_default_str();
  trn->add_option("--epochs", tr.epochs)->capture_default_str();
  trn->add_option("--lr", tr.lr)->capture_default_str();
  trn->add_option("--out", tr.out)->capture_default_str();
  trn->add_option("--log", tr.log)->capture_default_str();
  trn->add_option("--seed", tr.seed)->capture_default_str();
  trn->add_option("--lambda", tr.lambda)->capture_default_str();
  trn->add_option("--contour-gain", tr.contour_gain)->capture_default_str();
  trn->add_option("--iterations", tr.iterations)->capture_default_str();
  trn->add_option("--hidden", tr.hidden)->capture_default_str();
  trn->add_option("--val-fraction", tr.val_fraction)->capture_default_str();

  EvalOptions ev;
  auto* evl = app.add_subcommand("eval", "Per-class DSC of a trained model");
  evl->add_option("--model", ev.model)->required();
  evl->add_option("--data", ev.data)->required();
  evl->add_option("--csv", ev.csv)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*extract) return cmd_extract_contour(ec, std::cout);
    if (*loss) return cmd_loss_eval(le, std::cout);
    if (*grad) return cmd_gradcheck(gc, std::cout);
    if (*phantom) return cmd_phantom(ph, std::cout);
    if (*trn) return cmd_train(tr, std::cout);
    if (*evl) return cmd_eval(ev, std::cout);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}
