#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "cwseg/gradcheck.hpp"
#include "cwseg/rng.hpp"

using namespace cwseg;
using namespace cwseg::gradcheck;

TEST_CASE("finite differences of simple closures", "[gradcheck]") {
  Rng rng(1);
  const Dims d(2, 2, 2);
  std::vector<double> v(16), c(16);
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = rng.uniform(0.1, 0.9);
    c[i] = rng.uniform(-3.0, 3.0);
  }
  const ProbVolume p(d, 2, v);

  const FiniteDiff lin = finite_diff_gradient(
      [&](const ProbVolume& q) {
        double s = 0.0;
        for (std::size_t i = 0; i < c.size(); ++i) s += c[i] * q.values()[i];
        return s;
      },
      p, 1e-4);
  CHECK(lin.skipped.empty());
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(lin.gradient[i] == Catch::Approx(c[i]).margin(1e-9));

  const FiniteDiff flat = finite_diff_gradient([](const ProbVolume&) { return 4.2; }, p, 1e-4);
  for (double g : flat.gradient) CHECK(g == 0.0);

  const std::vector<double> x{0.5, -1.0, 2.0};
  const auto sq = finite_diff([](std::span<const double> y) { return y[0] * y[0] + 3.0 * y[1] * y[2]; },
                              x, 1e-5);
  CHECK(sq[0] == Catch::Approx(1.0).margin(1e-8));
  CHECK(sq[1] == Catch::Approx(6.0).margin(1e-8));
  CHECK(sq[2] == Catch::Approx(-3.0).margin(1e-8));
}

TEST_CASE("coordinates near the simplex edge are skipped", "[gradcheck]") {
  const Dims d(1, 1, 2);
  const ProbVolume p(d, 2, {0.00005, 0.5, 0.99995, 0.5});
  const FiniteDiff fd = finite_diff_gradient([](const ProbVolume& q) { return q.values()[1]; }, p, 1e-4);
  CHECK(fd.skipped == std::vector<std::size_t>{0, 2});
  CHECK(fd.gradient[1] == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("comparison metric", "[gradcheck]") {
  const std::vector<double> a{1.0, 2.0, 0.0, 1e-12};
  const std::vector<double> f{1.0, 2.2, 0.0, 5e-12};
  const Comparison c = compare_gradients(a, f, 1e-8);
  CHECK(c.checked == 2);
  CHECK(c.worst_index == 1);
  CHECK(c.max_rel_error == Catch::Approx(0.2 / 2.2).epsilon(1e-12));
  const std::vector<std::size_t> skip{1};
  CHECK(compare_gradients(a, f, 1e-8, skip).max_rel_error == 0.0);
}

TEST_CASE("dice gradient agrees across two step sizes", "[gradcheck]") {
  const Instance inst = random_instance(99, LossVariant::DL);
  const PreparedTruth truth(inst.truth, inst.cfg.contour_spec);
  const LossReport r = evaluate_variant(inst.pred, truth, inst.cfg, true);
  const auto fn = [&](const ProbVolume& q) { return evaluate_variant(q, truth, inst.cfg).total; };
  for (double step : {1e-4, 1e-5}) {
    const FiniteDiff fd = finite_diff_gradient(fn, inst.pred, step);
    const Comparison c = compare_gradients(*r.gradient, fd.gradient, 1e-8, fd.skipped);
    INFO("step " << step);
    CHECK(c.checked > 0);
    CHECK(c.max_rel_error < 1e-4);
  }
}

TEST_CASE("random instances respect their contract", "[gradcheck]") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Instance inst = random_instance(seed, LossVariant::CWCD);
    const Dims& d = inst.pred.dims();
    CHECK(d.depth <= 8);
    CHECK(d.height <= 8);
    CHECK(d.width <= 8);
    CHECK(inst.truth.num_classes() >= 2);
    CHECK(inst.truth.num_classes() <= 4);
    for (double p : inst.pred.values()) {
      CHECK(p >= 0.05 * 0.25);
      CHECK(p <= 0.95);
    }
    bool foreground = false;
    for (int c = 1; c < inst.truth.num_classes(); ++c) foreground = foreground || inst.truth.count(c) > 0;
    CHECK(foreground);
    const Instance again = random_instance(seed, LossVariant::CWCD);
    CHECK(std::vector<double>(again.pred.values().begin(), again.pred.values().end()) ==
          std::vector<double>(inst.pred.values().begin(), inst.pred.values().end()));
  }
}

TEST_CASE("suite passes by default and is deterministic", "[gradcheck]") {
  CheckConfig cfg;
  cfg.trials = 5;
  const CheckReport a = run_suite(cfg);
  CHECK(a.pass);
  CHECK(a.max_rel_error < 1e-4);
  CHECK(a.morphology_mismatches == 0);
  CHECK(a.per_trial.size() == 6 * 5);

  const CheckReport b = run_suite(cfg);
  CHECK(a.max_rel_error == b.max_rel_error);
  CHECK(a.worst_check == b.worst_check);
  CHECK(a.worst_seed == b.worst_seed);
  CHECK(a.worst_voxel == b.worst_voxel);

  cfg.rel_tol = 0.0;
  CHECK_FALSE(run_suite(cfg).pass);
}

TEST_CASE("suite config validation", "[gradcheck]") {
  CheckConfig cfg;
  cfg.trials = 0;
  CHECK_THROWS(run_suite(cfg));
  cfg = CheckConfig{};
  cfg.step = -1.0;
  CHECK_THROWS(run_suite(cfg));
}
