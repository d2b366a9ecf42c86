#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "cwseg/rng.hpp"
#include "cwseg/volgrid.hpp"

using namespace cwseg;

TEST_CASE("dims validation and indexing", "[volgrid]") {
  CHECK_THROWS_AS(Dims(0, 4, 4), std::invalid_argument);
  CHECK_THROWS_AS(Dims(4, 4, 0), std::invalid_argument);
  const Dims d(2, 3, 4);
  CHECK(d.voxels() == 24);
  CHECK(d.index(1, 2, 3) == 23);
  CHECK(d.index(0, 1, 0) == 4);
}

TEST_CASE("label volume validation", "[volgrid]") {
  const Dims d(1, 1, 3);
  CHECK_THROWS_AS(LabelVolume(d, {0, 1}, 2), std::invalid_argument);
  CHECK_THROWS_AS(LabelVolume(d, {0, 1, 2}, 2), std::invalid_argument);
  CHECK_THROWS_AS(LabelVolume(d, {0, 0, 0}, 1), std::invalid_argument);
  const LabelVolume l(d, {0, 2, 2}, 3);
  CHECK(l.count(2) == 2);
  CHECK(l.count(1) == 0);
}

TEST_CASE("one-hot encoding", "[volgrid]") {
  const Dims d(1, 2, 2);
  const LabelVolume l(d, {0, 1, 1, 2}, 3);
  const BinaryMask m1 = one_hot(l, 1);
  CHECK(m1 == BinaryMask(d, {0, 1, 1, 0}));
  CHECK(one_hot(l, 2).count() == 1);
  CHECK(one_hot(l, 0).count() == 1);
  CHECK_THROWS_AS(one_hot(l, 3), std::domain_error);
  CHECK_THROWS_AS(one_hot(l, -1), std::domain_error);

  const ProbVolume p = one_hot_probs(l);
  CHECK(p.num_classes() == 3);
  CHECK(p.normalized(0.0));
  for (std::size_t i = 0; i < 4; ++i)
    for (int c = 0; c < 3; ++c) CHECK(p.value(c, i) == (l[i] == c ? 1.0 : 0.0));
}

TEST_CASE("one-hot masks partition the volume", "[volgrid]") {
  Rng rng(4);
  const Dims d(3, 4, 5);
  std::vector<std::uint8_t> raw(d.voxels());
  for (auto& v : raw) v = static_cast<std::uint8_t>(rng.uniform_int(0, 3));
  const LabelVolume l(d, raw, 4);
  std::size_t total = 0;
  BinaryMask acc(d);
  for (int c = 0; c < 4; ++c) {
    const BinaryMask m = one_hot(l, c);
    CHECK(mask_and(acc, m).empty());
    acc = mask_or(acc, m);
    total += m.count();
  }
  CHECK(total == d.voxels());
  CHECK(acc == mask_not(BinaryMask(d)));
}

TEST_CASE("mask algebra", "[volgrid]") {
  const Dims d(1, 1, 4);
  const BinaryMask a(d, {1, 1, 0, 0}), b(d, {1, 0, 1, 0});
  CHECK(mask_and(a, b) == BinaryMask(d, {1, 0, 0, 0}));
  CHECK(mask_or(a, b) == BinaryMask(d, {1, 1, 1, 0}));
  CHECK(mask_minus(a, b) == BinaryMask(d, {0, 1, 0, 0}));
  CHECK(mask_not(a) == BinaryMask(d, {0, 0, 1, 1}));
  CHECK_THROWS_AS(BinaryMask(d, {0, 2, 0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(mask_and(a, BinaryMask(Dims(1, 2, 2))), std::invalid_argument);
}

TEST_CASE("probability volume validation", "[volgrid]") {
  const Dims d(1, 1, 2);
  CHECK_THROWS_AS(ProbVolume(d, 2, {0.5, 0.5, 1.2, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(ProbVolume(d, 2, {0.5, 0.5, std::nan(""), 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(ProbVolume(d, 2, {0.5, 0.5, 0.5}), std::invalid_argument);
  const ProbVolume p(d, 2, {0.25, 0.5, 0.75, 0.5});
  CHECK(p.normalized());
  CHECK(p.channel(1)[0] == 0.75);
  const ProbVolume q(d, 2, {0.25, 0.5, 0.5, 0.5});
  CHECK_FALSE(q.normalized());
}

TEST_CASE("z-score normalization", "[volgrid]") {
  const Dims d(1, 1, 2);
  const ScalarVolume z = zscore_normalize(ScalarVolume(d, {0.0, 2.0}));
  CHECK(z[0] == Catch::Approx(-1.0).margin(1e-15));
  CHECK(z[1] == Catch::Approx(1.0).margin(1e-15));

  const ScalarVolume c = zscore_normalize(ScalarVolume(Dims(2, 2, 2), std::vector<double>(8, 7.5)));
  for (double v : c.values()) CHECK(v == 0.0);

  Rng rng(8);
  const Dims e(3, 3, 3);
  std::vector<double> raw(e.voxels()), scaled(e.voxels());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    raw[i] = rng.normal() * 5.0 + 2.0;
    scaled[i] = 3.0 * raw[i] - 11.0;
  }
  const ScalarVolume a = zscore_normalize(ScalarVolume(e, raw));
  const ScalarVolume b = zscore_normalize(ScalarVolume(e, scaled));
  double mean = 0, var = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    CHECK(a[i] == Catch::Approx(b[i]).margin(1e-12));
    mean += a[i];
  }
  mean /= static_cast<double>(raw.size());
  for (double v : a.values()) var += (v - mean) * (v - mean);
  var /= static_cast<double>(raw.size());
  CHECK(mean == Catch::Approx(0.0).margin(1e-12));
  CHECK(var == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("scalar volume rejects non-finite values", "[volgrid]") {
  CHECK_THROWS_AS(ScalarVolume(Dims(1, 1, 1), {std::numeric_limits<double>::infinity()}),
                  std::invalid_argument);
}

TEST_CASE("reduce_sum", "[volgrid]") {
  CHECK(reduce_sum({}) == 0.0);
  const std::vector<double> ones(1000, 1.0);
  CHECK(reduce_sum(ones) == 1000.0);

  Rng rng(12);
  std::vector<double> v(4097);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0) * std::pow(10.0, rng.uniform(-8.0, 8.0));
  const double first = reduce_sum(v);
  CHECK(reduce_sum(v) == first);
  long double ref = 0;
  for (double x : v) ref += x;
  CHECK(first == Catch::Approx(static_cast<double>(ref)).margin(1e-6));

  std::vector<double> bad{1.0, std::nan(""), 2.0};
  CHECK_THROWS_AS(reduce_sum(bad), std::domain_error);
  std::vector<double> big{1e308, 1e308};
  CHECK_THROWS_AS(reduce_sum(big), std::domain_error);
}
