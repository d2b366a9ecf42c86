#include <catch_amalgamated.hpp>

#include <stdexcept>
#include <vector>

#include "cwseg/gradcheck.hpp"
#include "cwseg/morphology.hpp"
#include "cwseg/rng.hpp"

using namespace cwseg;
using gradcheck::erode_bruteforce;

namespace {

BinaryMask cube_mask(const Dims& d, std::size_t lo, std::size_t hi) {
  std::vector<std::uint8_t> bits(d.voxels(), 0);
  for (std::size_t z = lo; z <= hi; ++z)
    for (std::size_t y = lo; y <= hi; ++y)
      for (std::size_t x = lo; x <= hi; ++x) bits[d.index(z, y, x)] = 1;
  return BinaryMask(d, std::move(bits));
}

BinaryMask random_mask(Rng& rng, const Dims& d, double p) {
  std::vector<std::uint8_t> bits(d.voxels());
  for (auto& b : bits) b = rng.bernoulli(p) ? 1 : 0;
  return BinaryMask(d, std::move(bits));
}

ContourSpec spec_with(int iterations, BoundaryPolicy boundary = BoundaryPolicy::ZeroOutside) {
  ContourSpec s;
  s.iterations = iterations;
  s.boundary = boundary;
  return s;
}

bool subset(const BinaryMask& a, const BinaryMask& b) { return mask_minus(a, b).empty(); }

}  // namespace

TEST_CASE("all-ones 5^3 erodes to the central 27 voxels", "[morphology]") {
  const Dims d(5, 5, 5);
  const BinaryMask ones = mask_not(BinaryMask(d));
  const BinaryMask eroded = erode(ones, spec_with(1));
  CHECK(eroded.count() == 27);
  CHECK(eroded == cube_mask(d, 1, 3));
  CHECK(erode(ones, spec_with(1, BoundaryPolicy::ReplicateEdge)) == ones);
}

TEST_CASE("centred 7^3 cube in 9^3", "[morphology]") {
  const Dims d(9, 9, 9);
  const BinaryMask cube = cube_mask(d, 1, 7);
  const ContourSplit one = extract_contour(cube, spec_with(1));
  CHECK(one.interior.count() == 125);
  CHECK(one.contour.count() == 218);
  const BinaryMask three = erode(cube, spec_with(3));
  CHECK(three.count() == 1);
  CHECK(three[d.index(4, 4, 4)] == 1);
  CHECK(erode(cube, spec_with(4)).empty());
}

TEST_CASE("thin slab is all contour at the default depth", "[morphology]") {
  const Dims d(16, 16, 16);
  std::vector<std::uint8_t> bits(d.voxels(), 0);
  for (std::size_t z = 7; z <= 9; ++z)
    for (std::size_t y = 0; y < 16; ++y)
      for (std::size_t x = 0; x < 16; ++x) bits[d.index(z, y, x)] = 1;
  const BinaryMask slab(d, bits);
  const ContourSplit split = extract_contour(slab, ContourSpec{});
  CHECK(split.interior.empty());
  CHECK(split.contour == slab);
}

TEST_CASE("single-slice volumes erode in-plane", "[morphology]") {
  const Dims d(1, 5, 5);
  const BinaryMask ones = mask_not(BinaryMask(d));
  const BinaryMask eroded = erode(ones, spec_with(1));
  CHECK(eroded.count() == 9);
  CHECK(eroded == erode_bruteforce(ones, spec_with(1)));
}

TEST_CASE("empty mask stays empty", "[morphology]") {
  const BinaryMask empty(Dims(4, 4, 4));
  const ContourSplit s = extract_contour(empty, ContourSpec{});
  CHECK(s.contour.empty());
  CHECK(s.interior.empty());
}

TEST_CASE("spec validation", "[morphology]") {
  const BinaryMask m(Dims(3, 3, 3));
  ContourSpec s;
  s.element = StructuringElement::cube(4);
  CHECK_THROWS_AS(erode(m, s), std::invalid_argument);
  s = ContourSpec{};
  s.iterations = 0;
  CHECK_THROWS_AS(erode(m, s), std::invalid_argument);
}

TEST_CASE("erosion matches the neighbourhood oracle", "[morphology]") {
  Rng rng(31);
  for (int trial = 0; trial < 150; ++trial) {
    const Dims d(static_cast<std::size_t>(rng.uniform_int(1, 12)),
                 static_cast<std::size_t>(rng.uniform_int(1, 12)),
                 static_cast<std::size_t>(rng.uniform_int(1, 12)));
    const BinaryMask m = random_mask(rng, d, rng.uniform(0.5, 0.97));
    ContourSpec s;
    s.element = {static_cast<int>(2 * rng.uniform_int(0, 2) + 1),
                 static_cast<int>(2 * rng.uniform_int(0, 2) + 1),
                 static_cast<int>(2 * rng.uniform_int(0, 2) + 1)};
    s.iterations = static_cast<int>(rng.uniform_int(1, 4));
    s.boundary = rng.bernoulli(0.5) ? BoundaryPolicy::ZeroOutside : BoundaryPolicy::ReplicateEdge;
    INFO("trial " << trial);
    CHECK(erode(m, s) == erode_bruteforce(m, s));
  }
}

TEST_CASE("contour and interior partition the mask", "[morphology]") {
  Rng rng(77);
  for (int trial = 0; trial < 60; ++trial) {
    const Dims d(8, 9, 10);
    const BinaryMask m = random_mask(rng, d, rng.uniform(0.3, 0.95));
    const ContourSpec s = spec_with(static_cast<int>(rng.uniform_int(1, 6)),
                                    rng.bernoulli(0.5) ? BoundaryPolicy::ZeroOutside
                                                       : BoundaryPolicy::ReplicateEdge);
    const ContourSplit split = extract_contour(m, s);
    CHECK(mask_or(split.contour, split.interior) == m);
    CHECK(mask_and(split.contour, split.interior).empty());
  }
}

TEST_CASE("erosion is monotone, composes and commutes with translation", "[morphology]") {
  Rng rng(5);
  const Dims d(12, 12, 12);
  for (int trial = 0; trial < 20; ++trial) {
    const BinaryMask b = random_mask(rng, d, 0.9);
    const BinaryMask a = mask_and(b, random_mask(rng, d, 0.9));
    const int i = static_cast<int>(rng.uniform_int(1, 3));
    const int j = static_cast<int>(rng.uniform_int(1, 3));
    CHECK(subset(erode(a, spec_with(i)), erode(b, spec_with(i))));
    CHECK(subset(erode(b, spec_with(i)), b));
    CHECK(erode(erode(b, spec_with(i)), spec_with(j)) == erode(b, spec_with(i + j)));
  }

  // Translating an object that stays clear of the border translates its erosion.
  const Dims e(14, 14, 14);
  const BinaryMask base = mask_and(cube_mask(e, 2, 8), random_mask(rng, e, 0.95));
  std::vector<std::uint8_t> shifted(e.voxels(), 0);
  for (std::size_t z = 0; z + 3 < 14; ++z)
    for (std::size_t y = 0; y + 2 < 14; ++y)
      for (std::size_t x = 0; x + 1 < 14; ++x)
        shifted[e.index(z + 3, y + 2, x + 1)] = base[e.index(z, y, x)];
  const BinaryMask eb = erode(base, spec_with(1));
  const BinaryMask es = erode(BinaryMask(e, shifted), spec_with(1));
  for (std::size_t z = 0; z + 3 < 14; ++z)
    for (std::size_t y = 0; y + 2 < 14; ++y)
      for (std::size_t x = 0; x + 1 < 14; ++x)
        CHECK(es[e.index(z + 3, y + 2, x + 1)] == eb[e.index(z, y, x)]);
  CHECK(es.count() == eb.count());
}

TEST_CASE("class contours and weight map", "[morphology]") {
  const Dims d(9, 9, 9);
  std::vector<std::uint8_t> raw(d.voxels(), 0);
  const BinaryMask cube = cube_mask(d, 1, 7);
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = cube[i];
  raw[d.index(0, 0, 0)] = 2;
  const LabelVolume labels(d, raw, 3);

  const auto splits = extract_class_contours(labels, spec_with(1));
  REQUIRE(splits.size() == 3);
  CHECK(splits[0].contour.empty());
  CHECK(splits[1].contour.count() == 218);
  CHECK(splits[2].contour.count() == 1);

  const ScalarVolume w = build_weight_map(labels, spec_with(1), 2.0);
  std::size_t gained = 0;
  for (std::size_t i = 0; i < w.values().size(); ++i) {
    const bool on = splits[1].contour[i] || splits[2].contour[i];
    CHECK(w[i] == (on ? 2.0 : 1.0));
    gained += on;
  }
  CHECK(gained == 219);

  for (double v : build_weight_map(labels, spec_with(1), 1.0).values()) CHECK(v == 1.0);
  CHECK_THROWS_AS(build_weight_map(labels, spec_with(1), 0.5), std::domain_error);
}
