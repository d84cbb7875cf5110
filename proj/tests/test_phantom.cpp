#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "lusline/errors.hpp"
#include "lusline/phantom.hpp"

using namespace lusline;
using namespace lusline::phantom;

namespace {

long count_class(const metrics::Annotation& a, metrics::AnnotatedClass cls) {
  return std::count_if(a.lines.begin(), a.lines.end(), [&](const auto& l) { return l.cls == cls; });
}

}  // namespace

TEST_CASE("phantoms are deterministic under the seed") {
  PhantomParams p;
  p.height = p.width = 128;
  p.pleural_depth = 25;
  p.seed = 11;
  const auto a = generate(p);
  const auto b = generate(p);
  CHECK(a.pixels == b.pixels);
  CHECK(a.b_line_angles == b.b_line_angles);
  p.seed = 12;
  CHECK_FALSE(generate(p).pixels == a.pixels);
}

TEST_CASE("phantom samples are 8-bit levels in the unit interval") {
  PhantomParams p;
  p.height = 96;
  p.width = 140;
  p.pleural_depth = 20;
  const auto ph = generate(p);
  CHECK(ph.pixels.rows() == 96);
  CHECK(ph.pixels.cols() == 140);
  for (double v : ph.pixels.flat()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(std::abs(v * 255.0 - std::round(v * 255.0)) < 1e-9);
  }
  CHECK(ph.apex == PixelPos{0, 70});
}

TEST_CASE("four B-lines are annotated") {
  PhantomParams p;
  p.b_lines = 4;
  p.seed = 5;
  const auto ph = generate(p, "four");
  CHECK(ph.annotation.id == "four");
  CHECK(count_class(ph.annotation, metrics::AnnotatedClass::BLine) == 4);
  CHECK(count_class(ph.annotation, metrics::AnnotatedClass::Pleural) == 1);
  REQUIRE(ph.b_line_angles.size() == 4);
  auto angles = ph.b_line_angles;
  std::sort(angles.begin(), angles.end());
  for (std::size_t i = 1; i < angles.size(); ++i) CHECK(angles[i] - angles[i - 1] >= p.min_b_separation_deg - 1e-9);
  for (const auto& l : ph.annotation.lines) {
    for (const Point& q : {l.a, l.b}) {
      CHECK(q.row >= 0.0);
      CHECK(q.row <= p.height - 1.0);
      CHECK(q.col >= 0.0);
      CHECK(q.col <= p.width - 1.0);
    }
    if (l.cls == metrics::AnnotatedClass::BLine) CHECK(std::min(l.a.row, l.b.row) == p.pleural_depth);
  }
}

TEST_CASE("explicit angles are used as given") {
  PhantomParams p;
  p.b_line_angles = {-12.0, 15.0};
  p.b_lines = 2;
  const auto ph = generate(p);
  CHECK(ph.b_line_angles == std::vector<double>{-12.0, 15.0});
}

TEST_CASE("B-lines beyond the fan's capacity are rejected") {
  PhantomParams p;
  p.b_lines = 40;
  CHECK_THROWS_AS(p.validate(), ArgumentError);
  CHECK_THROWS_AS(generate(p), ArgumentError);
  p.b_lines = 1;
  p.b_line_angles = {80.0};
  CHECK_THROWS_AS(generate(p), ArgumentError);
  p = PhantomParams{};
  p.pleural_depth = p.height;
  CHECK_THROWS_AS(generate(p), ArgumentError);
  p = PhantomParams{};
  p.speckle = -0.1;
  CHECK_THROWS_AS(generate(p), ArgumentError);
}

TEST_CASE("zero-speckle phantom has a constant background inside the fan") {
  PhantomParams p;
  p.height = p.width = 128;
  p.pleural_depth = 25;
  p.speckle = 0.0;
  p.attenuation = 0.0;
  p.b_lines = 0;
  p.horizontal_lines = 0;
  const auto ph = generate(p);
  // Well inside the fan, away from the pleural line.
  const double v = ph.pixels(100, 64);
  CHECK(std::abs(v - std::round(p.background * 255.0) / 255.0) < 1e-9);
  CHECK(ph.pixels(100, 60) == v);
  CHECK(ph.pixels(5, 2) == 0.0);
}
