#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "doctest.h"
#include "gen.hpp"
#include "lusline/detector.hpp"
#include "lusline/errors.hpp"
#include "lusline/radon.hpp"
#include "lusline/solver.hpp"

using namespace lusline;
using namespace lusline::detector;
using doctest::Approx;

namespace {

int theta_bin(const radon::RadonMap& map, double theta) { return static_cast<int>(map.grid().nearest(theta)); }

// Template whose embedded frame covers the whole square.
imaging::ProbeCentredImage full_frame(Image pixels) {
  imaging::ProbeCentredImage img;
  img.frame_height = pixels.rows();
  img.frame_width = pixels.cols();
  img.source_offset = {0, 0};
  img.pixels = std::move(pixels);
  return img;
}

DetectedLine horizontal_at_row(double row, int m) {
  const double c = (m - 1) / 2.0;
  DetectedLine line;
  line.cls = LineClass::Pleural;
  line.theta = 90.0;
  line.r = c - row;
  line.endpoints = radon_to_image_line(line.r, line.theta, m);
  return line;
}

DetectedLine candidate(double f, Point crossing) {
  DetectedLine line;
  line.cls = LineClass::BCandidate;
  line.f_index = f;
  line.pleural_crossing = crossing;
  return line;
}

// Image with full-width horizontal bands; `rows` centred on half-integers span two pixel rows.
Image with_bands(int m, const std::vector<std::pair<double, double>>& bands) {
  Image img(m, m);
  const double c = (m - 1) / 2.0;
  for (auto [y, v] : bands) {
    const double row = c - y;
    for (int r = static_cast<int>(std::floor(row)); r <= static_cast<int>(std::ceil(row)); ++r)
      for (int col = 0; col < m; ++col) img(r, col) += v;
  }
  return img;
}

}  // namespace

TEST_CASE("search regions follow the image size") {
  auto s = search_regions(512);
  CHECK(s.horizontal.r_limit == 128);
  CHECK(s.vertical.r_limit == 32);
  CHECK(s.horizontal.theta_min == 60.0);
  CHECK(s.horizontal.theta_max == 90.0);
  CHECK(s.vertical.theta_min == -60.0);
  CHECK(s.vertical.theta_max == 60.0);
  s = search_regions(600);
  CHECK(s.horizontal.r_limit == 150);
  CHECK(s.vertical.r_limit == 37);
  s = search_regions(16);
  CHECK(s.horizontal.r_limit == 4);
  CHECK(s.vertical.r_limit == 1);
  CHECK_THROWS_AS(search_regions(15), ArgumentError);
}

TEST_CASE("region membership accepts the mirrored representation") {
  const auto h = search_regions(512).horizontal;
  CHECK(h.contains(-40.0, 90.0));
  CHECK(h.contains(40.0, -90.0));
  CHECK_FALSE(h.contains(-40.0, 30.0));
  CHECK_FALSE(h.contains(200.0, 90.0));
}

TEST_CASE("local maxima examples") {
  const radon::AngleGrid grid;
  radon::RadonMap map(128, grid);
  const auto region = search_regions(128).vertical;
  CHECK(find_local_maxima(map, region, 5, 5).empty());

  const int t0 = theta_bin(map, 10.0);
  map.at(map.half() + 2, t0) = 7.0;
  auto peaks = find_local_maxima(map, region, 5, 5);
  REQUIRE(peaks.size() == 1);
  CHECK(peaks[0].r == 2.0);
  CHECK(peaks[0].theta == 10.0);
  CHECK(peaks[0].value == 7.0);

  map.at(map.half() + 5, t0) = 9.0;
  peaks = find_local_maxima(map, region, 5, 5);
  REQUIRE(peaks.size() == 1);
  CHECK(peaks[0].r == 5.0);

  // Outside the region: ignored entirely.
  map.at(map.half() + 20, theta_bin(map, 75.0)) = 50.0;
  CHECK(find_local_maxima(map, region, 5, 5).size() == 1);
  CHECK_THROWS_AS(find_local_maxima(map, region, 0, 5), ArgumentError);
}

TEST_CASE("non-maximum suppression wraps across the angle seam") {
  const radon::AngleGrid grid;
  radon::RadonMap map(128, grid);
  const auto region = search_regions(128).horizontal;
  // theta = 89 at r = 10 and theta = -90 at r = -10 are neighbours through the seam.
  map.at(map.half() + 10, theta_bin(map, 89.0)) = 5.0;
  map.at(map.half() - 10, 0) = 6.0;
  const auto peaks = find_local_maxima(map, region, 5, 5);
  REQUIRE(peaks.size() == 1);
  CHECK(peaks[0].theta == 90.0);
  CHECK(peaks[0].r == 10.0);
}

TEST_CASE("pleural selection prefers the line closest to the centre among bright peaks") {
  const radon::AngleGrid grid;
  radon::RadonMap map(256, grid);
  const int t = theta_bin(map, 89.0);
  map.at(map.half() - 20, t) = 100.0;
  map.at(map.half() - 60, t) = 100.0;
  CHECK(detect_pleural(map).r == -20.0);

  map.at(map.half() - 20, t) = 70.0;
  CHECK(detect_pleural(map).r == -60.0);
  map.at(map.half() - 20, t) = 85.0;
  CHECK(detect_pleural(map).r == -20.0);
  CHECK(detect_pleural(map).cls == LineClass::Pleural);

  CHECK_THROWS_AS(detect_pleural(radon::RadonMap(256, grid)), DetectionError);
}

TEST_CASE("horizontal lines after the pleural one") {
  const radon::AngleGrid grid;
  radon::RadonMap map(256, grid);
  const int t = theta_bin(map, 88.0);
  map.at(map.half() - 20, t) = 100.0;
  map.at(map.half() + 40, t) = 60.0;
  const auto pleural = detect_pleural(map);
  CHECK(detect_horizontals(map, pleural, 0).empty());
  const auto more = detect_horizontals(map, pleural, 5);
  REQUIRE(more.size() == 1);
  CHECK(more[0].r == 40.0);
  CHECK(more[0].cls == LineClass::Horizontal);
  CHECK_THROWS_AS(detect_horizontals(map, pleural, -1), ArgumentError);
}

TEST_CASE("reconstructed horizontal lines are found at their depth") {
  const int m = 192;
  const radon::AngleGrid grid;
  // Pleural 40 px below the centre, two fainter lines elsewhere.
  const Image y = with_bands(m, {{-40.0, 0.5}, {-20.0, 0.25}, {25.0, 0.25}});
  solver::SolverParams p;
  p.max_iter = 60;
  const auto r = solver::cps_solve(y, p, grid);
  const auto pleural = detect_pleural(r.x_hat);
  CHECK(std::abs(pleural.theta) >= 88.0);
  CHECK(std::abs(pleural.theta) <= 90.0);
  CHECK(std::abs(std::abs(pleural.r) - 40.0) <= 2.0);
  CHECK(pleural.r * (pleural.theta > 0 ? 1 : -1) < 0.0);

  const auto more = detect_horizontals(r.x_hat, pleural, 2);
  REQUIRE(more.size() == 2);
  std::set<int> depths;
  for (const auto& h : more) {
    CHECK(std::abs(std::abs(h.theta) - 90.0) <= 2.0);
    const double y_off = h.theta > 0 ? h.r : -h.r;
    if (std::abs(y_off + 20.0) <= 2.0) depths.insert(-20);
    if (std::abs(y_off - 25.0) <= 2.0) depths.insert(25);
  }
  CHECK(depths.size() == 2);
}

TEST_CASE("lung height examples") {
  CHECK(lung_height(horizontal_at_row(300.0, 512), 512) == Approx(211.0));
  CHECK(lung_height(horizontal_at_row(511.0, 512), 512) == Approx(0.0));

  const double c = 255.5;
  DetectedLine tilted;
  tilted.theta = 80.0;
  tilted.r = (c - 250.0) * std::sin(80.0 * std::numbers::pi / 180.0);
  tilted.endpoints = radon_to_image_line(tilted.r, tilted.theta, 512);
  CHECK(lung_height(tilted, 512) == Approx(261.0));
}

TEST_CASE("lung height falls back to the segment when the centre column is missed") {
  DetectedLine vertical;
  vertical.theta = 0.0;
  vertical.r = 100.0;
  vertical.endpoints = radon_to_image_line(vertical.r, vertical.theta, 512);
  CHECK(lung_height(vertical, 512) == Approx(511.0 - 255.5));
}

TEST_CASE("B-line candidate amplitude threshold is strict") {
  const radon::AngleGrid grid;
  radon::RadonMap map(512, grid);
  const LungGeometry geom{horizontal_at_row(211.0, 512), 300.0};
  CHECK(detect_b_candidates(map, geom).empty());

  map.at(map.half(), theta_bin(map, 0.0)) = 160.0;
  auto kept = detect_b_candidates(map, geom);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].cls == LineClass::BCandidate);
  REQUIRE(kept[0].pleural_crossing.has_value());
  CHECK(kept[0].pleural_crossing->row == Approx(211.0));
  CHECK(kept[0].pleural_crossing->col == Approx(255.5));

  map.at(map.half(), theta_bin(map, 0.0)) = 150.0;
  CHECK(detect_b_candidates(map, geom).empty());
  CHECK(detect_b_candidates(map, geom, 5, 5, 0.5).size() == 1);

  map.at(map.half(), theta_bin(map, 0.0)) = 1e6;
  CHECK(detect_b_candidates(map, LungGeometry{geom.pleural, 0.0}).empty());
}

TEST_CASE("raising h_lung never adds candidates") {
  gen::Gen g(21);
  const radon::AngleGrid grid(2.0);
  for (int trial = 0; trial < 20; ++trial) {
    radon::RadonMap map(128, grid);
    for (double& v : map.values()) v = g.coin(0.05) ? g.uniform(0.0, 200.0) : 0.0;
    const auto pleural = horizontal_at_row(40.0, 128);
    double prev_h = 0.0;
    std::vector<std::pair<double, double>> prev;
    for (int step = 0; step < 8; ++step) {
      const double h = prev_h + g.uniform(1.0, 60.0);
      std::vector<std::pair<double, double>> cur;
      for (const auto& c : detect_b_candidates(map, {pleural, h})) cur.emplace_back(c.r, c.theta);
      if (step > 0) {
        for (const auto& rc : cur) CHECK(std::find(prev.begin(), prev.end(), rc) != prev.end());
      }
      prev = cur;
      prev_h = h;
    }
  }
}

TEST_CASE("Radon parameters to image endpoints") {
  auto s = radon_to_image_line(0.0, 90.0, 512);
  CHECK(s.a.row == Approx(255.5));
  CHECK(s.a.col == Approx(0.0));
  CHECK(s.b.row == Approx(255.5));
  CHECK(s.b.col == Approx(511.0));

  s = radon_to_image_line(0.0, 0.0, 512);
  CHECK(s.a.row == Approx(0.0));
  CHECK(s.a.col == Approx(255.5));
  CHECK(s.b.row == Approx(511.0));
  CHECK(s.b.col == Approx(255.5));

  CHECK_THROWS_AS(radon_to_image_line(400.0, 45.0, 512), ArgumentError);
  CHECK_THROWS_AS(radon_to_image_line(300.0, 0.0, 512), ArgumentError);
}

TEST_CASE("endpoints lie on the line and on the image border") {
  gen::Gen g(22);
  for (int trial = 0; trial < 500; ++trial) {
    const int m = g.integer(16, 600);
    const double c = (m - 1) / 2.0;
    const double theta = g.uniform(-90.0, 90.0);
    const double r = g.uniform(-0.95, 0.95) * c;
    const auto s = radon_to_image_line(r, theta, m);
    const double th = theta * std::numbers::pi / 180.0;
    for (const Point& p : {s.a, s.b}) {
      const double x = p.col - c, y = c - p.row;
      CHECK(x * std::cos(th) + y * std::sin(th) == Approx(r).epsilon(1e-9).scale(m));
      const bool on_border = std::abs(std::abs(x) - c) < 1e-7 || std::abs(std::abs(y) - c) < 1e-7;
      CHECK(on_border);
    }
    CHECK((s.a.row < s.b.row || (s.a.row == s.b.row && s.a.col <= s.b.col)));
  }
}

TEST_CASE("F index examples") {
  const int m = 64;
  const LungGeometry geom{horizontal_at_row(10.0, m), 53.0};
  DetectedLine line;
  line.theta = 0.0;
  line.r = 40.0 - 31.5;

  Image uniform(m, m, 0.4);
  CHECK(f_index(line, full_frame(uniform), geom) == Approx(0.0).epsilon(1e-12));

  // A one-pixel stripe whose value is twice the support mean.
  const double b = 0.3;
  const double v = 2.0 * b * (m - 1) / (m - 2);
  Image stripe(m, m, b);
  for (int r = 0; r < m; ++r) stripe(r, 40) = v;
  CHECK(f_index(line, full_frame(stripe), geom) == Approx(1.0).epsilon(1e-12));

  const LungGeometry bottom{horizontal_at_row(m - 1.5, m), 0.5};
  CHECK_THROWS_AS(f_index(line, full_frame(uniform), bottom), DetectionError);
}

TEST_CASE("validation threshold clamps 1.5 times the mean") {
  CHECK(validation_threshold(0.20) == Approx(0.30));
  CHECK(validation_threshold(0.10) == Approx(0.25));
  CHECK(validation_threshold(0.50) == Approx(0.50));
  CHECK(validation_threshold(full_frame(Image(32, 32, 0.2))) == Approx(0.30));
  CHECK_THROWS_AS(validation_threshold(full_frame(Image(32, 32))), DetectionError);
}

TEST_CASE("three-candidate validation fixture keeps only the 0.677 line") {
  const std::vector<DetectedLine> cands = {candidate(-0.235, {100.0, 150.0}), candidate(0.677, {100.0, 250.0}),
                                           candidate(0.198, {100.0, 350.0})};
  const auto kept = validate_b_lines(cands, 0.25);
  REQUIRE(kept.size() == 1);
  CHECK(*kept[0].f_index == 0.677);
  CHECK(kept[0].cls == LineClass::BLine);
}

TEST_CASE("validation merge and edge cases") {
  CHECK(validate_b_lines(std::vector<DetectedLine>{}, 0.25).empty());

  const std::vector<DetectedLine> close = {candidate(0.6, {100.0, 200.0}), candidate(0.9, {100.0, 203.0})};
  auto kept = validate_b_lines(close, 0.25, 5.0);
  REQUIRE(kept.size() == 1);
  CHECK(*kept[0].f_index == 0.9);
  CHECK(validate_b_lines(close, 0.25, 2.0).size() == 2);

  DetectedLine unscored = candidate(0.0, {0.0, 0.0});
  unscored.f_index.reset();
  CHECK(validate_b_lines(std::vector<DetectedLine>{unscored}, -1.0).empty());
  // Strict inequality at the threshold.
  CHECK(validate_b_lines(std::vector<DetectedLine>{candidate(0.25, {0.0, 0.0})}, 0.25).empty());
}

TEST_CASE("raising F_val never grows the validated set") {
  gen::Gen g(23);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<DetectedLine> cands;
    const int n = g.integer(0, 8);
    for (int i = 0; i < n; ++i) cands.push_back(candidate(g.uniform(-1.0, 2.0), {100.0, g.uniform(0.0, 500.0)}));
    std::vector<double> prev;
    bool first = true;
    for (double fv = -1.0; fv <= 2.0; fv += 0.1) {
      std::vector<double> cur;
      for (const auto& l : validate_b_lines(cands, fv, 0.0)) cur.push_back(*l.f_index);
      if (!first) {
        for (double f : cur) CHECK(std::find(prev.begin(), prev.end(), f) != prev.end());
      }
      prev = cur;
      first = false;
    }
  }
}

TEST_CASE("full detection stays inside the search regions and is deterministic") {
  const int m = 128;
  const radon::AngleGrid grid;
  gen::Gen g(24);
  radon::RadonMap map(m, grid);
  map.at(map.half() - 20, theta_bin(map, 90.0)) = 120.0;
  map.at(map.half() + 25, theta_bin(map, 85.0)) = 60.0;
  for (int i = 0; i < 6; ++i) map.at(map.half() + g.integer(-8, 8), theta_bin(map, g.uniform(-50.0, 50.0))) = 90.0;
  for (double& v : map.values()) v += g.uniform(0.0, 1.0);

  Image pixels(m, m, 0.2);
  for (int r = 84; r < m; ++r) pixels(r, 64) = 0.9;
  const auto img = full_frame(pixels);

  const auto a = detect(map, img);
  const auto b = detect(map, img);
  const auto regions = search_regions(m);
  CHECK(regions.horizontal.contains(a.pleural.r, a.pleural.theta));
  for (const auto& h : a.horizontals) CHECK(regions.horizontal.contains(h.r, h.theta));
  for (const auto& c : a.b_candidates) CHECK(regions.vertical.contains(c.r, c.theta));
  for (const auto& l : a.b_lines) {
    CHECK(regions.vertical.contains(l.r, l.theta));
    CHECK(l.cls == LineClass::BLine);
  }
  REQUIRE(a.b_lines.size() == b.b_lines.size());
  for (std::size_t i = 0; i < a.b_lines.size(); ++i) {
    CHECK(a.b_lines[i].r == b.b_lines[i].r);
    CHECK(a.b_lines[i].theta == b.b_lines[i].theta);
    CHECK(*a.b_lines[i].f_index == *b.b_lines[i].f_index);
  }
  CHECK(a.f_val == Approx(validation_threshold(img)));
}
