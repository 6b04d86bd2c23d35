#include <algorithm>
#include <cmath>
#include <numeric>

#include "boxgnn/box.hpp"
#include "boxgnn/box_ops.hpp"
#include "boxgnn/errors.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace boxgnn;
using doctest::Approx;
using testing::box1;
using testing::random_box;

namespace {

// Cell-centre count over a res x res grid spanning `frame`.
double grid_area(const Box& frame, const Box& a, const Box& b, int res) {
  const double hx = (frame.upper[0] - frame.lower[0]) / res;
  const double hy = (frame.upper[1] - frame.lower[1]) / res;
  auto inside = [](const Box& x, double px, double py) {
    return px >= x.lower[0] && px <= x.upper[0] && py >= x.lower[1] && py <= x.upper[1];
  };
  long count = 0;
  for (int i = 0; i < res; ++i) {
    const double px = frame.lower[0] + (i + 0.5) * hx;
    if (!(inside(a, px, a.lower[1]) && inside(b, px, b.lower[1]))) continue;
    for (int j = 0; j < res; ++j) {
      const double py = frame.lower[1] + (j + 0.5) * hy;
      count += inside(a, px, py) && inside(b, px, py);
    }
  }
  return static_cast<double>(count) * hx * hy;
}

bool intervals_overlap(double a0, double a1, double b0, double b1) { return a0 < b1 && b0 < a1; }

}  // namespace

TEST_CASE("make_box") {
  auto b = make_box({{0.0}, {0.0}});
  CHECK(b.lower[0] == 0.0);
  CHECK(b.upper[0] == Approx(0.693147).epsilon(1e-6));

  b = make_box({{1.5}, {-50.0}});
  CHECK(b.upper[0] > b.lower[0]);

  b = make_box({{-1.0}, {10.0}});
  CHECK(b.upper[0] == Approx(9.0000454).epsilon(1e-7));

  CHECK_THROWS_AS(make_box({{1.0, 2.0}, {0.0}}), ShapeError);
}

TEST_CASE("make_box is proper for 10,000 latents up to +-100") {
  Rng rng(1);
  for (int k = 0; k < 10000; ++k) {
    BoxLatent l;
    const std::size_t n = 1 + rng.below(6);
    for (std::size_t i = 0; i < n; ++i) {
      l.theta_z.push_back(rng.uniform(-100, 100));
      l.theta_Z.push_back(rng.uniform(-100, 100));
    }
    const auto b = make_box(l);
    for (std::size_t i = 0; i < n; ++i) REQUIRE(b.upper[i] > b.lower[i]);
    CHECK(b.is_proper());
  }
}

TEST_CASE("center_offset") {
  auto co = center_offset(box1(0, 2));
  CHECK(co.center[0] == 1.0);
  CHECK(co.offset[0] == 1.0);
  co = center_offset(box1(-3, -1));
  CHECK(co.center[0] == -2.0);
  CHECK(co.offset[0] == 1.0);
  co = center_offset(box1(0.25, 0.25 + 2 * 0.75));
  CHECK(co.offset[0] == 0.75);
  const Box b{{0.5, -2.0}, {1.25, 4.0}};
  co = center_offset(b);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(co.center[i] - co.offset[i] == b.lower[i]);
    CHECK(co.center[i] + co.offset[i] == b.upper[i]);
  }
}

TEST_CASE("box_distance") {
  CHECK(box_distance(box1(0, 2), box1(1, 5))[0] == -1.0);
  CHECK(box_distance(box1(0, 2), box1(0, 2))[0] == -2.0);
  CHECK(box_distance(box1(0, 1), box1(3, 4))[0] == 2.0);
  CHECK_THROWS_AS(box_distance(box1(0, 1), Box{{0, 0}, {1, 1}}), ShapeError);
}

TEST_CASE("box_distance: symmetric, and negative exactly where intervals overlap") {
  Rng rng(2);
  for (int k = 0; k < 10000; ++k) {
    const auto a = random_box(rng, 3);
    const auto b = random_box(rng, 3);
    const auto dab = box_distance(a, b);
    const auto dba = box_distance(b, a);
    for (std::size_t i = 0; i < 3; ++i) {
      REQUIRE(dab[i] == dba[i]);
      CHECK((dab[i] < 0) == intervals_overlap(a.lower[i], a.upper[i], b.lower[i], b.upper[i]));
    }
  }
}

TEST_CASE("intersect") {
  auto i = intersect(box1(0, 2), box1(1, 5));
  REQUIRE(i);
  CHECK(*i == box1(1, 2));
  const Box a{{0, 1}, {2, 3}};
  CHECK(*intersect(a, a) == a);
  CHECK_FALSE(intersect(box1(0, 1), box1(3, 4)));
  CHECK_FALSE(intersect(box1(0, 1), box1(1, 4)));
}

TEST_CASE("intersect is commutative and associative") {
  Rng rng(3);
  for (int k = 0; k < 2000; ++k) {
    const auto a = random_box(rng, 2, 2.0);
    const auto b = random_box(rng, 2, 2.0);
    const auto c = random_box(rng, 2, 2.0);
    CHECK(intersect(a, b) == intersect(b, a));
    auto left = intersect(a, b);
    if (left) left = intersect(*left, c);
    auto right = intersect(b, c);
    if (right) right = intersect(a, *right);
    CHECK(left == right);
  }
}

TEST_CASE("hard_volume") {
  CHECK(hard_volume(Box{{0, 0}, {2, 3}}) == 6.0);
  CHECK(hard_volume(std::optional<Box>{}) == 0.0);
  for (std::size_t n = 1; n <= 8; ++n) {
    CHECK(hard_volume(Box{std::vector<double>(n, 0.0), std::vector<double>(n, 1.0)}) == 1.0);
  }
}

TEST_CASE("hard intersection volume matches a 2-D grid count within 1%") {
  Rng rng(4);
  int tested = 0;
  while (tested < 100) {
    const auto a = random_box(rng, 2, 2.0);
    const auto b = random_box(rng, 2, 2.0);
    const auto inter = intersect(a, b);
    const double exact = hard_volume(inter);
    const double grid = grid_area(a, a, b, 1000);
    if (!inter) {
      CHECK(grid == 0.0);
      continue;
    }
    // a grid over `a` resolves sides of at least a quarter of a's side
    bool resolvable = true;
    for (std::size_t i = 0; i < 2; ++i) {
      resolvable &= inter->upper[i] - inter->lower[i] >= 0.25 * (a.upper[i] - a.lower[i]);
    }
    if (!resolvable) continue;
    CHECK(std::abs(grid - exact) / exact < 0.01);
    ++tested;
  }
}

TEST_CASE("gumbel_volume") {
  CHECK(gumbel_volume(box1(0, 2), GumbelTemp(0.25)) == Approx(2.0000838).epsilon(1e-7));
  CHECK(gumbel_volume(box1(1, 1), GumbelTemp(0.25)) == Approx(0.25 * std::log(2.0)));
  CHECK(gumbel_volume(Box{{0, 0}, {0, 0}}, GumbelTemp(0.5)) == Approx(0.25 * std::log(2.0) * std::log(2.0)));
  CHECK_THROWS(GumbelTemp(0.0));

  auto err = [](double beta) { return std::abs(gumbel_volume(box1(0, 1), GumbelTemp(beta)) - 1.0); };
  CHECK(err(0.025) < err(0.25));
  // saturates at double resolution
  CHECK(err(0.0025) <= err(0.025));
  CHECK(err(0.0025) < 1e-12);
}

TEST_CASE("gumbel_volume approximates hard volume when sides exceed 10 temperatures") {
  Rng rng(5);
  for (double beta : {0.25, 0.025, 0.0025}) {
    for (int k = 0; k < 500; ++k) {
      Box b;
      const std::size_t n = 1 + rng.below(4);
      for (std::size_t i = 0; i < n; ++i) {
        const double lo = rng.uniform(-3, 3);
        b.lower.push_back(lo);
        b.upper.push_back(lo + 10 * beta + rng.uniform(0, 3));
      }
      const double hard = hard_volume(b);
      CHECK(std::abs(gumbel_volume(b, GumbelTemp(beta)) - hard) / hard < 0.01);
    }
  }
}

TEST_CASE("batched box ops agree with the plain versions") {
  Rng rng(6);
  ad::Tape tape;
  const auto lat = testing::random_tensor(rng, 20, 8, -2, 2);
  const auto batch = boxes_from_latents(tape.constant(lat));
  const auto boxes = to_boxes(batch);
  REQUIRE(boxes.size() == 20);
  for (std::size_t r = 0; r < 20; ++r) {
    BoxLatent l;
    for (std::size_t i = 0; i < 4; ++i) {
      l.theta_z.push_back(lat(r, i));
      l.theta_Z.push_back(lat(r, 4 + i));
    }
    const auto b = make_box(l);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(boxes[r].lower[i] == b.lower[i]);
      CHECK(boxes[r].upper[i] == Approx(b.upper[i]).epsilon(1e-15));
    }
  }
  std::vector<std::size_t> first(10), second(10);
  std::iota(first.begin(), first.end(), 0);
  std::iota(second.begin(), second.end(), 10);
  const auto c = gather(batch, first);
  const auto d = gather(batch, second);
  const auto dist = distance(c, d).value();
  const auto logv = log_volume(c, VolumeMode::smoothed(0.25)).value();
  for (std::size_t r = 0; r < 10; ++r) {
    const auto ref = box_distance(boxes[r], boxes[10 + r]);
    for (std::size_t i = 0; i < 4; ++i) CHECK(dist(r, i) == Approx(ref[i]).epsilon(1e-12));
    CHECK(std::exp(logv(r, 0)) == Approx(gumbel_volume(boxes[r], GumbelTemp(0.25))).epsilon(1e-12));
  }
  CHECK_THROWS_AS(boxes_from_latents(tape.constant(Tensor(2, 3))), ShapeError);
}

TEST_CASE("box export rows round-trip to 17 digits") {
  Rng rng(7);
  std::string text;
  std::vector<BoxRow> rows;
  for (int k = 0; k < 20; ++k) {
    rows.push_back({"class" + std::to_string(k), "dom", static_cast<std::size_t>(k % 3), random_box(rng, 3)});
    text += format_box_row(rows.back()) + "\n";
  }
  CHECK(parse_box_rows(text) == rows);
  CHECK(format_box_row({"a", "D", 1, box1(0.1, 2.0)}) == "a\tD\t1\t0.10000000000000001\t2");
}
