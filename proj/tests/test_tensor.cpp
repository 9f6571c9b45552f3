#include <cmath>
#include <limits>

#include "doctest.h"
#include "fkmad/errors.hpp"
#include "fkmad/rng.hpp"
#include "fkmad/tensor.hpp"

using namespace fkmad;

TEST_CASE("shape and data size must agree") {
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5)), ShapeError);
  const Tensor t({2, 3}, 1.5);
  CHECK(t.size() == 6);
  CHECK(t.dim(1) == 3);
  CHECK(t.inner() == 3);
  CHECK_THROWS_AS(t.dim(2), ShapeError);
  CHECK(shape_size({}) == 1);
  CHECK(shape_str({2, 3}) == "[2x3]");
}

TEST_CASE("indexing is row-major") {
  Tensor t({2, 3, 4});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = double(i);
  CHECK(t.at(1, 2, 3) == 23.0);
  const Tensor m = t.reshaped({6, 4});
  CHECK(m.at(5, 3) == 23.0);
  CHECK_THROWS_AS(t.reshaped({5, 5}), ShapeError);
}

TEST_CASE("item, finiteness and max differences") {
  CHECK(Tensor::scalar(2.5).item() == 2.5);
  CHECK_THROWS_AS(Tensor({2}).item(), ShapeError);
  Tensor t = Tensor::vector({1.0, -3.0, 2.0});
  CHECK(t.all_finite());
  CHECK(t.max_abs() == 3.0);
  CHECK(max_abs_diff(t, Tensor::vector({1.0, -1.0, 2.5})) == 2.0);
  CHECK_THROWS_AS(max_abs_diff(t, Tensor({2})), ShapeError);
  t[1] = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(t.all_finite());
}

TEST_CASE("seeded generators repeat and differ across seeds") {
  Rng a(5), b(5), c(6);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.normal(), y = b.normal(), z = c.normal();
    CHECK(x == y);
    differs = differs || x != z;
  }
  CHECK(differs);
  Rng u(1);
  double s = 0.0, s2 = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double v = u.normal();
    s += v;
    s2 += v * v;
  }
  CHECK(std::abs(s / n) < 0.03);
  CHECK(std::abs(s2 / n - 1.0) < 0.05);
}
