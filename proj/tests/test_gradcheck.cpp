#include <cmath>

#include "doctest.h"
#include "fkmad/errors.hpp"
#include "fkmad/gradcheck.hpp"

using namespace fkmad;

TEST_CASE("central differences of closed forms") {
  ParamMap p{{"p", Tensor::scalar(3.0)}};
  const ParamMap g = fd_gradient([](const ParamMap& m) { return m.at("p")[0] * m.at("p")[0]; }, p, 1e-4);
  CHECK(std::abs(g.at("p")[0] - 6.0) < 1e-7);

  ParamMap z{{"p", Tensor::scalar(0.0)}};
  const ParamMap s = fd_gradient([](const ParamMap& m) { return std::log1p(std::exp(m.at("p")[0])); }, z, 1e-4);
  CHECK(std::abs(s.at("p")[0] - 0.5) < 1e-7);
}

TEST_CASE("fd_gradient leaves the parameters unchanged and rejects bad steps") {
  ParamMap p{{"a", Tensor::vector({1.0, 2.0})}, {"b", Tensor::scalar(-1.0)}};
  const ParamMap before = p;
  auto f = [](const ParamMap& m) { return m.at("a")[0] * m.at("b")[0] + m.at("a")[1]; };
  const ParamMap g = fd_gradient(f, p);
  CHECK(p == before);
  CHECK(g.at("a")[0] == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(g.at("a")[1] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(g.at("b")[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_THROWS_AS(fd_gradient(f, p, 0.0), ContractError);
}

TEST_CASE("compare_gradients reports the worst coordinate") {
  const ParamMap a{{"x", Tensor::vector({1.0, 2.0})}, {"y", Tensor::vector({0.0})}};
  const ParamMap n{{"x", Tensor::vector({1.0, 2.2})}, {"y", Tensor::vector({1e-9})}};
  const GradCheckResult r = compare_gradients(a, n);
  CHECK(r.worst_param == "x");
  CHECK(r.worst_index == 1);
  CHECK(r.max_rel_error == doctest::Approx(0.2 / 2.2));
  // Near-zero coordinates are measured against the floor, not against themselves.
  CHECK(compare_gradients({{"y", Tensor::vector({0.0})}}, {{"y", Tensor::vector({1e-9})}}).max_rel_error < 1e-2);
}
