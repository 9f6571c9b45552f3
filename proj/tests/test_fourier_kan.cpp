#include <Eigen/Dense>

#include <cmath>
#include <numbers>

#include "doctest.h"
#include "fkmad/errors.hpp"
#include "fkmad/fourier_kan.hpp"
#include "fkmad/gradcheck.hpp"
#include "fkmad/rng.hpp"

using namespace fkmad;
using namespace fkmad::kan;

namespace {

// Direct evaluation of the projection, one output at a time.
std::vector<double> reference_project(const std::vector<double>& x, const FourierKANParams& p) {
  const std::size_t D = p.in_dim(), H = p.out_dim(), F = p.num_freqs(), r = p.rank();
  std::vector<double> phi;
  for (std::size_t i = 0; i < D; ++i) {
    for (std::size_t k = 0; k < F; ++k) phi.push_back(std::sin(2 * std::numbers::pi * p.freqs[k] * x[i] / p.scale));
    for (std::size_t k = 0; k < F; ++k) phi.push_back(std::cos(2 * std::numbers::pi * p.freqs[k] * x[i] / p.scale));
  }
  std::vector<double> out(H);
  for (std::size_t h = 0; h < H; ++h) {
    double lin = p.b_lin[h];
    for (std::size_t i = 0; i < D; ++i) lin += p.W_lin.at(h, i) * x[i];
    double four = p.b_c[h];
    for (std::size_t a = 0; a < r; ++a) {
      double vphi = 0.0;
      for (std::size_t j = 0; j < phi.size(); ++j) vphi += p.V.at(a, j) * phi[j];
      four += p.U.at(h, a) * vphi;
    }
    out[h] = lin + four;
  }
  return out;
}

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

}  // namespace

TEST_CASE("basis at the origin and at a quarter period") {
  const FourierKANParams p = init_params(3, 4, 5, 5.0, 4, 1.0, 1);
  const std::vector<double> phi = fourier_basis(std::vector<double>(3, 0.0), p);
  REQUIRE(phi.size() == 30);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t k = 0; k < 5; ++k) {
      CHECK(phi[i * 10 + k] == 0.0);
      CHECK(phi[i * 10 + 5 + k] == 1.0);
    }
  }
  const FourierKANParams q = init_params(1, 2, 1, 1.0, 1, 1.0, 1);
  const std::vector<double> one = fourier_basis(std::vector<double>{0.25}, q);
  CHECK(one[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(one[1]) < 1e-15);
}

TEST_CASE("two-feature basis matches direct evaluation") {
  FourierKANParams p = init_params(2, 4, 2, 2.0, 2, 2.0, 3);
  const std::vector<double> x{1.0, -1.0};
  const std::vector<double> phi = fourier_basis(x, p);
  std::size_t j = 0;
  for (double xi : x) {
    for (double f : {1.0, 2.0}) CHECK(phi[j++] == doctest::Approx(std::sin(2 * std::numbers::pi * f * xi / 2)));
    for (double f : {1.0, 2.0}) CHECK(phi[j++] == doctest::Approx(std::cos(2 * std::numbers::pi * f * xi / 2)));
  }
}

TEST_CASE("projection matches the straight-line reference") {
  Rng rng(5);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    FourierKANParams p = init_params(3, 6, 4, 4.0, 5, 1.5, seed);
    for (double& v : p.b_lin.data()) v = rng.normal();
    for (double& v : p.b_c.data()) v = rng.normal();
    const std::vector<double> x = random_vec(3, rng);
    const std::vector<double> got = project(x, p), want = reference_project(x, p);
    for (std::size_t h = 0; h < 6; ++h) CHECK(std::abs(got[h] - want[h]) < 1e-12);
  }
}

TEST_CASE("disabled branches") {
  Rng rng(2);
  FourierKANParams p = init_params(3, 4, 3, 3.0, 2, 1.0, 9);
  const FourierKANParams base = p;
  p.U = Tensor(p.U.shape(), 0.0);
  const std::vector<double> x = random_vec(3, rng);
  const std::vector<double> lin_only = project(x, p);
  for (std::size_t h = 0; h < 4; ++h) {
    double lin = 0.0;
    for (std::size_t i = 0; i < 3; ++i) lin += p.W_lin.at(h, i) * x[i];
    CHECK(lin_only[h] == doctest::Approx(lin).epsilon(1e-14));
  }

  // Linearity of the linear branch, exactly, once the Fourier branch is off.
  std::vector<double> y = random_vec(3, rng), ax(3);
  const double a = 2.0, b = -0.5;
  for (std::size_t i = 0; i < 3; ++i) ax[i] = a * x[i] + b * y[i];
  const std::vector<double> pxy = project(ax, p), py = project(y, p);
  for (std::size_t h = 0; h < 4; ++h) CHECK(pxy[h] == doctest::Approx(a * lin_only[h] + b * py[h]).epsilon(1e-14));

  FourierKANParams q = base;
  q.W_lin = Tensor(q.W_lin.shape(), 0.0);
  const std::vector<double> at0 = project(std::vector<double>(3, 0.0), q);
  const std::vector<double> want = reference_project(std::vector<double>(3, 0.0), q);
  for (std::size_t h = 0; h < 4; ++h) CHECK(at0[h] == doctest::Approx(want[h]).epsilon(1e-14));
}

TEST_CASE("Fourier features stay in [-1, 1]") {
  Rng rng(8);
  const FourierKANParams p = init_params(4, 4, 8, 8.0, 4, 0.7, 2);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> x(4);
    for (double& v : x) v = rng.normal(0.0, 1e3);
    for (double v : fourier_basis(x, p)) CHECK(std::abs(v) <= 1.0);
  }
}

TEST_CASE("Fourier branch Jacobian has rank at most r") {
  for (std::size_t r : {1u, 2u, 3u}) {
    const FourierKANParams p = init_params(3, 6, 2, 2.0, r, 1.0, r + 10);
    // d h / d Phi = U V.
    Eigen::MatrixXd U(6, r), V(r, 12);
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t a = 0; a < r; ++a) U(i, a) = p.U.at(i, a);
    for (std::size_t a = 0; a < r; ++a)
      for (std::size_t j = 0; j < 12; ++j) V(a, j) = p.V.at(a, j);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(U * V);
    svd.setThreshold(1e-10);
    CHECK(svd.rank() <= static_cast<Eigen::Index>(r));
  }
}

TEST_CASE("init: deterministic, evenly spaced frequencies, contracts") {
  const FourierKANParams a = init_params(3, 8, 8, 8.0, 4, 1.0, 4), b = init_params(3, 8, 8, 8.0, 4, 1.0, 4);
  CHECK(a.W_lin == b.W_lin);
  CHECK(a.V == b.V);
  for (std::size_t k = 0; k < 8; ++k) CHECK(a.freqs[k] == doctest::Approx(double(k) + 1).epsilon(1e-15));
  CHECK_THROWS_AS(init_params(3, 8, 0, 8.0, 4, 1.0, 1), ContractError);
  CHECK_THROWS_AS(init_params(3, 8, 8, 8.0, 4, 0.0, 1), ContractError);
  CHECK_THROWS_AS(init_params(1, 2, 1, 1.0, 3, 1.0, 1), ContractError);
  CHECK(default_rank(3, 32, 8) == 16);
  CHECK(default_rank(1, 4, 1) == 2);
}

TEST_CASE("graph projection gradient matches finite differences") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const FourierKANParams p = init_params(2, 4, 3, 3.0, 2, 1.0, seed);
    Rng rng(seed + 50);
    Tensor x({5, 2});
    for (double& v : x.data()) v = rng.uniform(-1.0, 1.0);
    Tensor w({5, 4});
    for (double& v : w.data()) v = rng.uniform(-1.0, 1.0);
    ParamMap params{{"W_lin", p.W_lin}, {"b_lin", p.b_lin}, {"freqs", p.freqs},
                    {"U", p.U},         {"V", p.V},         {"b_c", p.b_c},     {"x", x}};
    auto run = [&](const ParamMap& m, ParamMap* grads) {
      ad::Graph g;
      std::map<std::string, ad::Var> v;
      for (const auto& [name, t] : m) v[name] = g.param(t);
      const KANVars kv{v["W_lin"], v["b_lin"], v["freqs"], v["U"], v["V"], v["b_c"]};
      const ad::Var loss = ad::sum(ad::mul(project(v["x"], kv, p.scale), g.input(w)));
      if (grads) {
        const ad::Gradients gr = g.backward(loss);
        for (const auto& [name, var] : v) (*grads)[name] = gr[var];
      }
      return loss.value().item();
    };
    ParamMap analytic;
    run(params, &analytic);
    const ParamMap numeric = fd_gradient([&](const ParamMap& m) { return run(m, nullptr); }, params);
    CHECK(compare_gradients(analytic, numeric).max_rel_error <= 1e-3);
  }
}
