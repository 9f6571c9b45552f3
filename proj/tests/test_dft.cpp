#include <cmath>
#include <complex>
#include <numbers>

#include "doctest.h"
#include "fkmad/dft.hpp"
#include "fkmad/errors.hpp"
#include "fkmad/rng.hpp"

using namespace fkmad;

TEST_CASE("constant signal has only a DC bin") {
  const std::vector<double> x(8, 1.25);
  const Spectrum s = dft(x);
  CHECK(s.sample_length == 8);
  CHECK(std::abs(s.bins[0] - std::complex<double>(10.0, 0.0)) < 1e-12);
  for (std::size_t f = 1; f < 8; ++f) CHECK(std::abs(s.bins[f]) < 1e-12);
}

TEST_CASE("single tone lands in its bin and the mirror bin") {
  std::vector<double> x(8);
  for (std::size_t t = 0; t < 8; ++t) x[t] = std::cos(2 * std::numbers::pi * 2 * double(t) / 8);
  const Spectrum s = dft(x);
  for (std::size_t f = 0; f < 8; ++f) {
    const double want = (f == 2 || f == 6) ? 4.0 : 0.0;
    CHECK(std::abs(s.bins[f]) == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("odd length uses direct summation") {
  Rng rng(3);
  std::vector<double> x(7);
  for (double& v : x) v = rng.normal();
  const Spectrum s = dft(x);
  // Independent evaluation of the definition.
  for (std::size_t f = 0; f < 7; ++f) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < 7; ++t) acc += x[t] * std::polar(1.0, -2 * std::numbers::pi * double(f * t) / 7);
    CHECK(std::abs(s.bins[f] - acc) < 1e-9);
  }
}

TEST_CASE("fast path equals direct summation and satisfies Parseval for n = 2..1024") {
  Rng rng(11);
  for (std::size_t n = 2; n <= 1024; n *= 2) {
    std::vector<double> x(n);
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    const Spectrum fast = dft(x), slow = dft_direct(x);
    double worst = 0.0, tpow = 0.0, fpow = 0.0;
    for (std::size_t f = 0; f < n; ++f) {
      worst = std::max(worst, std::abs(fast.bins[f] - slow.bins[f]));
      fpow += fast.power(f);
      tpow += x[f] * x[f];
      CHECK(std::abs(fast.bins[(n - f) % n] - std::conj(fast.bins[f])) < 1e-9);
    }
    CHECK(worst < 1e-9);
    CHECK(std::abs(tpow - fpow / double(n)) < 1e-9);
  }
}

TEST_CASE("dft contracts") {
  CHECK_THROWS_AS(dft(std::vector<double>{}), ContractError);
  std::vector<std::complex<double>> a(6);
  CHECK_THROWS_AS(fft_radix2(a), ContractError);
  CHECK(is_power_of_two(64));
  CHECK_FALSE(is_power_of_two(0));
  CHECK_FALSE(is_power_of_two(12));
}
