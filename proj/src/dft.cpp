#include "fkmad/dft.hpp"

#include <cmath>
#include <numbers>

#include "fkmad/errors.hpp"

namespace fkmad {

void fft_radix2(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  if (!is_power_of_two(n)) throw ContractError("fft_radix2: length must be a power of two");

  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    // Twiddles from the exact angle each time; a running product drifts by
    // ~len * eps and breaks the 1e-9 agreement with direct summation at n = 1024.
    for (std::size_t k = 0; k < half; ++k) {
      const double ang = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(len);
      const std::complex<double> w(std::cos(ang), std::sin(ang));
      for (std::size_t i = 0; i < n; i += len) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + half] * w;
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
}

Spectrum dft_direct(std::span<const double> signal) {
  const std::size_t n = signal.size();
  if (n == 0) throw ContractError("dft: empty signal");
  Spectrum s;
  s.sample_length = n;
  s.bins.resize(n);
  for (std::size_t f = 0; f < n; ++f) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      // Reduce f*t mod n first so the angle stays in [0, 2 pi).
      const std::size_t ft = (f * t) % n;
      const double ang = -2.0 * std::numbers::pi * static_cast<double>(ft) / static_cast<double>(n);
      acc += signal[t] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    s.bins[f] = acc;
  }
  return s;
}

Spectrum dft(std::span<const double> signal) {
  const std::size_t n = signal.size();
  if (n == 0) throw ContractError("dft: empty signal");
  if (!is_power_of_two(n)) return dft_direct(signal);
  Spectrum s;
  s.sample_length = n;
  s.bins.assign(signal.begin(), signal.end());
  fft_radix2(s.bins);
  return s;
}

}  // namespace fkmad
