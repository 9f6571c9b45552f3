#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace fkmad {

/// Complex amplitudes X_f, f = 0..n-1, of a length-n real signal.
struct Spectrum {
  std::vector<std::complex<double>> bins;
  std::size_t sample_length = 0;

  double power(std::size_t f) const { return std::norm(bins[f]); }
};

/// X_f = sum_t x_t exp(-2 pi i f t / n). Iterative radix-2 when n is a power
/// of two, direct summation otherwise. Empty input is a ContractError.
Spectrum dft(std::span<const double> signal);

/// O(n^2) reference summation, used as the oracle for the fast path.
Spectrum dft_direct(std::span<const double> signal);

/// In-place complex radix-2 transform; n must be a power of two.
void fft_radix2(std::vector<std::complex<double>>& a);

constexpr bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

}  // namespace fkmad
