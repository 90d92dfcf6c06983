#ifndef WHISKER_FFT_HPP
#define WHISKER_FFT_HPP

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace whisker
{

namespace detail
{

inline bool is_pow2(std::size_t n)
{
    return n != 0 && (n & (n - 1)) == 0;
}

// In-place radix-2 transform, unnormalised. sign = -1 gives the forward DFT
// sum f_l e^{-i 2 pi k l / n}, sign = +1 the inverse sum. n must be a power
// of two.
inline void fft_pow2(std::complex<double> *a, std::size_t n, int sign)
{
    if (!is_pow2(n)) {
        throw std::invalid_argument("fft_pow2: size must be a power of two");
    }
    // Bit-reversal permutation.
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) {
            j ^= bit;
        }
        j ^= bit;
        if (i < j) {
            std::swap(a[i], a[j]);
        }
    }
    constexpr double two_pi = 6.283185307179586476925286766559;
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t half = len / 2;
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t j = 0; j < half; ++j) {
                // Direct twiddle evaluation: slower than a recurrence but free
                // of accumulated drift, and the transform sizes here are small.
                const double ang = sign * two_pi * static_cast<double>(j) / static_cast<double>(len);
                const std::complex<double> w(std::cos(ang), std::sin(ang));
                const std::complex<double> u = a[i + j];
                const std::complex<double> v = a[i + j + half] * w;
                a[i + j] = u + v;
                a[i + j + half] = u - v;
            }
        }
    }
}

} // namespace detail

// Forward transform of one real sequence of length n (power of two) into
// Fourier coefficients c_k such that f_l = sum_k c_k e^{i 2 pi k l / n}.
inline void fourier_forward(const double *f, std::complex<double> *c, std::size_t n)
{
    for (std::size_t l = 0; l < n; ++l) {
        c[l] = std::complex<double>(f[l], 0.0);
    }
    detail::fft_pow2(c, n, -1);
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
        c[k] *= inv;
    }
}

// Inverse of fourier_forward; returns the values including any imaginary
// residue (the caller decides how much residue is acceptable).
inline void fourier_inverse(const std::complex<double> *c, std::complex<double> *f, std::size_t n)
{
    for (std::size_t k = 0; k < n; ++k) {
        f[k] = c[k];
    }
    detail::fft_pow2(f, n, +1);
}

} // namespace whisker

#endif
