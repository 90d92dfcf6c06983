#ifndef WHISKER_SERIES_HPP
#define WHISKER_SERIES_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include <whisker/fft.hpp>

namespace whisker
{

// Truncated representations of real functions f : T^1 x R -> R^{rows x cols},
//
//   f(theta, s) = sum_{j=0}^{n_taylor} f_j(theta) s^j,
//
// either by Fourier coefficients of the f_j (TaylorFourier) or by values of
// the f_j on the equispaced grid theta_l = l / n_fourier (GridTaylor).
// Storage is one contiguous length-n_fourier slice per (component, j), so
// transforms run at unit stride.

namespace detail
{

inline std::size_t series_index(int j, int kl, int comp, int nt, int nf)
{
    return (static_cast<std::size_t>(comp) * (nt + 1) + j) * nf + kl;
}

inline void check_pow2_nf(int nf)
{
    if (nf < 2 || !is_pow2(static_cast<std::size_t>(nf))) {
        throw std::invalid_argument("n_fourier must be a power of two and >= 2");
    }
}

} // namespace detail

// Signed frequency of DFT bin k: bins [0, nf/2) are k, bins [nf/2, nf) are
// k - nf. The Nyquist bin maps to -nf/2; it is always zeroed by low_pass.
inline int freq_of_bin(int k, int nf)
{
    return k < nf / 2 ? k : k - nf;
}

inline int bin_of_freq(int f, int nf)
{
    return f >= 0 ? f : f + nf;
}

class GridTaylor
{
public:
    GridTaylor() = default;
    GridTaylor(int n_taylor, int n_fourier, int rows = 1, int cols = 1)
        : nt_(n_taylor), nf_(n_fourier), rows_(rows), cols_(cols),
          data_(static_cast<std::size_t>(rows) * cols * (n_taylor + 1) * n_fourier, 0.0)
    {
        detail::check_pow2_nf(n_fourier);
        if (n_taylor < 0 || rows < 1 || cols < 1) {
            throw std::invalid_argument("GridTaylor: bad shape");
        }
    }

    int n_taylor() const { return nt_; }
    int n_fourier() const { return nf_; }
    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double &at(int j, int l, int r = 0, int c = 0)
    {
        return data_[detail::series_index(j, l, r * cols_ + c, nt_, nf_)];
    }
    double at(int j, int l, int r = 0, int c = 0) const
    {
        return data_[detail::series_index(j, l, r * cols_ + c, nt_, nf_)];
    }

    // Contiguous length-n_fourier slice for one (component, Taylor order).
    double *slice(int j, int r = 0, int c = 0)
    {
        return data_.data() + detail::series_index(j, 0, r * cols_ + c, nt_, nf_);
    }
    const double *slice(int j, int r = 0, int c = 0) const
    {
        return data_.data() + detail::series_index(j, 0, r * cols_ + c, nt_, nf_);
    }

    std::vector<double> &raw() { return data_; }
    const std::vector<double> &raw() const { return data_; }

    double theta(int l) const { return static_cast<double>(l) / nf_; }

    bool same_shape(const GridTaylor &o) const
    {
        return nt_ == o.nt_ && nf_ == o.nf_ && rows_ == o.rows_ && cols_ == o.cols_;
    }

private:
    int nt_ = 0, nf_ = 0, rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

class TaylorFourier
{
public:
    TaylorFourier() = default;
    TaylorFourier(int n_taylor, int n_fourier, int rows = 1, int cols = 1)
        : nt_(n_taylor), nf_(n_fourier), rows_(rows), cols_(cols),
          data_(static_cast<std::size_t>(rows) * cols * (n_taylor + 1) * n_fourier)
    {
        detail::check_pow2_nf(n_fourier);
        if (n_taylor < 0 || rows < 1 || cols < 1) {
            throw std::invalid_argument("TaylorFourier: bad shape");
        }
    }

    int n_taylor() const { return nt_; }
    int n_fourier() const { return nf_; }
    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    std::complex<double> &coeff(int j, int k, int r = 0, int c = 0)
    {
        return data_[detail::series_index(j, k, r * cols_ + c, nt_, nf_)];
    }
    std::complex<double> coeff(int j, int k, int r = 0, int c = 0) const
    {
        return data_[detail::series_index(j, k, r * cols_ + c, nt_, nf_)];
    }

    std::complex<double> *slice(int j, int r = 0, int c = 0)
    {
        return data_.data() + detail::series_index(j, 0, r * cols_ + c, nt_, nf_);
    }
    const std::complex<double> *slice(int j, int r = 0, int c = 0) const
    {
        return data_.data() + detail::series_index(j, 0, r * cols_ + c, nt_, nf_);
    }

    std::vector<std::complex<double>> &raw() { return data_; }
    const std::vector<std::complex<double>> &raw() const { return data_; }

    bool same_shape(const TaylorFourier &o) const
    {
        return nt_ == o.nt_ && nf_ == o.nf_ && rows_ == o.rows_ && cols_ == o.cols_;
    }

private:
    int nt_ = 0, nf_ = 0, rows_ = 0, cols_ = 0;
    std::vector<std::complex<double>> data_;
};

// --- transforms ---------------------------------------------------------

inline TaylorFourier dft_forward(const GridTaylor &g)
{
    TaylorFourier f(g.n_taylor(), g.n_fourier(), g.rows(), g.cols());
    const int nc = g.rows() * g.cols();
    for (int comp = 0; comp < nc; ++comp) {
        const int r = comp / g.cols(), c = comp % g.cols();
        for (int j = 0; j <= g.n_taylor(); ++j) {
            fourier_forward(g.slice(j, r, c), f.slice(j, r, c), g.n_fourier());
        }
    }
    return f;
}

// Inverse transform. The represented function must be real: any imaginary
// residue above imag_tol * max(1, sup|f|) is an error.
inline GridTaylor dft_inverse(const TaylorFourier &f, double imag_tol = 1e-12)
{
    GridTaylor g(f.n_taylor(), f.n_fourier(), f.rows(), f.cols());
    const int nf = f.n_fourier();
    std::vector<std::complex<double>> buf(nf);
    double max_im = 0.0, max_re = 0.0;
    const int nc = f.rows() * f.cols();
    for (int comp = 0; comp < nc; ++comp) {
        const int r = comp / f.cols(), c = comp % f.cols();
        for (int j = 0; j <= f.n_taylor(); ++j) {
            fourier_inverse(f.slice(j, r, c), buf.data(), nf);
            double *out = g.slice(j, r, c);
            for (int l = 0; l < nf; ++l) {
                out[l] = buf[l].real();
                max_im = std::max(max_im, std::abs(buf[l].imag()));
                max_re = std::max(max_re, std::abs(buf[l].real()));
            }
        }
    }
    if (max_im > imag_tol * std::max(1.0, max_re)) {
        throw std::domain_error("dft_inverse: realness violation, imaginary residue " + std::to_string(max_im));
    }
    return g;
}

// --- evaluation ---------------------------------------------------------

inline Eigen::MatrixXd eval(const TaylorFourier &f, double theta, double s)
{
    const int nf = f.n_fourier();
    Eigen::MatrixXd out(f.rows(), f.cols());
    constexpr double two_pi = 6.283185307179586476925286766559;
    std::vector<std::complex<double>> ph(nf);
    for (int k = 0; k < nf; ++k) {
        const double a = two_pi * freq_of_bin(k, nf) * theta;
        ph[k] = std::complex<double>(std::cos(a), std::sin(a));
    }
    for (int r = 0; r < f.rows(); ++r) {
        for (int c = 0; c < f.cols(); ++c) {
            // Horner in s over Fourier sums.
            std::complex<double> acc(0.0, 0.0);
            for (int j = f.n_taylor(); j >= 0; --j) {
                const std::complex<double> *sl = f.slice(j, r, c);
                std::complex<double> fj(0.0, 0.0);
                for (int k = 0; k < nf; ++k) {
                    fj += sl[k] * ph[k];
                }
                acc = acc * s + fj;
            }
            out(r, c) = acc.real();
        }
    }
    return out;
}

inline Eigen::MatrixXd eval(const GridTaylor &g, double theta, double s)
{
    return eval(dft_forward(g), theta, s);
}

// Taylor evaluation at a gridpoint (no Fourier sum needed).
inline Eigen::MatrixXd eval_at_gridpoint(const GridTaylor &g, int l, double s)
{
    Eigen::MatrixXd out(g.rows(), g.cols());
    for (int r = 0; r < g.rows(); ++r) {
        for (int c = 0; c < g.cols(); ++c) {
            double acc = 0.0;
            for (int j = g.n_taylor(); j >= 0; --j) {
                acc = acc * s + g.at(j, l, r, c);
            }
            out(r, c) = acc;
        }
    }
    return out;
}

// --- algebra ------------------------------------------------------------

namespace detail
{

inline void check_compatible(const GridTaylor &a, const GridTaylor &b)
{
    if (a.n_taylor() != b.n_taylor() || a.n_fourier() != b.n_fourier()) {
        throw std::invalid_argument("GridTaylor: incompatible n_taylor/n_fourier");
    }
}

} // namespace detail

inline GridTaylor add(const GridTaylor &a, const GridTaylor &b)
{
    if (!a.same_shape(b)) {
        throw std::invalid_argument("add: shape mismatch");
    }
    GridTaylor out = a;
    for (std::size_t i = 0; i < out.raw().size(); ++i) {
        out.raw()[i] += b.raw()[i];
    }
    return out;
}

inline GridTaylor sub(const GridTaylor &a, const GridTaylor &b)
{
    if (!a.same_shape(b)) {
        throw std::invalid_argument("sub: shape mismatch");
    }
    GridTaylor out = a;
    for (std::size_t i = 0; i < out.raw().size(); ++i) {
        out.raw()[i] -= b.raw()[i];
    }
    return out;
}

inline GridTaylor scale(const GridTaylor &a, double x)
{
    GridTaylor out = a;
    for (double &v : out.raw()) {
        v *= x;
    }
    return out;
}

inline TaylorFourier add(const TaylorFourier &a, const TaylorFourier &b)
{
    if (!a.same_shape(b)) {
        throw std::invalid_argument("add: shape mismatch");
    }
    TaylorFourier out = a;
    for (std::size_t i = 0; i < out.raw().size(); ++i) {
        out.raw()[i] += b.raw()[i];
    }
    return out;
}

inline TaylorFourier sub(const TaylorFourier &a, const TaylorFourier &b)
{
    if (!a.same_shape(b)) {
        throw std::invalid_argument("sub: shape mismatch");
    }
    TaylorFourier out = a;
    for (std::size_t i = 0; i < out.raw().size(); ++i) {
        out.raw()[i] -= b.raw()[i];
    }
    return out;
}

inline TaylorFourier scale(const TaylorFourier &a, double x)
{
    TaylorFourier out = a;
    for (auto &v : out.raw()) {
        v *= x;
    }
    return out;
}

// Matrix product with truncated polynomial arithmetic at every gridpoint:
// (AB)_j(theta_l) = sum_{p+q=j} A_p(theta_l) B_q(theta_l). A 1x1 factor
// broadcasts as a scalar.
inline GridTaylor mul(const GridTaylor &a, const GridTaylor &b)
{
    detail::check_compatible(a, b);
    const int nt = a.n_taylor(), nf = a.n_fourier();
    const bool scalar_a = a.rows() == 1 && a.cols() == 1;
    if (!scalar_a && a.cols() != b.rows()) {
        throw std::invalid_argument("mul: inner dimensions mismatch");
    }
    const int orow = scalar_a ? b.rows() : a.rows();
    const int ocol = b.cols();
    const int inner = scalar_a ? 1 : a.cols();
    GridTaylor out(nt, nf, orow, ocol);
    for (int r = 0; r < orow; ++r) {
        for (int c = 0; c < ocol; ++c) {
            for (int m = 0; m < inner; ++m) {
                for (int p = 0; p <= nt; ++p) {
                    const double *pa = scalar_a ? a.slice(p) : a.slice(p, r, m);
                    for (int q = 0; p + q <= nt; ++q) {
                        const double *pb = scalar_a ? b.slice(q, r, c) : b.slice(q, m, c);
                        double *po = out.slice(p + q, r, c);
                        for (int l = 0; l < nf; ++l) {
                            po[l] += pa[l] * pb[l];
                        }
                    }
                }
            }
        }
    }
    return out;
}

inline GridTaylor transpose(const GridTaylor &a)
{
    GridTaylor out(a.n_taylor(), a.n_fourier(), a.cols(), a.rows());
    for (int r = 0; r < a.rows(); ++r) {
        for (int c = 0; c < a.cols(); ++c) {
            for (int j = 0; j <= a.n_taylor(); ++j) {
                std::copy(a.slice(j, r, c), a.slice(j, r, c) + a.n_fourier(), out.slice(j, c, r));
            }
        }
    }
    return out;
}

inline GridTaylor block(const GridTaylor &a, int r0, int c0, int nr, int nc)
{
    if (r0 < 0 || c0 < 0 || r0 + nr > a.rows() || c0 + nc > a.cols()) {
        throw std::invalid_argument("block: out of range");
    }
    GridTaylor out(a.n_taylor(), a.n_fourier(), nr, nc);
    for (int r = 0; r < nr; ++r) {
        for (int c = 0; c < nc; ++c) {
            for (int j = 0; j <= a.n_taylor(); ++j) {
                std::copy(a.slice(j, r0 + r, c0 + c), a.slice(j, r0 + r, c0 + c) + a.n_fourier(), out.slice(j, r, c));
            }
        }
    }
    return out;
}

inline void set_block(GridTaylor &dst, const GridTaylor &src, int r0, int c0)
{
    if (r0 + src.rows() > dst.rows() || c0 + src.cols() > dst.cols()) {
        throw std::invalid_argument("set_block: out of range");
    }
    detail::check_compatible(dst, src);
    for (int r = 0; r < src.rows(); ++r) {
        for (int c = 0; c < src.cols(); ++c) {
            for (int j = 0; j <= src.n_taylor(); ++j) {
                std::copy(src.slice(j, r, c), src.slice(j, r, c) + src.n_fourier(), dst.slice(j, r0 + r, c0 + c));
            }
        }
    }
}

inline GridTaylor hcat(const GridTaylor &a, const GridTaylor &b)
{
    if (a.rows() != b.rows()) {
        throw std::invalid_argument("hcat: row mismatch");
    }
    detail::check_compatible(a, b);
    GridTaylor out(a.n_taylor(), a.n_fourier(), a.rows(), a.cols() + b.cols());
    set_block(out, a, 0, 0);
    set_block(out, b, 0, a.cols());
    return out;
}

// Left-multiplication by the standard symplectic matrix
// Omega0 = [[0, -I_n], [I_n, 0]] (rows must be 2n).
inline GridTaylor omega0_times(const GridTaylor &a)
{
    if (a.rows() % 2 != 0) {
        throw std::invalid_argument("omega0_times: odd row count");
    }
    const int n = a.rows() / 2;
    GridTaylor out(a.n_taylor(), a.n_fourier(), a.rows(), a.cols());
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < a.cols(); ++c) {
            for (int j = 0; j <= a.n_taylor(); ++j) {
                const double *lo = a.slice(j, n + r, c);
                const double *hi = a.slice(j, r, c);
                double *o1 = out.slice(j, r, c);
                double *o2 = out.slice(j, n + r, c);
                for (int l = 0; l < a.n_fourier(); ++l) {
                    o1[l] = -lo[l];
                    o2[l] = hi[l];
                }
            }
        }
    }
    return out;
}

// Right-multiplication by Omega0 (cols must be 2n).
inline GridTaylor times_omega0(const GridTaylor &a)
{
    if (a.cols() % 2 != 0) {
        throw std::invalid_argument("times_omega0: odd column count");
    }
    const int n = a.cols() / 2;
    GridTaylor out(a.n_taylor(), a.n_fourier(), a.rows(), a.cols());
    for (int r = 0; r < a.rows(); ++r) {
        for (int c = 0; c < n; ++c) {
            for (int j = 0; j <= a.n_taylor(); ++j) {
                const double *hi = a.slice(j, r, n + c);
                const double *lo = a.slice(j, r, c);
                double *o1 = out.slice(j, r, c);
                double *o2 = out.slice(j, r, n + c);
                for (int l = 0; l < a.n_fourier(); ++l) {
                    o1[l] = hi[l];
                    o2[l] = -lo[l];
                }
            }
        }
    }
    return out;
}

// Subtract a constant matrix from the order-0 coefficient everywhere.
inline GridTaylor sub_constant(const GridTaylor &a, const Eigen::MatrixXd &m)
{
    if (m.rows() != a.rows() || m.cols() != a.cols()) {
        throw std::invalid_argument("sub_constant: shape mismatch");
    }
    GridTaylor out = a;
    for (int r = 0; r < a.rows(); ++r) {
        for (int c = 0; c < a.cols(); ++c) {
            double *sl = out.slice(0, r, c);
            for (int l = 0; l < a.n_fourier(); ++l) {
                sl[l] -= m(r, c);
            }
        }
    }
    return out;
}

// --- calculus and reindexing --------------------------------------------

// The Nyquist bin is self-conjugate, so any operator that multiplies it by
// a non-real phase would break realness; d_theta, compose_rotation, and the
// cohomology solves zero it instead (it is below the low-pass cutoff in all
// driver runs anyway).
inline TaylorFourier d_theta(const TaylorFourier &f)
{
    TaylorFourier out = f;
    constexpr double two_pi = 6.283185307179586476925286766559;
    const int nf = f.n_fourier();
    const int nc = f.rows() * f.cols();
    for (int comp = 0; comp < nc; ++comp) {
        const int r = comp / f.cols(), c = comp % f.cols();
        for (int j = 0; j <= f.n_taylor(); ++j) {
            std::complex<double> *sl = out.slice(j, r, c);
            for (int k = 0; k < nf; ++k) {
                sl[k] = k == nf / 2 ? 0.0 : sl[k] * std::complex<double>(0.0, two_pi * freq_of_bin(k, nf));
            }
        }
    }
    return out;
}

// d/ds: order drops by one; the output keeps the same n_taylor with a zero
// top coefficient.
inline TaylorFourier d_s(const TaylorFourier &f)
{
    TaylorFourier out(f.n_taylor(), f.n_fourier(), f.rows(), f.cols());
    const int nf = f.n_fourier();
    const int nc = f.rows() * f.cols();
    for (int comp = 0; comp < nc; ++comp) {
        const int r = comp / f.cols(), c = comp % f.cols();
        for (int j = 1; j <= f.n_taylor(); ++j) {
            const std::complex<double> *src = f.slice(j, r, c);
            std::complex<double> *dst = out.slice(j - 1, r, c);
            for (int k = 0; k < nf; ++k) {
                dst[k] = static_cast<double>(j) * src[k];
            }
        }
    }
    return out;
}

inline GridTaylor d_s(const GridTaylor &g)
{
    GridTaylor out(g.n_taylor(), g.n_fourier(), g.rows(), g.cols());
    const int nf = g.n_fourier();
    const int nc = g.rows() * g.cols();
    for (int comp = 0; comp < nc; ++comp) {
        const int r = comp / g.cols(), c = comp % g.cols();
        for (int j = 1; j <= g.n_taylor(); ++j) {
            const double *src = g.slice(j, r, c);
            double *dst = out.slice(j - 1, r, c);
            for (int l = 0; l < nf; ++l) {
                dst[l] = static_cast<double>(j) * src[l];
            }
        }
    }
    return out;
}

// Composition with the internal dynamics R(theta, s) = (theta + omega,
// lambda s): coefficients pick up e^{i 2 pi k omega} lambda^j.
inline TaylorFourier compose_rotation(const TaylorFourier &f, double omega, double lambda)
{
    TaylorFourier out = f;
    constexpr double two_pi = 6.283185307179586476925286766559;
    const int nf = f.n_fourier();
    std::vector<std::complex<double>> rot(nf);
    for (int k = 0; k < nf; ++k) {
        const double a = two_pi * freq_of_bin(k, nf) * omega;
        rot[k] = std::complex<double>(std::cos(a), std::sin(a));
    }
    const int nc = f.rows() * f.cols();
    for (int comp = 0; comp < nc; ++comp) {
        const int r = comp / f.cols(), c = comp % f.cols();
        double lj = 1.0;
        for (int j = 0; j <= f.n_taylor(); ++j) {
            std::complex<double> *sl = out.slice(j, r, c);
            for (int k = 0; k < nf; ++k) {
                sl[k] = k == nf / 2 ? 0.0 : sl[k] * (lj * rot[k]);
            }
            lj *= lambda;
        }
    }
    return out;
}

inline GridTaylor compose_rotation(const GridTaylor &g, double omega, double lambda)
{
    return dft_inverse(compose_rotation(dft_forward(g), omega, lambda), 1e-9);
}

// --- reductions, filters, rescaling --------------------------------------

// Average over T^1 of the order-j coefficient (the k = 0 Fourier bin).
inline Eigen::MatrixXd average(const TaylorFourier &f, int j)
{
    Eigen::MatrixXd out(f.rows(), f.cols());
    for (int r = 0; r < f.rows(); ++r) {
        for (int c = 0; c < f.cols(); ++c) {
            out(r, c) = f.coeff(j, 0, r, c).real();
        }
    }
    return out;
}

inline Eigen::MatrixXd average(const GridTaylor &g, int j)
{
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(g.rows(), g.cols());
    for (int r = 0; r < g.rows(); ++r) {
        for (int c = 0; c < g.cols(); ++c) {
            const double *sl = g.slice(j, r, c);
            double acc = 0.0;
            for (int l = 0; l < g.n_fourier(); ++l) {
                acc += sl[l];
            }
            out(r, c) = acc / g.n_fourier();
        }
    }
    return out;
}

// sup over the grid of the max-norm over components of coefficient j.
inline double sup_norm(const GridTaylor &g, int j)
{
    double m = 0.0;
    const int nc = g.rows() * g.cols();
    for (int comp = 0; comp < nc; ++comp) {
        const double *sl = g.slice(j, comp / g.cols(), comp % g.cols());
        for (int l = 0; l < g.n_fourier(); ++l) {
            m = std::max(m, std::abs(sl[l]));
        }
    }
    return m;
}

inline double sup_norm(const TaylorFourier &f, int j)
{
    const int nf = f.n_fourier();
    std::vector<std::complex<double>> buf(nf);
    double m = 0.0;
    const int nc = f.rows() * f.cols();
    for (int comp = 0; comp < nc; ++comp) {
        fourier_inverse(f.slice(j, comp / f.cols(), comp % f.cols()), buf.data(), nf);
        for (int l = 0; l < nf; ++l) {
            m = std::max(m, std::abs(buf[l].real()));
        }
    }
    return m;
}

// Tail mass of coefficient j: sum over |freq| > r_t * n_fourier of the
// max-norm over components of the Fourier coefficients.
inline double tail(const TaylorFourier &f, int j, double r_t)
{
    const int nf = f.n_fourier();
    const double cutoff = r_t * nf;
    double acc = 0.0;
    for (int k = 0; k < nf; ++k) {
        if (std::abs(freq_of_bin(k, nf)) <= cutoff) {
            continue;
        }
        double m = 0.0;
        for (int r = 0; r < f.rows(); ++r) {
            for (int c = 0; c < f.cols(); ++c) {
                m = std::max(m, std::abs(f.coeff(j, k, r, c)));
            }
        }
        acc += m;
    }
    return acc;
}

inline TaylorFourier low_pass(const TaylorFourier &f, double r_f)
{
    if (r_f < 0.25 || r_f >= 0.5) {
        throw std::invalid_argument("low_pass: filter factor outside [1/4, 1/2)");
    }
    TaylorFourier out = f;
    const int nf = f.n_fourier();
    const double cutoff = r_f * nf;
    const int nc = f.rows() * f.cols();
    for (int comp = 0; comp < nc; ++comp) {
        const int r = comp / f.cols(), c = comp % f.cols();
        for (int j = 0; j <= f.n_taylor(); ++j) {
            std::complex<double> *sl = out.slice(j, r, c);
            for (int k = 0; k < nf; ++k) {
                const int fr = freq_of_bin(k, nf);
                if (std::abs(fr) > cutoff || fr == -nf / 2) {
                    sl[k] = 0.0;
                }
            }
        }
    }
    return out;
}

// s-rescaling W^rho(theta, s) = W(theta, rho s): coefficient j picks up rho^j.
inline TaylorFourier rescale_s(const TaylorFourier &f, double rho)
{
    TaylorFourier out = f;
    const int nc = f.rows() * f.cols();
    for (int comp = 0; comp < nc; ++comp) {
        const int r = comp / f.cols(), c = comp % f.cols();
        double rj = 1.0;
        for (int j = 0; j <= f.n_taylor(); ++j) {
            std::complex<double> *sl = out.slice(j, r, c);
            for (int k = 0; k < f.n_fourier(); ++k) {
                sl[k] *= rj;
            }
            rj *= rho;
        }
    }
    return out;
}

inline GridTaylor rescale_s(const GridTaylor &g, double rho)
{
    GridTaylor out = g;
    const int nc = g.rows() * g.cols();
    for (int comp = 0; comp < nc; ++comp) {
        const int r = comp / g.cols(), c = comp % g.cols();
        double rj = 1.0;
        for (int j = 0; j <= g.n_taylor(); ++j) {
            double *sl = out.slice(j, r, c);
            for (int l = 0; l < g.n_fourier(); ++l) {
                sl[l] *= rj;
            }
            rj *= rho;
        }
    }
    return out;
}

// --- shape changes --------------------------------------------------------

// Zero-pad or truncate the Taylor order.
template <typename Series>
inline Series with_order(const Series &f, int new_nt)
{
    Series out(new_nt, f.n_fourier(), f.rows(), f.cols());
    const int ncopy = std::min(new_nt, f.n_taylor());
    for (int r = 0; r < f.rows(); ++r) {
        for (int c = 0; c < f.cols(); ++c) {
            for (int j = 0; j <= ncopy; ++j) {
                std::copy(f.slice(j, r, c), f.slice(j, r, c) + f.n_fourier(), out.slice(j, r, c));
            }
        }
    }
    return out;
}

// Spectral resampling to a new grid size (trigonometric interpolation when
// growing; high modes are dropped when shrinking).
inline TaylorFourier resample(const TaylorFourier &f, int new_nf)
{
    detail::check_pow2_nf(new_nf);
    TaylorFourier out(f.n_taylor(), new_nf, f.rows(), f.cols());
    const int nkeep = std::min(f.n_fourier(), new_nf) / 2;
    for (int r = 0; r < f.rows(); ++r) {
        for (int c = 0; c < f.cols(); ++c) {
            for (int j = 0; j <= f.n_taylor(); ++j) {
                for (int fr = -nkeep + 1; fr < nkeep; ++fr) {
                    out.coeff(j, bin_of_freq(fr, new_nf), r, c) = f.coeff(j, bin_of_freq(fr, f.n_fourier()), r, c);
                }
            }
        }
    }
    return out;
}

inline GridTaylor resample(const GridTaylor &g, int new_nf)
{
    if (new_nf == g.n_fourier()) {
        return g;
    }
    return dft_inverse(resample(dft_forward(g), new_nf), 1e-9);
}

} // namespace whisker

#endif
