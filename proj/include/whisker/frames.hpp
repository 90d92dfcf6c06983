#ifndef WHISKER_FRAMES_HPP
#define WHISKER_FRAMES_HPP

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include <whisker/series.hpp>
#include <whisker/transport.hpp>

namespace whisker
{

// Adapted frames along the whisker:
//
//   L = ( D_theta W | X o W | d_s W ),       2n x n, Lagrangian,
//   N = J0 L (L^T L)^{-1},                   2n x n, normal complement,
//   P = ( L | N ),                           2n x 2n, symplectic,
//   P^{-1} = -Omega0 P^T Omega0.

struct FrameDegenerate : std::domain_error
{
    explicit FrameDegenerate(const std::string &what) : std::domain_error(what) {}
};

struct FrameSet
{
    GridTaylor L; // 6 x 3
    GridTaylor N; // 6 x 3
    GridTaylor P; // 6 x 6
};

// Per-gridpoint inverse of an n x n truncated matrix series: constant-term
// LU plus the order recurrence H_k = -H_0 sum_{i=1..k} G_i H_{k-i}.
inline GridTaylor series_matrix_inverse(const GridTaylor &g)
{
    if (g.rows() != g.cols()) {
        throw std::invalid_argument("series_matrix_inverse: matrix must be square");
    }
    const int n = g.rows(), nt = g.n_taylor(), nf = g.n_fourier();
    GridTaylor out(nt, nf, n, n);
    Eigen::MatrixXd g0(n, n), gk(n, n), acc(n, n);
    std::vector<Eigen::MatrixXd> h(nt + 1, Eigen::MatrixXd(n, n));
    for (int l = 0; l < nf; ++l) {
        for (int r = 0; r < n; ++r) {
            for (int c = 0; c < n; ++c) {
                g0(r, c) = g.at(0, l, r, c);
            }
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(g0);
        if (!lu.isInvertible()) {
            throw FrameDegenerate("series_matrix_inverse: singular constant term at gridpoint " + std::to_string(l));
        }
        h[0] = lu.inverse();
        for (int k = 1; k <= nt; ++k) {
            acc.setZero();
            for (int i = 1; i <= k; ++i) {
                for (int r = 0; r < n; ++r) {
                    for (int c = 0; c < n; ++c) {
                        gk(r, c) = g.at(i, l, r, c);
                    }
                }
                acc += gk * h[k - i];
            }
            h[k] = -h[0] * acc;
        }
        for (int k = 0; k <= nt; ++k) {
            for (int r = 0; r < n; ++r) {
                for (int c = 0; c < n; ++c) {
                    out.at(k, l, r, c) = h[k](r, c);
                }
            }
        }
    }
    return out;
}

inline GridTaylor d_theta_grid(const GridTaylor &w)
{
    return dft_inverse(d_theta(dft_forward(w)), 1e-9);
}

template <typename Model>
inline GridTaylor build_L(const Model &model, const GridTaylor &w)
{
    return hcat(hcat(d_theta_grid(w), vector_field_grid(model, w)), d_s(w));
}

inline GridTaylor build_N(const GridTaylor &l)
{
    const GridTaylor gl = mul(transpose(l), l);
    return omega0_times(mul(l, series_matrix_inverse(gl)));
}

inline GridTaylor build_P(const GridTaylor &l, const GridTaylor &n)
{
    return hcat(l, n);
}

// Closed-form inverse of the symplectic frame (never a numeric inversion).
inline GridTaylor inverse_P(const GridTaylor &p)
{
    return scale(omega0_times(times_omega0(transpose(p))), -1.0);
}

template <typename Model>
inline FrameSet build_frames(const Model &model, const GridTaylor &w)
{
    FrameSet f;
    f.L = build_L(model, w);
    f.N = build_N(f.L);
    f.P = build_P(f.L, f.N);
    return f;
}

// Torsion S = (N' o R)^T Omega0 (D phi o W) N, given the rotated next-segment
// normal frame and the transported one.
inline GridTaylor torsion_from_transport(const GridTaylor &n_next_rotated, const GridTaylor &dphi_n)
{
    return mul(transpose(n_next_rotated), omega0_times(dphi_n));
}

inline double max_sup_norm(const GridTaylor &g)
{
    double m = 0.0;
    for (int j = 0; j <= g.n_taylor(); ++j) {
        m = std::max(m, sup_norm(g, j));
    }
    return m;
}

// ||L^T Omega0 L|| (Lagrangianity of the tangent frame).
inline double lagrangianity_residual(const GridTaylor &l)
{
    return max_sup_norm(mul(transpose(l), omega0_times(l)));
}

// ||P^T Omega0 P - Omega0||.
inline double symplecticity_residual(const GridTaylor &p)
{
    const GridTaylor s = mul(transpose(p), omega0_times(p));
    Eigen::MatrixXd omega0 = Eigen::MatrixXd::Zero(6, 6);
    for (int i = 0; i < 3; ++i) {
        omega0(i, 3 + i) = -1.0;
        omega0(3 + i, i) = 1.0;
    }
    return max_sup_norm(sub_constant(s, omega0));
}

// ||P (-Omega0 P^T Omega0) - I||.
inline double inverse_formula_residual(const GridTaylor &p)
{
    return max_sup_norm(sub_constant(mul(p, inverse_P(p)), Eigen::MatrixXd::Identity(6, 6)));
}

// Smallest singular value of the order-0 tangent frame over the grid.
inline double min_singular_value_order0(const GridTaylor &l)
{
    double m = std::numeric_limits<double>::infinity();
    Eigen::MatrixXd a(l.rows(), l.cols());
    for (int g = 0; g < l.n_fourier(); ++g) {
        for (int r = 0; r < l.rows(); ++r) {
            for (int c = 0; c < l.cols(); ++c) {
                a(r, c) = l.at(0, g, r, c);
            }
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
        m = std::min(m, svd.singularValues().minCoeff());
    }
    return m;
}

} // namespace whisker

#endif
