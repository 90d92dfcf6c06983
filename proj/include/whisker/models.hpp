#ifndef WHISKER_MODELS_HPP
#define WHISKER_MODELS_HPP

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include <whisker/jet.hpp>
#include <whisker/ode.hpp>

namespace whisker
{

using State = std::array<double, 6>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec6 = Eigen::Matrix<double, 6, 1>;

// Standard symplectic constants: Omega0 = J0 = [[0, -I], [I, 0]], G = I.
inline Mat6 omega0_matrix()
{
    Mat6 m = Mat6::Zero();
    for (int i = 0; i < 3; ++i) {
        m(i, 3 + i) = -1.0;
        m(3 + i, i) = 1.0;
    }
    return m;
}

struct SingularPoint : std::domain_error
{
    explicit SingularPoint(const std::string &what) : std::domain_error(what) {}
};

// Circular Restricted Three Body Problem in the synodic frame with momentum
// coordinates z = (x1, x2, x3, p1, p2, p3),
//
//   H = (p1^2 + p2^2 + p3^2)/2 - x1 p2 + x2 p1 - (1 - mu)/r1 - mu/r2,
//
// primaries of mass 1 - mu and mu at (mu, 0, 0) and (mu - 1, 0, 0).
struct Crtbp
{
    double mu;

    explicit Crtbp(double mass_ratio) : mu(mass_ratio)
    {
        if (!(mu > 0.0 && mu <= 0.5)) {
            throw std::invalid_argument("Crtbp: mu must lie in (0, 1/2]");
        }
    }

    static constexpr int dim = 6;

    // Phase-space indices spanning the vertical oscillation (x3, p3).
    std::array<int, 2> vertical_pair() const { return {2, 5}; }

    template <typename R>
    void vector_field(const R *z, R *out, std::vector<R> &ws) const
    {
        ring::ensure_workspace(ws, 9, z[0]);
        R &d1x = ws[0], &d2x = ws[1], &r1sq = ws[2], &r2sq = ws[3];
        R &r1m3 = ws[4], &r2m3 = ws[5], &g = ws[6], &t1 = ws[7], &t2 = ws[8];

        radial_terms(z, d1x, d2x, r1sq, r2sq, r1m3, r2m3, g, t1, t2);

        using RT = ring_traits<R>;
        // x' = dH/dp
        out[0] = z[3];
        RT::axpy(out[0], 1.0, z[1]);
        out[1] = z[4];
        RT::axpy(out[1], -1.0, z[0]);
        out[2] = z[5];
        // p' = -dH/dx
        ring::mul(t1, d1x, r1m3);
        ring::mul(t2, d2x, r2m3);
        out[3] = z[4];
        RT::axpy(out[3], -(1.0 - mu), t1);
        RT::axpy(out[3], -mu, t2);
        ring::mul(t1, z[1], g);
        out[4] = t1;
        negate(out[4]);
        RT::axpy(out[4], -1.0, z[3]);
        ring::mul(t1, z[2], g);
        out[5] = t1;
        negate(out[5]);
    }

    // X(z) together with DX(z) u for ncols tangent columns u (each a
    // 6-vector laid out contiguously).
    template <typename R>
    void vf_and_tangents(const R *z, const R *u, int ncols, R *out, R *dout, std::vector<R> &ws) const
    {
        ring::ensure_workspace(ws, 14, z[0]);
        R &d1x = ws[0], &d2x = ws[1], &r1sq = ws[2], &r2sq = ws[3];
        R &r1m3 = ws[4], &r2m3 = ws[5], &g = ws[6], &t1 = ws[7], &t2 = ws[8];
        R &c1 = ws[9], &c2 = ws[10], &s1 = ws[11], &s2 = ws[12], &t12 = ws[13];

        radial_terms(z, d1x, d2x, r1sq, r2sq, r1m3, r2m3, g, t1, t2);

        using RT = ring_traits<R>;
        out[0] = z[3];
        RT::axpy(out[0], 1.0, z[1]);
        out[1] = z[4];
        RT::axpy(out[1], -1.0, z[0]);
        out[2] = z[5];
        ring::mul(t1, d1x, r1m3);
        ring::mul(t2, d2x, r2m3);
        out[3] = z[4];
        RT::axpy(out[3], -(1.0 - mu), t1);
        RT::axpy(out[3], -mu, t2);
        ring::mul(t1, z[1], g);
        out[4] = t1;
        negate(out[4]);
        RT::axpy(out[4], -1.0, z[3]);
        ring::mul(t1, z[2], g);
        out[5] = t1;
        negate(out[5]);

        // Gravity-gradient coefficients 3 (1 - mu) / r1^5 and 3 mu / r2^5.
        ring::pow(c1, r1sq, -2.5);
        scale_in_place(c1, 3.0 * (1.0 - mu));
        ring::pow(c2, r2sq, -2.5);
        scale_in_place(c2, 3.0 * mu);

        for (int col = 0; col < ncols; ++col) {
            const R *uc = u + 6 * col;
            R *dc = dout + 6 * col;
            // s1 = d1 . u_x, s2 = d2 . u_x
            ring::mul(s1, d1x, uc[0]);
            ring::mul(t1, z[1], uc[1]);
            RT::axpy(s1, 1.0, t1);
            ring::mul(t1, z[2], uc[2]);
            RT::axpy(s1, 1.0, t1);
            ring::mul(s2, d2x, uc[0]);
            ring::mul(t1, z[1], uc[1]);
            RT::axpy(s2, 1.0, t1);
            ring::mul(t1, z[2], uc[2]);
            RT::axpy(s2, 1.0, t1);

            dc[0] = uc[3];
            RT::axpy(dc[0], 1.0, uc[1]);
            dc[1] = uc[4];
            RT::axpy(dc[1], -1.0, uc[0]);
            dc[2] = uc[5];

            ring::mul(t1, c1, s1);
            ring::mul(t2, c2, s2);
            t12 = t1;
            RT::axpy(t12, 1.0, t2);

            // dp' = (-g I + 3(1-mu) d1 d1^T/r1^5 + 3 mu d2 d2^T/r2^5) u_x
            //       + J-block terms.
            ring::mul(dc[3], g, uc[0]);
            negate(dc[3]);
            RT::axpy(dc[3], 1.0, uc[4]);
            ring::mul(s1, t1, d1x);
            RT::axpy(dc[3], 1.0, s1);
            ring::mul(s1, t2, d2x);
            RT::axpy(dc[3], 1.0, s1);

            ring::mul(dc[4], g, uc[1]);
            negate(dc[4]);
            RT::axpy(dc[4], -1.0, uc[3]);
            ring::mul(s1, t12, z[1]);
            RT::axpy(dc[4], 1.0, s1);

            ring::mul(dc[5], g, uc[2]);
            negate(dc[5]);
            ring::mul(s1, t12, z[2]);
            RT::axpy(dc[5], 1.0, s1);
        }
    }

    double hamiltonian(const State &z) const
    {
        const double r1 = std::sqrt(sq(z[0] - mu) + sq(z[1]) + sq(z[2]));
        const double r2 = std::sqrt(sq(z[0] - mu + 1.0) + sq(z[1]) + sq(z[2]));
        if (r1 == 0.0 || r2 == 0.0) {
            throw SingularPoint("Crtbp: evaluation at a primary");
        }
        return 0.5 * (sq(z[3]) + sq(z[4]) + sq(z[5])) - z[0] * z[4] + z[1] * z[3] - (1.0 - mu) / r1 - mu / r2;
    }

    // Reversing involution: X o rho = -D rho X.
    State involution(const State &z) const { return {z[0], -z[1], z[2], -z[3], z[4], -z[5]}; }

    Mat6 involution_matrix() const
    {
        Mat6 m = Mat6::Zero();
        const double d[6] = {1, -1, 1, -1, 1, -1};
        for (int i = 0; i < 6; ++i) {
            m(i, i) = d[i];
        }
        return m;
    }

    // L1, the collinear point between the primaries: the unique root of
    // x + (1 - mu)/(mu - x)^2 - mu/(x - mu + 1)^2 on (mu - 1, mu), found by
    // bisection. Momenta are (0, x*, 0) so synodic velocities vanish.
    State equilibrium() const
    {
        const auto f = [this](double x) {
            return x + (1.0 - mu) / sq(mu - x) - mu / sq(x - mu + 1.0);
        };
        double lo = mu - 1.0 + 1e-12, hi = mu - 1e-12;
        for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
            const double mid = 0.5 * (lo + hi);
            (f(mid) < 0.0 ? lo : hi) = mid;
        }
        const double x = 0.5 * (lo + hi);
        return {x, 0.0, 0.0, 0.0, x, 0.0};
    }

private:
    static double sq(double v) { return v * v; }

    template <typename R>
    static void negate(R &v)
    {
        if constexpr (std::is_same_v<R, double>) {
            v = -v;
        } else {
            for (int i = 0; i <= v.order(); ++i) {
                v[i] = -v[i];
            }
        }
    }

    template <typename R>
    static void scale_in_place(R &v, double x)
    {
        if constexpr (std::is_same_v<R, double>) {
            v *= x;
        } else {
            for (int i = 0; i <= v.order(); ++i) {
                v[i] *= x;
            }
        }
    }

    template <typename R>
    void radial_terms(const R *z, R &d1x, R &d2x, R &r1sq, R &r2sq, R &r1m3, R &r2m3, R &g, R &t1, R &t2) const
    {
        d1x = z[0];
        add_scalar(d1x, -mu);
        d2x = z[0];
        add_scalar(d2x, 1.0 - mu);
        ring::mul(r1sq, d1x, d1x);
        ring::mul(t1, z[1], z[1]);
        ring_traits<R>::axpy(r1sq, 1.0, t1);
        ring::mul(t2, z[2], z[2]);
        ring_traits<R>::axpy(r1sq, 1.0, t2);
        ring::mul(r2sq, d2x, d2x);
        ring_traits<R>::axpy(r2sq, 1.0, t1);
        ring_traits<R>::axpy(r2sq, 1.0, t2);
        if (!(ring::value(r1sq) > 0.0) || !(ring::value(r2sq) > 0.0)) {
            throw SingularPoint("Crtbp: vector field at a primary");
        }
        ring::pow(r1m3, r1sq, -1.5);
        ring::pow(r2m3, r2sq, -1.5);
        g = r1m3;
        scale_in_place(g, 1.0 - mu);
        ring_traits<R>::axpy(g, mu, r2m3);
    }

    template <typename R>
    static void add_scalar(R &v, double x)
    {
        if constexpr (std::is_same_v<R, double>) {
            v += x;
        } else {
            v[0] += x;
        }
    }
};

// Exactly solvable center x center x saddle oracle,
//
//   H = (omega1/2)(q1^2 + p1^2) + (omega2/2)(q2^2 + p2^2) + lambda_h q3 p3,
//
// with coordinates z = (q1, q2, q3, p1, p2, p3).
struct LinearModel
{
    double omega1, omega2, lambda_h;

    LinearModel(double w1, double w2, double lh) : omega1(w1), omega2(w2), lambda_h(lh)
    {
        if (!(omega1 > 0.0 && omega2 > 0.0 && lambda_h > 0.0)) {
            throw std::invalid_argument("LinearModel: parameters must be positive");
        }
    }

    static constexpr int dim = 6;

    // The omega2 center plays the role of the vertical oscillation.
    std::array<int, 2> vertical_pair() const { return {1, 4}; }

    template <typename R>
    void vector_field(const R *z, R *out, std::vector<R> &ws) const
    {
        (void)ws;
        assign_scaled(out[0], z[3], omega1);
        assign_scaled(out[1], z[4], omega2);
        assign_scaled(out[2], z[2], lambda_h);
        assign_scaled(out[3], z[0], -omega1);
        assign_scaled(out[4], z[1], -omega2);
        assign_scaled(out[5], z[5], -lambda_h);
    }

    template <typename R>
    void vf_and_tangents(const R *z, const R *u, int ncols, R *out, R *dout, std::vector<R> &ws) const
    {
        vector_field(z, out, ws);
        for (int col = 0; col < ncols; ++col) {
            vector_field(u + 6 * col, dout + 6 * col, ws);
        }
    }

    double hamiltonian(const State &z) const
    {
        return 0.5 * omega1 * (z[0] * z[0] + z[3] * z[3]) + 0.5 * omega2 * (z[1] * z[1] + z[4] * z[4])
               + lambda_h * z[2] * z[5];
    }

    State involution(const State &z) const { return {z[0], z[1], z[5], -z[3], -z[4], z[2]}; }

    Mat6 involution_matrix() const
    {
        Mat6 m = Mat6::Zero();
        m(0, 0) = 1.0;
        m(1, 1) = 1.0;
        m(2, 5) = 1.0;
        m(3, 3) = -1.0;
        m(4, 4) = -1.0;
        m(5, 2) = 1.0;
        return m;
    }

    State equilibrium() const { return {0, 0, 0, 0, 0, 0}; }

private:
    template <typename R>
    static void assign_scaled(R &out, const R &v, double x)
    {
        out = v;
        if constexpr (std::is_same_v<R, double>) {
            out *= x;
        } else {
            for (int i = 0; i <= out.order(); ++i) {
                out[i] *= x;
            }
        }
    }
};

// --- flow wrappers --------------------------------------------------------

namespace detail
{

template <typename Model, typename R>
struct PointSystem
{
    const Model *model;
    std::vector<R> ws;
    int dim() const { return 6; }
    void operator()(const R *y, R *dy) { model->vector_field(y, dy, ws); }
};

template <typename Model, typename R>
struct TangentSystem
{
    const Model *model;
    int ncols;
    std::vector<R> ws;
    int dim() const { return 6 * (1 + ncols); }
    void operator()(const R *y, R *dy) { model->vf_and_tangents(y, y + 6, ncols, dy, dy + 6, ws); }
};

} // namespace detail

template <typename Model>
inline State flow_point(const Model &model, const State &z, double T, const IntegratorConfig &cfg = {},
                        IntegratorStats *stats = nullptr)
{
    detail::PointSystem<Model, double> sys{&model, {}};
    std::vector<double> y(z.begin(), z.end());
    integrate_rkf78<double>(sys, y, T, cfg, stats);
    State out;
    std::copy(y.begin(), y.end(), out.begin());
    return out;
}

template <typename Model>
inline std::vector<Jet> flow_jet(const Model &model, const std::vector<Jet> &z, double T,
                                 const IntegratorConfig &cfg = {}, IntegratorStats *stats = nullptr)
{
    if (z.size() != 6) {
        throw std::invalid_argument("flow_jet: state must have 6 components");
    }
    detail::PointSystem<Model, Jet> sys{&model, {}};
    std::vector<Jet> y = z;
    integrate_rkf78<Jet>(sys, y, T, cfg, stats);
    return y;
}

// State and first-variational flow; M = D_z phi_T(z).
template <typename Model>
inline std::pair<State, Mat6> flow_variational(const Model &model, const State &z, double T,
                                               const IntegratorConfig &cfg = {}, IntegratorStats *stats = nullptr)
{
    detail::TangentSystem<Model, double> sys{&model, 6, {}};
    std::vector<double> y(42, 0.0);
    std::copy(z.begin(), z.end(), y.begin());
    for (int c = 0; c < 6; ++c) {
        y[6 + 7 * c] = 1.0; // identity columns
    }
    integrate_rkf78<double>(sys, y, T, cfg, stats);
    State zf;
    std::copy(y.begin(), y.begin() + 6, zf.begin());
    Mat6 m;
    for (int c = 0; c < 6; ++c) {
        for (int r = 0; r < 6; ++r) {
            m(r, c) = y[6 + 6 * c + r];
        }
    }
    return {zf, m};
}

// Analytic Jacobian of the vector field, assembled column by column from
// the tangent application on the standard basis.
template <typename Model>
inline Mat6 d_vector_field(const Model &model, const State &z)
{
    std::vector<double> ws;
    std::array<double, 6> out;
    std::array<double, 36> cols{}, dcols{};
    for (int c = 0; c < 6; ++c) {
        cols[6 * c + c] = 1.0;
    }
    model.vf_and_tangents(z.data(), cols.data(), 6, out.data(), dcols.data(), ws);
    Mat6 m;
    for (int c = 0; c < 6; ++c) {
        for (int r = 0; r < 6; ++r) {
            m(r, c) = dcols[6 * c + r];
        }
    }
    return m;
}

template <typename Model>
inline State vector_field_point(const Model &model, const State &z)
{
    std::vector<double> ws;
    State out;
    model.vector_field(z.data(), out.data(), ws);
    return out;
}

// --- equilibrium spectrum --------------------------------------------------

struct EquilibriumSpectrum
{
    double omega_planar;   // cycles / time
    double omega_vertical; // cycles / time
    double lambda_rate;    // 1 / time
    Eigen::Matrix<std::complex<double>, 6, 1> v_planar;
    Eigen::Matrix<std::complex<double>, 6, 1> v_vertical;
    Vec6 v_stable;
    Vec6 v_unstable;
    double pairing_residual;
};

struct SpectrumError : std::runtime_error
{
    explicit SpectrumError(const std::string &what) : std::runtime_error(what) {}
};

// Eigen-decomposition of DX at the equilibrium; expects the
// center x center x saddle pattern {±i 2 pi w_p, ±i 2 pi w_v, ±lambda}.
template <typename Model>
inline EquilibriumSpectrum equilibrium_spectrum(const Model &model)
{
    constexpr double two_pi = 6.283185307179586476925286766559;
    const State eq = model.equilibrium();
    const Mat6 dx = d_vector_field(model, eq);
    Eigen::EigenSolver<Mat6> es(dx);
    if (es.info() != Eigen::Success) {
        throw SpectrumError("equilibrium_spectrum: eigensolver failed");
    }
    const auto vals = es.eigenvalues();
    const auto vecs = es.eigenvectors();

    const double scale = vals.cwiseAbs().maxCoeff();
    double pairing = 0.0;
    for (int i = 0; i < 6; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (int j = 0; j < 6; ++j) {
            best = std::min(best, std::abs(vals(i) + vals(j)));
        }
        pairing = std::max(pairing, best);
    }

    EquilibriumSpectrum out;
    out.pairing_residual = pairing;

    int i_real = -1;
    std::vector<int> centers;
    for (int i = 0; i < 6; ++i) {
        if (std::abs(vals(i).imag()) < 1e-8 * scale) {
            if (vals(i).real() > 1e-8 * scale) {
                i_real = i;
            }
        } else if (vals(i).imag() > 0.0) {
            centers.push_back(i);
        }
    }
    if (i_real < 0 || centers.size() != 2) {
        throw SpectrumError("equilibrium_spectrum: not of center x center x saddle type");
    }

    const auto pair_idx = model.vertical_pair();
    const auto vertical_weight = [&](int i) {
        double w = 0.0, tot = 0.0;
        for (int r = 0; r < 6; ++r) {
            const double a = std::abs(vecs(r, i));
            tot += a * a;
            if (r == pair_idx[0] || r == pair_idx[1]) {
                w += a * a;
            }
        }
        return w / tot;
    };
    int iv = centers[0], ip = centers[1];
    if (vertical_weight(ip) > vertical_weight(iv)) {
        std::swap(iv, ip);
    }

    out.omega_planar = vals(ip).imag() / two_pi;
    out.omega_vertical = vals(iv).imag() / two_pi;
    out.lambda_rate = vals(i_real).real();
    out.v_planar = vecs.col(ip);
    out.v_vertical = vecs.col(iv);

    // Real eigenvectors of the saddle pair.
    for (int i = 0; i < 6; ++i) {
        if (std::abs(vals(i).imag()) < 1e-8 * scale) {
            Vec6 v = vecs.col(i).real();
            v.normalize();
            if (vals(i).real() > 0.0) {
                out.v_unstable = v;
            } else {
                out.v_stable = v;
            }
        }
    }
    return out;
}

} // namespace whisker

#endif
