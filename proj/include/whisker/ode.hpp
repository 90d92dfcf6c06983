#ifndef WHISKER_ODE_HPP
#define WHISKER_ODE_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <whisker/jet.hpp>

namespace whisker
{

struct IntegratorConfig
{
    double abs_tol = 1e-13;
    double rel_tol = 1e-13;
    double h_init = 1e-2;
    double h_min = 1e-12;
    double h_max = 1.0;
    std::int64_t max_steps = 10'000'000;
};

struct IntegratorStats
{
    std::int64_t steps = 0;
    std::int64_t rejections = 0;
};

struct StepUnderflow : std::runtime_error
{
    explicit StepUnderflow(double h)
        : std::runtime_error("integrator: step size underflow (h = " + std::to_string(h) + ")"), step(h)
    {
    }
    double step;
};

struct MaxStepsExceeded : std::runtime_error
{
    MaxStepsExceeded() : std::runtime_error("integrator: maximum step count exceeded") {}
};

namespace rkf78
{

// Fehlberg 7(8) tableau, 13 stages. The error estimate is the classical
// (41/840)(k0 + k10 - k11 - k12) difference between the embedded orders.
inline constexpr int stages = 13;

inline constexpr double a1[1] = {2.0 / 27};
inline constexpr double a2[2] = {1.0 / 36, 1.0 / 12};
inline constexpr double a3[3] = {1.0 / 24, 0, 1.0 / 8};
inline constexpr double a4[4] = {5.0 / 12, 0, -25.0 / 16, 25.0 / 16};
inline constexpr double a5[5] = {1.0 / 20, 0, 0, 1.0 / 4, 1.0 / 5};
inline constexpr double a6[6] = {-25.0 / 108, 0, 0, 125.0 / 108, -65.0 / 27, 125.0 / 54};
inline constexpr double a7[7] = {31.0 / 300, 0, 0, 0, 61.0 / 225, -2.0 / 9, 13.0 / 900};
inline constexpr double a8[8] = {2.0, 0, 0, -53.0 / 6, 704.0 / 45, -107.0 / 9, 67.0 / 90, 3.0};
inline constexpr double a9[9] = {-91.0 / 108, 0, 0, 23.0 / 108, -976.0 / 135, 311.0 / 54, -19.0 / 60, 17.0 / 6,
                                 -1.0 / 12};
inline constexpr double a10[10] = {2383.0 / 4100, 0, 0,         -341.0 / 164, 4496.0 / 1025,
                                   -301.0 / 82,   2133.0 / 4100, 45.0 / 82,    45.0 / 164,
                                   18.0 / 41};
inline constexpr double a11[11] = {3.0 / 205, 0, 0, 0, 0, -6.0 / 41, -3.0 / 205, -3.0 / 41, 3.0 / 41, 6.0 / 41, 0};
inline constexpr double a12[12] = {-1777.0 / 4100, 0,         0,          -341.0 / 164, 4496.0 / 1025, -289.0 / 82,
                                   2193.0 / 4100,  51.0 / 82, 33.0 / 164, 12.0 / 41,    0,             1.0};

inline constexpr const double *a_rows[12] = {a1, a2, a3, a4, a5, a6, a7, a8, a9, a10, a11, a12};

// 8th-order solution weights.
inline constexpr double b[13] = {0,         0,         0, 0, 0, 34.0 / 105, 9.0 / 35, 9.0 / 35, 9.0 / 280,
                                 9.0 / 280, 0,         41.0 / 840, 41.0 / 840};
// Difference against the embedded 7th-order weights.
inline constexpr double db[13] = {-41.0 / 840, 0, 0, 0, 0, 0, 0, 0, 0, 0, -41.0 / 840, 41.0 / 840, 41.0 / 840};

} // namespace rkf78

// Adaptive RKF78 over the scalar ring R (double or Jet). System must
// provide dim() and operator()(const R *y, R *dy). The error estimate and
// the step control use the l1 norm over all jet coefficients of all
// components, which reduces to the scalar l1 norm at order 0 so that the
// order-0 jet flow reproduces the scalar flow bit for bit.
template <typename R, typename System>
inline void integrate_rkf78(System &sys, std::vector<R> &y, double T, const IntegratorConfig &cfg,
                            IntegratorStats *stats = nullptr)
{
    using RT = ring_traits<R>;
    if (T == 0.0) {
        return;
    }
    const int dim = sys.dim();
    if (static_cast<int>(y.size()) != dim) {
        throw std::invalid_argument("integrate_rkf78: state dimension mismatch");
    }
    const double dir = T > 0 ? 1.0 : -1.0;

    std::vector<std::vector<R>> k(rkf78::stages, std::vector<R>());
    for (auto &ki : k) {
        ki.reserve(dim);
        for (int c = 0; c < dim; ++c) {
            ki.push_back(RT::zero_like(y[0]));
        }
    }
    std::vector<R> ytmp, ynew;
    R errc = RT::zero_like(y[0]);
    ytmp.reserve(dim);
    ynew.reserve(dim);
    for (int c = 0; c < dim; ++c) {
        ytmp.push_back(RT::zero_like(y[0]));
        ynew.push_back(RT::zero_like(y[0]));
    }

    double t = 0.0;
    double h = dir * std::clamp(std::abs(cfg.h_init), cfg.h_min, cfg.h_max);
    std::int64_t steps = 0, rejections = 0;

    while (true) {
        if (++steps > cfg.max_steps) {
            throw MaxStepsExceeded();
        }
        bool last = false;
        if (std::abs(h) >= std::abs(T - t)) {
            h = T - t;
            last = true;
        }

        sys(y.data(), k[0].data());
        for (int i = 1; i < rkf78::stages; ++i) {
            for (int c = 0; c < dim; ++c) {
                ytmp[c] = y[c];
            }
            const double *row = rkf78::a_rows[i - 1];
            for (int j = 0; j < i; ++j) {
                if (row[j] == 0.0) {
                    continue;
                }
                const double w = h * row[j];
                for (int c = 0; c < dim; ++c) {
                    RT::axpy(ytmp[c], w, k[j][c]);
                }
            }
            sys(ytmp.data(), k[i].data());
        }

        double err = 0.0;
        double ymag = 0.0;
        for (int c = 0; c < dim; ++c) {
            ynew[c] = y[c];
            for (int i = 0; i < rkf78::stages; ++i) {
                if (rkf78::b[i] != 0.0) {
                    RT::axpy(ynew[c], h * rkf78::b[i], k[i][c]);
                }
            }
            RT::set_zero(errc);
            for (int i = 0; i < rkf78::stages; ++i) {
                if (rkf78::db[i] != 0.0) {
                    RT::axpy(errc, h * rkf78::db[i], k[i][c]);
                }
            }
            err += RT::l1(errc);
            ymag += RT::l1(y[c]);
        }
        const double tol = cfg.abs_tol + cfg.rel_tol * ymag;

        if (err <= tol) {
            y.swap(ynew);
            t += h;
            if (last) {
                break;
            }
        } else {
            ++rejections;
            if (std::abs(h) <= cfg.h_min * (1.0 + 1e-12)) {
                throw StepUnderflow(h);
            }
        }

        double fac = err > 0.0 ? 0.9 * std::pow(tol / err, 1.0 / 8.0) : 5.0;
        fac = std::clamp(fac, 0.1, 5.0);
        h = dir * std::clamp(std::abs(h) * fac, cfg.h_min, cfg.h_max);
    }

    if (stats != nullptr) {
        stats->steps += steps;
        stats->rejections += rejections;
    }
}

} // namespace whisker

#endif
