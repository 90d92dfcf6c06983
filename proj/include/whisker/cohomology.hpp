#ifndef WHISKER_COHOMOLOGY_HPP
#define WHISKER_COHOMOLOGY_HPP

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <whisker/series.hpp>

namespace whisker
{

// Twisted difference equations
//
//   alpha xi(theta, s) - beta xi(theta + omega, lambda s) = eta(theta, s)
//
// solved mode by mode in Fourier-Taylor coefficients,
//
//   xi_{jk} = eta_{jk} / (alpha - beta lambda^j e^{i 2 pi k omega}).
//
// For real alpha, beta, lambda a vanishing divisor can only occur at k = 0
// (alpha = beta lambda^j); those modes are resonant and the corresponding
// average of eta is an obstruction.

struct CohomologyPolicy
{
    // Largest |obstruction average| that may be silently zeroed at a
    // resonant mode. Obstructions met in the Newton scheme are quadratically
    // small in the invariance error, so this is a gross-inconsistency gate.
    double resonance_tolerance = 1e-3;
    // Value assigned to the free average of a resonant order (default 0).
    double prescribed_average = 0.0;
    // Smallest |divisor| accepted as non-resonant.
    double divisor_floor = 1e-10;
};

struct DiophantineParams
{
    double gamma = 1e-2;
    double tau = 1.1;
};

struct ZeroedObstruction
{
    int component;
    int order;
    double magnitude;
};

struct CohomologySolveReport
{
    double min_divisor = 0.0;
    std::vector<ZeroedObstruction> zeroed;
    // q <= 64 with q*omega within 1e-12 of an integer, 0 if none.
    int near_rational_q = 0;
};

struct ObstructionTooLarge : std::domain_error
{
    ObstructionTooLarge(int j, double mag)
        : std::domain_error("cohomology: resonant obstruction too large at order " + std::to_string(j)
                            + " (|eta_j0| = " + std::to_string(mag) + ")"),
          order(j), magnitude(mag)
    {
    }
    int order;
    double magnitude;
};

struct DivisorUnderflow : std::domain_error
{
    DivisorUnderflow(int j, int k, double d)
        : std::domain_error("cohomology: divisor underflow at (j, k) = (" + std::to_string(j) + ", "
                            + std::to_string(k) + "), |divisor| = " + std::to_string(d)),
          order(j), freq(k), divisor(d)
    {
    }
    int order;
    int freq;
    double divisor;
};

inline std::pair<TaylorFourier, CohomologySolveReport> cohomology_solve(double alpha, double beta, double lambda,
                                                                        double omega, const TaylorFourier &eta,
                                                                        const CohomologyPolicy &policy = {})
{
    constexpr double two_pi = 6.283185307179586476925286766559;
    const int nf = eta.n_fourier();
    TaylorFourier xi(eta.n_taylor(), nf, eta.rows(), eta.cols());
    CohomologySolveReport report;
    report.min_divisor = std::numeric_limits<double>::infinity();

    for (int q = 1; q <= 64; ++q) {
        if (std::abs(q * omega - std::round(q * omega)) < 1e-12) {
            report.near_rational_q = q;
            break;
        }
    }

    std::vector<std::complex<double>> rot(nf);
    for (int k = 0; k < nf; ++k) {
        const double a = two_pi * freq_of_bin(k, nf) * omega;
        rot[k] = std::complex<double>(std::cos(a), std::sin(a));
    }

    const int nc = eta.rows() * eta.cols();
    double lj = 1.0;
    for (int j = 0; j <= eta.n_taylor(); ++j) {
        for (int k = 0; k < nf; ++k) {
            if (k == nf / 2) {
                // self-conjugate Nyquist mode: dropped, see series.hpp
                continue;
            }
            const std::complex<double> div = alpha - beta * lj * rot[k];
            const double ad = std::abs(div);
            if (ad < policy.divisor_floor) {
                if (freq_of_bin(k, nf) != 0) {
                    throw DivisorUnderflow(j, freq_of_bin(k, nf), ad);
                }
                for (int comp = 0; comp < nc; ++comp) {
                    const int r = comp / eta.cols(), c = comp % eta.cols();
                    const double mag = std::abs(eta.coeff(j, 0, r, c));
                    if (mag > policy.resonance_tolerance) {
                        throw ObstructionTooLarge(j, mag);
                    }
                    report.zeroed.push_back({comp, j, mag});
                    xi.coeff(j, 0, r, c) = policy.prescribed_average;
                }
            } else {
                report.min_divisor = std::min(report.min_divisor, ad);
                for (int comp = 0; comp < nc; ++comp) {
                    const int r = comp / eta.cols(), c = comp % eta.cols();
                    xi.coeff(j, k, r, c) = eta.coeff(j, k, r, c) / div;
                }
            }
        }
        lj *= lambda;
    }
    return {xi, report};
}

// alpha xi - beta xi o R - eta; used to verify solves.
inline TaylorFourier cohomology_residual(double alpha, double beta, double lambda, double omega,
                                         const TaylorFourier &xi, const TaylorFourier &eta)
{
    return sub(sub(scale(xi, alpha), scale(compose_rotation(xi, omega, lambda), beta)), eta);
}

struct DiophantineReport
{
    double gamma_min = 0.0; // min over k of |k omega - n| |k|^tau
    int worst_k = 0;
    double worst_distance = 0.0; // |k omega - n| at worst_k
    bool satisfied = false;      // gamma_min >= params.gamma
};

// Diagnostic scan of |k omega - n| >= gamma / |k|^tau for 0 < k <= K_max.
inline DiophantineReport diophantine_score(double omega, const DiophantineParams &params, int k_max)
{
    DiophantineReport rep;
    rep.gamma_min = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= k_max; ++k) {
        const double dist = std::abs(k * omega - std::round(k * omega));
        const double ratio = dist * std::pow(static_cast<double>(k), params.tau);
        if (ratio < rep.gamma_min) {
            rep.gamma_min = ratio;
            rep.worst_k = k;
            rep.worst_distance = dist;
        }
    }
    rep.satisfied = rep.gamma_min >= params.gamma;
    return rep;
}

} // namespace whisker

#endif
