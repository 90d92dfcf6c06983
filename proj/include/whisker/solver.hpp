#ifndef WHISKER_SOLVER_HPP
#define WHISKER_SOLVER_HPP

#include <chrono>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include <whisker/cohomology.hpp>
#include <whisker/frames.hpp>
#include <whisker/models.hpp>
#include <whisker/series.hpp>
#include <whisker/transport.hpp>

namespace whisker
{

// --- configuration and result types ---------------------------------------

struct ModelConfig
{
    enum class Kind { crtbp, linear };
    Kind kind = Kind::crtbp;
    double mu = 0.0;
    double omega1 = 0.0, omega2 = 0.0, lambda_h = 0.0;
};

inline ModelConfig model_config(const Crtbp &m)
{
    ModelConfig c;
    c.kind = ModelConfig::Kind::crtbp;
    c.mu = m.mu;
    return c;
}

inline ModelConfig model_config(const LinearModel &m)
{
    ModelConfig c;
    c.kind = ModelConfig::Kind::linear;
    c.omega1 = m.omega1;
    c.omega2 = m.omega2;
    c.lambda_h = m.lambda_h;
    return c;
}

// Multiple-shooting whisker parameterization: m maps W^i with
// phi_{T/m} o W^i = W^{i+1} o R_{omega/m}^{lambda_m}, lambda = lambda_m^m.
struct WhiskerSolution
{
    std::vector<GridTaylor> W; // m segments, each 6 x 1
    double lambda_m = 0.0;
    double omega = 0.0; // rotation per map time T, in cycles
    double T = 0.0;     // negative for time-reversed (unstable) solutions
    int m = 1;
    ModelConfig model;

    int n_taylor() const { return W.at(0).n_taylor(); }
    int n_fourier() const { return W.at(0).n_fourier(); }
    double lambda() const { return std::pow(lambda_m, m); }
    double omega_m() const { return omega / m; }
    double t_m() const { return T / m; }
};

struct NewtonConfig
{
    // staged driver
    double eps_t = 1e-9;
    double eps_W = 1e-4;
    double eps_tilde = 1e-4;
    int n_t = 1;
    int n_it = 7;
    double r_tilde = 0.9;
    int delta_nt = 10;
    int nt_init = 10;
    int nt = 10;
    int nf_max = 1024;
    double r_f = 1.0 / 3.0;
    double r_t = 0.2;
    double low_gate = 1e-12;
    // iterative step
    double twist_floor = 1e-10;
    double divisor_floor = 1e-10;
    double resonance_tolerance = 1e-3;
    bool diagnostics = false;
    int threads = 1;
    IntegratorConfig integrator;
    // seeding
    double seed_amp = 1e-3;
    double seed_gate = 1e-2;
};

struct StepDiagnostics
{
    double lagrangianity = 0.0;
    double symplecticity = 0.0;
    double inverse_formula = 0.0;
    double reducibility = 0.0;
    double min_sv_L = 0.0;
};

struct StepReport
{
    std::vector<double> err_norms; // ||E_j|| at entry, max over segments
    double twist_det = 0.0;
    Eigen::Matrix2d twist = Eigen::Matrix2d::Zero();
    bool twist_degenerate = false;
    double min_divisor = 0.0;
    double obstruction_eta3 = 0.0;   // zeroed average of the composed eta^3
    double obstruction_delta1 = 0.0; // residual average left by a degenerate twist
    double delta_lambda_m = 0.0;
    double delta_lambda = 0.0;
    bool applied = false;
    int work_order = 0;
    double wall_seconds = 0.0;
    std::optional<StepDiagnostics> diagnostics;
};

struct TwistSingular : std::domain_error
{
    TwistSingular(double det, double obstruction)
        : std::domain_error("newton step: twist matrix singular (det = " + std::to_string(det)
                            + ") with obstruction " + std::to_string(obstruction)),
          det_value(det), obstruction(obstruction)
    {
    }
    double det_value;
    double obstruction;
};

struct SeedError : std::runtime_error
{
    explicit SeedError(const std::string &what) : std::runtime_error(what) {}
};

// --- invariance error -------------------------------------------------------

struct InvarianceData
{
    std::vector<GridTaylor> E;  // per segment
    std::vector<double> norms;  // ||E_j||, max over segments
    double max_norm = 0.0;
};

template <typename Model>
inline InvarianceData invariance_error(const Model &model, const WhiskerSolution &sol, const NewtonConfig &cfg)
{
    InvarianceData out;
    out.norms.assign(sol.n_taylor() + 1, 0.0);
    for (int i = 0; i < sol.m; ++i) {
        const GridTaylor phi = transport_grid(model, sol.W[i], sol.t_m(), cfg.integrator, cfg.threads);
        const GridTaylor wr = compose_rotation(sol.W[(i + 1) % sol.m], sol.omega_m(), sol.lambda_m);
        out.E.push_back(sub(phi, wr));
        for (int j = 0; j <= sol.n_taylor(); ++j) {
            out.norms[j] = std::max(out.norms[j], sup_norm(out.E.back(), j));
        }
    }
    for (double v : out.norms) {
        out.max_norm = std::max(out.max_norm, v);
    }
    return out;
}

// Residual of the single-map equation phi_T o W^0 = W^0 o R_omega^lambda
// obtained by composing all segments (diagnostic for m > 1).
template <typename Model>
inline std::vector<double> single_map_residual(const Model &model, const WhiskerSolution &sol,
                                               const NewtonConfig &cfg)
{
    const GridTaylor phi = transport_grid(model, sol.W[0], sol.T, cfg.integrator, cfg.threads);
    const GridTaylor wr = compose_rotation(sol.W[0], sol.omega, sol.lambda());
    const GridTaylor e = sub(phi, wr);
    std::vector<double> norms(sol.n_taylor() + 1);
    for (int j = 0; j <= sol.n_taylor(); ++j) {
        norms[j] = sup_norm(e, j);
    }
    return norms;
}

// Mean and spread of the torus energy H(W^0(theta, 0)).
template <typename Model>
inline std::pair<double, double> torus_energy(const Model &model, const WhiskerSolution &sol)
{
    const GridTaylor &w = sol.W[0];
    double mean = 0.0;
    std::vector<double> h(w.n_fourier());
    for (int l = 0; l < w.n_fourier(); ++l) {
        State z;
        for (int r = 0; r < 6; ++r) {
            z[r] = w.at(0, l, r, 0);
        }
        h[l] = model.hamiltonian(z);
        mean += h[l];
    }
    mean /= w.n_fourier();
    double var = 0.0;
    for (double v : h) {
        var += (v - mean) * (v - mean);
    }
    return {mean, std::sqrt(var / w.n_fourier())};
}

// --- the iterative step -----------------------------------------------------

namespace detail
{

// Composed right-hand side sum_i alpha^{m-1-i} f_i o R^i of a cyclic chain
// alpha xi^i - xi^{i+1} o R = f_i, in Fourier representation.
inline TaylorFourier compose_chain_rhs(const std::vector<TaylorFourier> &f, double alpha, double omega_m,
                                       double lambda_m)
{
    const int m = static_cast<int>(f.size());
    TaylorFourier acc = scale(f[0], std::pow(alpha, m - 1));
    for (int i = 1; i < m; ++i) {
        acc = add(acc, scale(compose_rotation(f[i], i * omega_m, std::pow(lambda_m, i)), std::pow(alpha, m - 1 - i)));
    }
    return acc;
}

// Back-substitution xi^i = (f_i + xi^{i+1} o R) / alpha for i = m-1 .. 1,
// given the composed solution xi^0.
inline std::vector<TaylorFourier> back_substitute_chain(const std::vector<TaylorFourier> &f,
                                                        const TaylorFourier &xi0, double alpha, double omega_m,
                                                        double lambda_m)
{
    const int m = static_cast<int>(f.size());
    std::vector<TaylorFourier> xi(m);
    xi[0] = xi0;
    for (int i = m - 1; i >= 1; --i) {
        const TaylorFourier &next = xi[(i + 1) % m];
        xi[i] = scale(add(f[i], compose_rotation(next, omega_m, lambda_m)), 1.0 / alpha);
    }
    return xi;
}

inline GridTaylor constant_grid(int nt, int nf, const Eigen::MatrixXd &v)
{
    GridTaylor g(nt, nf, static_cast<int>(v.rows()), static_cast<int>(v.cols()));
    for (int r = 0; r < v.rows(); ++r) {
        for (int c = 0; c < v.cols(); ++c) {
            double *sl = g.slice(0, r, c);
            for (int l = 0; l < nf; ++l) {
                sl[l] = v(r, c);
            }
        }
    }
    return g;
}

} // namespace detail

// One Newton-like iteration on all m segments. If gate > 0 and the entry
// error at the top order is already below it, the correction is not applied
// (report.applied == false). Updates W and lambda_m in place otherwise.
template <typename Model>
inline StepReport newton_step(const Model &model, WhiskerSolution &sol, const NewtonConfig &cfg, double gate = 0.0)
{
    const auto t_start = std::chrono::steady_clock::now();
    const int m = sol.m;
    const int nt = sol.n_taylor(), nf = sol.n_fourier();
    const double lm = sol.lambda_m, wm = sol.omega_m(), tm = sol.t_m();
    const double lam = sol.lambda();

    StepReport rep;
    rep.work_order = nt;

    // 1. adapted frames
    std::vector<FrameSet> frames(m);
    for (int i = 0; i < m; ++i) {
        frames[i] = build_frames(model, sol.W[i]);
    }

    // 2. jet transports: phi o W^i and (D phi o W^i) U with U = N (or P when
    // diagnostics are on).
    std::vector<GridTaylor> phi(m), dphi_n(m), dphi_l(m);
    for (int i = 0; i < m; ++i) {
        const GridTaylor &u = cfg.diagnostics ? frames[i].P : frames[i].N;
        auto [p, dp] = transport_grid_with_tangents(model, sol.W[i], u, tm, cfg.integrator, cfg.threads);
        phi[i] = std::move(p);
        if (cfg.diagnostics) {
            dphi_l[i] = block(dp, 0, 0, 6, 3);
            dphi_n[i] = block(dp, 0, 3, 6, 3);
        } else {
            dphi_n[i] = std::move(dp);
        }
    }

    // 3. invariance error
    std::vector<GridTaylor> err(m);
    rep.err_norms.assign(nt + 1, 0.0);
    for (int i = 0; i < m; ++i) {
        err[i] = sub(phi[i], compose_rotation(sol.W[(i + 1) % m], wm, lm));
        for (int j = 0; j <= nt; ++j) {
            rep.err_norms[j] = std::max(rep.err_norms[j], sup_norm(err[i], j));
        }
    }
    double max_err = 0.0;
    for (double v : rep.err_norms) {
        max_err = std::max(max_err, v);
    }

    // rotated next-segment frames, torsion blocks
    std::vector<GridTaylor> s_tor(m);
    std::vector<GridTaylor> eta(m);
    for (int i = 0; i < m; ++i) {
        const int next = (i + 1) % m;
        const GridTaylor pr = compose_rotation(frames[next].P, wm, lm);
        const GridTaylor nr = block(pr, 0, 3, 6, 3);
        s_tor[i] = torsion_from_transport(nr, dphi_n[i]);
        // eta = Omega0 (P o R)^T Omega0 E (the sign of -E is already folded
        // into this expression).
        eta[i] = omega0_times(mul(transpose(pr), omega0_times(err[i])));
    }

    if (cfg.diagnostics) {
        StepDiagnostics d;
        for (int i = 0; i < m; ++i) {
            d.lagrangianity = std::max(d.lagrangianity, lagrangianity_residual(frames[i].L));
            d.symplecticity = std::max(d.symplecticity, symplecticity_residual(frames[i].P));
            d.inverse_formula = std::max(d.inverse_formula, inverse_formula_residual(frames[i].P));
            d.min_sv_L = std::min(i == 0 ? std::numeric_limits<double>::infinity() : d.min_sv_L,
                                  min_singular_value_order0(frames[i].L));
            // reducibility: (P o R)^{-1} D phi P - [[Lambda, S], [0, Lambda^{-T}]]
            const int next = (i + 1) % m;
            const GridTaylor pr = compose_rotation(frames[next].P, wm, lm);
            const GridTaylor red = mul(inverse_P(pr), hcat(dphi_l[i], dphi_n[i]));
            GridTaylor expect = detail::constant_grid(nt, nf, [&] {
                Eigen::MatrixXd b = Eigen::MatrixXd::Zero(6, 6);
                b(0, 0) = b(1, 1) = 1.0;
                b(2, 2) = lm;
                b(3, 3) = b(4, 4) = 1.0;
                b(5, 5) = 1.0 / lm;
                return b;
            }());
            set_block(expect, add(block(expect, 0, 3, 3, 3), s_tor[i]), 0, 3);
            d.reducibility = std::max(d.reducibility, max_sup_norm(sub(red, expect)));
        }
        rep.diagnostics = d;
    }

    if (gate > 0.0 && rep.err_norms[nt] < gate) {
        rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        return rep;
    }

    // 4. Fourier blocks of eta per segment: components (0,1 | 2 | 3,4 | 5).
    std::vector<TaylorFourier> eta1(m), eta2(m), eta3(m), eta4(m);
    for (int i = 0; i < m; ++i) {
        const TaylorFourier ef = dft_forward(eta[i]);
        TaylorFourier e1(nt, nf, 2, 1), e2(nt, nf, 1, 1), e3(nt, nf, 2, 1), e4(nt, nf, 1, 1);
        for (int j = 0; j <= nt; ++j) {
            for (int k = 0; k < nf; ++k) {
                e1.coeff(j, k, 0, 0) = ef.coeff(j, k, 0, 0);
                e1.coeff(j, k, 1, 0) = ef.coeff(j, k, 1, 0);
                e2.coeff(j, k, 0, 0) = ef.coeff(j, k, 2, 0);
                e3.coeff(j, k, 0, 0) = ef.coeff(j, k, 3, 0);
                e3.coeff(j, k, 1, 0) = ef.coeff(j, k, 4, 0);
                e4.coeff(j, k, 0, 0) = ef.coeff(j, k, 5, 0);
            }
        }
        eta1[i] = std::move(e1);
        eta2[i] = std::move(e2);
        eta3[i] = std::move(e3);
        eta4[i] = std::move(e4);
    }

    CohomologyPolicy policy;
    policy.divisor_floor = cfg.divisor_floor;
    // Obstruction averages are quadratically small in the entering error;
    // the gate scales accordingly and only catches structural inconsistency.
    policy.resonance_tolerance = std::max(cfg.resonance_tolerance, 100.0 * max_err * (1.0 + max_err));

    // 5. xi^4 chain, alpha = lambda_m^{-1}: never resonant.
    const double alpha4 = 1.0 / lm;
    auto [xi4_0, rep4] = cohomology_solve(std::pow(alpha4, m), 1.0, lam, sol.omega,
                                          detail::compose_chain_rhs(eta4, alpha4, wm, lm), policy);
    rep.min_divisor = rep4.min_divisor;
    std::vector<TaylorFourier> xi4 = detail::back_substitute_chain(eta4, xi4_0, alpha4, wm, lm);

    // 6. xi~^3 chain, alpha = 1: obstruction at (0, 0) is zeroed.
    auto [xi3_0, rep3] = cohomology_solve(1.0, 1.0, lam, sol.omega, detail::compose_chain_rhs(eta3, 1.0, wm, lm),
                                          policy);
    rep.min_divisor = std::min(rep.min_divisor, rep3.min_divisor);
    for (const auto &z : rep3.zeroed) {
        rep.obstruction_eta3 = std::max(rep.obstruction_eta3, z.magnitude);
    }
    std::vector<TaylorFourier> xi3t = detail::back_substitute_chain(eta3, xi3_0, 1.0, wm, lm);

    // 7. zeta blocks and their averages.
    std::vector<GridTaylor> s1(m), s2(m), s3(m), s4(m), zeta1(m), zeta2(m), xi3g(m), xi4g(m);
    Eigen::Matrix2d twist = Eigen::Matrix2d::Zero();
    Eigen::RowVector2d s31 = Eigen::RowVector2d::Zero();
    Eigen::Vector2d rhs1 = Eigen::Vector2d::Zero();
    double rhs2 = 0.0;
    for (int i = 0; i < m; ++i) {
        s1[i] = block(s_tor[i], 0, 0, 2, 2);
        s2[i] = block(s_tor[i], 0, 2, 2, 1);
        s3[i] = block(s_tor[i], 2, 0, 1, 2);
        s4[i] = block(s_tor[i], 2, 2, 1, 1);
        xi3g[i] = dft_inverse(xi3t[i], 1e-6);
        xi4g[i] = dft_inverse(xi4[i], 1e-6);
        GridTaylor e1g = dft_inverse(eta1[i], 1e-6);
        GridTaylor e2g = dft_inverse(eta2[i], 1e-6);
        zeta1[i] = sub(sub(e1g, mul(s2[i], xi4g[i])), mul(s1[i], xi3g[i]));
        zeta2[i] = sub(sub(e2g, mul(s4[i], xi4g[i])), mul(s3[i], xi3g[i]));
        twist += average(s1[i], 0);
        s31 += average(s3[i], 1);
        rhs1 += average(zeta1[i], 0);
        rhs2 += average(zeta2[i], 1)(0, 0);
    }

    // 8. the 2 x 2 twist system [[<S^1_0>, 0], [<S^3_1>, -1]].
    rep.twist = twist;
    rep.twist_det = twist.determinant();
    Eigen::Vector2d cavg = Eigen::Vector2d::Zero();
    if (std::abs(rep.twist_det) < cfg.twist_floor) {
        // Degenerate twist (no torsion, as in the linear oracle). The
        // obstruction must then already be quadratically small; it is
        // dropped like the eta^3 average.
        const double obs = rhs1.cwiseAbs().maxCoeff();
        const double allowance = std::max(1e-9, 100.0 * max_err * max_err);
        if (obs > allowance) {
            throw TwistSingular(rep.twist_det, obs);
        }
        rep.twist_degenerate = true;
        rep.obstruction_delta1 = obs;
    } else {
        cavg = twist.partialPivLu().solve(rhs1);
    }
    rep.delta_lambda_m = (s31.dot(cavg) - rhs2) / m;
    rep.delta_lambda = m * std::pow(lm, m - 1) * rep.delta_lambda_m;

    // 9. delta blocks with xi^3 = xi~^3 + <xi^3_0> and the Delta-lambda term.
    const GridTaylor cgrid = detail::constant_grid(nt, nf, cavg);
    std::vector<TaylorFourier> d1(m), d2(m);
    for (int i = 0; i < m; ++i) {
        GridTaylor dg1 = sub(zeta1[i], mul(s1[i], cgrid));
        GridTaylor dg2 = sub(zeta2[i], mul(s3[i], cgrid));
        if (nt >= 1) {
            double *sl = dg2.slice(1, 0, 0);
            for (int l = 0; l < nf; ++l) {
                sl[l] += rep.delta_lambda_m;
            }
        }
        d1[i] = dft_forward(dg1);
        d2[i] = dft_forward(dg2);
    }

    // 10. xi^1 (alpha = 1, free <xi^1_0> = 0) and xi^2 (alpha = lambda_m,
    // free <xi^2_1> = 0).
    auto [xi1_0, rep1] = cohomology_solve(1.0, 1.0, lam, sol.omega, detail::compose_chain_rhs(d1, 1.0, wm, lm),
                                          policy);
    for (const auto &z : rep1.zeroed) {
        rep.obstruction_delta1 = std::max(rep.obstruction_delta1, z.magnitude);
    }
    auto [xi2_0, rep2] = cohomology_solve(std::pow(lm, m), 1.0, lam, sol.omega,
                                          detail::compose_chain_rhs(d2, lm, wm, lm), policy);
    rep.min_divisor = std::min({rep.min_divisor, rep1.min_divisor, rep2.min_divisor});
    std::vector<TaylorFourier> xi1 = detail::back_substitute_chain(d1, xi1_0, 1.0, wm, lm);
    std::vector<TaylorFourier> xi2 = detail::back_substitute_chain(d2, xi2_0, lm, wm, lm);

    // 11. assemble xi, update W <- W + P xi and lambda_m.
    for (int i = 0; i < m; ++i) {
        GridTaylor xig(nt, nf, 6, 1);
        const GridTaylor x1 = dft_inverse(xi1[i], 1e-6);
        const GridTaylor x2 = dft_inverse(xi2[i], 1e-6);
        GridTaylor x3 = xi3g[i];
        for (int c = 0; c < 2; ++c) {
            double *sl = x3.slice(0, c, 0);
            for (int l = 0; l < nf; ++l) {
                sl[l] += cavg(c);
            }
        }
        set_block(xig, x1, 0, 0);
        set_block(xig, x2, 2, 0);
        set_block(xig, x3, 3, 0);
        set_block(xig, xi4g[i], 5, 0);
        sol.W[i] = add(sol.W[i], mul(frames[i].P, xig));
    }
    sol.lambda_m += rep.delta_lambda_m;
    rep.applied = true;
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return rep;
}

// --- derived solution transforms -------------------------------------------

inline WhiskerSolution solution_with_order(const WhiskerSolution &sol, int nt)
{
    WhiskerSolution out = sol;
    for (auto &w : out.W) {
        w = with_order(w, nt);
    }
    return out;
}

inline WhiskerSolution solution_resampled(const WhiskerSolution &sol, int nf)
{
    WhiskerSolution out = sol;
    for (auto &w : out.W) {
        w = resample(w, nf);
    }
    return out;
}

inline void solution_low_pass(WhiskerSolution &sol, double r_f)
{
    for (auto &w : sol.W) {
        w = dft_inverse(low_pass(dft_forward(w), r_f), 1e-6);
    }
}

inline void solution_rescale_s(WhiskerSolution &sol, double rho)
{
    for (auto &w : sol.W) {
        w = rescale_s(w, rho);
    }
}

// The unstable whisker of a reversible field: W~ = rho o W satisfies the
// invariance equation of the time-reversed flow with the same lambda, omega.
template <typename Model>
inline WhiskerSolution unstable_from_stable(const Model &model, const WhiskerSolution &sol)
{
    const Mat6 v = model.involution_matrix();
    WhiskerSolution out = sol;
    out.T = -sol.T;
    for (auto &w : out.W) {
        GridTaylor nw = w;
        for (int j = 0; j <= w.n_taylor(); ++j) {
            for (int l = 0; l < w.n_fourier(); ++l) {
                Vec6 x;
                for (int r = 0; r < 6; ++r) {
                    x(r) = w.at(j, l, r, 0);
                }
                const Vec6 y = v * x;
                for (int r = 0; r < 6; ++r) {
                    nw.at(j, l, r, 0) = y(r);
                }
            }
        }
        w = std::move(nw);
    }
    return out;
}

// --- staged driver (practical implementation) --------------------------------

struct DriveResult
{
    bool met_high_gate = false;
    bool met_low_gate = false;
    bool tails_ok = true;
    int iterations = 0;
    std::vector<double> final_norms;
    std::vector<StepReport> steps;
    std::vector<double> rescalings;
    int nf_final = 0;
    double wall_seconds = 0.0;
};

namespace detail
{

inline double seed_tail(const WhiskerSolution &sol, double r_t)
{
    double t = 0.0;
    for (const auto &w : sol.W) {
        const TaylorFourier f = dft_forward(w);
        t = std::max(t, tail(f, 0, r_t));
        if (w.n_taylor() >= 1) {
            t = std::max(t, tail(f, 1, r_t));
        }
    }
    return t;
}

} // namespace detail

template <typename Model>
inline DriveResult drive(const Model &model, WhiskerSolution &sol, const NewtonConfig &cfg)
{
    const auto t_start = std::chrono::steady_clock::now();
    DriveResult res;

    // tails of W_0 and W_1 decide whether the Fourier grid is refined.
    for (int attempt = 0; attempt < cfg.n_t; ++attempt) {
        if (detail::seed_tail(sol, cfg.r_t) > cfg.eps_t && sol.n_fourier() < cfg.nf_max) {
            sol = solution_resampled(sol, std::min(2 * sol.n_fourier(), cfg.nf_max));
        } else {
            break;
        }
    }

    int base = std::max(1, sol.n_taylor());
    int ncur = std::min(cfg.nt, std::max(cfg.nt_init, base));
    bool jumped_to_final = false;

    while (true) {
        const bool final_stage = ncur == cfg.nt;
        const double gate = final_stage ? cfg.eps_tilde : cfg.eps_W;
        sol = solution_with_order(sol, ncur);

        // One stage of iterations at order ncur. The quadratic order ladder
        // starts from the orders already correct and is capped by the stage
        // order; a step whose entry error at its working order is below the
        // gate is skipped without spending budget.
        int applied = 0, rung = 0;
        double top_norm = std::numeric_limits<double>::infinity();
        while (applied < cfg.n_it) {
            const long long ladder = (static_cast<long long>(base) + 1) << (rung + 1);
            const int work = static_cast<int>(std::min<long long>(ladder - 1, ncur));
            WhiskerSolution ws = solution_with_order(sol, work);
            StepReport rep = newton_step(model, ws, cfg, gate);
            if (work == ncur) {
                top_norm = rep.err_norms[work];
            }
            const bool done = !rep.applied && work == ncur;
            if (rep.applied) {
                solution_low_pass(ws, cfg.r_f);
                // merge back the refreshed low orders
                for (int i = 0; i < sol.m; ++i) {
                    for (int j = 0; j <= work; ++j) {
                        for (int r = 0; r < 6; ++r) {
                            std::copy(ws.W[i].slice(j, r, 0), ws.W[i].slice(j, r, 0) + sol.W[i].n_fourier(),
                                      sol.W[i].slice(j, r, 0));
                        }
                    }
                }
                sol.lambda_m = ws.lambda_m;
                ++applied;
                ++res.iterations;
            }
            res.steps.push_back(std::move(rep));
            ++rung;
            if (done) {
                break;
            }
        }
        if (top_norm == std::numeric_limits<double>::infinity()) {
            // the ladder never reached the stage order within the budget
            const InvarianceData meas = invariance_error(model, sol, cfg);
            top_norm = meas.norms[ncur];
        }

        if (final_stage) {
            break;
        }
        base = ncur;
        // radius-of-convergence estimate and s-rescaling
        const double r = top_norm > 0.0 ? std::pow(top_norm, -1.0 / ncur) : std::numeric_limits<double>::infinity();
        if (std::isfinite(r) && (r < cfg.r_tilde || r > 1.0)) {
            solution_rescale_s(sol, r);
            res.rescalings.push_back(r);
            ncur = std::min(ncur + cfg.delta_nt, cfg.nt);
        } else {
            ncur = cfg.nt;
            jumped_to_final = true;
        }
        (void)jumped_to_final;
    }

    const InvarianceData fin = invariance_error(model, sol, cfg);
    res.final_norms = fin.norms;
    res.met_high_gate = fin.norms[sol.n_taylor()] < cfg.eps_tilde;
    res.met_low_gate = fin.norms[0] <= cfg.low_gate && (sol.n_taylor() < 1 || fin.norms[1] <= cfg.low_gate);
    res.tails_ok = detail::seed_tail(sol, cfg.r_t) <= cfg.eps_t || sol.n_fourier() < cfg.nf_max;
    res.nf_final = sol.n_fourier();
    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return res;
}

// --- seeding from a vertical Lyapunov orbit ----------------------------------

struct PeriodicOrbit
{
    State z0;
    double T = 0.0;
    Mat6 monodromy;
    double residual = 0.0;
    int iterations = 0;
};

struct MonodromyDecomposition
{
    double lambda_stable = 0.0;
    double lambda_unstable = 0.0;
    double rotation = 0.0; // arg of the center multiplier / 2 pi, in [0, 1)
    Eigen::Matrix<std::complex<double>, 6, 1> v_center;
    Vec6 v_stable;
    Vec6 v_unstable;
    double unit_pair_error = 0.0;
};

inline MonodromyDecomposition monodromy_decomposition(const Mat6 &monodromy)
{
    constexpr double two_pi = 6.283185307179586476925286766559;
    Eigen::EigenSolver<Mat6> es(monodromy);
    if (es.info() != Eigen::Success) {
        throw SeedError("monodromy eigensolver failed");
    }
    const auto vals = es.eigenvalues();
    const auto vecs = es.eigenvectors();
    MonodromyDecomposition out;
    // The unit pair of the orbit is defective and may surface as a spurious
    // complex pair; the true center pair is the one of largest |Im|.
    int i_center = -1, i_s = -1, i_u = -1;
    double unit_err = 0.0;
    for (int i = 0; i < 6; ++i) {
        const std::complex<double> v = vals(i);
        if (v.imag() > 1e-8 && (i_center < 0 || v.imag() > vals(i_center).imag())) {
            i_center = i;
        }
        if (std::abs(v.imag()) < 1e-4) {
            const double re = v.real();
            if (re > 2.0 && (i_u < 0 || re > vals(i_u).real())) {
                i_u = i;
            } else if (re > 0.0 && re < 0.5 && (i_s < 0 || re < vals(i_s).real())) {
                i_s = i;
            }
        }
    }
    if (i_center < 0 || i_s < 0 || i_u < 0 || vals(i_center).imag() <= 1e-4) {
        throw SeedError("monodromy spectrum not of the expected unit x center x saddle type");
    }
    int i_conj = -1;
    for (int i = 0; i < 6; ++i) {
        if (i != i_center && (i_conj < 0 || std::abs(vals(i) - std::conj(vals(i_center))) < std::abs(vals(i_conj) - std::conj(vals(i_center))))) {
            i_conj = i;
        }
    }
    for (int i = 0; i < 6; ++i) {
        if (i == i_center || i == i_conj || i == i_s || i == i_u) {
            continue;
        }
        unit_err = std::max(unit_err, std::abs(vals(i) - 1.0));
    }
    out.lambda_stable = vals(i_s).real();
    out.lambda_unstable = vals(i_u).real();
    out.rotation = std::arg(vals(i_center)) / two_pi;
    if (out.rotation < 0.0) {
        out.rotation += 1.0;
    }
    out.unit_pair_error = std::isfinite(unit_err) ? unit_err : 0.0;

    // deterministic normalization: unit norm, dominant component real > 0
    Eigen::Matrix<std::complex<double>, 6, 1> vc = vecs.col(i_center);
    vc.normalize();
    int imax = 0;
    for (int r = 1; r < 6; ++r) {
        if (std::abs(vc(r)) > std::abs(vc(imax))) {
            imax = r;
        }
    }
    vc *= std::conj(vc(imax)) / std::abs(vc(imax));
    out.v_center = vc;

    const auto real_vec = [&](int i) {
        Vec6 v = vecs.col(i).real();
        v.normalize();
        int rmax = 0;
        for (int r = 1; r < 6; ++r) {
            if (std::abs(v(r)) > std::abs(v(rmax))) {
                rmax = r;
            }
        }
        if (v(rmax) < 0.0) {
            v = -v;
        }
        return v;
    };
    out.v_stable = real_vec(i_s);
    out.v_unstable = real_vec(i_u);
    return out;
}

namespace detail
{

// Orthonormal bases of the +1 and -1 eigenspaces of the (symmetric,
// orthogonal) involution matrix.
inline std::pair<Eigen::Matrix<double, 6, 3>, Eigen::Matrix<double, 6, 3>> involution_split(const Mat6 &v)
{
    Eigen::SelfAdjointEigenSolver<Mat6> es(v);
    Eigen::Matrix<double, 6, 3> plus, minus;
    int ip = 0, im = 0;
    for (int i = 0; i < 6; ++i) {
        if (es.eigenvalues()(i) > 0.0) {
            plus.col(ip++) = es.eigenvectors().col(i);
        } else {
            minus.col(im++) = es.eigenvectors().col(i);
        }
    }
    if (ip != 3 || im != 3) {
        throw SeedError("involution eigenspaces are not 3 + 3 dimensional");
    }
    return {plus, minus};
}

} // namespace detail

namespace detail
{

template <typename Model>
inline PeriodicOrbit finish_orbit(const Model &model, const Vec6 &z, double period, const IntegratorConfig &icfg,
                                  int iterations)
{
    PeriodicOrbit orbit;
    for (int i = 0; i < 6; ++i) {
        orbit.z0[i] = z(i);
    }
    orbit.T = period;
    orbit.iterations = iterations;
    auto [zf, mono] = flow_variational(model, orbit.z0, period, icfg);
    orbit.monodromy = mono;
    double res = 0.0;
    for (int i = 0; i < 6; ++i) {
        res = std::max(res, std::abs(zf[i] - orbit.z0[i]));
    }
    orbit.residual = res;
    return orbit;
}

} // namespace detail

// Direction of the vertical linear mode inside the fixed set of the
// involution, unit norm (the seed direction of the Lyapunov family).
template <typename Model>
inline Vec6 vertical_seed_direction(const Model &model)
{
    const auto [bplus, bminus] = detail::involution_split(model.involution_matrix());
    const auto spec = equilibrium_spectrum(model);
    Vec6 wr = (bplus * bplus.transpose()) * spec.v_vertical.real();
    Vec6 wi = (bplus * bplus.transpose()) * spec.v_vertical.imag();
    Vec6 w = wr.norm() >= wi.norm() ? wr : wi;
    w.normalize();
    return w;
}

// Symmetric periodic orbit with a fixed amplitude along the dominant
// vertical coordinate; the period is an unknown. Damped Newton in the fixed
// set of the involution, from an explicit seed.
template <typename Model>
inline PeriodicOrbit vertical_orbit_fixed_amplitude(const Model &model, double amplitude, const State &z_seed,
                                                    double t_seed, const IntegratorConfig &icfg = {},
                                                    double max_step = 0.05)
{
    const State eqa = model.equilibrium();
    Vec6 eq;
    for (int i = 0; i < 6; ++i) {
        eq(i) = eqa[i];
    }
    const auto [bplus, bminus] = detail::involution_split(model.involution_matrix());
    const Vec6 w = vertical_seed_direction(model);
    const Eigen::Vector3d wfix = bplus.transpose() * w;
    int ia = 0;
    for (int i = 1; i < 3; ++i) {
        if (std::abs(wfix(i)) > std::abs(wfix(ia))) {
            ia = i;
        }
    }

    Vec6 zs;
    for (int i = 0; i < 6; ++i) {
        zs(i) = z_seed[i];
    }
    Eigen::Vector3d u = bplus.transpose() * (zs - eq);
    u(ia) = amplitude * (wfix(ia) > 0 ? 1.0 : -1.0) * std::abs(wfix(ia));
    const double a_fixed = u(ia);

    double period = t_seed;
    double residual = std::numeric_limits<double>::infinity();
    int it = 0;
    for (; it < 40; ++it) {
        Vec6 zv = eq + bplus * u;
        State z;
        for (int i = 0; i < 6; ++i) {
            z[i] = zv(i);
        }
        auto [zh, mh] = flow_variational(model, z, period / 2, icfg);
        Vec6 zhv, xf;
        for (int i = 0; i < 6; ++i) {
            zhv(i) = zh[i];
        }
        const State xs = vector_field_point(model, zh);
        for (int i = 0; i < 6; ++i) {
            xf(i) = xs[i];
        }
        const Eigen::Vector3d g = bminus.transpose() * zhv;
        residual = g.cwiseAbs().maxCoeff();
        if (residual < 1e-13) {
            break;
        }
        Eigen::Matrix3d jac;
        int col = 0;
        for (int i = 0; i < 3; ++i) {
            if (i != ia) {
                jac.col(col++) = bminus.transpose() * (mh * bplus.col(i));
            }
        }
        jac.col(2) = 0.5 * (bminus.transpose() * xf);
        Eigen::Vector3d du = jac.partialPivLu().solve(-g);
        const double dn = du.cwiseAbs().maxCoeff();
        if (dn > max_step) {
            du *= max_step / dn;
        }
        col = 0;
        for (int i = 0; i < 3; ++i) {
            if (i != ia) {
                u(i) += du(col++);
            }
        }
        u(ia) = a_fixed;
        period += du(2);
        if (!(period > 0.0) || !std::isfinite(period)) {
            throw SeedError("vertical orbit continuation lost a valid period");
        }
    }
    if (residual >= 1e-11) {
        throw SeedError("vertical orbit (fixed amplitude) did not converge, residual " + std::to_string(residual));
    }
    return detail::finish_orbit(model, eq + bplus * u, period, icfg, it);
}

// Symmetric periodic orbit at fixed period T (the family parameter used
// throughout): damped Newton in the fixed set of the involution.
template <typename Model>
inline PeriodicOrbit vertical_lyapunov(const Model &model, double t_target, const State &z_seed,
                                       const IntegratorConfig &icfg = {}, double max_step = 0.05)
{
    const State eqa = model.equilibrium();
    Vec6 eq;
    for (int i = 0; i < 6; ++i) {
        eq(i) = eqa[i];
    }
    const auto [bplus, bminus] = detail::involution_split(model.involution_matrix());
    Vec6 zs;
    for (int i = 0; i < 6; ++i) {
        zs(i) = z_seed[i];
    }
    Eigen::Vector3d u = bplus.transpose() * (zs - eq);

    double residual = std::numeric_limits<double>::infinity();
    int it = 0;
    for (; it < 40; ++it) {
        Vec6 zv = eq + bplus * u;
        State z;
        for (int i = 0; i < 6; ++i) {
            z[i] = zv(i);
        }
        auto [zh, mh] = flow_variational(model, z, t_target / 2, icfg);
        Vec6 zhv;
        for (int i = 0; i < 6; ++i) {
            zhv(i) = zh[i];
        }
        const Eigen::Vector3d g = bminus.transpose() * zhv;
        residual = g.cwiseAbs().maxCoeff();
        if (residual < 1e-13) {
            break;
        }
        const Eigen::Matrix3d jac = bminus.transpose() * mh * bplus;
        Eigen::Vector3d du = jac.partialPivLu().solve(-g);
        const double dn = du.cwiseAbs().maxCoeff();
        if (dn > max_step) {
            du *= max_step / dn;
        }
        u += du;
    }
    if (residual >= 1e-11) {
        throw SeedError("vertical orbit (fixed period) did not converge, residual " + std::to_string(residual));
    }
    return detail::finish_orbit(model, eq + bplus * u, t_target, icfg, it);
}

// Walk the vertical Lyapunov family in amplitude until predicate(orbit)
// returns true; each solve is seeded by linear extrapolation of the two
// previous orbits. Returns the bracketing pair (last false, first true).
template <typename Model, typename Pred>
inline std::pair<PeriodicOrbit, PeriodicOrbit> walk_vertical_family(const Model &model, double a_start, double a_step,
                                                                    double a_max, Pred &&predicate,
                                                                    const IntegratorConfig &icfg = {})
{
    const auto spec = equilibrium_spectrum(model);
    const Vec6 w = vertical_seed_direction(model);
    const State eq = model.equilibrium();

    struct Sample
    {
        PeriodicOrbit orbit;
        double amplitude;
    };
    std::vector<Sample> chain;
    double step = a_step;
    double a_try = a_start;
    int guard = 0;
    while (true) {
        if (++guard > 1000) {
            throw SeedError("walk_vertical_family: too many continuation steps");
        }
        // seed by linear extrapolation of the last two family samples
        State z_seed = eq;
        double t_seed = 1.0 / spec.omega_vertical;
        if (chain.size() >= 2) {
            const Sample &s1 = chain[chain.size() - 2], &s2 = chain.back();
            const double f = (a_try - s2.amplitude) / (s2.amplitude - s1.amplitude);
            for (int i = 0; i < 6; ++i) {
                z_seed[i] = s2.orbit.z0[i] + f * (s2.orbit.z0[i] - s1.orbit.z0[i]);
            }
            t_seed = s2.orbit.T + f * (s2.orbit.T - s1.orbit.T);
        } else if (chain.size() == 1) {
            z_seed = chain.back().orbit.z0;
            t_seed = chain.back().orbit.T;
        } else {
            for (int i = 0; i < 6; ++i) {
                z_seed[i] += a_try * w(i);
            }
        }

        bool ok = true;
        PeriodicOrbit po;
        try {
            po = vertical_orbit_fixed_amplitude(model, a_try, z_seed, t_seed, icfg);
            // reject jumps to a different branch
            for (int i = 0; i < 6 && ok; ++i) {
                ok = std::abs(po.z0[i] - z_seed[i]) < 0.1;
            }
            ok = ok && std::abs(po.T - t_seed) < 0.3;
        } catch (const SeedError &) {
            ok = false;
        }
        if (!ok) {
            step *= 0.5;
            if (step < 1e-7) {
                throw SeedError("walk_vertical_family: continuation stalled near amplitude " + std::to_string(a_try));
            }
            a_try = (chain.empty() ? 0.0 : chain.back().amplitude) + step;
            continue;
        }
        if (predicate(po)) {
            return {chain.empty() ? po : chain.back().orbit, po};
        }
        chain.push_back({po, a_try});
        step = std::min(step * 1.5, a_step);
        if (a_try + step > a_max) {
            throw SeedError("walk_vertical_family: predicate never satisfied before amplitude cap");
        }
        a_try += step;
    }
}

// Whisker seed of orders 0..1 around a vertical Lyapunov orbit. Segment i
// lives at the orbit point phi_{i T/m}(z0); its circle follows the center
// eigenvector and its s-direction the stable one, both transported along
// the orbit by the variational flow (so no hyperbolic error amplification
// enters the seed).
template <typename Model>
inline WhiskerSolution initial_guess(const Model &model, const PeriodicOrbit &orbit, double eps_amp, double omega,
                                     int m, int nf, const NewtonConfig &cfg)
{
    constexpr double two_pi = 6.283185307179586476925286766559;
    const MonodromyDecomposition dec = monodromy_decomposition(orbit.monodromy);
    if (!(dec.lambda_stable > 0.0)) {
        throw SeedError("stable multiplier is not positive");
    }

    WhiskerSolution sol;
    sol.model = model_config(model);
    sol.m = m;
    sol.T = orbit.T;
    sol.omega = omega;
    sol.lambda_m = std::pow(dec.lambda_stable, 1.0 / m);

    // orbit points and cumulative transition matrices per segment
    std::vector<State> zs(m);
    std::vector<Mat6> cum(m);
    zs[0] = orbit.z0;
    cum[0] = Mat6::Identity();
    for (int i = 1; i < m; ++i) {
        auto [zn, phi] = flow_variational(model, zs[i - 1], sol.t_m(), cfg.integrator);
        zs[i] = zn;
        cum[i] = phi * cum[i - 1];
    }

    for (int i = 0; i < m; ++i) {
        const Eigen::Matrix<std::complex<double>, 6, 1> u = cum[i] * dec.v_center;
        const Vec6 s_dir = std::pow(sol.lambda_m, -i) * (cum[i] * dec.v_stable);
        GridTaylor w(1, nf, 6, 1);
        for (int l = 0; l < nf; ++l) {
            const double a = two_pi * (static_cast<double>(l) / nf - i * sol.omega_m());
            for (int r = 0; r < 6; ++r) {
                w.at(0, l, r, 0) = zs[i][r] + eps_amp * (std::cos(a) * u(r).real() - std::sin(a) * u(r).imag());
                w.at(1, l, r, 0) = s_dir(r);
            }
        }
        sol.W.push_back(std::move(w));
    }

    const InvarianceData e = invariance_error(model, sol, cfg);
    if (e.norms[0] > cfg.seed_gate) {
        throw SeedError("seed invariance error " + std::to_string(e.norms[0]) + " above gate");
    }
    return sol;
}

} // namespace whisker

#endif
