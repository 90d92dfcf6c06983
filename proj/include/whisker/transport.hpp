#ifndef WHISKER_TRANSPORT_HPP
#define WHISKER_TRANSPORT_HPP

#include <stdexcept>
#include <string>
#include <vector>

#include <whisker/jet.hpp>
#include <whisker/models.hpp>
#include <whisker/ode.hpp>
#include <whisker/parallel.hpp>
#include <whisker/series.hpp>

namespace whisker
{

struct TransportError : std::runtime_error
{
    TransportError(int l, const std::string &what)
        : std::runtime_error("transport at gridpoint " + std::to_string(l) + ": " + what), gridpoint(l)
    {
    }
    int gridpoint;
};

// The truncated Taylor polynomial attached to one gridpoint of a 6 x 1
// grid-Taylor map is exactly the jet flowed by the integrator.
inline std::vector<Jet> jets_at_gridpoint(const GridTaylor &w, int l)
{
    std::vector<Jet> out(w.rows(), Jet(w.n_taylor()));
    for (int r = 0; r < w.rows(); ++r) {
        for (int j = 0; j <= w.n_taylor(); ++j) {
            out[r][j] = w.at(j, l, r, 0);
        }
    }
    return out;
}

inline void write_jets_at_gridpoint(GridTaylor &w, int l, const Jet *jets, int r0, int count)
{
    for (int r = 0; r < count; ++r) {
        for (int j = 0; j <= w.n_taylor(); ++j) {
            w.at(j, l, r0 + r, 0) = jets[r][j];
        }
    }
}

// phi_T o W, one jet flow per gridpoint, data-parallel over the grid.
template <typename Model>
inline GridTaylor transport_grid(const Model &model, const GridTaylor &w, double T, const IntegratorConfig &cfg = {},
                                 int nthreads = 1, IntegratorStats *stats = nullptr)
{
    if (w.rows() != 6 || w.cols() != 1) {
        throw std::invalid_argument("transport_grid: expected a 6 x 1 map");
    }
    GridTaylor out(w.n_taylor(), w.n_fourier(), 6, 1);
    std::vector<IntegratorStats> per_point(w.n_fourier());
    parallel_for(w.n_fourier(), nthreads, [&](int l) {
        try {
            detail::PointSystem<Model, Jet> sys{&model, {}};
            std::vector<Jet> y = jets_at_gridpoint(w, l);
            integrate_rkf78<Jet>(sys, y, T, cfg, &per_point[l]);
            write_jets_at_gridpoint(out, l, y.data(), 0, 6);
        } catch (const std::exception &e) {
            throw TransportError(l, e.what());
        }
    });
    if (stats != nullptr) {
        for (const auto &s : per_point) {
            stats->steps += s.steps;
            stats->rejections += s.rejections;
        }
    }
    return out;
}

// phi_T o W together with (D phi_T o W) u for the columns of u (6 x k),
// propagated as one jet-linearized system per gridpoint.
template <typename Model>
inline std::pair<GridTaylor, GridTaylor> transport_grid_with_tangents(const Model &model, const GridTaylor &w,
                                                                      const GridTaylor &u, double T,
                                                                      const IntegratorConfig &cfg = {},
                                                                      int nthreads = 1,
                                                                      IntegratorStats *stats = nullptr)
{
    if (w.rows() != 6 || w.cols() != 1) {
        throw std::invalid_argument("transport_grid_with_tangents: expected a 6 x 1 map");
    }
    if (u.rows() != 6 || u.n_taylor() != w.n_taylor() || u.n_fourier() != w.n_fourier()) {
        throw std::invalid_argument("transport_grid_with_tangents: tangent shape mismatch");
    }
    const int k = u.cols();
    GridTaylor phi(w.n_taylor(), w.n_fourier(), 6, 1);
    GridTaylor dphi(w.n_taylor(), w.n_fourier(), 6, k);
    std::vector<IntegratorStats> per_point(w.n_fourier());
    parallel_for(w.n_fourier(), nthreads, [&](int l) {
        try {
            detail::TangentSystem<Model, Jet> sys{&model, k, {}};
            std::vector<Jet> y;
            y.reserve(6 * (1 + k));
            for (int r = 0; r < 6; ++r) {
                Jet j(w.n_taylor());
                for (int jj = 0; jj <= w.n_taylor(); ++jj) {
                    j[jj] = w.at(jj, l, r, 0);
                }
                y.push_back(std::move(j));
            }
            for (int c = 0; c < k; ++c) {
                for (int r = 0; r < 6; ++r) {
                    Jet j(w.n_taylor());
                    for (int jj = 0; jj <= w.n_taylor(); ++jj) {
                        j[jj] = u.at(jj, l, r, c);
                    }
                    y.push_back(std::move(j));
                }
            }
            integrate_rkf78<Jet>(sys, y, T, cfg, &per_point[l]);
            write_jets_at_gridpoint(phi, l, y.data(), 0, 6);
            for (int c = 0; c < k; ++c) {
                for (int r = 0; r < 6; ++r) {
                    for (int jj = 0; jj <= w.n_taylor(); ++jj) {
                        dphi.at(jj, l, r, c) = y[6 * (1 + c) + r][jj];
                    }
                }
            }
        } catch (const std::exception &e) {
            throw TransportError(l, e.what());
        }
    });
    if (stats != nullptr) {
        for (const auto &s : per_point) {
            stats->steps += s.steps;
            stats->rejections += s.rejections;
        }
    }
    return {phi, dphi};
}

// X o W evaluated in the jet ring at every gridpoint (no integration).
template <typename Model>
inline GridTaylor vector_field_grid(const Model &model, const GridTaylor &w)
{
    if (w.rows() != 6 || w.cols() != 1) {
        throw std::invalid_argument("vector_field_grid: expected a 6 x 1 map");
    }
    GridTaylor out(w.n_taylor(), w.n_fourier(), 6, 1);
    std::vector<Jet> ws;
    std::vector<Jet> dy(6, Jet(w.n_taylor()));
    for (int l = 0; l < w.n_fourier(); ++l) {
        const std::vector<Jet> y = jets_at_gridpoint(w, l);
        model.vector_field(y.data(), dy.data(), ws);
        write_jets_at_gridpoint(out, l, dy.data(), 0, 6);
    }
    return out;
}

} // namespace whisker

#endif
