#ifndef WHISKER_JET_HPP
#define WHISKER_JET_HPP

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <type_traits>
#include <vector>

namespace whisker
{

// One truncated univariate real power series a_0 + a_1 s + ... + a_N s^N.
// a_0 is the point value; the ring operations are truncated Cauchy products.
class Jet
{
public:
    Jet() : c_(1, 0.0) {}
    explicit Jet(int order, double value = 0.0) : c_(static_cast<std::size_t>(order) + 1, 0.0)
    {
        if (order < 0) {
            throw std::invalid_argument("Jet: negative order");
        }
        c_[0] = value;
    }

    // value + slope * s (truncated at the requested order).
    static Jet variable(int order, double value, double slope = 1.0)
    {
        Jet j(order, value);
        if (order >= 1) {
            j.c_[1] = slope;
        }
        return j;
    }

    int order() const { return static_cast<int>(c_.size()) - 1; }
    double &operator[](int i) { return c_[i]; }
    double operator[](int i) const { return c_[i]; }
    double value() const { return c_[0]; }
    const std::vector<double> &coeffs() const { return c_; }

    void set_zero()
    {
        for (double &v : c_) {
            v = 0.0;
        }
    }

private:
    std::vector<double> c_;
};

namespace jet_ops
{

inline void check_same(const Jet &a, const Jet &b)
{
    if (a.order() != b.order()) {
        throw std::invalid_argument("jet: order mismatch");
    }
}

inline void add_into(Jet &out, const Jet &a, const Jet &b)
{
    check_same(a, b);
    for (int i = 0; i <= a.order(); ++i) {
        out[i] = a[i] + b[i];
    }
}

inline void sub_into(Jet &out, const Jet &a, const Jet &b)
{
    check_same(a, b);
    for (int i = 0; i <= a.order(); ++i) {
        out[i] = a[i] - b[i];
    }
}

// out must not alias a or b.
inline void mul_into(Jet &out, const Jet &a, const Jet &b)
{
    check_same(a, b);
    const int n = a.order();
    for (int k = 0; k <= n; ++k) {
        double acc = 0.0;
        for (int i = 0; i <= k; ++i) {
            acc += a[i] * b[k - i];
        }
        out[k] = acc;
    }
}

// out must not alias u.
inline void reciprocal_into(Jet &out, const Jet &u)
{
    if (u[0] == 0.0) {
        throw std::domain_error("jet reciprocal: zero constant term");
    }
    const int n = u.order();
    const double inv0 = 1.0 / u[0];
    out[0] = inv0;
    for (int k = 1; k <= n; ++k) {
        double acc = 0.0;
        for (int i = 1; i <= k; ++i) {
            acc += u[i] * out[k - i];
        }
        out[k] = -inv0 * acc;
    }
}

// u^e by the first-order recurrence e u' w = w' u; needs u_0 > 0 for
// fractional e (u_0 != 0 suffices for integer e).
inline void pow_into(Jet &out, const Jet &u, double e)
{
    const int n = u.order();
    const bool integral = e == std::round(e);
    if (u[0] == 0.0 || (!integral && u[0] < 0.0)) {
        throw std::domain_error("jet pow: invalid constant term");
    }
    out[0] = std::pow(u[0], e);
    const double inv0 = 1.0 / u[0];
    for (int k = 1; k <= n; ++k) {
        double acc = 0.0;
        for (int i = 0; i < k; ++i) {
            acc += (e * (k - i) - i) * u[k - i] * out[i];
        }
        out[k] = inv0 / k * acc;
    }
}

} // namespace jet_ops

inline Jet operator+(const Jet &a, const Jet &b)
{
    Jet out(a.order());
    jet_ops::add_into(out, a, b);
    return out;
}

inline Jet operator-(const Jet &a, const Jet &b)
{
    Jet out(a.order());
    jet_ops::sub_into(out, a, b);
    return out;
}

inline Jet operator-(const Jet &a)
{
    Jet out(a.order());
    for (int i = 0; i <= a.order(); ++i) {
        out[i] = -a[i];
    }
    return out;
}

inline Jet operator*(const Jet &a, const Jet &b)
{
    Jet out(a.order());
    jet_ops::mul_into(out, a, b);
    return out;
}

inline Jet operator*(double x, const Jet &a)
{
    Jet out(a.order());
    for (int i = 0; i <= a.order(); ++i) {
        out[i] = x * a[i];
    }
    return out;
}

inline Jet operator+(const Jet &a, double x)
{
    Jet out = a;
    out[0] += x;
    return out;
}

inline Jet operator-(const Jet &a, double x)
{
    Jet out = a;
    out[0] -= x;
    return out;
}

inline Jet reciprocal(const Jet &u)
{
    Jet out(u.order());
    jet_ops::reciprocal_into(out, u);
    return out;
}

inline Jet pow(const Jet &u, double e)
{
    Jet out(u.order());
    jet_ops::pow_into(out, u, e);
    return out;
}

inline double l1_norm(const Jet &a)
{
    double acc = 0.0;
    for (int i = 0; i <= a.order(); ++i) {
        acc += std::abs(a[i]);
    }
    return acc;
}

// Generic ring primitives so vector fields can be written once and
// evaluated on doubles or jets. The destination of mul/pow/reciprocal must
// not alias the operands.
namespace ring
{

template <typename R>
inline void copy(R &out, const R &a)
{
    out = a;
}

template <typename R>
inline void mul(R &out, const R &a, const R &b)
{
    if constexpr (std::is_same_v<R, double>) {
        out = a * b;
    } else {
        jet_ops::mul_into(out, a, b);
    }
}

template <typename R>
inline void pow(R &out, const R &u, double e)
{
    if constexpr (std::is_same_v<R, double>) {
        out = std::pow(u, e);
    } else {
        jet_ops::pow_into(out, u, e);
    }
}

template <typename R>
inline void reciprocal(R &out, const R &u)
{
    if constexpr (std::is_same_v<R, double>) {
        out = 1.0 / u;
    } else {
        jet_ops::reciprocal_into(out, u);
    }
}

template <typename R>
inline double value(const R &u)
{
    if constexpr (std::is_same_v<R, double>) {
        return u;
    } else {
        return u.value();
    }
}

// Lazily sized workspace of ring temporaries shaped like proto.
template <typename R>
inline void ensure_workspace(std::vector<R> &ws, std::size_t n, const R &proto)
{
    if (ws.size() < n) {
        ws.resize(n, proto);
    } else if constexpr (!std::is_same_v<R, double>) {
        if (!ws.empty() && ws[0].order() != proto.order()) {
            ws.assign(n, proto);
        }
    }
}

} // namespace ring

// Ring abstraction shared by the scalar and jet instantiations of the
// integrator. Keeping one code path ensures the order-0 jet flow replays
// the scalar flow bit for bit.
template <typename R>
struct ring_traits;

template <>
struct ring_traits<double>
{
    static double zero_like(const double &) { return 0.0; }
    static void set_zero(double &x) { x = 0.0; }
    static void axpy(double &y, double a, const double &x) { y += a * x; }
    static double l1(const double &x) { return std::abs(x); }
};

template <>
struct ring_traits<Jet>
{
    static Jet zero_like(const Jet &proto) { return Jet(proto.order()); }
    static void set_zero(Jet &x) { x.set_zero(); }
    static void axpy(Jet &y, double a, const Jet &x)
    {
        for (int i = 0; i <= y.order(); ++i) {
            y[i] += a * x[i];
        }
    }
    static double l1(const Jet &x) { return l1_norm(x); }
};

} // namespace whisker

#endif
