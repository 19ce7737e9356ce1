#pragma once

#include <cmath>

namespace tpd {

// A scalar bundled with its first partials in x and t and its second partial
// in x, propagated exactly through arithmetic as truncated Taylor
// coefficients. The layout (4 contiguous doubles, 32-byte aligned) lets the
// hot loops treat a jet as one AVX2 lane group.
struct alignas(32) Jet2 {
    double v = 0.0;
    double dx = 0.0;
    double dt = 0.0;
    double dxx = 0.0;

    constexpr Jet2() = default;
    constexpr Jet2(double value) : v(value) {}
    constexpr Jet2(double value, double d_dx, double d_dt, double d2_dx2)
        : v(value), dx(d_dx), dt(d_dt), dxx(d2_dx2) {}

    // Seeds for the two independent coordinates.
    static constexpr Jet2 var_x(double x) { return {x, 1.0, 0.0, 0.0}; }
    static constexpr Jet2 var_t(double t) { return {t, 0.0, 1.0, 0.0}; }

    constexpr Jet2& operator+=(const Jet2& r) {
        v += r.v; dx += r.dx; dt += r.dt; dxx += r.dxx;
        return *this;
    }
    constexpr Jet2& operator-=(const Jet2& r) {
        v -= r.v; dx -= r.dx; dt -= r.dt; dxx -= r.dxx;
        return *this;
    }
    constexpr Jet2& operator*=(const Jet2& r) { return *this = *this * r; }
    constexpr Jet2& operator/=(const Jet2& r) { return *this = *this / r; }

    friend constexpr Jet2 operator-(const Jet2& a) { return {-a.v, -a.dx, -a.dt, -a.dxx}; }

    friend constexpr Jet2 operator+(const Jet2& a, const Jet2& b) {
        return {a.v + b.v, a.dx + b.dx, a.dt + b.dt, a.dxx + b.dxx};
    }
    friend constexpr Jet2 operator-(const Jet2& a, const Jet2& b) {
        return {a.v - b.v, a.dx - b.dx, a.dt - b.dt, a.dxx - b.dxx};
    }
    friend constexpr Jet2 operator*(const Jet2& a, const Jet2& b) {
        return {a.v * b.v,
                a.dx * b.v + a.v * b.dx,
                a.dt * b.v + a.v * b.dt,
                a.dxx * b.v + 2.0 * a.dx * b.dx + a.v * b.dxx};
    }
    // Solves q*b = a coefficient by coefficient; one divide per component.
    friend constexpr Jet2 operator/(const Jet2& a, const Jet2& b) {
        Jet2 q;
        q.v = a.v / b.v;
        q.dx = (a.dx - q.v * b.dx) / b.v;
        q.dt = (a.dt - q.v * b.dt) / b.v;
        q.dxx = (a.dxx - 2.0 * q.dx * b.dx - q.v * b.dxx) / b.v;
        return q;
    }

    friend constexpr bool operator==(const Jet2& a, const Jet2& b) {
        return a.v == b.v && a.dx == b.dx && a.dt == b.dt && a.dxx == b.dxx;
    }

    bool finite() const {
        return std::isfinite(v) && std::isfinite(dx) && std::isfinite(dt) && std::isfinite(dxx);
    }
};

inline Jet2 scaled(const Jet2& a, double s) { return {a.v * s, a.dx * s, a.dt * s, a.dxx * s}; }

}  // namespace tpd
