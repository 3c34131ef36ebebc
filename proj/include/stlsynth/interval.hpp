#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace stlsynth {

// Closed interval [lo, hi] with outward-directed semantics left to the caller:
// plain double arithmetic, which is the usual tolerance regime for
// linearization-based reachability (no directed rounding).
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    Interval() = default;
    Interval(double v) : lo(v), hi(v) {}
    Interval(double l, double h) : lo(l), hi(h) {}

    static Interval whole() {
        double inf = std::numeric_limits<double>::infinity();
        return Interval(-inf, inf);
    }

    double mid() const { return 0.5 * (lo + hi); }
    double rad() const { return 0.5 * (hi - lo); }
    double width() const { return hi - lo; }
    bool contains(double v) const { return lo <= v && v <= hi; }
    bool contains(const Interval& o) const { return lo <= o.lo && o.hi <= hi; }
    bool is_degenerate() const { return lo == hi; }

    friend Interval operator+(Interval a, Interval b) { return {a.lo + b.lo, a.hi + b.hi}; }
    friend Interval operator-(Interval a, Interval b) { return {a.lo - b.hi, a.hi - b.lo}; }
    friend Interval operator-(Interval a) { return {-a.hi, -a.lo}; }
    friend Interval operator*(Interval a, Interval b) {
        double p1 = a.lo * b.lo, p2 = a.lo * b.hi, p3 = a.hi * b.lo, p4 = a.hi * b.hi;
        return {std::min(std::min(p1, p2), std::min(p3, p4)),
                std::max(std::max(p1, p2), std::max(p3, p4))};
    }
    friend Interval operator*(double s, Interval a) { return Interval(s) * a; }
    friend Interval operator+(Interval a, double s) { return {a.lo + s, a.hi + s}; }

    Interval& operator+=(const Interval& o) { lo += o.lo; hi += o.hi; return *this; }

    static Interval hull(const Interval& a, const Interval& b) {
        return {std::min(a.lo, b.lo), std::max(a.hi, b.hi)};
    }
    Interval inflate(double abs_eps, double rel) const {
        double r = rad() * rel + abs_eps;
        double c = mid();
        return {c - (rad() + r), c + (rad() + r)};
    }
};

inline Interval recip(const Interval& a) {
    if (a.lo <= 0.0 && a.hi >= 0.0) return Interval::whole();
    return {1.0 / a.hi, 1.0 / a.lo};
}

inline Interval pow_int(const Interval& a, int k) {
    if (k == 0) return Interval(1.0);
    if (k == 1) return a;
    if (k % 2 != 0 || a.lo >= 0.0) {
        // monotone on the whole line (odd) or on [0, inf) (even, nonneg arg)
        return {std::pow(a.lo, k), std::pow(a.hi, k)};
    }
    if (a.hi <= 0.0) return {std::pow(a.hi, k), std::pow(a.lo, k)};
    return {0.0, std::max(std::pow(a.lo, k), std::pow(a.hi, k))};
}

inline Interval sin(const Interval& a) {
    static const double two_pi = 6.283185307179586476925286766559;
    if (a.width() >= two_pi) return {-1.0, 1.0};
    double s1 = std::sin(a.lo), s2 = std::sin(a.hi);
    Interval r{std::min(s1, s2), std::max(s1, s2)};
    // widen over any critical point pi/2 + k*pi inside the argument range
    double k_lo = std::ceil((a.lo - 1.5707963267948966) / 3.141592653589793);
    double k_hi = std::floor((a.hi - 1.5707963267948966) / 3.141592653589793);
    for (double k = k_lo; k <= k_hi; k += 1.0) {
        double crit = 1.5707963267948966 + k * 3.141592653589793;
        double v = std::sin(crit);  // +-1 up to roundoff
        r.lo = std::min(r.lo, v);
        r.hi = std::max(r.hi, v);
    }
    return r;
}

inline Interval cos(const Interval& a) { return sin(a + 1.5707963267948966); }

inline Interval tanh(const Interval& a) { return {std::tanh(a.lo), std::tanh(a.hi)}; }

inline Interval saturate(const Interval& a, double lo, double hi) {
    return {std::clamp(a.lo, lo, hi), std::clamp(a.hi, lo, hi)};
}

inline Interval min(const Interval& a, const Interval& b) {
    return {std::min(a.lo, b.lo), std::min(a.hi, b.hi)};
}
inline Interval max(const Interval& a, const Interval& b) {
    return {std::max(a.lo, b.lo), std::max(a.hi, b.hi)};
}

// Axis-aligned box as a vector of intervals.
using Box = std::vector<Interval>;

inline Box box_hull(const Box& a, const Box& b) {
    Box r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = Interval::hull(a[i], b[i]);
    return r;
}

inline bool box_contains(const Box& b, const std::vector<double>& p, double slack = 0.0) {
    for (std::size_t i = 0; i < b.size(); ++i)
        if (p[i] < b[i].lo - slack || p[i] > b[i].hi + slack) return false;
    return true;
}

}  // namespace stlsynth
