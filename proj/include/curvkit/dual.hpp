#pragma once

#include <cmath>
#include <type_traits>

namespace curvkit {

/// Forward-mode dual number. Nesting (Dual<Dual<double>>) gives one extra
/// derivative order per level; the evaluation engine instantiates the same
/// code for double, Dual<double> (HVPs) and Dual<Dual<double>> (the
/// third-order contraction used by the Hessian-trace penalty).
template <class T>
struct Dual {
    T v{};  // value
    T d{};  // tangent

    Dual() = default;
    Dual(T value) : v(value) {}
    Dual(T value, T tangent) : v(value), d(tangent) {}
};

using Dual1 = Dual<double>;
using Dual2 = Dual<Dual<double>>;

template <class T>
inline Dual<T> operator+(const Dual<T>& a, const Dual<T>& b) { return {a.v + b.v, a.d + b.d}; }
template <class T>
inline Dual<T> operator-(const Dual<T>& a, const Dual<T>& b) { return {a.v - b.v, a.d - b.d}; }
template <class T>
inline Dual<T> operator-(const Dual<T>& a) { return {-a.v, -a.d}; }
template <class T>
inline Dual<T> operator*(const Dual<T>& a, const Dual<T>& b) {
    return {a.v * b.v, a.v * b.d + a.d * b.v};
}
template <class T>
inline Dual<T> operator*(double s, const Dual<T>& a) { return {s * a.v, s * a.d}; }
template <class T>
inline Dual<T> operator*(const Dual<T>& a, double s) { return {a.v * s, a.d * s}; }
template <class T>
inline Dual<T> operator/(const Dual<T>& a, double s) { return {a.v / s, a.d / s}; }

template <class T>
inline Dual<T>& operator+=(Dual<T>& a, const Dual<T>& b) { a.v = a.v + b.v; a.d = a.d + b.d; return a; }

// scalar helpers shared by double and nested duals
inline double value_of(double x) { return x; }
template <class T>
inline double value_of(const Dual<T>& x) { return value_of(x.v); }

inline bool all_finite(double x) { return std::isfinite(x); }
template <class T>
inline bool all_finite(const Dual<T>& x) { return all_finite(x.v) && all_finite(x.d); }

inline double exp_(double x) { return std::exp(x); }
template <class T>
inline Dual<T> exp_(const Dual<T>& x) {
    T e = exp_(x.v);
    return {e, e * x.d};
}

inline double log_(double x) { return std::log(x); }
template <class T>
inline Dual<T> log_(const Dual<T>& x) {
    return {log_(x.v), x.d / x.v};
}

template <class T>
inline Dual<T> operator/(const Dual<T>& a, const Dual<T>& b) {
    T q = a.v / b.v;
    return {q, (a.d - q * b.d) / b.v};
}

}  // namespace curvkit
