#pragma once

#include <complex>
#include <cstdint>

namespace ddce {

using cd = std::complex<double>;

/// Exact tally of real-valued arithmetic operations, split the way the
/// complexity tables split them: multiplications/divisions vs
/// summations/subtractions.
struct OpCount {
    std::int64_t muldiv = 0;
    std::int64_t addsub = 0;

    OpCount& operator+=(const OpCount& o) {
        muldiv += o.muldiv;
        addsub += o.addsub;
        return *this;
    }
    friend OpCount operator+(OpCount a, const OpCount& b) { return a += b; }
    friend OpCount operator*(std::int64_t n, const OpCount& a) {
        return {n * a.muldiv, n * a.addsub};
    }
    friend bool operator==(const OpCount&, const OpCount&) = default;
};

/// Accumulates operation counts while estimator kernels run.
///
/// Accounting conventions (the ones the analytic tables use):
///   complex / complex division:  6 mul + 2 div,  2 add + 1 sub
///   complex * complex:           4 mul,          3 add
///   complex +/- complex:         2 add
///   real scalar * complex:       2 mul/div
/// Counting is optional: kernels take an OpCounter* that may be null.
class OpCounter {
  public:
    OpCount total;

    void muldiv(std::int64_t n) { total.muldiv += n; }
    void addsub(std::int64_t n) { total.addsub += n; }
    void block(const OpCount& c) { total += c; }
};

namespace counted {

/// a / b via the 6-mul/2-div algorithm: d = re(b)^2 + im(b)^2,
/// n = a * conj(b), result = (re(n)/d, im(n)/d).
inline cd div(const cd& a, const cd& b, OpCounter* c) {
    if (c) {
        c->muldiv(8);
        c->addsub(3);
    }
    const double d = b.real() * b.real() + b.imag() * b.imag();
    return {(a.real() * b.real() + a.imag() * b.imag()) / d,
            (a.imag() * b.real() - a.real() * b.imag()) / d};
}

inline cd mul(const cd& a, const cd& b, OpCounter* c) {
    if (c) {
        c->muldiv(4);
        c->addsub(3);
    }
    return a * b;
}

inline cd add(const cd& a, const cd& b, OpCounter* c) {
    if (c) c->addsub(2);
    return a + b;
}

inline cd sub(const cd& a, const cd& b, OpCounter* c) {
    if (c) c->addsub(2);
    return a - b;
}

/// real scalar times complex; covers both "scale by 1/alpha" divisions and
/// real-weight multiplications, which the tables count identically.
inline cd rscale(double s, const cd& a, OpCounter* c) {
    if (c) c->muldiv(2);
    return s * a;
}

/// complex divided by a real scalar (2 real divisions).
inline cd rdiv(const cd& a, double s, OpCounter* c) {
    if (c) c->muldiv(2);
    return a / s;
}

}  // namespace counted
}  // namespace ddce
