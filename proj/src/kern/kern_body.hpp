#pragma once
// Shared kernel algorithm, instantiated once per backend.  Every arithmetic
// step goes through the backend's IEEE ops (explicit fma, exact sqrt/div,
// shared polynomials), which is what makes the scalar and AVX2 builds agree
// bit-for-bit.  Inputs to exp/log are assumed to be normal doubles in the
// documented domain (positive for log, [-745, 709] after clamping for exp).

#include "poelab/kern/kernels.hpp"

#include <cstring>
#include <limits>

namespace poelab::kern {

namespace detail {

inline constexpr double kLn2Hi = 6.93147180369123816490e-01;
inline constexpr double kLn2Lo = 1.90821492927058770002e-10;
inline constexpr double kLog2e = 1.4426950408889634074;
inline constexpr double kSqrt2 = 1.4142135623730951;
inline constexpr double kExpLoClamp = -746.0;
inline constexpr double kExpHiClamp = 709.0;
// atanh series: log(m) = 2s + 2/3 s^3 + ...,  s = (m-1)/(m+1), |s| <= 0.1716
inline constexpr double kLogC[11] = {
    2.0,        2.0 / 3.0,  2.0 / 5.0,  2.0 / 7.0,  2.0 / 9.0,  2.0 / 11.0,
    2.0 / 13.0, 2.0 / 15.0, 2.0 / 17.0, 2.0 / 19.0, 2.0 / 21.0};
// exp Taylor for |r| <= 0.3466
inline constexpr double kExpC[14] = {
    1.0,
    1.0,
    1.0 / 2.0,
    1.0 / 6.0,
    1.0 / 24.0,
    1.0 / 120.0,
    1.0 / 720.0,
    1.0 / 5040.0,
    1.0 / 40320.0,
    1.0 / 362880.0,
    1.0 / 3628800.0,
    1.0 / 39916800.0,
    1.0 / 479001600.0,
    1.0 / 6227020800.0};
inline constexpr std::uint64_t kMantMask = 0x000FFFFFFFFFFFFFull;
inline constexpr std::uint64_t kOneBits = 0x3FF0000000000000ull;
inline constexpr std::uint64_t kU52Magic = 0x4330000000000000ull; // 2^52
inline constexpr double kTwo52 = 4503599627370496.0;
// 2^52 + 2^51: bits(j + magic) - bits(magic) == (int64)j for |j| < 2^51
inline constexpr double kI64Magic = 6755399441055744.0;
inline constexpr std::uint64_t kI64MagicBits = 0x4338000000000000ull;

template <class B>
struct Body {
    using V = typename B::V;
    using I = typename B::I;

    static V log4(V x) {
        I bits = B::bits(x);
        I eb = B::shr52(bits);
        V m0 = B::value(B::or_i(B::and_i(bits, kMantMask), kOneBits));
        V e0 = B::sub(B::value(B::or_i(eb, kU52Magic)), B::set1(kTwo52));
        e0 = B::sub(e0, B::set1(1023.0));
        // fold the mantissa into [1/sqrt2, sqrt2)
        V sq = B::set1(kSqrt2);
        V m = B::blend_gt(m0, sq, B::mul(m0, B::set1(0.5)), m0);
        V e = B::blend_gt(m0, sq, B::add(e0, B::set1(1.0)), e0);
        V s = B::div(B::sub(m, B::set1(1.0)), B::add(m, B::set1(1.0)));
        V z = B::mul(s, s);
        V p = B::set1(kLogC[10]);
        for (int k = 9; k >= 0; --k) p = B::fma_(p, z, B::set1(kLogC[k]));
        p = B::mul(p, s);
        V r = B::fma_(e, B::set1(kLn2Lo), p);
        return B::fma_(e, B::set1(kLn2Hi), r);
    }

    // 2^j for integer-valued j in [-1074/2 - 1, 514]; split callers keep
    // each half in the normal-exponent range.
    static V pow2i(V j) {
        V t = B::add(j, B::set1(kI64Magic));
        I k = B::sub_i(B::bits(t), kI64MagicBits);
        return B::value(B::shl52(B::add_i(k, 1023)));
    }

    static V exp4(V x) {
        x = B::min_(B::max_(x, B::set1(kExpLoClamp)), B::set1(kExpHiClamp));
        V fn = B::round_(B::mul(x, B::set1(kLog2e)));
        V r = B::fma_(fn, B::set1(-kLn2Hi), x);
        r = B::fma_(fn, B::set1(-kLn2Lo), r);
        V p = B::set1(kExpC[13]);
        for (int k = 12; k >= 0; --k) p = B::fma_(p, r, B::set1(kExpC[k]));
        V fk1 = B::floor_(B::mul(fn, B::set1(0.5)));
        V fk2 = B::sub(fn, fk1);
        return B::mul(B::mul(p, pow2i(fk1)), pow2i(fk2));
    }

    static void sweep_step(const double mat[4], double halfcoef, double* x,
                           double* y, double* acc, std::size_t n) {
        V a = B::set1(mat[0]), b = B::set1(mat[1]);
        V c = B::set1(mat[2]), d = B::set1(mat[3]);
        V hc = B::set1(halfcoef);
        std::size_t i = 0;
        for (; i + 4 <= n; i += 4) {
            V X = B::load(x + i), Y = B::load(y + i);
            V U = B::fma_(b, Y, B::mul(a, X));
            V W = B::fma_(d, Y, B::mul(c, X));
            V R2 = B::fma_(U, U, B::mul(W, W));
            V A = B::load(acc + i);
            B::store(acc + i, B::fma_(hc, log4(R2), A));
            V RT = B::sqrt_(R2);
            B::store(x + i, B::div(U, RT));
            B::store(y + i, B::div(W, RT));
        }
        if (i < n) {
            double tx[4] = {1.0, 1.0, 1.0, 1.0};
            double ty[4] = {0.0, 0.0, 0.0, 0.0};
            double ta[4] = {0.0, 0.0, 0.0, 0.0};
            std::size_t r = n - i;
            std::memcpy(tx, x + i, r * sizeof(double));
            std::memcpy(ty, y + i, r * sizeof(double));
            std::memcpy(ta, acc + i, r * sizeof(double));
            sweep_step(mat, halfcoef, tx, ty, ta, 4);
            std::memcpy(x + i, tx, r * sizeof(double));
            std::memcpy(y + i, ty, r * sizeof(double));
            std::memcpy(acc + i, ta, r * sizeof(double));
        }
    }

    static void norm_weights(const double mat[4], double base, double halfcoef,
                             const double* x, const double* y, double* out,
                             std::size_t n) {
        V a = B::set1(mat[0]), b = B::set1(mat[1]);
        V c = B::set1(mat[2]), d = B::set1(mat[3]);
        V hc = B::set1(halfcoef), bs = B::set1(base);
        std::size_t i = 0;
        for (; i + 4 <= n; i += 4) {
            V X = B::load(x + i), Y = B::load(y + i);
            V U = B::fma_(b, Y, B::mul(a, X));
            V W = B::fma_(d, Y, B::mul(c, X));
            V R2 = B::fma_(U, U, B::mul(W, W));
            B::store(out + i, B::fma_(hc, log4(R2), bs));
        }
        if (i < n) {
            double tx[4] = {1.0, 1.0, 1.0, 1.0};
            double ty[4] = {0.0, 0.0, 0.0, 0.0};
            double to[4];
            std::size_t r = n - i;
            std::memcpy(tx, x + i, r * sizeof(double));
            std::memcpy(ty, y + i, r * sizeof(double));
            norm_weights(mat, base, halfcoef, tx, ty, to, 4);
            std::memcpy(out + i, to, r * sizeof(double));
        }
    }

    static void lse_absorb(LseState& st, const double* v, std::size_t n) {
        V m = B::load(st.m), s = B::load(st.s);
        std::size_t i = 0;
        for (; i + 4 <= n; i += 4) {
            V X = B::load(v + i);
            V m2 = B::max_(m, X);
            V e1 = exp4(B::sub(m, m2));
            V e2 = exp4(B::sub(X, m2));
            s = B::fma_(s, e1, e2);
            m = m2;
        }
        B::store(st.m, m);
        B::store(st.s, s);
        if (i < n) {
            double t[4];
            std::size_t r = n - i;
            for (std::size_t k = 0; k < 4; ++k)
                t[k] = k < r ? v[i + k]
                             : -std::numeric_limits<double>::infinity();
            lse_absorb(st, t, 4);
        }
    }

    static void lse_update_rows(double* m, double* s, const double* v,
                                double offset, std::size_t n) {
        V off = B::set1(offset);
        std::size_t i = 0;
        for (; i + 4 <= n; i += 4) {
            V X = B::add(B::load(v + i), off);
            V M = B::load(m + i), S = B::load(s + i);
            V m2 = B::max_(M, X);
            V e1 = exp4(B::sub(M, m2));
            V e2 = exp4(B::sub(X, m2));
            B::store(s + i, B::fma_(S, e1, e2));
            B::store(m + i, m2);
        }
        if (i < n) {
            double tm[4], ts[4], tv[4];
            std::size_t r = n - i;
            for (std::size_t k = 0; k < 4; ++k) {
                tm[k] = k < r ? m[i + k]
                              : -std::numeric_limits<double>::infinity();
                ts[k] = k < r ? s[i + k] : 0.0;
                tv[k] = k < r ? v[i + k]
                              : -std::numeric_limits<double>::infinity();
            }
            lse_update_rows(tm, ts, tv, offset, 4);
            for (std::size_t k = 0; k < r; ++k) {
                m[i + k] = tm[k];
                s[i + k] = ts[k];
            }
        }
    }

    static void exp_block(const double* in, double* out, std::size_t n) {
        std::size_t i = 0;
        for (; i + 4 <= n; i += 4) B::store(out + i, exp4(B::load(in + i)));
        if (i < n) {
            double t[4] = {0, 0, 0, 0}, o[4];
            std::memcpy(t, in + i, (n - i) * sizeof(double));
            exp_block(t, o, 4);
            std::memcpy(out + i, o, (n - i) * sizeof(double));
        }
    }

    static void log_block(const double* in, double* out, std::size_t n) {
        std::size_t i = 0;
        for (; i + 4 <= n; i += 4) B::store(out + i, log4(B::load(in + i)));
        if (i < n) {
            double t[4] = {1, 1, 1, 1}, o[4];
            std::memcpy(t, in + i, (n - i) * sizeof(double));
            log_block(t, o, 4);
            std::memcpy(out + i, o, (n - i) * sizeof(double));
        }
    }
};

} // namespace detail
} // namespace poelab::kern
