#pragma once
// Data-parallel inner-loop kernels used by the partition-sum sweeps, the
// log-sum-exp reductions and the moment grids.
//
// Two implementations exist: a scalar reference and an AVX2+FMA variant,
// selected once at runtime (override with POELAB_KERNEL=scalar|avx2).  Both
// execute the same IEEE operation sequence lane by lane (explicit fma,
// shared exp/log polynomials, no approximate instructions), so their outputs
// are bit-identical; the equivalence test asserts exactly that.

#include <cstddef>
#include <cstdint>
#include <string>

namespace poelab::kern {

// Streaming log-sum-exp accumulator over 4 interleaved lanes.
// Values are absorbed in array order; lanes are merged in a fixed order by
// lse_finalize, so results do not depend on how callers chunk their input
// as long as chunk boundaries are multiples of 4 absorbed in sequence.
struct LseState {
    double m[4];
    double s[4];
};

LseState lse_make();
// merge b into a, as if b's values were absorbed after a's
void lse_merge(LseState& a, const LseState& b);
double lse_finalize(const LseState& st);

struct Ops {
    // One cocycle step over n fiber lanes: directions (x,y) are mapped
    // through the matrix m = [a b; c d] (row-major), acc[i] += halfcoef *
    // log(|M u_i|^2), and the direction is renormalised in place.
    void (*sweep_step)(const double m[4], double halfcoef,
                       double* x, double* y, double* acc, std::size_t n);
    // out[i] = base + halfcoef * log(|M u_i|^2) without touching (x,y).
    void (*norm_weights)(const double m[4], double base, double halfcoef,
                         const double* x, const double* y,
                         double* out, std::size_t n);
    void (*lse_absorb)(LseState& st, const double* v, std::size_t n);
    // n independent streaming log-sum-exp accumulators (m[i], s[i]), each
    // absorbing v[i] + offset
    void (*lse_update_rows)(double* m, double* s, const double* v,
                            double offset, std::size_t n);
    void (*exp_block)(const double* in, double* out, std::size_t n);
    void (*log_block)(const double* in, double* out, std::size_t n);
    const char* name;
};

// finalize / merge for row accumulators (scalar reference path)
double lse_row_value(double m, double s);
void lse_merge_rows(double* m, double* s, const double* mb, const double* sb,
                    std::size_t n);

// Active kernel set (resolved once per process).
const Ops& ops();

// Named kernel sets, for equivalence tests. avx2() is null when the CPU
// cannot run it.
const Ops* scalar_ops();
const Ops* avx2_ops();

// Reference single-value transcendentals (scalar kernel path); used by
// lse_finalize and anywhere a dispatched block call is not worth it.
double exp_ref(double x);
double log_ref(double x);

} // namespace poelab::kern
