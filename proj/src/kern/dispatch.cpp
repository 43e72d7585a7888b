#include "poelab/kern/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>

namespace poelab::kern {

const Ops* avx2_ops_impl(); // defined in kernels_avx2.cpp

namespace {

bool cpu_has_avx2_fma() {
#if defined(__x86_64__) || defined(_M_X64)
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const Ops* resolve() {
    const Ops* avx2 = cpu_has_avx2_fma() ? avx2_ops_impl() : nullptr;
    if (const char* env = std::getenv("POELAB_KERNEL")) {
        if (std::strcmp(env, "scalar") == 0) return scalar_ops();
        if (std::strcmp(env, "avx2") == 0 && avx2) return avx2;
    }
    return avx2 ? avx2 : scalar_ops();
}

} // namespace

const Ops& ops() {
    static const Ops* active = resolve();
    return *active;
}

const Ops* avx2_ops() { return cpu_has_avx2_fma() ? avx2_ops_impl() : nullptr; }

LseState lse_make() {
    LseState st;
    for (int k = 0; k < 4; ++k) {
        st.m[k] = -std::numeric_limits<double>::infinity();
        st.s[k] = 0.0;
    }
    return st;
}

namespace {

// combine two (max, sumexp) pairs; exp/log go through the reference kernel
// so the result does not depend on which block variant absorbed the values
void pair_merge(double& m, double& s, double mb, double sb) {
    if (sb == 0.0 && std::isinf(mb)) return;
    if (s == 0.0 && std::isinf(m)) {
        m = mb;
        s = sb;
        return;
    }
    double top = m > mb ? m : mb;
    s = s * exp_ref(m - top) + sb * exp_ref(mb - top);
    m = top;
}

} // namespace

void lse_merge(LseState& a, const LseState& b) {
    for (int k = 0; k < 4; ++k) pair_merge(a.m[k], a.s[k], b.m[k], b.s[k]);
}

double lse_row_value(double m, double s) {
    if (s <= 0.0 || std::isinf(m))
        return -std::numeric_limits<double>::infinity();
    return m + log_ref(s);
}

void lse_merge_rows(double* m, double* s, const double* mb, const double* sb,
                    std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) pair_merge(m[i], s[i], mb[i], sb[i]);
}

double lse_finalize(const LseState& st) {
    double m01 = st.m[0], s01 = st.s[0];
    pair_merge(m01, s01, st.m[1], st.s[1]);
    double m23 = st.m[2], s23 = st.s[2];
    pair_merge(m23, s23, st.m[3], st.s[3]);
    pair_merge(m01, s01, m23, s23);
    if (s01 <= 0.0 || std::isinf(m01))
        return -std::numeric_limits<double>::infinity();
    return m01 + log_ref(s01);
}

} // namespace poelab::kern
