// AVX2+FMA backend.  Compiled with -mavx2 -mfma on x86-64; dispatch.cpp only
// hands out these entry points after checking cpu support at runtime.

#if defined(__x86_64__) || defined(_M_X64)
#define POELAB_HAVE_AVX2_TU 1
#else
#define POELAB_HAVE_AVX2_TU 0
#endif

#include "kern_body.hpp"

#if POELAB_HAVE_AVX2_TU
#include <immintrin.h>

namespace poelab::kern {
namespace {

struct Avx2Backend {
    using V = __m256d;
    using I = __m256i;

    static V load(const double* p) { return _mm256_loadu_pd(p); }
    static void store(double* p, V v) { _mm256_storeu_pd(p, v); }
    static V set1(double v) { return _mm256_set1_pd(v); }
    static V add(V a, V b) { return _mm256_add_pd(a, b); }
    static V sub(V a, V b) { return _mm256_sub_pd(a, b); }
    static V mul(V a, V b) { return _mm256_mul_pd(a, b); }
    static V div(V a, V b) { return _mm256_div_pd(a, b); }
    static V sqrt_(V a) { return _mm256_sqrt_pd(a); }
    static V fma_(V a, V b, V c) { return _mm256_fmadd_pd(a, b, c); }
    static V max_(V a, V b) { return _mm256_max_pd(a, b); }
    static V min_(V a, V b) { return _mm256_min_pd(a, b); }
    static V floor_(V a) { return _mm256_floor_pd(a); }
    static V round_(V a) {
        return _mm256_round_pd(a, _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    }
    static V blend_gt(V a, V b, V t, V f) {
        V mask = _mm256_cmp_pd(a, b, _CMP_GT_OQ);
        return _mm256_blendv_pd(f, t, mask);
    }

    static I bits(V v) { return _mm256_castpd_si256(v); }
    static V value(I i) { return _mm256_castsi256_pd(i); }
    static I and_i(I a, std::uint64_t m) {
        return _mm256_and_si256(a, _mm256_set1_epi64x(static_cast<long long>(m)));
    }
    static I or_i(I a, std::uint64_t m) {
        return _mm256_or_si256(a, _mm256_set1_epi64x(static_cast<long long>(m)));
    }
    static I add_i(I a, std::int64_t v) {
        return _mm256_add_epi64(a, _mm256_set1_epi64x(v));
    }
    static I sub_i(I a, std::uint64_t v) {
        return _mm256_sub_epi64(a, _mm256_set1_epi64x(static_cast<long long>(v)));
    }
    static I shl52(I a) { return _mm256_slli_epi64(a, 52); }
    static I shr52(I a) { return _mm256_srli_epi64(a, 52); }
};

using K = detail::Body<Avx2Backend>;

const Ops g_avx2{K::sweep_step, K::norm_weights, K::lse_absorb,
                 K::lse_update_rows, K::exp_block, K::log_block, "avx2"};

} // namespace

const Ops* avx2_ops_impl() { return &g_avx2; }

} // namespace poelab::kern

#else

namespace poelab::kern {
const Ops* avx2_ops_impl() { return nullptr; }
} // namespace poelab::kern

#endif
