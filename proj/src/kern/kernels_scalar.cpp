// Scalar reference backend: four explicit lanes of plain doubles, stepping
// through exactly the operation sequence of the vector variant (std::fma is
// correctly rounded, matching vfmadd).

#include "kern_body.hpp"

#include <cmath>
#include <cstring>

namespace poelab::kern {
namespace {

struct Lanes {
    double d[4];
};
struct ILanes {
    std::uint64_t u[4];
};

struct ScalarBackend {
    using V = Lanes;
    using I = ILanes;

    static V load(const double* p) {
        V r;
        std::memcpy(r.d, p, sizeof r.d);
        return r;
    }
    static void store(double* p, V v) { std::memcpy(p, v.d, sizeof v.d); }
    static V set1(double v) { return {{v, v, v, v}}; }

#define POELAB_LANE(expr)                   \
    V r;                                    \
    for (int k = 0; k < 4; ++k) r.d[k] = (expr); \
    return r

    static V add(V a, V b) { POELAB_LANE(a.d[k] + b.d[k]); }
    static V sub(V a, V b) { POELAB_LANE(a.d[k] - b.d[k]); }
    static V mul(V a, V b) { POELAB_LANE(a.d[k] * b.d[k]); }
    static V div(V a, V b) { POELAB_LANE(a.d[k] / b.d[k]); }
    static V sqrt_(V a) { POELAB_LANE(std::sqrt(a.d[k])); }
    static V fma_(V a, V b, V c) { POELAB_LANE(std::fma(a.d[k], b.d[k], c.d[k])); }
    // (a > b) ? a : b, matching _mm256_max_pd operand semantics
    static V max_(V a, V b) { POELAB_LANE(a.d[k] > b.d[k] ? a.d[k] : b.d[k]); }
    static V min_(V a, V b) { POELAB_LANE(a.d[k] < b.d[k] ? a.d[k] : b.d[k]); }
    static V floor_(V a) { POELAB_LANE(std::floor(a.d[k])); }
    static V round_(V a) { POELAB_LANE(std::nearbyint(a.d[k])); }
    static V blend_gt(V a, V b, V t, V f) {
        POELAB_LANE(a.d[k] > b.d[k] ? t.d[k] : f.d[k]);
    }
#undef POELAB_LANE

    static I bits(V v) {
        I r;
        std::memcpy(r.u, v.d, sizeof r.u);
        return r;
    }
    static V value(I i) {
        V r;
        std::memcpy(r.d, i.u, sizeof r.d);
        return r;
    }
    static I and_i(I a, std::uint64_t m) {
        for (auto& u : a.u) u &= m;
        return a;
    }
    static I or_i(I a, std::uint64_t m) {
        for (auto& u : a.u) u |= m;
        return a;
    }
    static I add_i(I a, std::int64_t v) {
        for (auto& u : a.u) u += static_cast<std::uint64_t>(v);
        return a;
    }
    static I sub_i(I a, std::uint64_t v) {
        for (auto& u : a.u) u -= v;
        return a;
    }
    static I shl52(I a) {
        for (auto& u : a.u) u <<= 52;
        return a;
    }
    static I shr52(I a) {
        for (auto& u : a.u) u >>= 52;
        return a;
    }
};

using K = detail::Body<ScalarBackend>;

const Ops g_scalar{K::sweep_step, K::norm_weights, K::lse_absorb,
                   K::lse_update_rows, K::exp_block, K::log_block, "scalar"};

} // namespace

const Ops* scalar_ops() { return &g_scalar; }

double exp_ref(double x) {
    double in[4] = {x, x, x, x}, out[4];
    K::exp_block(in, out, 4);
    return out[0];
}

double log_ref(double x) {
    double in[4] = {x, x, x, x}, out[4];
    K::log_block(in, out, 4);
    return out[0];
}

} // namespace poelab::kern
