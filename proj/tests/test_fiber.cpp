#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "poelab/fiber.hpp"
#include "poelab/rng.hpp"

#include <cmath>

using namespace poelab;

namespace {

constexpr double kPi = 3.14159265358979323846;
const double kLog2 = std::log(2.0);

// SYS-A: full 2-shift, both matrices 2*Id
CocycleSystem sys_a() {
    return CocycleSystem::one_sided(ShiftSpec::full_shift(2),
                                    {Mat2::scale(2.0), Mat2::scale(2.0)});
}
// SYS-B: full 2-shift, diag(2,1) and diag(1,2)
CocycleSystem sys_b() {
    return CocycleSystem::one_sided(
        ShiftSpec::full_shift(2), {Mat2::diag(2, 1), Mat2::diag(1, 2)});
}

GibbsModel bernoulli_half() {
    auto full2 = ShiftSpec::full_shift(2);
    return gibbs_model(full2, Potential::constant(full2, -kLog2));
}

} // namespace

TEST_CASE("mat2 singular values") {
    Mat2 m{3.0, 0.0, 0.0, 0.5};
    CHECK(m.op_norm() == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(m.sigma_min() == doctest::Approx(0.5).epsilon(1e-14));
    Mat2 r = Mat2::rotation(0.7) * m;
    CHECK(r.op_norm() == doctest::Approx(3.0).epsilon(1e-13));
    CHECK(r.cond() == doctest::Approx(6.0).epsilon(1e-12));
    Mat2 inv = r.inverse() * r;
    CHECK((inv - Mat2::identity()).frob() < 1e-14);
}

TEST_CASE("fiber metric wraps around") {
    CHECK(fiber_distance(0.05, kPi - 0.05) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(fiber_distance(1.0, 1.0) == 0.0);
    CHECK(reduce_mod_pi(kPi + 0.3) == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(reduce_mod_pi(-0.3) == doctest::Approx(kPi - 0.3).epsilon(1e-12));
}

TEST_CASE("fiber orbits: scalar matrices act as the identity") {
    auto a = sys_a();
    Word prefix{{0, 1, 1, 0}};
    auto orbit = fiber_orbit(a, prefix, FiberPoint{0.9});
    REQUIRE(orbit.size() == 5);
    for (const auto& p : orbit)
        CHECK(p.angle == doctest::Approx(0.9).epsilon(1e-14));
}

TEST_CASE("fiber orbits: diagonal matrices fix the axes") {
    auto b = sys_b();
    Word prefix{{0, 1, 0, 1, 1}};
    auto orbit = fiber_orbit(b, prefix, FiberPoint{0.0});
    for (const auto& p : orbit) CHECK(p.angle == doctest::Approx(0.0));
}

TEST_CASE("fiber orbit of pi/4 under repeated diag(2,1)") {
    auto b = sys_b();
    Word prefix{{0, 0, 0}};
    auto orbit = fiber_orbit(b, prefix, FiberPoint{kPi / 4});
    REQUIRE(orbit.size() == 4);
    // angles arctan(2^-k)
    CHECK(orbit[0].angle == doctest::Approx(0.7853981633974483).epsilon(1e-13));
    CHECK(orbit[1].angle == doctest::Approx(0.4636476090008061).epsilon(1e-13));
    CHECK(orbit[2].angle == doctest::Approx(0.24497866312686414).epsilon(1e-13));
    CHECK(orbit[3].angle == doctest::Approx(0.12435499454676144).epsilon(1e-13));
}

TEST_CASE("cocycle identity: orbits concatenate") {
    auto b = sys_b();
    PhiloxStream z(5, 1);
    for (int trial = 0; trial < 20; ++trial) {
        Word u, v;
        for (int i = 0; i < 4; ++i)
            u.symbols.push_back(static_cast<Symbol>(z.next_u64() & 1));
        for (int i = 0; i < 5; ++i)
            v.symbols.push_back(static_cast<Symbol>(z.next_u64() & 1));
        FiberPoint t{z.uniform() * kPi};
        auto ou = fiber_orbit(b, u, t);
        Word uv = u;
        uv.symbols.insert(uv.symbols.end(), v.symbols.begin(), v.symbols.end());
        auto ouv = fiber_orbit(b, uv, t);
        auto ov = fiber_orbit(b, v, ou.back());
        for (std::size_t i = 0; i < ov.size(); ++i)
            CHECK(fiber_distance(ouv[u.size() + i].angle, ov[i].angle) < 1e-12);
    }
}

TEST_CASE("birkhoff sums against hand evaluations") {
    auto a = PotentialFamily{sys_a()};
    auto tail2 = lex_tail_after(ShiftSpec::full_shift(2), 1, 8);
    // SYS-A: every step contributes log 2
    CHECK(birkhoff_sum(a, Word{{0, 1, 0, 1}}, tail2, FiberPoint{1.1}) ==
          doctest::Approx(4 * kLog2).epsilon(1e-13));
    auto b = PotentialFamily{sys_b()};
    auto tail0 = lex_tail_after(ShiftSpec::full_shift(2), 0, 8);
    // fixed axis direction: |A_0 e_1| = 2 twice
    CHECK(birkhoff_sum(b, Word{{0, 0}}, tail0, FiberPoint{0.0}) ==
          doctest::Approx(2 * kLog2).epsilon(1e-13));
    // two-step hand evaluation from pi/4: log|A0 u| + log|A1 u(t1)|,
    // t1 = arctan(1/2); the product telescopes to log 2 because A1 A0 = 2 Id
    double got = birkhoff_sum(b, Word{{0, 1}}, tail2, FiberPoint{kPi / 4});
    CHECK(got == doctest::Approx(0.4581453659370776 + 0.23500181462286762)
                     .epsilon(1e-12));
    CHECK(got == doctest::Approx(kLog2).epsilon(1e-12));
}

TEST_CASE("birkhoff sum telescopes to the matrix product log norm") {
    auto b = PotentialFamily{sys_b()};
    PhiloxStream z(5, 2);
    auto tail = lex_tail_after(ShiftSpec::full_shift(2), 1, 8);
    for (int trial = 0; trial < 10; ++trial) {
        Word w;
        for (int i = 0; i < 9; ++i)
            w.symbols.push_back(static_cast<Symbol>(z.next_u64() & 1));
        w.symbols.back() = 1;
        FiberPoint t{z.uniform() * kPi};
        Mat2 p = Mat2::identity();
        for (Symbol s : w.symbols)
            p = (s == 0 ? Mat2::diag(2, 1) : Mat2::diag(1, 2)) * p;
        double direct = std::log(p.apply(t.direction()).norm());
        CHECK(birkhoff_sum(b, w, tail, t) ==
              doctest::Approx(direct).epsilon(1e-12));
    }
}

TEST_CASE("family constants") {
    PotentialFamily fam{sys_b()};
    CHECK(fam.sup_norm() == doctest::Approx(kLog2).epsilon(1e-14));
    // exact Lipschitz bound (kappa - 1/kappa)/2 with kappa = 2
    CHECK(fam.lipschitz_t() == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(fam.fiber_lipschitz() == doctest::Approx(2.0).epsilon(1e-14));
    PotentialFamily fa{sys_a()};
    CHECK(fa.lipschitz_t() == 0.0);
    // |phi_t - phi_s| <= L d(t,s) with the coarse L = max ||A||/sigma_min
    double coarse = 0.0;
    for (const auto& kv : fam.sys.matrices)
        coarse = std::max(coarse, kv.second.op_norm() / kv.second.sigma_min());
    PhiloxStream z(5, 3);
    Symbol zero = 0;
    for (int i = 0; i < 10000; ++i) {
        double t = z.uniform() * kPi, s = z.uniform() * kPi;
        double diff = std::abs(fam.eval(t, &zero) - fam.eval(s, &zero));
        CHECK(diff <= coarse * fiber_distance(t, s) + 1e-12);
        CHECK(diff <= fam.lipschitz_t() * fiber_distance(t, s) + 1e-12);
    }
}

TEST_CASE("uniform expansion margins") {
    auto gibbs = bernoulli_half();
    // SYS-A: phi_t == log 2 for every t, certified exactly
    auto ma = uniform_expansion_margin(PotentialFamily{sys_a()}, gibbs, 1024);
    CHECK(ma.grid_min == doctest::Approx(kLog2).epsilon(1e-13));
    CHECK(ma.certified == doctest::Approx(kLog2).epsilon(1e-13));
    CHECK(ma.expansion_certified);
    // SYS-B: minimum (log 2)/2 at the axes, on-grid
    auto mb = uniform_expansion_margin(PotentialFamily{sys_b()}, gibbs, 4096);
    CHECK(mb.grid_min == doctest::Approx(kLog2 / 2).epsilon(1e-12));
    CHECK(mb.certified > kLog2 / 2 - 0.75 * kPi / 4096);
    CHECK(mb.expansion_certified);
    CHECK((mb.argmin_index == 0 || mb.argmin_index == 2048));
    // expansion-free variant: diag(2, 1/2) and diag(1/2, 2) average to zero
    auto c = CocycleSystem::one_sided(
        ShiftSpec::full_shift(2), {Mat2::diag(2, 0.5), Mat2::diag(0.5, 2)});
    auto mc = uniform_expansion_margin(PotentialFamily{c}, gibbs, 1024);
    CHECK(mc.grid_min <= 1e-12);
    CHECK(!mc.expansion_certified);
}

TEST_CASE("two-sided reduction: trivial window") {
    auto r = two_sided_reduce(sys_b());
    CHECK(r.cohomology_residual == 0.0);
    CHECK(r.past_residual == 0.0);
    REQUIRE(r.coboundary.size() == 1);
    CHECK((r.coboundary[0].second - Mat2::identity()).frob() == 0.0);
    Symbol zero = 0;
    CHECK((r.reduced.at(&zero) - Mat2::diag(2, 1)).frob() == 0.0);
}

TEST_CASE("two-sided reduction with a past-dependent twist") {
    // SYS-B-like with a scalar twist depending on the previous symbol
    auto spec = ShiftSpec::full_shift(2);
    CocycleSystem sys;
    sys.spec = spec;
    sys.past_window = 1;
    auto base = [&](Symbol s) { return s == 0 ? Mat2::diag(2, 1) : Mat2::diag(1, 2); };
    for (int p = 0; p < 2; ++p)
        for (int s = 0; s < 2; ++s) {
            Symbol w[2] = {static_cast<Symbol>(p), static_cast<Symbol>(s)};
            double twist = p == 0 ? 1.0 : 1.25;
            sys.matrices[encode_word(w, 2)] = base(w[1]).times(twist);
        }
    sys.validate();
    auto r = two_sided_reduce(sys);
    CHECK(r.cohomology_residual < 1e-10);
    CHECK(r.past_residual < 1e-10);
    CHECK(r.reduced.future_window == 1);
    CHECK(r.reduced.past_window == 0);
    // reduced matrices are defined on future 2-words
    CHECK(r.reduced.matrices.size() == 4);

    // the margin survives the reduction (coboundaries are bounded)
    auto gibbs = bernoulli_half();
    auto rep = expansion_preservation_check(sys, r.reduced, gibbs, 1024);
    CHECK(rep.original.expansion_certified);
    // small twist: margins stay within a modest distance
    CHECK(std::abs(rep.original.certified - rep.reduced.certified) < 0.25);
}

TEST_CASE("reduction of an almost one-sided system keeps margins close") {
    auto spec = ShiftSpec::full_shift(2);
    CocycleSystem sys;
    sys.spec = spec;
    sys.past_window = 1;
    auto base = [&](Symbol s) { return s == 0 ? Mat2::diag(2, 1) : Mat2::diag(1, 2); };
    for (int p = 0; p < 2; ++p)
        for (int s = 0; s < 2; ++s) {
            Symbol w[2] = {static_cast<Symbol>(p), static_cast<Symbol>(s)};
            double twist = p == 0 ? 1.0 : 1.0 + 1e-3;
            sys.matrices[encode_word(w, 2)] = base(w[1]).times(twist);
        }
    sys.validate();
    auto r = two_sided_reduce(sys);
    CHECK(r.cohomology_residual < 1e-10);
    auto gibbs = bernoulli_half();
    auto rep = expansion_preservation_check(sys, r.reduced, gibbs, 1024);
    CHECK(std::abs(rep.original.certified - rep.reduced.certified) < 1e-2);
    CHECK(!rep.flagged);
}

TEST_CASE("validation rejects bad cocycles") {
    auto spec = ShiftSpec::full_shift(2);
    CHECK_THROWS_AS(
        CocycleSystem::one_sided(spec, {Mat2::diag(1, 0), Mat2::identity()}),
        ConfigError);
    CHECK_THROWS_AS(
        CocycleSystem::one_sided(spec,
                                 {Mat2::diag(1e8, 1e-8), Mat2::identity()}),
        ConfigError);
    CocycleSystem missing;
    missing.spec = spec;
    Symbol zero = 0;
    missing.matrices[encode_word(&zero, 1)] = Mat2::identity();
    CHECK_THROWS_AS(missing.validate(), ConfigError);
}
