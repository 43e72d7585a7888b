#pragma once
// The compact fiber as the projective circle of a 2x2 linear cocycle: fiber
// maps induced over the shift, the potential family phi_t = log|A u(t)|, the
// certified uniform-expansion-on-average margin, and the finite-window
// two-sided -> one-sided reduction via Smale brackets.

#include "poelab/mat2.hpp"
#include "poelab/shift.hpp"
#include "poelab/transfer.hpp"

#include <unordered_map>
#include <vector>

namespace poelab {

inline double reduce_mod_pi(double t) {
    const double pi = 3.14159265358979323846;
    t = std::fmod(t, pi);
    if (t < 0.0) t += pi;
    if (t >= pi) t -= pi;
    return t;
}

// angular distance on the projective circle [0, pi) with wraparound
inline double fiber_distance(double s, double t) {
    const double pi = 3.14159265358979323846;
    double d = std::abs(reduce_mod_pi(s) - reduce_mod_pi(t));
    return std::min(d, pi - d);
}

struct FiberPoint {
    double angle = 0.0; // in [0, pi)
    static FiberPoint from_angle(double t) { return {reduce_mod_pi(t)}; }
    Vec2 direction() const { return {std::cos(angle), std::sin(angle)}; }
};

// direction components for a list of angles, with the axis directions made
// exact (a 1e-17 residue in cos(pi/2) would otherwise be amplified by
// ill-conditioned cocycle products)
inline void grid_directions(const std::vector<double>& angles, double* x,
                            double* y) {
    for (std::size_t i = 0; i < angles.size(); ++i) {
        double c = std::cos(angles[i]);
        double s = std::sin(angles[i]);
        if (std::abs(c) < 1e-15) {
            c = 0.0;
            s = 1.0;
        }
        if (std::abs(s) < 1e-15) {
            s = 0.0;
            c = 1.0;
        }
        x[i] = c;
        y[i] = s;
    }
}

// direction of A u(t) on the projective circle
inline FiberPoint projective_apply(const Mat2& m, FiberPoint t) {
    Vec2 v = m.apply(t.direction());
    return FiberPoint::from_angle(std::atan2(v.y, v.x));
}

struct CocycleSystem {
    ShiftSpec spec;
    int past_window = 0;   // symbols into the past the matrix may read
    int future_window = 0; // symbols past the current one
    std::unordered_map<std::uint64_t, Mat2> matrices; // keyed by window word

    int window_len() const { return past_window + 1 + future_window; }
    const Mat2& at(const Symbol* w) const;

    // invertibility, conditioning, and a 512-point monotone-degree check of
    // each induced circle map
    void validate() const;

    static CocycleSystem one_sided(const ShiftSpec& spec,
                                   const std::vector<Mat2>& per_symbol);
};

struct PotentialFamily {
    CocycleSystem sys;

    // phi_t at the window word w
    double eval(double t_angle, const Symbol* w) const {
        return std::log(sys.at(w).apply(
                            FiberPoint{reduce_mod_pi(t_angle)}.direction())
                            .norm());
    }
    // sup_t ||phi_t||_inf <= max over matrices of max(log s1, -log s2)
    double sup_norm() const;
    // exact sup_t |d phi_t / dt| = max over matrices of (k - 1/k)/2
    double lipschitz_t() const;
    // max Lipschitz constant of the induced circle maps (= max condition)
    double fiber_lipschitz() const;
    // coarse equi-variation constant: max pairwise matrix distance
    double equi_holder() const;
};

// (t, F t, F^2 t, ...) along an admissible prefix of a one-sided system; the
// orbit has as many points as the prefix supports full matrix windows.
std::vector<FiberPoint> fiber_orbit(const CocycleSystem& sys, const Word& prefix,
                                    FiberPoint t);

// symbols continuing a word: word.back() -> syms[0] must be admissible
struct SymbolicTail {
    std::vector<Symbol> syms;
    Symbol at(std::size_t i) const { return syms.at(i); }
};

// lex-minimal tail continuing after symbol `from`
SymbolicTail lex_tail_after(const ShiftSpec& spec, Symbol from, std::size_t len);

// sum_{k<n} phi_{F^k t}(T^k(word . tail)) for the family alone
double birkhoff_sum(const PotentialFamily& fam, const Word& word,
                    const SymbolicTail& tail, FiberPoint t);

struct ExpansionMargin {
    double grid_min = 0.0;       // min over grid t of E_mu[phi_t]
    double certified = 0.0;      // grid_min - Lipschitz grid correction
    int argmin_index = 0;
    bool expansion_certified = false; // certified > 0
};

ExpansionMargin uniform_expansion_margin(const PotentialFamily& fam,
                                         const GibbsModel& gibbs,
                                         int grid_size);

struct ReduceResult {
    CocycleSystem reduced; // one-sided, window = past+1 future symbols
    // coboundary C indexed by the center word (coords -l .. l-1)
    std::vector<std::pair<Word, Mat2>> coboundary;
    double cohomology_residual = 0.0;
    double past_residual = 0.0;
};

// finite-window Smale-bracket reduction; anchors are the lex-minimal
// admissible pasts per symbol, and the bracket limit stabilises exactly at
// n = past_window
ReduceResult two_sided_reduce(const CocycleSystem& sys);

struct PreservationReport {
    ExpansionMargin original;
    ExpansionMargin reduced;
    bool flagged = false; // reduced margin dropped below zero
};

PreservationReport expansion_preservation_check(const CocycleSystem& original,
                                                const CocycleSystem& reduced,
                                                const GibbsModel& gibbs,
                                                int grid_size);

} // namespace poelab
