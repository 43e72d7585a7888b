#pragma once
// Out-of-equilibrium partition sums: exact enumeration over admissible words
// with the fiber orbit driven by the word itself, certified two-sided
// brackets from a binned interval dynamic program plus a beam lower bound,
// Fekete upper bounds for the growth rate, and the submultiplicativity /
// anchor-independence checks.

#include "poelab/fiber.hpp"
#include "poelab/shift.hpp"
#include "poelab/transfer.hpp"

#include <optional>
#include <vector>

namespace poelab {

// psi + s * phi_t over a one-sided cocycle
struct CombinedPotential {
    ShiftSpec spec;
    Potential psi;
    PotentialFamily family;
    double s = -1.0;

    void validate() const;
    int window() const { return family.sys.future_window + 1; }
    // sup |psi + s phi_t|
    double sup_hat_norm() const {
        return psi.sup_abs() + std::abs(s) * family.sup_norm();
    }
    // per-word weight oscillation caused by the tail continuation choice
    double tail_slack() const {
        double osc = psi.values.empty()
                         ? 0.0
                         : (psi.max_value() - psi.min_value());
        return (psi.memory - 1) * osc +
               family.sys.future_window * 2.0 * std::abs(s) * family.sup_norm();
    }
};

// uniform fiber grid: angle i = pi * i / size
std::vector<double> fiber_grid(int size);

// lex-minimal tails, one per alphabet symbol
std::vector<SymbolicTail> anchor_tails(const ShiftSpec& spec, std::size_t len);

// combined Birkhoff sum of psi + s phi along word . tail from t
double combined_birkhoff(const CombinedPotential& cp, const Word& word,
                         const SymbolicTail& tail, FiberPoint t);

struct PartitionGrid {
    int n = 0;
    int anchor = -1; // -1: summed over anchors (per-anchor tails)
    std::vector<double> log_z; // per grid angle
    double grid_max = 0.0;
    int argmax = 0;
    double lipschitz_bound = 0.0; // grid correction + tail slack
    double upper() const { return grid_max + lipschitz_bound; }
};

// log Z_n at every grid angle by exact enumeration (prefix-shared sweep);
// throws DomainError past the S^n <= 2^24 cap
PartitionGrid partition_sum_exact_grid(const CombinedPotential& cp, int n,
                                       int anchor,
                                       const std::vector<double>& angles,
                                       int threads);
// the per-(anchor, tail, t) scalar form
double partition_sum_exact(const CombinedPotential& cp, int n, Symbol anchor,
                           const SymbolicTail& tail, FiberPoint t);

struct BinnedBracket {
    int n = 0;
    int anchor = -1;
    // per start interval (grid angle or start group)
    std::vector<double> lower, upper;
    double sup_lower = 0.0, sup_upper = 0.0;
    double width() const { return sup_upper - sup_lower; }
};

// Certified bounds for log Z_n at each grid angle: the upper bound comes
// from an interval DP over (symbol, fiber bin) cells, the lower bound from
// an exact beam of dominant words.  Requires memory-1 psi and window-1
// matrices (refine the alphabet first otherwise).
BinnedBracket partition_sum_binned(const CombinedPotential& cp, int n,
                                   int anchor, int bins,
                                   const std::vector<double>& angles,
                                   int beam_width = 4096);
// same, but bounding sup over t inside `groups` start intervals covering
// [0, pi)
BinnedBracket partition_sum_binned_sup(const CombinedPotential& cp, int n,
                                       int anchor, int bins, int groups,
                                       int beam_width = 4096);

struct PoeEstimate {
    std::vector<double> sequence;    // (1/n) grid max, n = 1..n_max
    std::vector<double> upper_per_n; // (1/n) certified upper
    double fekete_upper = 0.0;
    int fekete_argmin = 0;
    // filled in by the variational module
    double best_lower = 0.0;
    bool has_lower = false;
    double status_width = 0.0;
};

PoeEstimate poe_estimate(const CombinedPotential& cp, int n_max, int grid_log2,
                         int bins, int threads);

struct SubmultRow {
    int n = 0, m = 0;
    double lower_nm = 0.0;  // certified lower for log Z_{n+m}
    double upper_n = 0.0, upper_m = 0.0;
    double slack = 0.0; // upper_n + upper_m - lower_nm, >= 0 required
    double grid_defect = 0.0; // gridmax(n+m) - gridmax(n) - gridmax(m)
};

struct SubmultReport {
    std::vector<SubmultRow> rows;
    bool ok = true;
};

SubmultReport submultiplicativity_check(
    const CombinedPotential& cp, const std::vector<std::pair<int, int>>& pairs,
    int grid_log2, int threads);

struct AnchorRow {
    int n = 0;
    int anchor = 0;
    double value = 0.0; // (1/n) log Z_n(anchor)
};

struct AnchorReport {
    std::vector<AnchorRow> rows;
    std::vector<double> spread;       // per n in n_list
    double max_spread_times_n = 0.0;  // fitted C
    double c_theory = 0.0;            // connectivity bound
    bool ok = true;
};

AnchorReport anchor_independence_check(
    const CombinedPotential& cp, const std::vector<int>& n_list, int grid_log2,
    int threads,
    const std::vector<SymbolicTail>* tails_override = nullptr);

// Diagnostic for the non-composite structure of the weights: exhibits words
// of equal symbol content with different weights (path dependence), and a
// geometric-sequence defect of the content-class sums.
struct CompositeWitness {
    bool pair_found = false;
    Word w1, w2;
    double weight_diff = 0.0;
    bool ratio_found = false;
    double ratio_defect = 0.0;
};

CompositeWitness non_composite_diagnostic(const CombinedPotential& cp, int n,
                                          FiberPoint t);

} // namespace poelab
