#pragma once
// The maximal asymptotic instability potential, instability kernels, and the
// lower half of the variational principle: maximizing h + E[phi-tilde] over
// memory-m Markov measures and sandwiching the POE between that bound and
// the Fekete upper bound.

#include "poelab/poe.hpp"

#include <cstdint>

namespace poelab {

struct InstabilityEstimate {
    std::vector<int> n_list;
    std::vector<double> values;  // grid sup of the Birkhoff average per n
    std::vector<int> argmax;     // grid index per n
    // true sup/inf over the whole circle, from the extreme singular values
    // of the cocycle product (exact for window-1 matrices)
    std::vector<double> exact_values;
    std::vector<double> exact_inf;
    // finite-n allowance plus the certified grid-vs-true gap per n
    std::vector<double> window;
    double stability_gap = 0.0; // max sup - min inf over the tail half
};

// Birkhoff averages of psi + s phi along the prefix, maximised over a fiber
// grid of 2^grid_log2 directions; the prefix must be at least max(n_list)
// long (plus the matrix window).
InstabilityEstimate max_instability(const CombinedPotential& cp,
                                    const Word& prefix,
                                    const std::vector<int>& n_list,
                                    int grid_log2);

struct ShiftInvarianceReport {
    double value = 0.0;         // phi-tilde_n(omega)
    double value_shifted = 0.0; // phi-tilde_{n-1}(T omega)
    double residual = 0.0;
    double bound = 0.0; // 2 ||phi-hat|| / n + grid slack
    bool ok = false;
};

ShiftInvarianceReport shift_invariance_check(const CombinedPotential& cp,
                                             const Word& prefix, int n,
                                             int grid_log2);

struct KernelSample {
    std::vector<int> schedule;
    std::vector<int> t_indices;                  // near-maximising t_j per n_j
    std::vector<std::vector<double>> histograms; // empirical fiber measures
    bool value_converged = false;
    bool near_maximizing = false;
    bool weak_star_converged = false;
    std::vector<int> cluster_of; // candidate clustering by L1 distance
    int n_clusters = 0;
};

KernelSample instability_kernel(const CombinedPotential& cp, const Word& prefix,
                                const std::vector<int>& schedule, int grid_log2,
                                int bins);

struct OptimizerConfig {
    int starts = 32;
    double tol = 1e-6;
    int prefixes = 64;      // sample prefixes for the final estimate
    int prefix_len = 512;
    int grid_log2 = 10;
    std::uint64_t seed = 1;
    int threads = 1;
    int max_sweeps = 40;
    // cheaper settings used while searching; the final value is re-estimated
    // at the full settings
    int search_prefixes = 12;
    int search_prefix_len = 256;
    int search_grid_log2 = 6;
};

struct MarkovLowerBound {
    double value = 0.0;    // raw - stat_err: the reported lower bound
    double raw = 0.0;      // entropy + mean phi-tilde estimate
    double stat_err = 0.0; // 3x standard error over sample prefixes
    double window = 0.0;   // finite-n allowance, reported not subtracted
    double entropy = 0.0;
    int memory = 1;
    MarkovMeasure best; // on the recoded m-word alphabet
};

MarkovLowerBound markov_lower_bound(const CombinedPotential& cp, int memory_m,
                                    const OptimizerConfig& cfg);

struct SandwichReport {
    double lower = 0.0;       // markov bound (already minus stat error)
    double seq_at_nmax = 0.0; // (1/n_max) grid max
    double fekete_upper = 0.0;
    double width = 0.0; // fekete_upper - lower
    double order_tol = 0.0;
    bool ordering_ok = false;
};

SandwichReport variational_sandwich(const PoeEstimate& est,
                                    const MarkovLowerBound& mlb);

struct PushforwardRow {
    double lhs = 0.0; // empirical integral of phi-hat along a skew orbit
    double rhs = 0.0; // phi-tilde estimate plus allowances
    bool ok = false;
};

struct PushforwardReport {
    std::vector<PushforwardRow> rows;
    double tol = 0.0;
    bool ok = true;
};

// Cesaro averages of phi-hat along gibbs-driven skew orbits must not exceed
// the phi-tilde estimate (the projection inequality of the variational
// principle).
PushforwardReport pushforward_inequality_check(const CombinedPotential& cp,
                                               const GibbsModel& gibbs,
                                               int samples, int orbit_len,
                                               std::uint64_t seed,
                                               int grid_log2);

} // namespace poelab
