#pragma once
// Ruelle transfer operators of locally-constant potentials as dense
// nonnegative matrices on the block-recoded alphabet: pressure, Perron
// eigendata, the exact Markov-chain form of the Gibbs measure, perturbative
// pressure derivatives (linear response / Green-Kubo), and the small-beta
// pressure-gap check.

#include "poelab/shift.hpp"

#include <functional>
#include <unordered_map>

namespace poelab {

struct Potential {
    int memory = 1; // k: value depends on the first k symbols
    std::unordered_map<std::uint64_t, double> values; // keyed by encode_word

    double at(const Symbol* w) const {
        auto it = values.find(encode_word(w, static_cast<std::size_t>(memory)));
        if (it == values.end())
            throw DomainError("potential has no value for this word");
        return it->second;
    }
    double at(const Word& w) const { return at(w.symbols.data()); }

    void set(const Word& w, double v) { values[encode_word(w)] = v; }
    Potential shifted(double c) const {
        Potential out = *this;
        for (auto& kv : out.values) kv.second += c;
        return out;
    }
    double max_value() const;
    double min_value() const;
    double sup_abs() const;

    // constant potential of memory 1
    static Potential constant(const ShiftSpec& spec, double c);
    // tabulate fn over all admissible k-words
    static Potential tabulate(const ShiftSpec& spec, int k,
                              const std::function<double(const Word&)>& fn);
};

// Perron data of the recoded transfer matrix M[u][v] = adj(u,v) e^{psi(u...)}.
// right solves M h = lambda h (the vector entering the Gibbs chain), left
// solves M^T p = lambda p, normalised so <left, right> = 1.
struct RuelleSpectrum {
    Recoding recoding;
    std::vector<std::vector<double>> matrix;
    double leading = 0.0;        // lambda
    double pressure = 0.0;       // log lambda
    double second_modulus = 0.0; // rho_2
    double gap = 0.0;            // 1 - rho_2 / lambda
    std::vector<double> right;
    std::vector<double> left;

    std::size_t dim() const { return matrix.size(); }
    // residuals relative to lambda * ||vec||_inf
    double right_residual() const;
    double left_residual() const;
};

RuelleSpectrum compute_spectrum(const ShiftSpec& spec, const Potential& psi);
// same, over a caller-supplied recoding whose block length admits psi
RuelleSpectrum compute_spectrum(const Recoding& rec, const Potential& psi);

double pressure(const ShiftSpec& spec, const Potential& psi);
Potential normalize(const ShiftSpec& spec, const Potential& psi);

struct GibbsModel {
    ShiftSpec spec;
    Potential psi;           // normalized (pressure 0 within 1e-12)
    RuelleSpectrum spectrum; // of the normalized potential
    MarkovMeasure chain;     // exact Gibbs chain on recoded states
    double gibbs_constant = 1.0; // certified C_psi

    int block_len() const { return spectrum.recoding.block_len; }
    // exact measure of the cylinder [w] for any admissible original word
    double cylinder(const Word& w) const;
};

GibbsModel gibbs_model(const ShiftSpec& spec, const Potential& psi);

// -d/dbeta P(psi - beta phi_dir) at 0 == integral of phi_dir d(mu_psi),
// returned with the linear-response sign: d/dbeta P = -E[phi_dir]
double pressure_derivative(const ShiftSpec& spec, const Potential& psi,
                           const Potential& phi_dir);

// Green-Kubo: Var(phi_bar) + 2 sum_k Cov(phi_bar, phi_bar o T^k), truncated
// once the spectral-gap tail bound drops below 1e-12.  Throws DomainError
// when the chain has no spectral gap.
double pressure_second_derivative(const ShiftSpec& spec, const Potential& psi,
                                  const Potential& phi_dir);

struct GapCheckRow {
    int t_index;
    double beta;
    double pressure;
    double bound; // -chi beta / 2
    double margin; // bound - pressure (>= -tol required)
};

struct GapCheckReport {
    double beta0 = 0.0; // admissible perturbation radius from the gap
    double chi = 0.0;
    std::vector<GapCheckRow> rows;
    double worst_margin = 0.0;
    int worst_t = -1;
    double worst_beta = 0.0;
    bool ok = false;
    double sup_second_derivative = 0.0; // empirical sup over the grid
};

// Checks P(psi - beta phi_t) <= -(chi/2) beta + tol for every t index in
// [0, n_t) and every beta in beta_grid not exceeding beta0 = (gap/2) /
// sup_phi_norm.  phi_of_t supplies the direction potential per grid index.
GapCheckReport gap_theorem_check(
    const ShiftSpec& spec, const Potential& psi,
    const std::function<Potential(int)>& phi_of_t, int n_t,
    const std::vector<double>& beta_grid, double chi, double sup_phi_norm,
    double tol = 1e-9);

} // namespace poelab
