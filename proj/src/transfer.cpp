#include "poelab/transfer.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace poelab {

double Potential::max_value() const {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& kv : values) m = std::max(m, kv.second);
    return m;
}

double Potential::min_value() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& kv : values) m = std::min(m, kv.second);
    return m;
}

double Potential::sup_abs() const {
    return std::max(std::abs(max_value()), std::abs(min_value()));
}

Potential Potential::constant(const ShiftSpec& spec, double c) {
    Potential p;
    p.memory = 1;
    for (int a = 0; a < spec.alphabet_size; ++a)
        p.values[encode_word(Word{{static_cast<Symbol>(a)}})] = c;
    return p;
}

Potential Potential::tabulate(const ShiftSpec& spec, int k,
                              const std::function<double(const Word&)>& fn) {
    Potential p;
    p.memory = k;
    enumerate_words(spec, static_cast<std::size_t>(k), {},
                    [&](const Word& w) { p.values[encode_word(w)] = fn(w); });
    return p;
}

namespace {

double inf_norm(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

std::vector<double> mat_vec(const std::vector<std::vector<double>>& m,
                            const std::vector<double>& v, bool transpose) {
    const std::size_t n = m.size();
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (transpose)
                out[j] += m[i][j] * v[i];
            else
                out[i] += m[i][j] * v[j];
        }
    return out;
}

// polish an eigenvector by power iteration until the residual meets tol
void polish(const std::vector<std::vector<double>>& m, double lambda,
            std::vector<double>& v, bool transpose, double tol) {
    for (int it = 0; it < 100000; ++it) {
        auto mv = mat_vec(m, v, transpose);
        double resid = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i)
            resid = std::max(resid, std::abs(mv[i] - lambda * v[i]));
        if (resid <= tol * lambda * inf_norm(v)) return;
        double nrm = inf_norm(mv);
        if (nrm == 0.0) throw InvariantViolation("eigenvector collapsed");
        for (auto& x : mv) x /= nrm;
        v.swap(mv);
    }
    throw InvariantViolation("Perron eigen-solver did not converge");
}

} // namespace

RuelleSpectrum compute_spectrum(const Recoding& rec, const Potential& psi) {
    if (psi.memory > rec.block_len + 1)
        throw DomainError("recoding block too short for the potential memory");
    RuelleSpectrum sp;
    sp.recoding = rec;
    const int ns = static_cast<int>(rec.states.size());
    sp.matrix.assign(ns, std::vector<double>(ns, 0.0));
    for (int u = 0; u < ns; ++u)
        for (int b = 0; b < rec.base.alphabet_size; ++b) {
            int v = rec.step(u, static_cast<Symbol>(b));
            if (v < 0) continue;
            Word edge = rec.edge_word(u, v);
            sp.matrix[u][v] = std::exp(psi.at(edge.symbols.data()));
        }

    Eigen::MatrixXd m(ns, ns);
    for (int u = 0; u < ns; ++u)
        for (int v = 0; v < ns; ++v) m(u, v) = sp.matrix[u][v];
    Eigen::EigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success)
        throw InvariantViolation("dense eigensolver failed");
    const auto& ev = es.eigenvalues();
    int lead = 0;
    for (int i = 1; i < ns; ++i)
        if (std::abs(ev[i]) > std::abs(ev[lead])) lead = i;
    sp.leading = std::abs(ev[lead]);
    if (!(sp.leading > 0.0))
        throw InvariantViolation("non-positive leading eigenvalue");
    sp.second_modulus = 0.0;
    for (int i = 0; i < ns; ++i)
        if (i != lead) sp.second_modulus = std::max(sp.second_modulus,
                                                    std::abs(ev[i]));
    sp.gap = 1.0 - sp.second_modulus / sp.leading;
    sp.pressure = std::log(sp.leading);

    auto take_positive = [&](Eigen::VectorXcd col) {
        std::vector<double> v(ns);
        for (int i = 0; i < ns; ++i) v[i] = std::abs(col[i]);
        return v;
    };
    sp.right = take_positive(es.eigenvectors().col(lead));
    polish(sp.matrix, sp.leading, sp.right, false, 1e-14);
    Eigen::EigenSolver<Eigen::MatrixXd> est(m.transpose());
    if (est.info() != Eigen::Success)
        throw InvariantViolation("dense eigensolver failed");
    int leadt = 0;
    for (int i = 1; i < ns; ++i)
        if (std::abs(est.eigenvalues()[i]) > std::abs(est.eigenvalues()[leadt]))
            leadt = i;
    sp.left = take_positive(est.eigenvectors().col(leadt));
    polish(sp.matrix, sp.leading, sp.left, true, 1e-14);

    for (int i = 0; i < ns; ++i)
        if (!(sp.right[i] > 0.0) || !(sp.left[i] > 0.0))
            throw InvariantViolation("Perron eigenvector not strictly positive");
    // scale: max entry of right = 1, then <left, right> = 1
    double rm = *std::max_element(sp.right.begin(), sp.right.end());
    for (auto& x : sp.right) x /= rm;
    double ip = 0.0;
    for (int i = 0; i < ns; ++i) ip += sp.left[i] * sp.right[i];
    for (auto& x : sp.left) x /= ip;
    return sp;
}

RuelleSpectrum compute_spectrum(const ShiftSpec& spec, const Potential& psi) {
    if (!is_irreducible(spec))
        throw ConfigError("transfer spectra require an irreducible shift");
    return compute_spectrum(make_recoding(spec, std::max(psi.memory - 1, 1)),
                            psi);
}

double RuelleSpectrum::right_residual() const {
    auto mv = mat_vec(matrix, right, false);
    double r = 0.0;
    for (std::size_t i = 0; i < right.size(); ++i)
        r = std::max(r, std::abs(mv[i] - leading * right[i]));
    return r / (leading * inf_norm(right));
}

double RuelleSpectrum::left_residual() const {
    auto mv = mat_vec(matrix, left, true);
    double r = 0.0;
    for (std::size_t i = 0; i < left.size(); ++i)
        r = std::max(r, std::abs(mv[i] - leading * left[i]));
    return r / (leading * inf_norm(left));
}

double pressure(const ShiftSpec& spec, const Potential& psi) {
    return compute_spectrum(spec, psi).pressure;
}

Potential normalize(const ShiftSpec& spec, const Potential& psi) {
    return psi.shifted(-pressure(spec, psi));
}

GibbsModel gibbs_model(const ShiftSpec& spec, const Potential& psi_in) {
    GibbsModel g;
    g.spec = spec;
    g.psi = normalize(spec, psi_in);
    g.spectrum = compute_spectrum(spec, g.psi);
    const auto& sp = g.spectrum;
    const int ns = static_cast<int>(sp.dim());

    g.chain.transition.assign(ns, std::vector<double>(ns, 0.0));
    g.chain.stationary.assign(ns, 0.0);
    for (int u = 0; u < ns; ++u) {
        g.chain.stationary[u] = sp.left[u] * sp.right[u];
        double rowsum = 0.0;
        for (int v = 0; v < ns; ++v) {
            double q = sp.matrix[u][v] * sp.right[v] / (sp.leading * sp.right[u]);
            g.chain.transition[u][v] = q;
            rowsum += q;
        }
        // rows sum to 1 up to eigen residual; renormalise the residual away
        for (int v = 0; v < ns; ++v) g.chain.transition[u][v] /= rowsum;
    }
    double pisum = 0.0;
    for (double x : g.chain.stationary) pisum += x;
    for (auto& x : g.chain.stationary) x /= pisum;
    g.chain.validate(&sp.recoding.block_spec, 1e-12);

    // certified Gibbs constant: for |w| >= m the ratio
    //   mu([w]) e^{nP} / e^{psi^(n)(theta_w)}
    // depends only on the first and last block states (theta_w completed by
    // the lex-minimal tail), so scanning state pairs certifies all n >= m.
    const Recoding& rec = sp.recoding;
    const int m = rec.block_len;
    const int k = g.psi.memory;
    double cmax = 1.0;
    auto fold = [&cmax](double ratio) {
        cmax = std::max(cmax, std::max(ratio, 1.0 / ratio));
    };
    std::vector<double> tail_part(ns, 0.0);
    for (int v = 0; v < ns; ++v) {
        const Word& bw = rec.states[v];
        auto tail = spec.lex_min_tail(bw.symbols.back(),
                                      static_cast<std::size_t>(k) + 1);
        std::vector<Symbol> ext(bw.symbols.begin(), bw.symbols.end());
        ext.insert(ext.end(), tail.begin() + 1, tail.end());
        double acc = 0.0;
        for (int j = 0; j < m; ++j) acc += g.psi.at(ext.data() + j);
        tail_part[v] = acc;
    }
    for (int u = 0; u < ns; ++u)
        for (int v = 0; v < ns; ++v) {
            double ratio = sp.left[u] * sp.right[v] *
                           std::pow(sp.leading, m) * std::exp(-tail_part[v]);
            fold(ratio);
        }
    // words shorter than the block length
    for (int n = 1; n < m; ++n) {
        enumerate_words(spec, static_cast<std::size_t>(n), {},
                        [&](const Word& w) {
                            auto tail =
                                spec.lex_min_tail(w.symbols.back(),
                                                  static_cast<std::size_t>(k + n));
                            std::vector<Symbol> ext(w.symbols.begin(),
                                                    w.symbols.end());
                            ext.insert(ext.end(), tail.begin() + 1, tail.end());
                            double acc = 0.0;
                            for (int j = 0; j < n; ++j)
                                acc += g.psi.at(ext.data() + j);
                            fold(g.cylinder(w) / std::exp(acc));
                        });
    }
    g.gibbs_constant = cmax * (1.0 + 1e-9); // absorb eigen rounding
    return g;
}

double GibbsModel::cylinder(const Word& w) const {
    const Recoding& rec = spectrum.recoding;
    const std::size_t m = static_cast<std::size_t>(rec.block_len);
    if (!spec.admissible(w)) throw DomainError("inadmissible word");
    if (w.size() >= m) {
        auto p = rec.path(w);
        double prob = chain.stationary[p[0]];
        for (std::size_t i = 0; i + 1 < p.size(); ++i)
            prob *= chain.transition[p[i]][p[i + 1]];
        return prob;
    }
    double prob = 0.0;
    for (std::size_t u = 0; u < rec.states.size(); ++u) {
        const auto& s = rec.states[u].symbols;
        if (std::equal(w.symbols.begin(), w.symbols.end(), s.begin()))
            prob += chain.stationary[u];
    }
    return prob;
}

namespace {

// common chain for derivative computations: blocks long enough that phi_dir
// is a function of the state and psi a function of the edge
struct ObservableChain {
    GibbsModel model;
    std::vector<double> phi; // per state
};

ObservableChain observable_chain(const ShiftSpec& spec, const Potential& psi,
                                 const Potential& phi_dir) {
    int m = std::max({psi.memory - 1, phi_dir.memory, 1});
    ObservableChain oc;
    GibbsModel g;
    g.spec = spec;
    g.psi = normalize(spec, psi);
    g.spectrum = compute_spectrum(make_recoding(spec, m), g.psi);
    const auto& sp = g.spectrum;
    const int ns = static_cast<int>(sp.dim());
    g.chain.transition.assign(ns, std::vector<double>(ns, 0.0));
    g.chain.stationary.assign(ns, 0.0);
    for (int u = 0; u < ns; ++u) {
        g.chain.stationary[u] = sp.left[u] * sp.right[u];
        double rowsum = 0.0;
        for (int v = 0; v < ns; ++v) {
            double q = sp.matrix[u][v] * sp.right[v] / (sp.leading * sp.right[u]);
            g.chain.transition[u][v] = q;
            rowsum += q;
        }
        for (int v = 0; v < ns; ++v) g.chain.transition[u][v] /= rowsum;
    }
    double pisum = 0.0;
    for (double x : g.chain.stationary) pisum += x;
    for (auto& x : g.chain.stationary) x /= pisum;
    oc.model = std::move(g);
    const auto& rec = oc.model.spectrum.recoding;
    oc.phi.resize(ns);
    for (int u = 0; u < ns; ++u)
        oc.phi[u] = phi_dir.at(rec.states[u].symbols.data());
    return oc;
}

} // namespace

double pressure_derivative(const ShiftSpec& spec, const Potential& psi,
                           const Potential& phi_dir) {
    auto oc = observable_chain(spec, psi, phi_dir);
    double e = 0.0;
    for (std::size_t u = 0; u < oc.phi.size(); ++u)
        e += oc.model.chain.stationary[u] * oc.phi[u];
    return -e;
}

double pressure_second_derivative(const ShiftSpec& spec, const Potential& psi,
                                  const Potential& phi_dir) {
    auto oc = observable_chain(spec, psi, phi_dir);
    const auto& q = oc.model.chain.transition;
    const auto& pi = oc.model.chain.stationary;
    const std::size_t ns = oc.phi.size();

    double mean = 0.0;
    for (std::size_t u = 0; u < ns; ++u) mean += pi[u] * oc.phi[u];
    std::vector<double> bar(ns);
    for (std::size_t u = 0; u < ns; ++u) bar[u] = oc.phi[u] - mean;

    double var = 0.0, supbar = 0.0;
    for (std::size_t u = 0; u < ns; ++u) {
        var += pi[u] * bar[u] * bar[u];
        supbar = std::max(supbar, std::abs(bar[u]));
    }

    // mixing rate and covariance prefactor from the chain spectrum
    Eigen::MatrixXd qm(ns, ns);
    for (std::size_t u = 0; u < ns; ++u)
        for (std::size_t v = 0; v < ns; ++v) qm(u, v) = q[u][v];
    Eigen::EigenSolver<Eigen::MatrixXd> es(qm);
    double rho = 0.0;
    int lead = 0;
    for (int i = 1; i < static_cast<int>(ns); ++i)
        if (std::abs(es.eigenvalues()[i]) > std::abs(es.eigenvalues()[lead]))
            lead = i;
    for (int i = 0; i < static_cast<int>(ns); ++i)
        if (i != lead) rho = std::max(rho, std::abs(es.eigenvalues()[i]));
    if (rho >= 1.0 - 1e-10)
        throw DomainError("no spectral gap: covariance series diverges");
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(es.eigenvectors());
    double kappa = svd.singularValues()(0) /
                   svd.singularValues()(svd.singularValues().size() - 1);
    double c_cov = supbar * supbar * kappa + 1e-30;

    long k_max = 1;
    if (rho > 1e-14)
        k_max = std::min<long>(
            100000,
            static_cast<long>(std::ceil(std::log(1e-12 / c_cov) / std::log(rho))) +
                1);

    double series = 0.0;
    std::vector<double> w = bar, nxt(ns);
    for (long k = 1; k <= k_max; ++k) {
        for (std::size_t u = 0; u < ns; ++u) {
            double acc = 0.0;
            for (std::size_t v = 0; v < ns; ++v) acc += q[u][v] * w[v];
            nxt[u] = acc;
        }
        w.swap(nxt);
        double cov = 0.0;
        for (std::size_t u = 0; u < ns; ++u) cov += pi[u] * bar[u] * w[u];
        series += cov;
    }
    return var + 2.0 * series;
}

GapCheckReport gap_theorem_check(
    const ShiftSpec& spec, const Potential& psi,
    const std::function<Potential(int)>& phi_of_t, int n_t,
    const std::vector<double>& beta_grid, double chi, double sup_phi_norm,
    double tol) {
    if (!(chi > 0.0))
        throw DomainError("gap check requires a certified positive margin");
    GapCheckReport rep;
    rep.chi = chi;
    auto base = compute_spectrum(spec, normalize(spec, psi));
    rep.beta0 = 0.5 * base.gap / std::max(sup_phi_norm, 1e-300);
    rep.worst_margin = std::numeric_limits<double>::infinity();
    rep.ok = true;

    Potential psi_n = normalize(spec, psi);
    for (int ti = 0; ti < n_t; ++ti) {
        Potential phi = phi_of_t(ti);
        int m = std::max({psi_n.memory - 1, phi.memory - 1, 1});
        Recoding rec = make_recoding(spec, m);
        // second-derivative sup tracking (empirical, reported not asserted)
        rep.sup_second_derivative =
            std::max(rep.sup_second_derivative,
                     std::abs(pressure_second_derivative(spec, psi_n, phi)));
        for (double beta : beta_grid) {
            if (beta > rep.beta0) continue;
            // psi - beta * phi tabulated over the common memory
            Potential combined = Potential::tabulate(
                spec, std::max(psi_n.memory, phi.memory), [&](const Word& w) {
                    return psi_n.at(w.symbols.data()) -
                           beta * phi.at(w.symbols.data());
                });
            double p = compute_spectrum(rec, combined).pressure;
            double bound = -0.5 * chi * beta;
            double margin = bound - p;
            rep.rows.push_back({ti, beta, p, bound, margin});
            if (margin < rep.worst_margin) {
                rep.worst_margin = margin;
                rep.worst_t = ti;
                rep.worst_beta = beta;
            }
            if (margin < -tol) rep.ok = false;
        }
    }
    return rep;
}

} // namespace poelab
