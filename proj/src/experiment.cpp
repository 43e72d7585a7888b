#include "poelab/experiment.hpp"

#include "poelab/csv.hpp"
#include "poelab/kern/kernels.hpp"
#include "poelab/parallel.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

namespace poelab {

namespace {
constexpr double kPi = 3.14159265358979323846;
using nlohmann::json;
} // namespace

// ---------------------------------------------------------------------------
// configuration
// ---------------------------------------------------------------------------

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    ExperimentConfig cfg = from_json_text(text);
    if (cfg.name == "system")
        cfg.name = std::filesystem::path(path).stem().string();
    return cfg;
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    ExperimentConfig cfg;
    try {
        cfg.format = j.value("format", 1);
        if (cfg.format != 1)
            throw ConfigError("unsupported config format version");
        cfg.spec.alphabet_size = j.at("alphabet_size").get<int>();
        auto adj = j.at("adjacency").get<std::vector<int>>();
        int s = cfg.spec.alphabet_size;
        if (static_cast<int>(adj.size()) != s * s)
            throw ConfigError("adjacency must hold alphabet_size^2 entries");
        cfg.spec.adjacency.assign(s, std::vector<std::uint8_t>(s, 0));
        for (int a = 0; a < s; ++a)
            for (int b = 0; b < s; ++b)
                cfg.spec.adjacency[a][b] =
                    adj[static_cast<std::size_t>(a * s + b)] ? 1 : 0;
        cfg.spec.validate();

        const auto& jp = j.at("psi");
        cfg.psi.memory = jp.at("memory").get<int>();
        for (const auto& [key, val] : jp.at("values").items()) {
            Word w;
            for (char c : key) {
                if (c < '0' || c >= '0' + s)
                    throw ConfigError("psi word key outside the alphabet: " +
                                      key);
                w.symbols.push_back(static_cast<Symbol>(c - '0'));
            }
            if (static_cast<int>(w.size()) != cfg.psi.memory)
                throw ConfigError("psi word key length != memory: " + key);
            cfg.psi.set(w, val.get<double>());
        }

        const auto& jm = j.at("matrices");
        if (jm.at("window").is_object()) {
            cfg.sys.past_window = jm.at("window").value("past", 0);
            cfg.sys.future_window = jm.at("window").value("future", 0);
        } else {
            cfg.sys.past_window = 0;
            cfg.sys.future_window = jm.at("window").get<int>() - 1;
        }
        cfg.sys.spec = cfg.spec;
        for (const auto& [key, val] : jm.at("entries").items()) {
            Word w;
            for (char c : key)
                w.symbols.push_back(static_cast<Symbol>(c - '0'));
            if (static_cast<int>(w.size()) != cfg.sys.window_len())
                throw ConfigError("matrix word key length != window: " + key);
            auto e = val.get<std::vector<double>>();
            if (e.size() != 4)
                throw ConfigError("matrix entries must be 4-tuples");
            cfg.sys.matrices[encode_word(w)] = Mat2{e[0], e[1], e[2], e[3]};
        }

        cfg.s = j.value("s", -1.0);
        if (j.contains("beta_grid"))
            cfg.beta_grid = j.at("beta_grid").get<std::vector<double>>();
        cfg.n_max = j.value("n_max", 12);
        cfg.fiber_grid_log2 = j.value("fiber_grid_log2", 10);
        cfg.bins = j.value("bins", 1024);
        cfg.mc_samples = j.value("mc_samples", 100000LL);
        cfg.seed = j.value("seed", 1ULL);
        cfg.threads = j.value("threads", 1);
        cfg.memory_m = j.value("memory_m", 2);
        cfg.out_dir = j.value("out", std::string("out"));
        cfg.name = j.value("name", std::string("system"));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config error: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

void ExperimentConfig::validate() const {
    spec.validate();
    if (auto defect = irreducibility_defect(spec))
        throw ConfigError("shift is not irreducible: symbol " +
                          std::to_string(defect->second) +
                          " is unreachable from symbol " +
                          std::to_string(defect->first));
    for (double b : beta_grid)
        if (!(b > 0.0) || b > 1.0)
            throw ConfigError("beta grid entries must lie in (0, 1]");
    if (n_max < 1) throw ConfigError("n_max must be >= 1");
    if (std::pow(double(spec.alphabet_size), n_max) >
        double(kEnumerationCap))
        throw ConfigError("n_max exceeds the enumeration capability");
    if (fiber_grid_log2 < 3 || fiber_grid_log2 > 16)
        throw ConfigError("fiber_grid_log2 must be in [3, 16]");
    if (memory_m < 1 || memory_m > 3)
        throw ConfigError("memory_m must be in 1..3");
    if (mc_samples < 1000) throw ConfigError("mc_samples must be >= 1000");
    if (threads < 1) throw ConfigError("threads must be >= 1");
    sys.validate();
}

CombinedPotential ExperimentConfig::combined(double coefficient) const {
    CombinedPotential cp;
    cp.spec = spec;
    cp.psi = normalize(spec, psi);
    if (sys.past_window > 0) {
        cp.family = PotentialFamily{two_sided_reduce(sys).reduced};
    } else {
        cp.family = PotentialFamily{sys};
    }
    cp.s = coefficient;
    return cp;
}

// ---------------------------------------------------------------------------
// sampling and moments
// ---------------------------------------------------------------------------

Word gibbs_sample(const GibbsModel& model, int n, PhiloxStream& rng) {
    const Recoding& rec = model.spectrum.recoding;
    const int m = rec.block_len;
    Word w;
    w.symbols.reserve(static_cast<std::size_t>(n));
    std::size_t u = rng.pick(model.chain.stationary);
    for (int i = 0; i < m && i < n; ++i)
        w.symbols.push_back(rec.states[u].symbols[static_cast<std::size_t>(i)]);
    while (static_cast<int>(w.symbols.size()) < n) {
        std::size_t v = rng.pick(model.chain.transition[u]);
        w.symbols.push_back(rec.states[v].symbols.back());
        u = v;
    }
    return w;
}

namespace {

// walk every admissible word of length n, tracking the recoded-chain
// cylinder probability and the plain matrix product; visit(prob, P) at each
// leaf in lexicographic order
void moment_walk(const CombinedPotential& cp, const GibbsModel& gibbs, int n,
                 const std::function<void(double, const Mat2&)>& visit) {
    const Recoding& rec = gibbs.spectrum.recoding;
    const int m = rec.block_len;
    const int s_ab = cp.spec.alphabet_size;
    std::vector<Mat2> mats(static_cast<std::size_t>(s_ab));
    for (int a = 0; a < s_ab; ++a) {
        Symbol sa = static_cast<Symbol>(a);
        mats[static_cast<std::size_t>(a)] = cp.family.sys.at(&sa);
    }
    std::vector<Symbol> word(static_cast<std::size_t>(n));
    std::function<void(int, double, int, const Mat2&)> rec_fn =
        [&](int d, double prob, int state, const Mat2& prod) {
            if (d == n) {
                visit(prob, prod);
                return;
            }
            for (int b = 0; b < s_ab; ++b) {
                if (d > 0 && !cp.spec.allows(word[static_cast<std::size_t>(d - 1)],
                                             static_cast<Symbol>(b)))
                    continue;
                word[static_cast<std::size_t>(d)] = static_cast<Symbol>(b);
                double p2 = prob;
                int st2 = state;
                if (d + 1 == m) {
                    st2 = rec.state_of(word.data());
                    p2 = gibbs.chain.stationary[static_cast<std::size_t>(st2)];
                } else if (d + 1 > m) {
                    st2 = rec.step(state, static_cast<Symbol>(b));
                    p2 = prob *
                         gibbs.chain
                             .transition[static_cast<std::size_t>(state)]
                                        [static_cast<std::size_t>(st2)];
                }
                rec_fn(d + 1, p2, st2, mats[static_cast<std::size_t>(b)] * prod);
            }
        };
    if (n < m)
        throw DomainError("moment walk needs n >= the recoded block length");
    rec_fn(0, 1.0, -1, Mat2::identity());
}

} // namespace

double contraction_moment_exact(const CombinedPotential& cp,
                                const GibbsModel& gibbs, int n, double t) {
    cp.validate();
    if (cp.family.sys.future_window != 0)
        throw DomainError("moments need window-1 matrices");
    if (std::pow(double(cp.spec.alphabet_size), n) > double(kEnumerationCap))
        throw DomainError("enumeration cap exceeded for the exact moment");
    double x, y;
    std::vector<double> one{reduce_mod_pi(t)};
    grid_directions(one, &x, &y);
    double total = 0.0;
    moment_walk(cp, gibbs, n, [&](double prob, const Mat2& p) {
        double u = p.a * x + p.b * y;
        double v = p.c * x + p.d * y;
        total += prob * std::exp(cp.s * std::log(std::hypot(u, v)));
    });
    return total;
}

std::vector<double> contraction_moment_grid(const CombinedPotential& cp,
                                            const GibbsModel& gibbs, int n,
                                            const std::vector<double>& angles,
                                            int threads) {
    cp.validate();
    if (std::pow(double(cp.spec.alphabet_size), n) > double(kEnumerationCap))
        throw DomainError("enumeration cap exceeded for the exact moment");
    const std::size_t g = angles.size();
    std::vector<double> x(g), y(g);
    grid_directions(angles, x.data(), y.data());
    // parallel over fixed angle chunks; each angle's sum runs in the same
    // lexicographic order regardless of the thread count
    std::vector<double> out(g, 0.0);
    if (std::pow(double(cp.spec.alphabet_size), n) <= double(1 << 20)) {
        std::vector<Mat2> prods;
        std::vector<double> probs;
        moment_walk(cp, gibbs, n, [&](double prob, const Mat2& p) {
            prods.push_back(p);
            probs.push_back(prob);
        });
        const std::size_t chunk = 64;
        const std::size_t n_chunks = (g + chunk - 1) / chunk;
        parallel_tasks(n_chunks, threads, [&](std::size_t ci) {
            std::size_t lo = ci * chunk, hi = std::min(g, lo + chunk);
            for (std::size_t w = 0; w < prods.size(); ++w) {
                const Mat2& p = prods[w];
                for (std::size_t i = lo; i < hi; ++i) {
                    double u = p.a * x[i] + p.b * y[i];
                    double v = p.c * x[i] + p.d * y[i];
                    out[i] +=
                        probs[w] * std::exp(cp.s * std::log(std::hypot(u, v)));
                }
            }
        });
    } else {
        moment_walk(cp, gibbs, n, [&](double prob, const Mat2& p) {
            for (std::size_t i = 0; i < g; ++i) {
                double u = p.a * x[i] + p.b * y[i];
                double v = p.c * x[i] + p.d * y[i];
                out[i] += prob * std::exp(cp.s * std::log(std::hypot(u, v)));
            }
        });
    }
    return out;
}

MomentCI contraction_moment_mc(const CombinedPotential& cp,
                               const GibbsModel& gibbs, int n, double t,
                               long long samples, std::uint64_t seed,
                               int threads) {
    cp.validate();
    if (samples < 1000) throw DomainError("contraction_moment_mc needs >= 1e3 samples");
    double x, y;
    std::vector<double> one{reduce_mod_pi(t)};
    grid_directions(one, &x, &y);
    const long long block = 4096;
    const std::size_t n_blocks =
        static_cast<std::size_t>((samples + block - 1) / block);
    // per-block log-space accumulators of sum e^v and sum e^{2v}
    std::vector<kern::LseState> s1(n_blocks), s2(n_blocks);
    parallel_tasks(n_blocks, threads, [&](std::size_t bi) {
        auto& ops = kern::ops();
        kern::LseState a1 = kern::lse_make(), a2 = kern::lse_make();
        long long lo = static_cast<long long>(bi) * block;
        long long hi = std::min(samples, lo + block);
        std::vector<double> vals(static_cast<std::size_t>(hi - lo));
        std::vector<double> vals2(vals.size());
        for (long long i = lo; i < hi; ++i) {
            PhiloxStream z(seed, 0x4D430000ULL + static_cast<std::uint64_t>(i));
            Word w = gibbs_sample(gibbs, n, z);
            Mat2 p = Mat2::identity();
            double scale = 0.0;
            for (Symbol sym : w.symbols) {
                p = cp.family.sys.at(&sym) * p;
                double f = p.frob();
                if (f > 1e60 || f < 1e-60) {
                    p = p.times(1.0 / f);
                    scale += std::log(f);
                }
            }
            double u = p.a * x + p.b * y;
            double v = p.c * x + p.d * y;
            double lw = cp.s * (scale + std::log(std::hypot(u, v)));
            vals[static_cast<std::size_t>(i - lo)] = lw;
            vals2[static_cast<std::size_t>(i - lo)] = 2.0 * lw;
        }
        ops.lse_absorb(a1, vals.data(), vals.size());
        ops.lse_absorb(a2, vals2.data(), vals2.size());
        s1[bi] = a1;
        s2[bi] = a2;
    });
    auto total1 = kern::lse_make(), total2 = kern::lse_make();
    for (std::size_t bi = 0; bi < n_blocks; ++bi) {
        kern::lse_merge(total1, s1[bi]);
        kern::lse_merge(total2, s2[bi]);
    }
    double log_n = std::log(static_cast<double>(samples));
    double mean = std::exp(kern::lse_finalize(total1) - log_n);
    double mean2 = std::exp(kern::lse_finalize(total2) - log_n);
    double var = std::max(mean2 - mean * mean, 0.0) *
                 (double(samples) / double(samples - 1));
    const double z99 = 2.5758293035489004; // 99% two-sided normal quantile
    double half = z99 * std::sqrt(var / double(samples));
    return {mean, mean - half, mean + half};
}

// ---------------------------------------------------------------------------
// moment = partition sum identity, decay rates, tails
// ---------------------------------------------------------------------------

RatioCheckReport thm2_ratio_check(const CombinedPotential& cp,
                                  const GibbsModel& gibbs,
                                  const std::vector<int>& n_list,
                                  const std::vector<double>& t_probes,
                                  int threads) {
    cp.validate();
    RatioCheckReport rep;
    rep.c_hat_eigen = gibbs.gibbs_constant;
    // on a full shift with memory-1 data the ratio is constant in n exactly
    bool full = true;
    for (int a = 0; a < cp.spec.alphabet_size && full; ++a)
        for (int b = 0; b < cp.spec.alphabet_size && full; ++b)
            full = cp.spec.allows(static_cast<Symbol>(a), static_cast<Symbol>(b));
    rep.constant_expected =
        full && cp.psi.memory == 1 && cp.family.sys.future_window == 0;

    std::vector<std::vector<double>> ratios(
        t_probes.size(), std::vector<double>(n_list.size(), 0.0));
    for (std::size_t ni = 0; ni < n_list.size(); ++ni) {
        int n = n_list[ni];
        auto pg = partition_sum_exact_grid(cp, n, -1, t_probes, threads);
        auto mg = contraction_moment_grid(cp, gibbs, n, t_probes, threads);
        for (std::size_t ti = 0; ti < t_probes.size(); ++ti) {
            double r = mg[ti] / std::exp(pg.log_z[ti]);
            ratios[ti][ni] = r;
            rep.rows.push_back({n, static_cast<int>(ti), r});
        }
    }
    double chat_cal = 1.0;
    std::size_t half = (n_list.size() + 1) / 2;
    for (std::size_t ti = 0; ti < t_probes.size(); ++ti)
        for (std::size_t ni = 0; ni < half; ++ni) {
            double r = ratios[ti][ni];
            chat_cal = std::max({chat_cal, r, 1.0 / r});
        }
    rep.c_hat_calibrated = chat_cal;
    double chat_hard = rep.c_hat_eigen * (1.0 + 1e-9);
    for (std::size_t ti = 0; ti < t_probes.size(); ++ti) {
        for (std::size_t ni = 0; ni < n_list.size(); ++ni) {
            double r = ratios[ti][ni];
            if (r > chat_hard || r < 1.0 / chat_hard) rep.ok = false;
            if (rep.constant_expected) {
                double drift = std::abs(r / ratios[ti][0] - 1.0);
                rep.max_drift = std::max(rep.max_drift, drift);
                if (drift > 1e-12) rep.ok = false;
            }
        }
    }
    return rep;
}

DecayReport decay_rate_report(const ExperimentConfig& cfg,
                              const GibbsModel& gibbs, double chi) {
    if (!(chi > 0.0))
        throw DomainError("decay report requires a certified chi > 0");
    DecayReport rep;
    rep.chi = chi;
    auto angles = fiber_grid(1 << cfg.fiber_grid_log2);
    for (double beta : cfg.beta_grid) {
        auto cp = cfg.combined(-beta);
        // fit window: per-n certified POE bracket width <= 0.05
        auto est = poe_estimate(cp, cfg.n_max, cfg.fiber_grid_log2, cfg.bins,
                                cfg.threads);
        int n_lo = cfg.n_max;
        for (int n = cfg.n_max; n >= 2; --n) {
            double width = est.upper_per_n[static_cast<std::size_t>(n - 1)] -
                           est.sequence[static_cast<std::size_t>(n - 1)];
            if (width > 0.05) break;
            n_lo = n;
        }
        if (cfg.n_max - n_lo < 3) n_lo = std::max(2, cfg.n_max - 3);

        std::vector<int> ns;
        std::vector<double> logm;
        for (int n = n_lo; n <= cfg.n_max; ++n) {
            auto mg = contraction_moment_grid(cp, gibbs, n, angles,
                                              cfg.threads);
            int arg = 0;
            double sup = mg[0];
            for (std::size_t i = 1; i < mg.size(); ++i)
                if (mg[i] > sup) {
                    sup = mg[i];
                    arg = static_cast<int>(i);
                }
            rep.rows.push_back({beta, n, sup, arg});
            ns.push_back(n);
            logm.push_back(std::log(sup));
        }
        // least squares for log sup_moment = a - gamma n
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const double m = static_cast<double>(ns.size());
        for (std::size_t i = 0; i < ns.size(); ++i) {
            sx += ns[i];
            sy += logm[i];
            sxx += double(ns[i]) * ns[i];
            sxy += ns[i] * logm[i];
        }
        double denom = m * sxx - sx * sx;
        double slope = (m * sxy - sx * sy) / denom;
        double intercept = (sy - slope * sx) / m;
        double rss = 0.0;
        for (std::size_t i = 0; i < ns.size(); ++i) {
            double r = logm[i] - (intercept + slope * ns[i]);
            rss += r * r;
        }
        double slope_se =
            ns.size() > 2 ? std::sqrt(rss / (m - 2) * (m / denom)) : 0.0;

        DecayFit fit;
        fit.beta = beta;
        fit.gamma_hat = -slope;
        fit.fit_err = 3.0 * slope_se;
        fit.bound = 0.5 * chi * beta;
        fit.rate_ok = fit.gamma_hat >= fit.bound - fit.fit_err - 1e-12;
        // non-asymptotic prefactor: calibrate on the first half, validate on
        // the held-out rest
        std::size_t half = (ns.size() + 1) / 2;
        double c_fit = 0.0;
        for (std::size_t i = 0; i < half; ++i)
            c_fit = std::max(c_fit,
                             std::exp(logm[i] + fit.bound * ns[i]));
        fit.c_fit = c_fit;
        fit.prefactor_ok = true;
        for (std::size_t i = half; i < ns.size(); ++i)
            if (std::exp(logm[i]) >
                c_fit * std::exp(-fit.bound * ns[i]) * (1.0 + 1e-9))
                fit.prefactor_ok = false;
        // MC consistency at a point beyond the enumeration window
        fit.mc_n = std::min(static_cast<int>(2.5 * cfg.n_max), 48);
        int arg_last = rep.rows.back().argmax;
        double t_star = angles[static_cast<std::size_t>(arg_last)];
        fit.mc = contraction_moment_mc(cp, gibbs, fit.mc_n, t_star,
                                       cfg.mc_samples, cfg.seed, cfg.threads);
        fit.mc_prediction = std::exp(intercept + slope * fit.mc_n);
        fit.mc_ok =
            fit.mc_prediction >= fit.mc.lo && fit.mc_prediction <= fit.mc.hi;
        if (!fit.rate_ok || !fit.prefactor_ok || !fit.mc_ok) rep.ok = false;
        rep.fits.push_back(fit);
    }
    return rep;
}

TailCheckReport tail_probability_check(const CombinedPotential& cp,
                                       const GibbsModel& gibbs, double beta,
                                       int n, double c, double t) {
    cp.validate();
    TailCheckReport rep;
    rep.beta = beta;
    rep.c = c;
    rep.n = n;
    rep.t = t;
    rep.bound = std::exp(beta * c * n) * contraction_moment_exact(cp, gibbs, n, t);
    double x, y;
    std::vector<double> one{reduce_mod_pi(t)};
    grid_directions(one, &x, &y);
    double mass = 0.0;
    const double thresh = std::exp(c * n);
    moment_walk(cp, gibbs, n, [&](double prob, const Mat2& p) {
        double u = p.a * x + p.b * y;
        double v = p.c * x + p.d * y;
        if (std::hypot(u, v) <= thresh) mass += prob;
    });
    rep.exact = mass;
    rep.ok = rep.exact <= rep.bound * (1.0 + 1e-12) + 1e-300;
    return rep;
}

// ---------------------------------------------------------------------------
// staged pipeline
// ---------------------------------------------------------------------------

std::vector<Stage> all_stages() {
    return {Stage::Pressure, Stage::Gibbs,         Stage::Gap,
            Stage::Poe,      Stage::Variational,   Stage::Hyperbolicity,
            Stage::Reduce};
}

namespace {

struct StageStatus {
    std::string name;
    bool ok = true;
    json details;
};

// --- individual stages (each writes its CSV and fills a status entry)

StageStatus run_pressure_stage(const ExperimentConfig& cfg,
                               const GibbsModel& gibbs) {
    StageStatus st{"pressure", true, {}};
    double p_raw = pressure(cfg.spec, cfg.psi);
    double p_norm = pressure(cfg.spec, gibbs.psi);
    st.details["pressure_raw"] = p_raw;
    st.details["pressure_normalized"] = p_norm;
    st.details["leading_eigenvalue"] = gibbs.spectrum.leading;
    st.details["second_modulus"] = gibbs.spectrum.second_modulus;
    st.details["spectral_gap"] = gibbs.spectrum.gap;
    st.details["gibbs_constant"] = gibbs.gibbs_constant;
    st.details["right_residual"] = gibbs.spectrum.right_residual();
    st.details["left_residual"] = gibbs.spectrum.left_residual();
    st.ok = std::abs(p_norm) <= 1e-12 &&
            gibbs.spectrum.right_residual() <= 1e-12 &&
            gibbs.spectrum.left_residual() <= 1e-12 &&
            gibbs.spectrum.gap > 0.0;

    CsvWriter csv(cfg.out_dir + "/pressure_report.csv");
    csv.header({"state", "stationary", "right_eigvec", "left_eigvec"});
    for (std::size_t u = 0; u < gibbs.chain.states(); ++u)
        csv.row()
            .col(u)
            .col(gibbs.chain.stationary[u])
            .col(gibbs.spectrum.right[u])
            .col(gibbs.spectrum.left[u]);
    return st;
}

StageStatus run_gibbs_stage(const ExperimentConfig& cfg,
                            const GibbsModel& gibbs) {
    StageStatus st{"gibbs", true, {}};
    // frequency calibration across 200 words of length 100
    const int draws = 200, len = 100;
    std::vector<double> freq(static_cast<std::size_t>(cfg.spec.alphabet_size),
                             0.0);
    for (int i = 0; i < draws; ++i) {
        PhiloxStream z(cfg.seed, 0x47420000ULL + static_cast<std::uint64_t>(i));
        Word w = gibbs_sample(gibbs, len, z);
        if (!cfg.spec.admissible(w)) st.ok = false;
        for (Symbol sym : w.symbols) freq[sym] += 1.0 / (draws * len);
    }
    // compare against the exact one-symbol marginals (5 sigma)
    CsvWriter csv(cfg.out_dir + "/gibbs_report.csv");
    csv.header({"symbol", "expected", "empirical"});
    for (int a = 0; a < cfg.spec.alphabet_size; ++a) {
        double expect = gibbs.cylinder(Word{{static_cast<Symbol>(a)}});
        double se = std::sqrt(expect * (1 - expect) / (draws * len));
        if (std::abs(freq[static_cast<std::size_t>(a)] - expect) >
            5 * se + 5e-3)
            st.ok = false;
        csv.row().col(a).col(expect).col(freq[static_cast<std::size_t>(a)]);
    }
    st.details["draws"] = draws;
    return st;
}

StageStatus run_gap_stage(const ExperimentConfig& cfg, const GibbsModel& gibbs,
                          double& chi_out) {
    StageStatus st{"gap", true, {}};
    auto cp = cfg.combined(cfg.s);
    auto margin = uniform_expansion_margin(cp.family, gibbs,
                                           1 << cfg.fiber_grid_log2);
    chi_out = margin.certified;
    st.details["chi_grid"] = margin.grid_min;
    st.details["chi_certified"] = margin.certified;
    st.details["expansion_certified"] = margin.expansion_certified;
    if (!margin.expansion_certified) {
        st.ok = false;
        st.details["note"] = "expansion not certified";
        return st;
    }
    const int n_t = std::min(256, 1 << cfg.fiber_grid_log2);
    auto family = cp.family;
    auto phi_of_t = [&](int ti) {
        double t = kPi * ti / n_t;
        return Potential::tabulate(
            cfg.spec, cp.family.sys.future_window + 1,
            [&](const Word& w) { return family.eval(t, w.symbols.data()); });
    };
    auto rep = gap_theorem_check(cfg.spec, cfg.psi, phi_of_t, n_t,
                                 cfg.beta_grid, margin.certified,
                                 family.sup_norm());
    st.ok = rep.ok;
    st.details["beta0"] = rep.beta0;
    st.details["worst_margin"] = rep.worst_margin;
    st.details["worst_t"] = rep.worst_t;
    st.details["worst_beta"] = rep.worst_beta;
    st.details["sup_second_derivative"] = rep.sup_second_derivative;

    CsvWriter csv(cfg.out_dir + "/gap_report.csv");
    csv.header({"t_index", "beta", "pressure", "bound", "margin"});
    for (const auto& row : rep.rows)
        csv.row()
            .col(row.t_index)
            .col(row.beta)
            .col(row.pressure)
            .col(row.bound)
            .col(row.margin);
    return st;
}

StageStatus run_poe_stage(const ExperimentConfig& cfg, PoeEstimate& est_out) {
    StageStatus st{"poe", true, {}};
    auto cp = cfg.combined(cfg.s);
    auto est = poe_estimate(cp, cfg.n_max, cfg.fiber_grid_log2, cfg.bins,
                            cfg.threads);
    est_out = est;
    st.details["fekete_upper"] = est.fekete_upper;
    st.details["fekete_argmin"] = est.fekete_argmin;
    st.details["sequence"] = est.sequence;

    // submultiplicativity over a fixed pair set
    std::vector<std::pair<int, int>> pairs;
    for (int n = 2; 2 * n <= cfg.n_max; n += 2) pairs.emplace_back(n, n);
    if (cfg.n_max >= 8) pairs.emplace_back(3, 5);
    auto sub = submultiplicativity_check(cp, pairs, cfg.fiber_grid_log2,
                                         cfg.threads);
    st.ok = st.ok && sub.ok;
    st.details["submultiplicativity_ok"] = sub.ok;

    std::vector<int> n_list;
    for (int n = 4; n <= cfg.n_max; n += 4) n_list.push_back(n);
    if (n_list.empty()) n_list.push_back(cfg.n_max);
    auto anch = anchor_independence_check(cp, n_list, cfg.fiber_grid_log2,
                                          cfg.threads);
    st.ok = st.ok && anch.ok;
    st.details["anchor_spread_times_n"] = anch.max_spread_times_n;
    st.details["anchor_c_theory"] = anch.c_theory;

    auto angles = fiber_grid(1 << cfg.fiber_grid_log2);
    CsvWriter csv(cfg.out_dir + "/poe_report.csv");
    csv.header({"n", "anchor", "t_index", "log_Z_lower", "log_Z_upper",
                "sup_log", "fekete_upper"});
    for (int n = 1; n <= cfg.n_max; ++n) {
        for (int anchor = -1; anchor < cfg.spec.alphabet_size; ++anchor) {
            auto pg =
                partition_sum_exact_grid(cp, n, anchor, angles, cfg.threads);
            // thin the grid to keep the report compact
            std::size_t stride = std::max<std::size_t>(angles.size() / 64, 1);
            for (std::size_t i = 0; i < angles.size(); i += stride)
                csv.row()
                    .col(n)
                    .col(anchor)
                    .col(i)
                    .col(pg.log_z[i])
                    .col(pg.log_z[i]) // exact values: the bracket collapses
                    .col(pg.grid_max + pg.lipschitz_bound)
                    .col(est.fekete_upper);
        }
    }
    return st;
}

StageStatus run_variational_stage(const ExperimentConfig& cfg,
                                  const PoeEstimate& est,
                                  SandwichReport& sw_out) {
    StageStatus st{"variational", true, {}};
    auto cp = cfg.combined(cfg.s);
    OptimizerConfig ocfg;
    ocfg.seed = cfg.seed;
    ocfg.threads = cfg.threads;
    ocfg.grid_log2 = cfg.fiber_grid_log2;
    auto mlb = markov_lower_bound(cp, cfg.memory_m, ocfg);
    auto sw = variational_sandwich(est, mlb);
    sw_out = sw;
    st.ok = sw.ordering_ok;
    st.details["lower"] = sw.lower;
    st.details["lower_raw"] = mlb.raw;
    st.details["stat_err"] = mlb.stat_err;
    st.details["window"] = mlb.window;
    st.details["entropy"] = mlb.entropy;
    st.details["seq_at_nmax"] = sw.seq_at_nmax;
    st.details["fekete_upper"] = sw.fekete_upper;
    st.details["width"] = sw.width;
    st.details["ordering_ok"] = sw.ordering_ok;

    CsvWriter csv(cfg.out_dir + "/variational_report.csv");
    std::vector<std::string> header{"system", "s",     "m",
                                    "lower",  "fekete_upper", "width"};
    for (std::size_t u = 0; u < mlb.best.states(); ++u)
        for (std::size_t v = 0; v < mlb.best.states(); ++v)
            header.push_back("q_" + std::to_string(u) + "_" +
                             std::to_string(v));
    csv.header(header);
    auto row = csv.row();
    row.col(cfg.name)
        .col(cfg.s)
        .col(cfg.memory_m)
        .col(sw.lower)
        .col(sw.fekete_upper)
        .col(sw.width);
    for (std::size_t u = 0; u < mlb.best.states(); ++u)
        for (std::size_t v = 0; v < mlb.best.states(); ++v)
            row.col(mlb.best.transition[u][v]);
    return st;
}

StageStatus run_hyperbolicity_stage(const ExperimentConfig& cfg,
                                    const GibbsModel& gibbs, double chi) {
    StageStatus st{"hyperbolicity", true, {}};
    if (!(chi > 0.0)) {
        st.ok = false;
        st.details["note"] = "no certified expansion margin";
        return st;
    }
    // moment = partition-sum identity on probe directions
    auto cp1 = cfg.combined(cfg.beta_grid.empty() ? -1.0 : -cfg.beta_grid.back());
    std::vector<double> probes;
    for (int i = 0; i < 8; ++i) probes.push_back(kPi * i / 8);
    std::vector<int> n_list;
    for (int n = 2; n <= std::min(cfg.n_max, 10); n += 2) n_list.push_back(n);
    auto ratio = thm2_ratio_check(cp1, gibbs, n_list, probes, cfg.threads);
    st.ok = st.ok && ratio.ok;
    st.details["ratio_ok"] = ratio.ok;
    st.details["c_hat_eigen"] = ratio.c_hat_eigen;
    st.details["c_hat_calibrated"] = ratio.c_hat_calibrated;
    st.details["ratio_max_drift"] = ratio.max_drift;
    {
        CsvWriter csv(cfg.out_dir + "/ratio_report.csv");
        csv.header({"n", "t_index", "ratio"});
        for (const auto& row : ratio.rows)
            csv.row().col(row.n).col(row.t_index).col(row.ratio);
    }

    auto decay = decay_rate_report(cfg, gibbs, chi);
    st.ok = st.ok && decay.ok;
    {
        CsvWriter csv(cfg.out_dir + "/moment_report.csv");
        csv.header({"beta", "n", "t_index", "moment_exact", "moment_mc",
                    "ci_low", "ci_high", "log_rate"});
        for (const auto& row : decay.rows) {
            const DecayFit* fit = nullptr;
            for (const auto& f : decay.fits)
                if (f.beta == row.beta) fit = &f;
            csv.row()
                .col(row.beta)
                .col(row.n)
                .col(row.argmax)
                .col(row.sup_moment)
                .col(fit ? fit->mc.estimate : 0.0)
                .col(fit ? fit->mc.lo : 0.0)
                .col(fit ? fit->mc.hi : 0.0)
                .col(fit ? fit->gamma_hat : 0.0);
        }
    }
    json fits = json::array();
    for (const auto& f : decay.fits) {
        json jf;
        jf["beta"] = f.beta;
        jf["gamma_hat"] = f.gamma_hat;
        jf["fit_err"] = f.fit_err;
        jf["bound"] = f.bound;
        jf["rate_ok"] = f.rate_ok;
        jf["prefactor_ok"] = f.prefactor_ok;
        jf["mc_ok"] = f.mc_ok;
        fits.push_back(jf);
    }
    st.details["decay_fits"] = fits;

    // Markov-inequality tail bound at a representative point
    double beta = cfg.beta_grid.empty() ? 1.0 : cfg.beta_grid.back();
    auto cpb = cfg.combined(-beta);
    int n_tail = std::min(cfg.n_max, 12);
    auto tail = tail_probability_check(cpb, gibbs, beta, n_tail,
                                       0.25 * chi * beta, 0.0);
    st.ok = st.ok && tail.ok;
    {
        CsvWriter csv(cfg.out_dir + "/tail_report.csv");
        csv.header({"beta", "n", "c", "t", "bound", "exact"});
        csv.row()
            .col(tail.beta)
            .col(tail.n)
            .col(tail.c)
            .col(tail.t)
            .col(tail.bound)
            .col(tail.exact);
    }
    st.details["tail_ok"] = tail.ok;
    return st;
}

StageStatus run_reduce_stage(const ExperimentConfig& cfg,
                             const GibbsModel& gibbs) {
    StageStatus st{"reduce", true, {}};
    auto red = two_sided_reduce(cfg.sys);
    st.details["cohomology_residual"] = red.cohomology_residual;
    st.details["past_residual"] = red.past_residual;
    st.ok = red.cohomology_residual < 1e-9 && red.past_residual < 1e-9;
    auto rep = expansion_preservation_check(cfg.sys, red.reduced, gibbs,
                                            1 << cfg.fiber_grid_log2);
    st.details["chi_original"] = rep.original.certified;
    st.details["chi_reduced"] = rep.reduced.certified;
    st.details["reduced_margin_flagged"] = rep.flagged;

    CsvWriter csv(cfg.out_dir + "/reduce_report.csv");
    csv.header({"center_word", "c_norm", "cohomology_residual",
                "past_residual"});
    for (const auto& [word, c] : red.coboundary) {
        std::string ws;
        for (Symbol sym : word.symbols) ws.push_back(char('0' + sym));
        if (ws.empty()) ws = "-";
        csv.row()
            .col(ws)
            .col(c.op_norm())
            .col(red.cohomology_residual)
            .col(red.past_residual);
    }
    return st;
}

} // namespace

int run_experiment(const ExperimentConfig& cfg,
                   const std::vector<Stage>& stages) {
    cfg.validate();
    std::filesystem::create_directories(cfg.out_dir);

    GibbsModel gibbs = gibbs_model(cfg.spec, cfg.psi);
    std::vector<StageStatus> statuses;
    double chi = 0.0;
    PoeEstimate est;
    SandwichReport sw;
    bool have_est = false;

    for (Stage stage : stages) {
        switch (stage) {
            case Stage::Pressure:
                statuses.push_back(run_pressure_stage(cfg, gibbs));
                break;
            case Stage::Gibbs:
                statuses.push_back(run_gibbs_stage(cfg, gibbs));
                break;
            case Stage::Gap:
                statuses.push_back(run_gap_stage(cfg, gibbs, chi));
                break;
            case Stage::Poe:
                statuses.push_back(run_poe_stage(cfg, est));
                have_est = true;
                break;
            case Stage::Variational: {
                if (!have_est) {
                    statuses.push_back(run_poe_stage(cfg, est));
                    have_est = true;
                }
                statuses.push_back(run_variational_stage(cfg, est, sw));
                break;
            }
            case Stage::Hyperbolicity: {
                if (!(chi > 0.0)) {
                    auto cp = cfg.combined(cfg.s);
                    chi = uniform_expansion_margin(cp.family, gibbs,
                                                   1 << cfg.fiber_grid_log2)
                              .certified;
                }
                statuses.push_back(run_hyperbolicity_stage(cfg, gibbs, chi));
                break;
            }
            case Stage::Reduce:
                statuses.push_back(run_reduce_stage(cfg, gibbs));
                break;
        }
    }

    json summary;
    summary["format"] = 1;
    summary["system"] = cfg.name;
    summary["seed"] = cfg.seed;
    bool all_ok = true;
    for (const auto& st : statuses) {
        summary["stages"][st.name]["ok"] = st.ok;
        summary["stages"][st.name]["details"] = st.details;
        all_ok = all_ok && st.ok;
    }
    summary["all_ok"] = all_ok;
    std::ofstream out(cfg.out_dir + "/summary.json");
    out << summary.dump(2) << "\n";
    return all_ok ? 0 : 1;
}

} // namespace poelab
