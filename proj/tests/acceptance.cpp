// Acceptance suite: one line per criterion, exit 0 only if all pass.

#include "poelab/csv.hpp"
#include "poelab/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

using namespace poelab;

namespace {

constexpr double kPi = 3.14159265358979323846;
const double kLog2 = std::log(2.0);
const double kLogGolden = 0.48121182505960347;

int g_failures = 0;

void criterion(int id, const char* what, const std::function<bool(std::string&)>& body) {
    auto t0 = std::chrono::steady_clock::now();
    std::string note;
    bool ok = false;
    try {
        ok = body(note);
    } catch (const std::exception& e) {
        note = std::string("exception: ") + e.what();
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %02d [%s] %s (%.2f s)%s%s\n", id, ok ? "PASS" : "FAIL",
                what, secs, note.empty() ? "" : " -- ", note.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

CombinedPotential make_cp(const ShiftSpec& spec, std::vector<Mat2> mats,
                          double psi_const, double s) {
    CombinedPotential cp;
    cp.spec = spec;
    cp.psi = Potential::constant(spec, psi_const);
    cp.family = PotentialFamily{CocycleSystem::one_sided(spec, std::move(mats))};
    cp.s = s;
    return cp;
}

CombinedPotential sys_a(double beta) {
    return make_cp(ShiftSpec::full_shift(2), {Mat2::scale(2), Mat2::scale(2)},
                   -kLog2, -beta);
}

CombinedPotential sys_b(double s) {
    return make_cp(ShiftSpec::full_shift(2), {Mat2::diag(2, 1), Mat2::diag(1, 2)},
                   -kLog2, s);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

int main() {
    // 1 -- closed-form pressures
    criterion(1, "closed-form pressure", [&](std::string& note) {
        auto gm = ShiftSpec::golden_mean();
        double p = pressure(gm, Potential::constant(gm, 0.0));
        bool ok = std::abs(p - kLogGolden) <= 1e-10;
        for (int s : {2, 3, 5}) {
            auto fs = ShiftSpec::full_shift(s);
            for (double c : {-1.0, 0.0, 0.7}) {
                double got = pressure(fs, Potential::constant(fs, c));
                ok = ok && std::abs(got - (std::log(double(s)) + c)) <= 1e-12;
            }
        }
        note = "golden-mean pressure " + fmt_double(p);
        return ok;
    });

    // 2 -- Gibbs exactness on the full 2-shift
    criterion(2, "gibbs exactness, C_psi = 1", [&](std::string& note) {
        auto full2 = ShiftSpec::full_shift(2);
        bool ok = true;
        for (auto probs : {std::pair{0.5, 0.5}, std::pair{0.7, 0.3}}) {
            auto psi = Potential::tabulate(full2, 1, [&](const Word& w) {
                return std::log(w[0] == 0 ? probs.first : probs.second);
            });
            auto g = gibbs_model(full2, psi);
            ok = ok && g.gibbs_constant <= 1.0 + 1e-8;
            ok = ok && std::abs(g.chain.stationary[0] - probs.first) <= 1e-12;
            for (std::size_t n : {1, 5, 12}) {
                enumerate_words(full2, n, {}, [&](const Word& w) {
                    double psum = 0.0;
                    for (Symbol s : w.symbols)
                        psum += g.psi.at(Word{{s}});
                    double ratio = g.cylinder(w) / std::exp(psum);
                    ok = ok && std::abs(ratio - 1.0) <= 1e-12;
                });
            }
        }
        note = "cylinder identity exact through |w| = 12";
        return ok;
    });

    // 3 -- linear response and Green-Kubo on the SYS-B axis direction
    criterion(3, "linear response and green-kubo", [&](std::string& note) {
        auto full2 = ShiftSpec::full_shift(2);
        auto psi = Potential::constant(full2, -kLog2);
        Potential dir;
        dir.memory = 1;
        dir.set(Word{{0}}, kLog2);
        dir.set(Word{{1}}, 0.0);
        double d1 = pressure_derivative(full2, psi, dir);
        double d2 = pressure_second_derivative(full2, psi, dir);
        bool ok = std::abs(d1 + kLog2 / 2) <= 1e-12;
        ok = ok && std::abs(d2 - kLog2 * kLog2 / 4) / (kLog2 * kLog2 / 4) <= 1e-9;
        // closed form log((1 + 2^-beta)/2) via central differences
        auto closed = [&](double beta) {
            return std::log((1.0 + std::pow(2.0, -beta)) / 2.0);
        };
        for (double h : {1e-3, 1e-4}) {
            double fd1 = (closed(h) - closed(-h)) / (2 * h);
            double fd2 = (closed(h) - 2 * closed(0.0) + closed(-h)) / (h * h);
            ok = ok && std::abs(fd1 - d1) / std::abs(d1) <= 1e-5 + 10 * h * h;
            ok = ok && std::abs(fd2 - d2) / d2 <= 1e-5 + 10 * h;
        }
        note = "d1 = " + fmt_double(d1) + ", d2 = " + fmt_double(d2);
        return ok;
    });

    // 4 -- pressure gap: P(psi - beta phi_t) <= -(chi/2) beta on SYS-B
    criterion(4, "gap theorem over 256 directions", [&](std::string& note) {
        auto full2 = ShiftSpec::full_shift(2);
        auto psi = Potential::constant(full2, -kLog2);
        auto cp = sys_b(-1.0);
        auto gibbs = gibbs_model(full2, psi);
        auto margin = uniform_expansion_margin(cp.family, gibbs, 4096);
        bool ok = margin.expansion_certified;
        ok = ok && std::abs(margin.grid_min - kLog2 / 2) <= 1e-12;
        const int n_t = 256;
        auto phi_of_t = [&](int ti) {
            double t = kPi * ti / n_t;
            return Potential::tabulate(full2, 1, [&](const Word& w) {
                return cp.family.eval(t, w.symbols.data());
            });
        };
        auto rep = gap_theorem_check(full2, psi, phi_of_t, n_t,
                                     {0.05, 0.1, 0.2, 0.3, 0.4, 0.5},
                                     margin.certified, cp.family.sup_norm());
        ok = ok && rep.ok;
        note = "worst margin " + fmt_double(rep.worst_margin) + " at t_index " +
               std::to_string(rep.worst_t) + ", beta " +
               fmt_double(rep.worst_beta) + ", beta0 " + fmt_double(rep.beta0);
        return ok;
    });

    // 5 -- the POE sandwich
    criterion(5, "poe sandwich (SYS-A exact, SYS-B width recorded)",
              [&](std::string& note) {
        bool ok = true;
        for (double beta : {0.3, 1.0}) {
            auto cp = sys_a(beta);
            auto est = poe_estimate(cp, 8, 10, 1024, 1);
            OptimizerConfig ocfg;
            auto mlb = markov_lower_bound(cp, 1, ocfg);
            ok = ok && std::abs(mlb.value + beta * kLog2) <= 1e-9;
            ok = ok && std::abs(est.fekete_upper + beta * kLog2) <= 1e-9;
        }
        auto cp = sys_b(-1.0);
        auto est = poe_estimate(cp, 16, 10, 1024, 1);
        OptimizerConfig ocfg; // 32 starts, 64 prefixes of length 512
        ocfg.seed = 42;
        auto mlb = markov_lower_bound(cp, 2, ocfg);
        auto sw = variational_sandwich(est, mlb);
        ok = ok && sw.ordering_ok;
        ok = ok && sw.width <= 0.05;
        note = "SYS-B width " + fmt_double(sw.width) + " (lower " +
               fmt_double(sw.lower) + ", upper " + fmt_double(sw.fekete_upper) +
               ")";
        return ok;
    });

    // 6 -- Fekete and submultiplicativity
    criterion(6, "submultiplicativity and fekete monotonicity",
              [&](std::string& note) {
        bool ok = true;
        std::vector<std::pair<int, int>> pairs{{2, 3}, {4, 4}, {3, 5},
                                               {8, 8}, {6, 10}};
        auto golden = [&] {
            CombinedPotential cp;
            cp.spec = ShiftSpec::golden_mean();
            cp.psi = normalize(cp.spec, Potential::constant(cp.spec, 0.0));
            cp.family = PotentialFamily{CocycleSystem::one_sided(
                cp.spec, {Mat2::diag(2, 1), Mat2::diag(1, 2)})};
            cp.s = -1.0;
            return cp;
        }();
        for (const auto& cp : {sys_a(0.5), sys_b(-1.0), golden}) {
            auto rep = submultiplicativity_check(cp, pairs, 9, 1);
            ok = ok && rep.ok;
            for (const auto& row : rep.rows)
                ok = ok && row.grid_defect <= 1e-10;
        }
        auto e10 = poe_estimate(sys_b(-1.0), 10, 9, 512, 1);
        auto e14 = poe_estimate(sys_b(-1.0), 14, 9, 512, 1);
        ok = ok && e14.fekete_upper <= e10.fekete_upper + 1e-12;
        note = "exact log Z_{n+m} <= log Z_n + log Z_m through n+m = 16";
        return ok;
    });

    // 7 -- moment = partition-sum identity
    criterion(7, "moment/partition-sum ratio", [&](std::string& note) {
        bool ok = true;
        std::vector<double> probes{0.0, kPi / 4, 1.9};
        auto full2 = ShiftSpec::full_shift(2);
        for (double beta : {0.3, 1.0}) {
            auto cpa = sys_a(beta);
            auto ga = gibbs_model(full2, cpa.psi);
            auto ra = thm2_ratio_check(cpa, ga, {2, 4, 6, 8, 10}, probes, 1);
            ok = ok && ra.ok && ra.max_drift <= 1e-12;
            auto cpb = sys_b(-beta);
            auto gb = gibbs_model(full2, cpb.psi);
            auto rb = thm2_ratio_check(cpb, gb, {2, 4, 6, 8, 10}, probes, 1);
            ok = ok && rb.ok && rb.max_drift <= 1e-12;
        }
        CombinedPotential cpg;
        cpg.spec = ShiftSpec::golden_mean();
        cpg.psi = normalize(cpg.spec, Potential::constant(cpg.spec, 0.0));
        cpg.family = PotentialFamily{CocycleSystem::one_sided(
            cpg.spec, {Mat2::diag(2, 1), Mat2::diag(1, 2)})};
        cpg.s = -1.0;
        auto gg = gibbs_model(cpg.spec, Potential::constant(cpg.spec, 0.0));
        auto rg = thm2_ratio_check(cpg, gg, {3, 5, 7, 9, 11}, probes, 1);
        ok = ok && rg.ok;
        note = "full-shift drift <= 1e-12; golden-mean C-hat " +
               fmt_double(rg.c_hat_eigen);
        return ok;
    });

    // 8 -- hyperbolicity decay with MC consistency at n = 40
    criterion(8, "moment decay rate and MC consistency", [&](std::string& note) {
        ExperimentConfig cfg;
        cfg.spec = ShiftSpec::full_shift(2);
        cfg.psi = Potential::constant(cfg.spec, -kLog2);
        cfg.sys = CocycleSystem::one_sided(cfg.spec,
                                           {Mat2::diag(2, 1), Mat2::diag(1, 2)});
        cfg.beta_grid = {1.0};
        cfg.n_max = 16;
        cfg.fiber_grid_log2 = 10;
        cfg.mc_samples = 100000;
        cfg.seed = 42;
        cfg.out_dir = "acceptance_out_decay";
        std::filesystem::create_directories(cfg.out_dir);
        auto gibbs = gibbs_model(cfg.spec, cfg.psi);
        auto cp = cfg.combined(-1.0);
        double chi = uniform_expansion_margin(cp.family, gibbs, 1024).certified;
        auto rep = decay_rate_report(cfg, gibbs, chi);
        bool ok = rep.ok && rep.fits.size() == 1;
        const auto& fit = rep.fits[0];
        ok = ok && fit.gamma_hat >= 0.28;
        ok = ok && fit.gamma_hat >= 0.5 * chi * 1.0 - fit.fit_err;
        ok = ok && fit.mc_n == 40 && fit.mc_ok;
        note = "gamma_hat " + fmt_double(fit.gamma_hat) + " vs bound " +
               fmt_double(fit.bound) + "; mc(40) in [" + fmt_double(fit.mc.lo) +
               ", " + fmt_double(fit.mc.hi) + "]";
        return ok;
    });

    // 9 -- finite-window two-sided reduction
    criterion(9, "two-sided reduction residuals", [&](std::string& note) {
        auto spec = ShiftSpec::full_shift(2);
        // trivial window: identity coboundaries exactly
        auto triv = two_sided_reduce(CocycleSystem::one_sided(
            spec, {Mat2::diag(2, 1), Mat2::diag(1, 2)}));
        bool ok = triv.cohomology_residual == 0.0 && triv.past_residual == 0.0;
        ok = ok && (triv.coboundary[0].second - Mat2::identity()).frob() == 0.0;
        // past-dependent twist
        CocycleSystem sys;
        sys.spec = spec;
        sys.past_window = 1;
        for (int p = 0; p < 2; ++p)
            for (int s = 0; s < 2; ++s) {
                Symbol w[2] = {Symbol(p), Symbol(s)};
                Mat2 base = s == 0 ? Mat2::diag(2, 1) : Mat2::diag(1, 2);
                sys.matrices[encode_word(w, 2)] =
                    (Mat2::rotation(0.1 * p) * base).times(p == 0 ? 1.0 : 1.2);
            }
        sys.validate();
        auto red = two_sided_reduce(sys);
        ok = ok && red.cohomology_residual < 1e-9 && red.past_residual < 1e-9;
        note = "cohomology residual " + fmt_double(red.cohomology_residual) +
               ", past residual " + fmt_double(red.past_residual);
        return ok;
    });

    // 10 -- determinism of the full pipeline across thread counts
    criterion(10, "byte-identical artifacts across 1/4/8 threads",
              [&](std::string& note) {
        ExperimentConfig cfg;
        cfg.name = "sys_b";
        cfg.spec = ShiftSpec::full_shift(2);
        cfg.psi = Potential::constant(cfg.spec, -kLog2);
        cfg.sys = CocycleSystem::one_sided(cfg.spec,
                                           {Mat2::diag(2, 1), Mat2::diag(1, 2)});
        cfg.s = -1.0;
        cfg.beta_grid = {0.1, 0.5};
        cfg.n_max = 10;
        cfg.fiber_grid_log2 = 8;
        cfg.bins = 256;
        cfg.mc_samples = 20000;
        cfg.seed = 42;
        cfg.memory_m = 2;
        const std::vector<std::string> artifacts{
            "summary.json",      "pressure_report.csv", "gibbs_report.csv",
            "gap_report.csv",    "poe_report.csv",      "variational_report.csv",
            "ratio_report.csv",  "moment_report.csv",   "tail_report.csv",
            "reduce_report.csv"};
        std::vector<std::string> reference;
        bool ok = true;
        for (int threads : {1, 4, 8}) {
            cfg.threads = threads;
            cfg.out_dir = "acceptance_out_t" + std::to_string(threads);
            int rc = run_experiment(cfg, all_stages());
            ok = ok && rc == 0;
            std::vector<std::string> bytes;
            for (const auto& f : artifacts)
                bytes.push_back(slurp(cfg.out_dir + "/" + f));
            if (reference.empty()) {
                reference = bytes;
            } else {
                for (std::size_t i = 0; i < artifacts.size(); ++i)
                    if (bytes[i].empty() || bytes[i] != reference[i]) {
                        ok = false;
                        note += artifacts[i] + " differs; ";
                    }
            }
        }
        if (note.empty()) note = "all artifacts identical";
        return ok;
    });

    std::printf("%d/%d criteria passed\n", 10 - g_failures, 10);
    return g_failures == 0 ? 0 : 1;
}
