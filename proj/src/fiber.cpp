#include "poelab/fiber.hpp"

#include "poelab/kern/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace poelab {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

const Mat2& CocycleSystem::at(const Symbol* w) const {
    auto it = matrices.find(encode_word(w, static_cast<std::size_t>(window_len())));
    if (it == matrices.end())
        throw DomainError("no matrix for this window word");
    return it->second;
}

CocycleSystem CocycleSystem::one_sided(const ShiftSpec& spec,
                                       const std::vector<Mat2>& per_symbol) {
    CocycleSystem sys;
    sys.spec = spec;
    for (std::size_t a = 0; a < per_symbol.size(); ++a) {
        Symbol s = static_cast<Symbol>(a);
        sys.matrices[encode_word(&s, 1)] = per_symbol[a];
    }
    sys.validate();
    return sys;
}

void CocycleSystem::validate() const {
    spec.validate();
    if (matrices.empty()) throw ConfigError("cocycle has no matrices");
    enumerate_words(spec, static_cast<std::size_t>(window_len()), {},
                    [&](const Word& w) {
                        if (!matrices.count(encode_word(w)))
                            throw ConfigError(
                                "missing matrix for an admissible window word");
                    });
    for (const auto& kv : matrices) {
        const Mat2& m = kv.second;
        if (m.sigma_min() < 1e-8)
            throw ConfigError("cocycle matrix close to singular (sigma_min < 1e-8)");
        if (m.cond() > 1e6)
            throw ConfigError("cocycle matrix condition number exceeds 1e6");
    }
    // monotone degree-1 check of each projective map on a 512-point grid
    for (const auto& kv : matrices) {
        const Mat2& m = kv.second;
        const int g = 512;
        double orient = m.det() > 0.0 ? 1.0 : -1.0;
        double total = 0.0;
        double prev = projective_apply(m, FiberPoint{0.0}).angle;
        for (int i = 1; i <= g; ++i) {
            double t = kPi * static_cast<double>(i % g) / g;
            double cur = projective_apply(m, FiberPoint{t}).angle;
            double step = orient * (cur - prev);
            step -= kPi * std::floor(step / kPi); // lift to [0, pi)
            total += step;
            prev = cur;
        }
        if (std::abs(total - kPi) > 1e-6)
            throw ConfigError("induced circle map fails the degree-1 check");
    }
}

double PotentialFamily::sup_norm() const {
    double m = 0.0;
    for (const auto& kv : sys.matrices) {
        m = std::max(m, std::abs(std::log(kv.second.op_norm())));
        m = std::max(m, std::abs(std::log(kv.second.sigma_min())));
    }
    return m;
}

double PotentialFamily::lipschitz_t() const {
    double m = 0.0;
    for (const auto& kv : sys.matrices) {
        double k = kv.second.cond();
        m = std::max(m, 0.5 * (k - 1.0 / k));
    }
    return m;
}

double PotentialFamily::fiber_lipschitz() const {
    double m = 0.0;
    for (const auto& kv : sys.matrices) m = std::max(m, kv.second.cond());
    return m;
}

double PotentialFamily::equi_holder() const {
    double m = 0.0;
    for (const auto& a : sys.matrices)
        for (const auto& b : sys.matrices)
            m = std::max(m, (a.second - b.second).op_norm());
    return m;
}

std::vector<FiberPoint> fiber_orbit(const CocycleSystem& sys, const Word& prefix,
                                    FiberPoint t) {
    if (sys.past_window != 0)
        throw DomainError("fiber_orbit needs a one-sided system");
    if (!sys.spec.admissible(prefix)) throw DomainError("inadmissible prefix");
    const int n = static_cast<int>(prefix.size());
    const int steps = n - sys.future_window;
    if (steps < 1) throw DomainError("matrix window exceeds the prefix");
    std::vector<FiberPoint> out;
    out.reserve(static_cast<std::size_t>(steps) + 1);
    out.push_back(FiberPoint::from_angle(t.angle));
    for (int k = 0; k < steps; ++k) {
        const Mat2& m = sys.at(prefix.symbols.data() + k);
        out.push_back(projective_apply(m, out.back()));
    }
    return out;
}

SymbolicTail lex_tail_after(const ShiftSpec& spec, Symbol from, std::size_t len) {
    auto t = spec.lex_min_tail(from, len + 1);
    return SymbolicTail{std::vector<Symbol>(t.begin() + 1, t.end())};
}

double birkhoff_sum(const PotentialFamily& fam, const Word& word,
                    const SymbolicTail& tail, FiberPoint t) {
    const CocycleSystem& sys = fam.sys;
    if (sys.past_window != 0)
        throw DomainError("birkhoff_sum needs a one-sided system");
    const std::size_t n = word.size();
    auto sym = [&](std::size_t pos) -> Symbol {
        return pos < n ? word[pos] : tail.at(pos - n);
    };
    if (n > 0 && !tail.syms.empty() &&
        !sys.spec.allows(word.symbols.back(), tail.at(0)))
        throw DomainError("tail does not continue the word admissibly");
    const int w = sys.window_len();
    std::vector<Symbol> win(static_cast<std::size_t>(w));
    double acc = 0.0;
    FiberPoint cur = FiberPoint::from_angle(t.angle);
    for (std::size_t k = 0; k < n; ++k) {
        for (int j = 0; j < w; ++j) win[static_cast<std::size_t>(j)] = sym(k + j);
        const Mat2& m = sys.at(win.data());
        Vec2 v = m.apply(cur.direction());
        acc += std::log(v.norm());
        cur = FiberPoint::from_angle(std::atan2(v.y, v.x));
    }
    return acc;
}

ExpansionMargin uniform_expansion_margin(const PotentialFamily& fam,
                                         const GibbsModel& gibbs,
                                         int grid_size) {
    const CocycleSystem& sys = fam.sys;
    const auto& ops = kern::ops();
    const int g = grid_size;
    std::vector<double> x(g), y(g), e(g, 0.0), tmp(g);
    {
        std::vector<double> angles(static_cast<std::size_t>(g));
        for (int i = 0; i < g; ++i) angles[static_cast<std::size_t>(i)] = kPi * i / g;
        grid_directions(angles, x.data(), y.data());
    }
    const std::size_t wlen = static_cast<std::size_t>(sys.window_len());
    enumerate_words(sys.spec, wlen, {}, [&](const Word& w) {
        double prob = gibbs.cylinder(w);
        if (prob == 0.0) return;
        const Mat2& m = sys.at(w.symbols.data());
        const double mat[4] = {m.a, m.b, m.c, m.d};
        ops.norm_weights(mat, 0.0, 0.5, x.data(), y.data(), tmp.data(),
                         static_cast<std::size_t>(g));
        for (int i = 0; i < g; ++i) e[i] += prob * tmp[i];
    });
    ExpansionMargin out;
    out.argmin_index = 0;
    out.grid_min = e[0];
    for (int i = 1; i < g; ++i)
        if (e[i] < out.grid_min) {
            out.grid_min = e[i];
            out.argmin_index = i;
        }
    out.certified = out.grid_min - fam.lipschitz_t() * (kPi / g) * 0.5;
    out.expansion_certified = out.certified > 0.0;
    return out;
}

namespace {

// product of the matrices along positions 0..l-1 of a symbol sequence
// (window = past coords), i.e. the matrix of f_omega^l
Mat2 window_product(const CocycleSystem& sys,
                    const std::function<Symbol(int)>& sym_at, int l) {
    Mat2 p = Mat2::identity();
    const int w = sys.window_len();
    std::vector<Symbol> win(static_cast<std::size_t>(w));
    for (int k = 0; k < l; ++k) {
        for (int j = 0; j < w; ++j)
            win[static_cast<std::size_t>(j)] =
                sym_at(k - sys.past_window + j);
        p = sys.at(win.data()) * p;
    }
    return p;
}

} // namespace

ReduceResult two_sided_reduce(const CocycleSystem& sys) {
    if (sys.future_window != 0)
        throw DomainError("two_sided_reduce expects future window 0");
    const int l = sys.past_window;
    const ShiftSpec& spec = sys.spec;
    ReduceResult out;

    if (l == 0) {
        out.reduced = sys;
        out.coboundary.emplace_back(Word{}, Mat2::identity());
        out.cohomology_residual = 0.0;
        out.past_residual = 0.0;
        return out;
    }

    // lex-minimal admissible pasts per symbol (the anchor omega_a)
    std::vector<std::vector<Symbol>> anchor_past(
        static_cast<std::size_t>(spec.alphabet_size));
    for (int a = 0; a < spec.alphabet_size; ++a)
        anchor_past[static_cast<std::size_t>(a)] =
            spec.lex_min_past(static_cast<Symbol>(a),
                              static_cast<std::size_t>(l));

    // C for a center word (coords -l .. l-1): lim f_omega^{-n} f_[omega_a,
    // omega]^n, exact at n = l for an l-step past window
    auto coboundary_of = [&](const std::vector<Symbol>& center) {
        auto sym_real = [&](int i) -> Symbol {
            return center[static_cast<std::size_t>(i + l)];
        };
        Symbol a0 = sym_real(0);
        const auto& ap = anchor_past[a0];
        auto sym_bracket = [&](int i) -> Symbol {
            return i < 0 ? ap[static_cast<std::size_t>(i + l)] : sym_real(i);
        };
        Mat2 along = window_product(sys, sym_real, l);
        Mat2 bracket = window_product(sys, sym_bracket, l);
        return along.inverse() * bracket;
    };

    // reduced matrix for a future word (coords 0..l), computed through the
    // coboundary conjugation with the anchor past
    auto reduced_of = [&](const std::vector<Symbol>& fut,
                          const std::vector<Symbol>& past) {
        std::vector<Symbol> center(static_cast<std::size_t>(2 * l));
        for (int i = 0; i < l; ++i) center[static_cast<std::size_t>(i)] = past[static_cast<std::size_t>(i)];
        for (int i = 0; i < l; ++i)
            center[static_cast<std::size_t>(l + i)] = fut[static_cast<std::size_t>(i)];
        Mat2 c_here = coboundary_of(center);
        std::vector<Symbol> center_next(static_cast<std::size_t>(2 * l));
        for (int i = 0; i < 2 * l; ++i) {
            int coord = i - l + 1; // coords of T omega
            center_next[static_cast<std::size_t>(i)] =
                coord < 1 ? center[static_cast<std::size_t>(coord + l)]
                          : fut[static_cast<std::size_t>(coord)];
        }
        Mat2 c_next = coboundary_of(center_next);
        std::vector<Symbol> win(static_cast<std::size_t>(l + 1));
        for (int i = 0; i <= l; ++i)
            win[static_cast<std::size_t>(i)] =
                i < l ? past[static_cast<std::size_t>(i)] : fut[0];
        const Mat2& m = sys.at(win.data());
        return c_next.inverse() * m * c_here;
    };

    out.reduced.spec = spec;
    out.reduced.past_window = 0;
    out.reduced.future_window = l;

    // enumerate futures of length l+1 and all admissible pasts of length l
    auto futures = collect_words(spec, static_cast<std::size_t>(l) + 1);
    for (const Word& fut : futures) {
        std::vector<Mat2> variants;
        // all admissible pasts ending before fut[0]
        std::function<void(std::vector<Symbol>&, int)> rec =
            [&](std::vector<Symbol>& past, int pos) {
                if (pos < 0) {
                    variants.push_back(reduced_of(fut.symbols, past));
                    return;
                }
                Symbol next = pos + 1 < l ? past[static_cast<std::size_t>(pos + 1)]
                                          : fut.symbols[0];
                for (int s = 0; s < spec.alphabet_size; ++s) {
                    if (!spec.allows(static_cast<Symbol>(s), next)) continue;
                    past[static_cast<std::size_t>(pos)] = static_cast<Symbol>(s);
                    rec(past, pos - 1);
                }
            };
        std::vector<Symbol> past(static_cast<std::size_t>(l));
        rec(past, l - 1);
        for (const Mat2& v : variants)
            out.past_residual =
                std::max(out.past_residual, (v - variants.front()).op_norm());
        out.reduced.matrices[encode_word(fut)] = variants.front();
    }
    out.reduced.validate();

    // store coboundaries and check the cohomology identity over all center
    // words extended one step
    auto centers = collect_words(spec, static_cast<std::size_t>(2 * l));
    for (const Word& cw : centers)
        out.coboundary.emplace_back(cw, coboundary_of(cw.symbols));
    auto extended = collect_words(spec, static_cast<std::size_t>(2 * l) + 1);
    for (const Word& e : extended) {
        // e covers coords -l .. l; f+ of the future part vs conjugation
        std::vector<Symbol> fut(e.symbols.begin() + l, e.symbols.end());
        std::vector<Symbol> center(e.symbols.begin(), e.symbols.end() - 1);
        std::vector<Symbol> center_next(e.symbols.begin() + 1, e.symbols.end());
        Mat2 c_here = coboundary_of(center);
        Mat2 c_next = coboundary_of(center_next);
        std::vector<Symbol> win(e.symbols.begin(), e.symbols.begin() + l + 1);
        Mat2 lhs = out.reduced.at(fut.data());
        Mat2 rhs = c_next.inverse() * sys.at(win.data()) * c_here;
        out.cohomology_residual =
            std::max(out.cohomology_residual, (lhs - rhs).op_norm());
    }
    return out;
}

PreservationReport expansion_preservation_check(const CocycleSystem& original,
                                                const CocycleSystem& reduced,
                                                const GibbsModel& gibbs,
                                                int grid_size) {
    PreservationReport rep;
    rep.original = uniform_expansion_margin({original}, gibbs, grid_size);
    rep.reduced = uniform_expansion_margin({reduced}, gibbs, grid_size);
    rep.flagged = rep.reduced.certified <= 0.0;
    return rep;
}

} // namespace poelab
