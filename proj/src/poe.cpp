#include "poelab/poe.hpp"

#include "poelab/kern/kernels.hpp"
#include "poelab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>

namespace poelab {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double logaddexp(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    double m = a > b ? a : b;
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}
} // namespace

void CombinedPotential::validate() const {
    if (family.sys.past_window != 0)
        throw DomainError("combined potentials need a one-sided cocycle");
    if (!std::isfinite(s)) throw DomainError("non-finite family coefficient");
    if (family.sys.spec.alphabet_size != spec.alphabet_size)
        throw DomainError("base and family live on different alphabets");
    if (!is_irreducible(spec))
        throw ConfigError("partition sums require an irreducible shift");
}

std::vector<double> fiber_grid(int size) {
    std::vector<double> out(static_cast<std::size_t>(size));
    for (int i = 0; i < size; ++i) out[static_cast<std::size_t>(i)] = kPi * i / size;
    return out;
}

std::vector<SymbolicTail> anchor_tails(const ShiftSpec& spec, std::size_t len) {
    std::vector<SymbolicTail> out;
    out.reserve(static_cast<std::size_t>(spec.alphabet_size));
    for (int a = 0; a < spec.alphabet_size; ++a)
        out.push_back(lex_tail_after(spec, static_cast<Symbol>(a), len));
    return out;
}

double combined_birkhoff(const CombinedPotential& cp, const Word& word,
                         const SymbolicTail& tail, FiberPoint t) {
    const std::size_t n = word.size();
    const int k = cp.psi.memory;
    auto sym = [&](std::size_t pos) -> Symbol {
        return pos < n ? word[pos] : tail.at(pos - n);
    };
    std::vector<Symbol> buf(static_cast<std::size_t>(std::max(k, cp.window())));
    double acc = cp.s == 0.0 ? 0.0
                             : cp.s * birkhoff_sum(cp.family, word, tail, t);
    for (std::size_t j = 0; j < n; ++j) {
        for (int i = 0; i < k; ++i)
            buf[static_cast<std::size_t>(i)] = sym(j + static_cast<std::size_t>(i));
        acc += cp.psi.at(buf.data());
    }
    return acc;
}

// ---------------------------------------------------------------------------
// exact enumeration sweep
// ---------------------------------------------------------------------------

namespace {

// fixed prefix depth for parallel chunking; independent of the thread count
// so reductions are byte-stable
int chunk_depth(int alphabet, int n) {
    if (n <= 6) return 0;
    int d = 0;
    double c = 1;
    while (c < 48 && d < std::min(n, 8)) {
        c *= alphabet;
        ++d;
    }
    return d;
}

class PartitionSweep {
public:
    PartitionSweep(const CombinedPotential& cp, int n,
                   const std::vector<double>& angles,
                   const std::vector<SymbolicTail>& tails)
        : cp_(cp),
          n_(n),
          g_(angles.size()),
          k_(cp.psi.memory),
          fw_(cp.family.sys.future_window),
          tails_(tails) {
        x0_.resize(g_);
        y0_.resize(g_);
        grid_directions(angles, x0_.data(), y0_.data());
    }

    void run(int threads) {
        const int s = cp_.spec.alphabet_size;
        M_.assign(static_cast<std::size_t>(s), std::vector<double>(g_, kNegInf));
        S_.assign(static_cast<std::size_t>(s), std::vector<double>(g_, 0.0));
        const int d0 = chunk_depth(s, n_);
        std::vector<Word> prefixes =
            d0 == 0 ? std::vector<Word>{Word{}} : collect_words(cp_.spec, d0);
        std::vector<std::vector<std::vector<double>>> slotM(prefixes.size()),
            slotS(prefixes.size());
        parallel_tasks(prefixes.size(), threads, [&](std::size_t pi) {
            Ctx ctx;
            init_ctx(ctx);
            bool ok = true;
            for (std::size_t d = 0; d < prefixes[pi].size(); ++d)
                if (!push(ctx, static_cast<int>(d), prefixes[pi][d])) {
                    ok = false;
                    break;
                }
            if (ok) recurse(ctx, static_cast<int>(prefixes[pi].size()));
            slotM[pi] = std::move(ctx.M);
            slotS[pi] = std::move(ctx.S);
        });
        for (std::size_t pi = 0; pi < prefixes.size(); ++pi)
            for (int a = 0; a < s; ++a)
                kern::lse_merge_rows(M_[static_cast<std::size_t>(a)].data(),
                                     S_[static_cast<std::size_t>(a)].data(),
                                     slotM[pi][static_cast<std::size_t>(a)].data(),
                                     slotS[pi][static_cast<std::size_t>(a)].data(),
                                     g_);
    }

    // log Z per grid angle for one anchor (or merged over anchors for -1)
    std::vector<double> values(int anchor) const {
        std::vector<double> out(g_);
        if (anchor >= 0) {
            for (std::size_t i = 0; i < g_; ++i)
                out[i] = kern::lse_row_value(M_[static_cast<std::size_t>(anchor)][i],
                                             S_[static_cast<std::size_t>(anchor)][i]);
            return out;
        }
        std::vector<double> m = M_[0], s = S_[0];
        for (std::size_t a = 1; a < M_.size(); ++a)
            kern::lse_merge_rows(m.data(), s.data(), M_[a].data(), S_[a].data(),
                                 g_);
        for (std::size_t i = 0; i < g_; ++i)
            out[i] = kern::lse_row_value(m[i], s[i]);
        return out;
    }

private:
    struct Ctx {
        std::vector<std::vector<double>> x, y, acc;
        std::vector<double> psi_part;
        std::vector<Symbol> word;
        std::vector<double> sx, sy, sacc;
        std::vector<std::vector<double>> M, S;
    };

    void init_ctx(Ctx& c) const {
        const int s = cp_.spec.alphabet_size;
        c.x.assign(static_cast<std::size_t>(n_) + 1, x0_);
        c.y.assign(static_cast<std::size_t>(n_) + 1, y0_);
        c.acc.assign(static_cast<std::size_t>(n_) + 1,
                     std::vector<double>(g_, 0.0));
        c.psi_part.assign(static_cast<std::size_t>(n_) + 1, 0.0);
        c.word.assign(static_cast<std::size_t>(n_), 0);
        c.sx.resize(g_);
        c.sy.resize(g_);
        c.sacc.resize(g_);
        c.M.assign(static_cast<std::size_t>(s), std::vector<double>(g_, kNegInf));
        c.S.assign(static_cast<std::size_t>(s), std::vector<double>(g_, 0.0));
    }

    // append symbol b at position d; returns false when inadmissible
    bool push(Ctx& c, int d, Symbol b) const {
        if (d > 0 && !cp_.spec.allows(c.word[static_cast<std::size_t>(d - 1)], b))
            return false;
        c.word[static_cast<std::size_t>(d)] = b;
        auto& xs = c.x[static_cast<std::size_t>(d + 1)];
        auto& ys = c.y[static_cast<std::size_t>(d + 1)];
        auto& as = c.acc[static_cast<std::size_t>(d + 1)];
        xs = c.x[static_cast<std::size_t>(d)];
        ys = c.y[static_cast<std::size_t>(d)];
        as = c.acc[static_cast<std::size_t>(d)];
        int j = d - fw_; // newly available fiber step
        if (j >= 0) {
            const Mat2& m = cp_.family.sys.at(c.word.data() + j);
            const double mat[4] = {m.a, m.b, m.c, m.d};
            kern::ops().sweep_step(mat, 0.5 * cp_.s, xs.data(), ys.data(),
                                   as.data(), g_);
        }
        int pj = d + 1 - k_; // newly available psi step
        c.psi_part[static_cast<std::size_t>(d + 1)] =
            c.psi_part[static_cast<std::size_t>(d)] +
            (pj >= 0 ? cp_.psi.at(c.word.data() + pj) : 0.0);
        return true;
    }

    void leaf(Ctx& c) const {
        const Symbol a = c.word[static_cast<std::size_t>(n_ - 1)];
        const SymbolicTail& tail = tails_[a];
        auto& M = c.M[a];
        auto& S = c.S[a];
        if (fw_ == 0 && k_ == 1) {
            kern::ops().lse_update_rows(
                M.data(), S.data(), c.acc[static_cast<std::size_t>(n_)].data(),
                c.psi_part[static_cast<std::size_t>(n_)], g_);
            return;
        }
        auto sym = [&](int pos) -> Symbol {
            return pos < n_ ? c.word[static_cast<std::size_t>(pos)]
                            : tail.at(static_cast<std::size_t>(pos - n_));
        };
        c.sx = c.x[static_cast<std::size_t>(n_)];
        c.sy = c.y[static_cast<std::size_t>(n_)];
        c.sacc = c.acc[static_cast<std::size_t>(n_)];
        std::vector<Symbol> win(static_cast<std::size_t>(
            std::max(fw_ + 1, k_)));
        for (int j = std::max(n_ - fw_, 0); j < n_; ++j) {
            for (int i = 0; i <= fw_; ++i)
                win[static_cast<std::size_t>(i)] = sym(j + i);
            const Mat2& m = cp_.family.sys.at(win.data());
            const double mat[4] = {m.a, m.b, m.c, m.d};
            kern::ops().sweep_step(mat, 0.5 * cp_.s, c.sx.data(), c.sy.data(),
                                   c.sacc.data(), g_);
        }
        double psi_total = c.psi_part[static_cast<std::size_t>(n_)];
        for (int j = std::max(n_ - k_ + 1, 0); j < n_; ++j) {
            for (int i = 0; i < k_; ++i)
                win[static_cast<std::size_t>(i)] = sym(j + i);
            psi_total += cp_.psi.at(win.data());
        }
        kern::ops().lse_update_rows(M.data(), S.data(), c.sacc.data(),
                                    psi_total, g_);
    }

    void recurse(Ctx& c, int d) const {
        if (d == n_) {
            leaf(c);
            return;
        }
        for (int b = 0; b < cp_.spec.alphabet_size; ++b)
            if (push(c, d, static_cast<Symbol>(b))) recurse(c, d + 1);
    }

    const CombinedPotential& cp_;
    int n_;
    std::size_t g_;
    int k_, fw_;
    const std::vector<SymbolicTail>& tails_;
    std::vector<double> x0_, y0_;
    std::vector<std::vector<double>> M_, S_;
};

void check_enumerable(const ShiftSpec& spec, int n) {
    double total = std::pow(static_cast<double>(spec.alphabet_size), n);
    if (total > static_cast<double>(kEnumerationCap))
        throw DomainError(
            "enumeration cap S^n <= 2^24 exceeded; use the binned bounds");
}

// |s| L_phi sum_{j<n} Lambda^j, saturating
double sweep_lipschitz(const CombinedPotential& cp, int n) {
    double lam = cp.family.fiber_lipschitz();
    double lphi = cp.family.lipschitz_t() * std::abs(cp.s);
    double sum = 0.0, p = 1.0;
    for (int j = 0; j < n; ++j) {
        sum += p;
        p *= lam;
        if (sum > 1e200) return 1e200;
    }
    return lphi * sum;
}

} // namespace

PartitionGrid partition_sum_exact_grid(const CombinedPotential& cp, int n,
                                       int anchor,
                                       const std::vector<double>& angles,
                                       int threads) {
    cp.validate();
    check_enumerable(cp.spec, n);
    auto tails = anchor_tails(
        cp.spec,
        static_cast<std::size_t>(cp.psi.memory + cp.family.sys.future_window) + 2);
    PartitionSweep sweep(cp, n, angles, tails);
    sweep.run(threads);
    PartitionGrid out;
    out.n = n;
    out.anchor = anchor;
    out.log_z = sweep.values(anchor);
    out.argmax = 0;
    out.grid_max = out.log_z[0];
    for (std::size_t i = 1; i < out.log_z.size(); ++i)
        if (out.log_z[i] > out.grid_max) {
            out.grid_max = out.log_z[i];
            out.argmax = static_cast<int>(i);
        }
    double mesh = kPi / static_cast<double>(angles.size());
    out.lipschitz_bound = sweep_lipschitz(cp, n) * 0.5 * mesh + cp.tail_slack();
    return out;
}

double partition_sum_exact(const CombinedPotential& cp, int n, Symbol anchor,
                           const SymbolicTail& tail, FiberPoint t) {
    cp.validate();
    check_enumerable(cp.spec, n);
    auto tails = anchor_tails(
        cp.spec,
        static_cast<std::size_t>(cp.psi.memory + cp.family.sys.future_window) + 2);
    std::size_t need = tails[anchor].syms.size();
    if (tail.syms.size() < need)
        throw DomainError("supplied tail is too short for the window");
    tails[anchor] = tail;
    std::vector<double> angles{reduce_mod_pi(t.angle)};
    PartitionSweep sweep(cp, n, angles, tails);
    sweep.run(1);
    return sweep.values(anchor)[0];
}

// ---------------------------------------------------------------------------
// certified sup-over-t upper via per-word extreme singular values
// ---------------------------------------------------------------------------

namespace {

// log sum_w e^{psi^(n)(w.tail)} sigma_ext(A_w)^s where sigma_ext is the
// smallest singular value for s < 0 and the largest for s >= 0; this bounds
// sup_t log Z_n from above, word by word.  Window-1 matrices only.
double sup_word_bound(const CombinedPotential& cp, int n, int anchor,
                      const std::vector<SymbolicTail>& tails) {
    const int s_ab = cp.spec.alphabet_size;
    const int k = cp.psi.memory;
    std::vector<Mat2> mats(static_cast<std::size_t>(s_ab));
    for (int a = 0; a < s_ab; ++a) {
        Symbol sa = static_cast<Symbol>(a);
        mats[static_cast<std::size_t>(a)] = cp.family.sys.at(&sa);
    }
    double m_acc = kNegInf, s_acc = 0.0;
    std::vector<Symbol> word(static_cast<std::size_t>(n));
    std::vector<Mat2> prod(static_cast<std::size_t>(n) + 1);
    std::vector<double> scale(static_cast<std::size_t>(n) + 1, 0.0);
    prod[0] = Mat2::identity();
    std::vector<Symbol> win(static_cast<std::size_t>(k));
    auto leaf = [&]() {
        Symbol a = word[static_cast<std::size_t>(n - 1)];
        if (anchor >= 0 && a != anchor) return;
        auto sym = [&](int pos) -> Symbol {
            return pos < n ? word[static_cast<std::size_t>(pos)]
                           : tails[a].at(static_cast<std::size_t>(pos - n));
        };
        double psum = 0.0;
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < k; ++i)
                win[static_cast<std::size_t>(i)] = sym(j + i);
            psum += cp.psi.at(win.data());
        }
        const Mat2& p = prod[static_cast<std::size_t>(n)];
        double sig = cp.s < 0.0 ? p.sigma_min() : p.op_norm();
        double v = psum + cp.s * (scale[static_cast<std::size_t>(n)] +
                                  std::log(sig));
        double top = m_acc > v ? m_acc : v;
        s_acc = s_acc * std::exp(m_acc - top) + std::exp(v - top);
        m_acc = top;
    };
    std::function<void(int)> rec = [&](int d) {
        if (d == n) {
            leaf();
            return;
        }
        for (int b = 0; b < s_ab; ++b) {
            if (d > 0 &&
                !cp.spec.allows(word[static_cast<std::size_t>(d - 1)],
                                static_cast<Symbol>(b)))
                continue;
            word[static_cast<std::size_t>(d)] = static_cast<Symbol>(b);
            Mat2 next = mats[static_cast<std::size_t>(b)] *
                        prod[static_cast<std::size_t>(d)];
            double sc = scale[static_cast<std::size_t>(d)];
            double f = next.frob();
            if (f > 1e60 || f < 1e-60) {
                next = next.times(1.0 / f);
                sc += std::log(f);
            }
            prod[static_cast<std::size_t>(d + 1)] = next;
            scale[static_cast<std::size_t>(d + 1)] = sc;
            rec(d + 1);
        }
    };
    rec(0);
    if (s_acc <= 0.0) return kNegInf;
    return m_acc + std::log(s_acc);
}

} // namespace

// ---------------------------------------------------------------------------
// binned interval DP (upper) + beam (lower)
// ---------------------------------------------------------------------------

namespace {

struct MatGeom {
    Mat2 m;
    double alpha, gamma, delta; // u'Gu = alpha + gamma cos(2 th - delta)
    double crit1, crit2;        // extremal angles of log|A u|
    bool orient;                // det > 0
    double kappa;
};

MatGeom mat_geom(const Mat2& m) {
    MatGeom g;
    g.m = m;
    double g11 = m.a * m.a + m.c * m.c;
    double g22 = m.b * m.b + m.d * m.d;
    double g12 = m.a * m.b + m.c * m.d;
    g.alpha = 0.5 * (g11 + g22);
    g.gamma = 0.5 * std::hypot(g11 - g22, 2.0 * g12);
    g.delta = std::atan2(2.0 * g12, g11 - g22);
    g.crit1 = reduce_mod_pi(0.5 * g.delta);
    g.crit2 = reduce_mod_pi(0.5 * g.delta + 0.5 * kPi);
    g.orient = m.det() > 0.0;
    g.kappa = m.cond();
    return g;
}

double log_norm_at(const MatGeom& g, double th) {
    return 0.5 * std::log(g.alpha + g.gamma * std::cos(2.0 * th - g.delta));
}

// min/max of log|A u| over the arc [lo, lo+len]
std::pair<double, double> phi_range(const MatGeom& g, double lo, double len) {
    double f0 = log_norm_at(g, lo), f1 = log_norm_at(g, lo + len);
    double mn = std::min(f0, f1), mx = std::max(f0, f1);
    for (double crit : {g.crit1, g.crit2}) {
        double off = crit - lo;
        off -= kPi * std::floor(off / kPi);
        if (off <= len) {
            double v = log_norm_at(g, crit);
            mn = std::min(mn, v);
            mx = std::max(mx, v);
        }
    }
    return {mn, mx};
}

struct Arc {
    double start = 0.0; // in [0, pi)
    double len = 0.0;   // in [0, pi]
};

Arc image_arc(const MatGeom& g, const Arc& src) {
    if (g.kappa * src.len >= kPi) return {0.0, kPi};
    FiberPoint p0 = projective_apply(g.m, FiberPoint{reduce_mod_pi(src.start)});
    FiberPoint p1 = projective_apply(
        g.m, FiberPoint{reduce_mod_pi(src.start + src.len)});
    double a = g.orient ? p0.angle : p1.angle;
    double b = g.orient ? p1.angle : p0.angle;
    double len = b - a;
    len -= kPi * std::floor(len / kPi);
    if (src.len == 0.0) len = 0.0;
    return {a, len};
}

struct Cell {
    double hi = kNegInf;
    double h_lo = 0.0, h_hi = 0.0; // position hull within the bin
    bool live = false;
};

// one DP: certified upper for log Z_n starting from the arc `start`
double dp_upper(const CombinedPotential& cp, int n, int anchor,
                const std::vector<MatGeom>& geo, int bins, Arc start) {
    const int s_ab = cp.spec.alphabet_size;
    const double bw = kPi / bins;
    std::vector<Cell> cur(static_cast<std::size_t>(s_ab * bins));
    std::vector<Cell> nxt(cur.size());

    auto deposit = [&](std::vector<Cell>& layer, int sym, double mass,
                       const Arc& arc) {
        // split the arc across bins and merge hulls bin by bin
        double remaining = arc.len;
        double pos = reduce_mod_pi(arc.start);
        int guard = 0;
        do {
            int b = std::min(static_cast<int>(pos / bw), bins - 1);
            double bin_end = (b + 1) * bw;
            double seg = std::min(remaining, bin_end - pos);
            Cell& c = layer[static_cast<std::size_t>(sym * bins + b)];
            if (!c.live) {
                c.live = true;
                c.hi = mass;
                c.h_lo = pos;
                c.h_hi = pos + seg;
            } else {
                c.hi = logaddexp(c.hi, mass);
                c.h_lo = std::min(c.h_lo, pos);
                c.h_hi = std::max(c.h_hi, pos + seg);
            }
            remaining -= seg;
            pos = bin_end >= kPi ? 0.0 : bin_end;
        } while (remaining > 1e-18 && ++guard <= bins + 2);
    };

    // first symbol from the start arc
    for (int c = 0; c < s_ab; ++c) {
        const MatGeom& g = geo[static_cast<std::size_t>(c)];
        auto [plo, phi_] = phi_range(g, start.start, start.len);
        Symbol cs = static_cast<Symbol>(c);
        double whi = cp.psi.at(&cs) + (cp.s < 0 ? cp.s * plo : cp.s * phi_);
        deposit(cur, c, whi, image_arc(g, start));
    }
    for (int step = 1; step < n; ++step) {
        for (auto& c : nxt) c = Cell{};
        for (int a = 0; a < s_ab; ++a)
            for (int b = 0; b < bins; ++b) {
                const Cell& c = cur[static_cast<std::size_t>(a * bins + b)];
                if (!c.live) continue;
                Arc hull{c.h_lo, c.h_hi - c.h_lo};
                for (int nc = 0; nc < s_ab; ++nc) {
                    if (!cp.spec.allows(static_cast<Symbol>(a),
                                        static_cast<Symbol>(nc)))
                        continue;
                    const MatGeom& g = geo[static_cast<std::size_t>(nc)];
                    auto [plo, phi_] = phi_range(g, hull.start, hull.len);
                    Symbol ncs = static_cast<Symbol>(nc);
                    double whi = cp.psi.at(&ncs) +
                                 (cp.s < 0 ? cp.s * plo : cp.s * phi_);
                    deposit(nxt, nc, c.hi + whi, image_arc(g, hull));
                }
            }
        cur.swap(nxt);
    }
    double total = kNegInf;
    for (int a = 0; a < s_ab; ++a) {
        if (anchor >= 0 && a != anchor) continue;
        for (int b = 0; b < bins; ++b) {
            const Cell& c = cur[static_cast<std::size_t>(a * bins + b)];
            if (c.live) total = logaddexp(total, c.hi);
        }
    }
    return total + 1e-11 * n; // float-rounding allowance
}

// exact partial sum over a beam of dominant words: a certified lower bound
double beam_lower(const CombinedPotential& cp, int n, int anchor, double t,
                  int beam_width) {
    struct Path {
        double acc;
        double x, y;
        Symbol last;
    };
    const int s_ab = cp.spec.alphabet_size;
    std::vector<Mat2> mats(static_cast<std::size_t>(s_ab));
    std::vector<double> psi1(static_cast<std::size_t>(s_ab));
    for (int a = 0; a < s_ab; ++a) {
        Symbol sa = static_cast<Symbol>(a);
        mats[static_cast<std::size_t>(a)] = cp.family.sys.at(&sa);
        psi1[static_cast<std::size_t>(a)] = cp.psi.at(&sa);
    }
    std::vector<Path> cur, nxt;
    cur.reserve(static_cast<std::size_t>(beam_width));
    nxt.reserve(static_cast<std::size_t>(beam_width) * s_ab);
    {
        double sx, sy;
        std::vector<double> one{t};
        grid_directions(one, &sx, &sy);
        cur.push_back({0.0, sx, sy, 0});
    }
    bool first = true;
    for (int step = 0; step < n; ++step) {
        nxt.clear();
        for (const Path& p : cur)
            for (int c = 0; c < s_ab; ++c) {
                if (!first && !cp.spec.allows(p.last, static_cast<Symbol>(c)))
                    continue;
                const Mat2& m = mats[static_cast<std::size_t>(c)];
                double u = m.a * p.x + m.b * p.y;
                double v = m.c * p.x + m.d * p.y;
                double r = std::hypot(u, v);
                nxt.push_back({p.acc + psi1[static_cast<std::size_t>(c)] +
                                   cp.s * std::log(r),
                               u / r, v / r, static_cast<Symbol>(c)});
            }
        first = false;
        if (static_cast<int>(nxt.size()) > beam_width) {
            // stable: ties keep lexicographic generation order
            std::stable_sort(nxt.begin(), nxt.end(),
                             [](const Path& a, const Path& b) {
                                 return a.acc > b.acc;
                             });
            nxt.resize(static_cast<std::size_t>(beam_width));
        }
        cur.swap(nxt);
    }
    double m_acc = kNegInf, s_acc = 0.0;
    for (const Path& p : cur) {
        if (anchor >= 0 && p.last != anchor) continue;
        double top = m_acc > p.acc ? m_acc : p.acc;
        s_acc = s_acc * std::exp(m_acc - top) + std::exp(p.acc - top);
        m_acc = top;
    }
    if (s_acc <= 0.0) return kNegInf;
    return m_acc + std::log(s_acc) - 1e-11 * n;
}

void require_binnable(const CombinedPotential& cp) {
    if (cp.psi.memory != 1 || cp.family.sys.future_window != 0 ||
        cp.family.sys.past_window != 0)
        throw DomainError(
            "binned bounds need memory-1 psi and window-1 matrices; refine "
            "the alphabet first");
}

} // namespace

BinnedBracket partition_sum_binned(const CombinedPotential& cp, int n,
                                   int anchor, int bins,
                                   const std::vector<double>& angles,
                                   int beam_width) {
    cp.validate();
    require_binnable(cp);
    std::vector<MatGeom> geo;
    for (int a = 0; a < cp.spec.alphabet_size; ++a) {
        Symbol sa = static_cast<Symbol>(a);
        geo.push_back(mat_geom(cp.family.sys.at(&sa)));
    }
    BinnedBracket out;
    out.n = n;
    out.anchor = anchor;
    out.lower.reserve(angles.size());
    out.upper.reserve(angles.size());
    for (double t : angles) {
        double up = dp_upper(cp, n, anchor, geo, bins, Arc{reduce_mod_pi(t), 0.0});
        double lo = beam_lower(cp, n, anchor, reduce_mod_pi(t), beam_width);
        out.lower.push_back(lo);
        out.upper.push_back(up);
    }
    out.sup_lower = *std::max_element(out.lower.begin(), out.lower.end());
    out.sup_upper = *std::max_element(out.upper.begin(), out.upper.end());
    return out;
}

BinnedBracket partition_sum_binned_sup(const CombinedPotential& cp, int n,
                                       int anchor, int bins, int groups,
                                       int beam_width) {
    cp.validate();
    require_binnable(cp);
    auto tails = anchor_tails(cp.spec, static_cast<std::size_t>(cp.psi.memory) + 2);
    BinnedBracket out;
    out.n = n;
    out.anchor = anchor;
    // certified upper for the sup over all t: per-word extreme singular values
    out.sup_upper = sup_word_bound(cp, n, anchor, tails);
    // lower: beam evaluations at group midpoints
    out.lower.reserve(static_cast<std::size_t>(groups));
    for (int g = 0; g < groups; ++g) {
        double mid = kPi * (g + 0.5) / groups;
        out.lower.push_back(beam_lower(cp, n, anchor, mid, beam_width));
    }
    out.upper.assign(1, out.sup_upper);
    out.sup_lower = *std::max_element(out.lower.begin(), out.lower.end());
    (void)bins;
    return out;
}

// ---------------------------------------------------------------------------
// Fekete estimate and the structural checks
// ---------------------------------------------------------------------------

namespace {

// certified upper for sup_t log Z_n: the finer of the grid+Lipschitz route
// (fine auxiliary grid, good while Lambda^n stays tame) and the per-word
// extreme-singular-value route (window-1 systems)
double certified_upper(const CombinedPotential& cp, int n, int anchor,
                       const PartitionGrid& pg, int grid_size, int threads) {
    double up = pg.upper();
    // auxiliary finer grid while the work budget allows
    double words = std::pow(static_cast<double>(cp.spec.alphabet_size), n);
    int gup = grid_size;
    while (gup < (1 << 15) && words * gup * 2 <= double(1 << 25)) gup <<= 1;
    if (gup > grid_size) {
        auto fine =
            partition_sum_exact_grid(cp, n, anchor, fiber_grid(gup), threads);
        up = std::min(up, fine.upper());
    }
    if (cp.psi.memory == 1 && cp.family.sys.future_window == 0) {
        auto tails =
            anchor_tails(cp.spec, static_cast<std::size_t>(cp.psi.memory) + 2);
        up = std::min(up,
                      sup_word_bound(cp, n, anchor, tails) + cp.tail_slack());
    }
    return up;
}

} // namespace

PoeEstimate poe_estimate(const CombinedPotential& cp, int n_max, int grid_log2,
                         int bins, int threads) {
    cp.validate();
    (void)bins;
    const int g = 1 << grid_log2;
    auto angles = fiber_grid(g);
    PoeEstimate est;
    est.sequence.resize(static_cast<std::size_t>(n_max));
    est.upper_per_n.resize(static_cast<std::size_t>(n_max));
    est.fekete_upper = std::numeric_limits<double>::infinity();
    for (int n = 1; n <= n_max; ++n) {
        auto pg = partition_sum_exact_grid(cp, n, -1, angles, threads);
        est.sequence[static_cast<std::size_t>(n - 1)] = pg.grid_max / n;
        double up = certified_upper(cp, n, -1, pg, g, threads) / n;
        est.upper_per_n[static_cast<std::size_t>(n - 1)] = up;
        if (up < est.fekete_upper) {
            est.fekete_upper = up;
            est.fekete_argmin = n;
        }
    }
    return est;
}

SubmultReport submultiplicativity_check(
    const CombinedPotential& cp, const std::vector<std::pair<int, int>>& pairs,
    int grid_log2, int threads) {
    cp.validate();
    const int g = 1 << grid_log2;
    auto angles = fiber_grid(g);
    std::map<int, PartitionGrid> grids;
    auto grid_for = [&](int n) -> const PartitionGrid& {
        auto it = grids.find(n);
        if (it == grids.end())
            it = grids.emplace(n, partition_sum_exact_grid(cp, n, -1, angles,
                                                           threads))
                     .first;
        return it->second;
    };
    SubmultReport rep;
    for (auto [n, m] : pairs) {
        const auto& gn = grid_for(n);
        const auto& gm = grid_for(m);
        const auto& gnm = grid_for(n + m);
        SubmultRow row;
        row.n = n;
        row.m = m;
        row.lower_nm = gnm.grid_max;
        row.upper_n = certified_upper(cp, n, -1, gn, g, threads);
        row.upper_m = certified_upper(cp, m, -1, gm, g, threads);
        row.slack = row.upper_n + row.upper_m - row.lower_nm;
        row.grid_defect = gnm.grid_max - gn.grid_max - gm.grid_max;
        if (row.slack < -1e-12) rep.ok = false;
        rep.rows.push_back(row);
    }
    return rep;
}

AnchorReport anchor_independence_check(
    const CombinedPotential& cp, const std::vector<int>& n_list, int grid_log2,
    int threads, const std::vector<SymbolicTail>* tails_override) {
    cp.validate();
    const int g = 1 << grid_log2;
    auto angles = fiber_grid(g);
    AnchorReport rep;
    for (int n : n_list) {
        check_enumerable(cp.spec, n);
        auto tails =
            tails_override
                ? *tails_override
                : anchor_tails(cp.spec,
                               static_cast<std::size_t>(
                                   cp.psi.memory +
                                   cp.family.sys.future_window) +
                                   2);
        PartitionSweep sweep(cp, n, angles, tails);
        sweep.run(threads);
        std::vector<std::vector<double>> per_anchor;
        for (int a = 0; a < cp.spec.alphabet_size; ++a) {
            per_anchor.push_back(sweep.values(a));
            double sup = *std::max_element(per_anchor.back().begin(),
                                           per_anchor.back().end());
            rep.rows.push_back({n, a, sup / n});
        }
        // anchors compared at the same fiber point, worst case over the grid
        double spread = 0.0;
        for (std::size_t i = 0; i < angles.size(); ++i) {
            double lo = per_anchor[0][i], hi = per_anchor[0][i];
            for (const auto& va : per_anchor) {
                lo = std::min(lo, va[i]);
                hi = std::max(hi, va[i]);
            }
            spread = std::max(spread, (hi - lo) / n);
        }
        rep.spread.push_back(spread);
        rep.max_spread_times_n =
            std::max(rep.max_spread_times_n, spread * n);
    }
    // connectivity constant: max over symbol pairs of round-trip length
    const int s_ab = cp.spec.alphabet_size;
    std::vector<std::vector<int>> dist(static_cast<std::size_t>(s_ab),
                                       std::vector<int>(static_cast<std::size_t>(s_ab), 1 << 20));
    for (int a = 0; a < s_ab; ++a) {
        dist[static_cast<std::size_t>(a)][static_cast<std::size_t>(a)] = 0;
        // BFS
        std::vector<int> frontier{a};
        int d = 0;
        while (!frontier.empty() && d <= s_ab + 1) {
            std::vector<int> next;
            for (int u : frontier)
                for (int v = 0; v < s_ab; ++v)
                    if (cp.spec.allows(static_cast<Symbol>(u),
                                       static_cast<Symbol>(v)) &&
                        dist[static_cast<std::size_t>(a)][static_cast<std::size_t>(v)] > d + 1) {
                        dist[static_cast<std::size_t>(a)][static_cast<std::size_t>(v)] = d + 1;
                        next.push_back(v);
                    }
            frontier.swap(next);
            ++d;
        }
    }
    int n_conn = 0;
    for (int a = 0; a < s_ab; ++a)
        for (int b = 0; b < s_ab; ++b)
            n_conn = std::max(n_conn,
                              dist[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] +
                                  dist[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)]);
    rep.c_theory =
        2.0 * n_conn *
        (cp.sup_hat_norm() + std::log(static_cast<double>(s_ab)));
    rep.ok = rep.max_spread_times_n <= rep.c_theory;
    return rep;
}

CompositeWitness non_composite_diagnostic(const CombinedPotential& cp, int n,
                                          FiberPoint t) {
    cp.validate();
    check_enumerable(cp.spec, n);
    auto tails = anchor_tails(
        cp.spec,
        static_cast<std::size_t>(cp.psi.memory + cp.family.sys.future_window) + 2);
    CompositeWitness w;
    std::map<std::vector<int>, std::pair<Word, double>> by_content;
    std::map<std::vector<int>, double> class_sums;
    enumerate_words(cp.spec, static_cast<std::size_t>(n), {},
                    [&](const Word& word) {
                        std::vector<int> content(
                            static_cast<std::size_t>(cp.spec.alphabet_size), 0);
                        for (Symbol s : word.symbols) ++content[s];
                        double val = combined_birkhoff(
                            cp, word, tails[word.symbols.back()], t);
                        auto it = by_content.find(content);
                        if (it == by_content.end()) {
                            by_content.emplace(content,
                                               std::make_pair(word, val));
                        } else if (!w.pair_found &&
                                   std::abs(val - it->second.second) > 1e-12) {
                            w.pair_found = true;
                            w.w1 = it->second.first;
                            w.w2 = word;
                            w.weight_diff = std::abs(val - it->second.second);
                        }
                        auto cit = class_sums.find(content);
                        if (cit == class_sums.end())
                            class_sums[content] = val;
                        else
                            cit->second = logaddexp(cit->second, val);
                    });
    // geometric-sequence defect of the content-class sums (2-symbol shifts)
    if (cp.spec.alphabet_size == 2) {
        std::vector<double> f(static_cast<std::size_t>(n) + 1, kNegInf);
        for (const auto& kv : class_sums)
            f[static_cast<std::size_t>(kv.first[0])] = kv.second;
        for (std::size_t j = 1; j < f.size() - 1; ++j) {
            if (f[j - 1] == kNegInf || f[j] == kNegInf || f[j + 1] == kNegInf)
                continue;
            double defect = std::abs(2.0 * f[j] - f[j - 1] - f[j + 1]);
            if (defect > 1e-9) {
                w.ratio_found = true;
                w.ratio_defect = std::max(w.ratio_defect, defect);
            }
        }
    }
    return w;
}

} // namespace poelab
