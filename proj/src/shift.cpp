#include "poelab/shift.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace poelab {

ShiftSpec ShiftSpec::full_shift(int s) {
    ShiftSpec spec;
    spec.alphabet_size = s;
    spec.adjacency.assign(s, std::vector<std::uint8_t>(s, 1));
    spec.validate();
    return spec;
}

ShiftSpec ShiftSpec::golden_mean() {
    ShiftSpec spec;
    spec.alphabet_size = 2;
    spec.adjacency = {{1, 1}, {1, 0}};
    return spec;
}

void ShiftSpec::validate() const {
    if (alphabet_size < 1 || alphabet_size > kMaxAlphabet)
        throw ConfigError("alphabet size must be in [1, 64], got " +
                          std::to_string(alphabet_size));
    if (static_cast<int>(adjacency.size()) != alphabet_size)
        throw ConfigError("adjacency row count does not match alphabet size");
    for (int a = 0; a < alphabet_size; ++a)
        if (static_cast<int>(adjacency[a].size()) != alphabet_size)
            throw ConfigError("adjacency must be square");
    for (int a = 0; a < alphabet_size; ++a) {
        bool row = false, col = false;
        for (int b = 0; b < alphabet_size; ++b) {
            row |= adjacency[a][b] != 0;
            col |= adjacency[b][a] != 0;
        }
        if (!row)
            throw ConfigError("symbol " + std::to_string(a) +
                              " has no admissible successor");
        if (!col)
            throw ConfigError("symbol " + std::to_string(a) +
                              " has no admissible predecessor");
    }
}

bool ShiftSpec::admissible(const Word& w) const {
    for (const Symbol s : w.symbols)
        if (s >= alphabet_size) return false;
    for (std::size_t i = 0; i + 1 < w.size(); ++i)
        if (!allows(w[i], w[i + 1])) return false;
    return true;
}

std::vector<Symbol> ShiftSpec::lex_min_tail(Symbol from, std::size_t len) const {
    std::vector<Symbol> out;
    out.reserve(len);
    Symbol cur = from;
    for (std::size_t i = 0; i < len; ++i) {
        out.push_back(cur);
        int next = -1;
        for (int b = 0; b < alphabet_size; ++b) {
            if (allows(cur, static_cast<Symbol>(b))) {
                next = b;
                break;
            }
        }
        if (next < 0) throw DomainError("dead symbol in lex_min_tail");
        cur = static_cast<Symbol>(next);
    }
    return out;
}

std::vector<Symbol> ShiftSpec::lex_min_past(Symbol to, std::size_t len) const {
    std::vector<Symbol> rev;
    Symbol cur = to;
    for (std::size_t i = 0; i < len; ++i) {
        int prev = -1;
        for (int a = 0; a < alphabet_size; ++a) {
            if (allows(static_cast<Symbol>(a), cur)) {
                prev = a;
                break;
            }
        }
        if (prev < 0) throw DomainError("dead symbol in lex_min_past");
        rev.push_back(static_cast<Symbol>(prev));
        cur = static_cast<Symbol>(prev);
    }
    std::reverse(rev.begin(), rev.end());
    return rev;
}

namespace {

std::vector<char> reachable_from(const ShiftSpec& spec, int start,
                                 bool reversed) {
    std::vector<char> seen(spec.alphabet_size, 0);
    std::queue<int> q;
    seen[start] = 1;
    q.push(start);
    while (!q.empty()) {
        int a = q.front();
        q.pop();
        for (int b = 0; b < spec.alphabet_size; ++b) {
            bool edge = reversed ? spec.allows(static_cast<Symbol>(b),
                                               static_cast<Symbol>(a))
                                 : spec.allows(static_cast<Symbol>(a),
                                               static_cast<Symbol>(b));
            if (edge && !seen[b]) {
                seen[b] = 1;
                q.push(b);
            }
        }
    }
    return seen;
}

} // namespace

std::optional<std::pair<int, int>> irreducibility_defect(const ShiftSpec& spec) {
    auto fwd = reachable_from(spec, 0, false);
    for (int b = 0; b < spec.alphabet_size; ++b)
        if (!fwd[b]) return std::make_pair(0, b);
    auto bwd = reachable_from(spec, 0, true);
    for (int a = 0; a < spec.alphabet_size; ++a)
        if (!bwd[a]) return std::make_pair(a, 0);
    return std::nullopt;
}

bool is_irreducible(const ShiftSpec& spec) {
    return !irreducibility_defect(spec).has_value();
}

namespace {

double pow_count(int s, std::size_t n) {
    return std::pow(static_cast<double>(s), static_cast<double>(n));
}

} // namespace

void enumerate_words(const ShiftSpec& spec, std::size_t n,
                     std::optional<Symbol> last_symbol,
                     const std::function<void(const Word&)>& visit) {
    if (n < 1) throw DomainError("word length must be >= 1");
    if (!is_irreducible(spec))
        throw ConfigError("enumerate_words requires an irreducible shift");
    if (pow_count(spec.alphabet_size, n) >
        static_cast<double>(kEnumerationCap))
        throw DomainError("enumeration cap S^n <= 2^24 exceeded");

    const int s = spec.alphabet_size;
    // reach[r][a]: a admits a path of r further steps ending in last_symbol
    std::vector<std::vector<char>> reach;
    if (last_symbol) {
        reach.assign(n, std::vector<char>(s, 0));
        reach[0].assign(s, 0);
        reach[0][*last_symbol] = 1;
        for (std::size_t r = 1; r < n; ++r)
            for (int a = 0; a < s; ++a)
                for (int b = 0; b < s; ++b)
                    if (spec.allows(static_cast<Symbol>(a),
                                    static_cast<Symbol>(b)) &&
                        reach[r - 1][b]) {
                        reach[r][a] = 1;
                        break;
                    }
    }

    Word w;
    w.symbols.assign(n, 0);
    // depth-first, smallest symbol first
    std::function<void(std::size_t)> rec = [&](std::size_t depth) {
        if (depth == n) {
            visit(w);
            return;
        }
        for (int b = 0; b < s; ++b) {
            if (depth > 0 && !spec.allows(w.symbols[depth - 1],
                                          static_cast<Symbol>(b)))
                continue;
            if (last_symbol && !reach[n - 1 - depth][b]) continue;
            w.symbols[depth] = static_cast<Symbol>(b);
            rec(depth + 1);
        }
    };
    rec(0);
}

std::vector<Word> collect_words(const ShiftSpec& spec, std::size_t n,
                                std::optional<Symbol> last_symbol) {
    std::vector<Word> out;
    enumerate_words(spec, n, last_symbol,
                    [&](const Word& w) { out.push_back(w); });
    return out;
}

std::uint64_t count_words(const ShiftSpec& spec, std::size_t n,
                          std::optional<Symbol> last_symbol) {
    if (n < 1) throw DomainError("word length must be >= 1");
    const int s = spec.alphabet_size;
    std::vector<std::uint64_t> cnt(s);
    for (int a = 0; a < s; ++a)
        cnt[a] = (!last_symbol || *last_symbol == a) ? 1 : 0;
    for (std::size_t step = 1; step < n; ++step) {
        std::vector<std::uint64_t> nxt(s, 0);
        for (int a = 0; a < s; ++a)
            for (int b = 0; b < s; ++b)
                if (spec.allows(static_cast<Symbol>(a), static_cast<Symbol>(b)))
                    nxt[a] += cnt[b];
        cnt.swap(nxt);
    }
    std::uint64_t total = 0;
    for (int a = 0; a < s; ++a) total += cnt[a];
    return total;
}

void MarkovMeasure::validate(const ShiftSpec* support, double tol) const {
    const std::size_t n = states();
    if (transition.size() != n)
        throw DomainError("transition/stationary size mismatch");
    double pisum = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
        if (transition[a].size() != n)
            throw DomainError("transition matrix must be square");
        double rowsum = 0.0;
        for (std::size_t b = 0; b < n; ++b) {
            double q = transition[a][b];
            if (q < 0.0) throw DomainError("negative transition probability");
            if (support && q > 0.0 &&
                !support->allows(static_cast<Symbol>(a), static_cast<Symbol>(b)))
                throw DomainError("transition supported off the adjacency");
            rowsum += q;
        }
        if (std::abs(rowsum - 1.0) > tol)
            throw DomainError("transition row does not sum to 1");
        if (stationary[a] < 0.0) throw DomainError("negative stationary mass");
        pisum += stationary[a];
    }
    if (std::abs(pisum - 1.0) > tol)
        throw DomainError("stationary vector does not sum to 1");
    for (std::size_t b = 0; b < n; ++b) {
        double acc = 0.0;
        for (std::size_t a = 0; a < n; ++a)
            acc += stationary[a] * transition[a][b];
        if (std::abs(acc - stationary[b]) > tol)
            throw DomainError("stationary vector is not invariant");
    }
}

std::vector<double> stationary_of(const std::vector<std::vector<double>>& q) {
    const std::size_t n = q.size();
    std::vector<double> pi(n, 1.0 / static_cast<double>(n)), nxt(n);
    for (int iter = 0; iter < 100000; ++iter) {
        for (std::size_t b = 0; b < n; ++b) nxt[b] = 0.0;
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b) nxt[b] += pi[a] * q[a][b];
        double diff = 0.0, sum = 0.0;
        for (std::size_t b = 0; b < n; ++b) sum += nxt[b];
        for (std::size_t b = 0; b < n; ++b) {
            nxt[b] /= sum;
            diff = std::max(diff, std::abs(nxt[b] - pi[b]));
        }
        pi.swap(nxt);
        if (diff < 1e-15) break;
    }
    return pi;
}

double markov_entropy(const MarkovMeasure& m) {
    double h = 0.0;
    for (std::size_t a = 0; a < m.states(); ++a)
        for (std::size_t b = 0; b < m.states(); ++b) {
            double q = m.transition[a][b];
            if (q > 0.0) h -= m.stationary[a] * q * std::log(q);
        }
    return h;
}

double cylinder_probability(const MarkovMeasure& m, const Word& w) {
    if (w.size() == 0) return 1.0;
    if (w[0] >= m.states()) throw DomainError("symbol outside alphabet");
    double p = m.stationary[w[0]];
    for (std::size_t i = 0; i + 1 < w.size(); ++i) {
        if (w[i + 1] >= m.states()) throw DomainError("symbol outside alphabet");
        p *= m.transition[w[i]][w[i + 1]];
    }
    return p;
}

std::uint64_t encode_word(const Symbol* w, std::size_t len) {
    std::uint64_t key = 0;
    for (std::size_t i = 0; i < len; ++i)
        key = (key << 6) | static_cast<std::uint64_t>(w[i]);
    return key | (std::uint64_t{1} << (6 * len)); // length marker
}

int Recoding::state_of(const Symbol* w) const {
    std::uint64_t key = encode_word(w, static_cast<std::size_t>(block_len));
    auto it = std::lower_bound(keys_.begin(), keys_.end(), key);
    if (it == keys_.end() || *it != key) return -1;
    return static_cast<int>(it - keys_.begin());
}

int Recoding::step(int u, Symbol c) const {
    const Word& w = states[u];
    if (!base.allows(w.symbols.back(), c)) return -1;
    std::vector<Symbol> nxt(w.symbols.begin() + 1, w.symbols.end());
    nxt.push_back(c);
    return state_of(nxt.data());
}

Word Recoding::edge_word(int u, int v) const {
    Word w = states[u];
    w.symbols.push_back(states[v].symbols.back());
    return w;
}

std::vector<int> Recoding::path(const Word& w) const {
    const std::size_t m = static_cast<std::size_t>(block_len);
    if (w.size() < m) throw DomainError("word shorter than the block length");
    std::vector<int> out;
    out.reserve(w.size() - m + 1);
    for (std::size_t i = 0; i + m <= w.size(); ++i) {
        int u = state_of(w.symbols.data() + i);
        if (u < 0) throw DomainError("inadmissible word in path()");
        out.push_back(u);
    }
    return out;
}

Recoding make_recoding(const ShiftSpec& spec, int block_len) {
    if (block_len < 1) throw DomainError("block length must be >= 1");
    Recoding rec;
    rec.base = spec;
    rec.block_len = block_len;
    rec.states = collect_words(spec, static_cast<std::size_t>(block_len));
    rec.keys_.reserve(rec.states.size());
    for (const Word& w : rec.states) rec.keys_.push_back(encode_word(w));
    // collect_words is lexicographic, so keys_ is sorted already
    const int ns = static_cast<int>(rec.states.size());
    rec.block_spec.alphabet_size = ns;
    rec.block_spec.adjacency.assign(ns, std::vector<std::uint8_t>(ns, 0));
    for (int u = 0; u < ns; ++u)
        for (int b = 0; b < spec.alphabet_size; ++b) {
            int v = rec.step(u, static_cast<Symbol>(b));
            if (v >= 0) rec.block_spec.adjacency[u][v] = 1;
        }
    return rec;
}

} // namespace poelab
