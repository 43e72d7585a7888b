#pragma once
// Finite-alphabet one-sided topological Markov shifts: admissible words,
// strong connectivity, Markov measures, and the block recoding that turns
// memory-k data into memory-1 data on the alphabet of admissible m-words.

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace poelab {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InvariantViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Symbol = std::uint8_t;

struct Word {
    std::vector<Symbol> symbols;

    Word() = default;
    explicit Word(std::vector<Symbol> s) : symbols(std::move(s)) {}
    std::size_t size() const { return symbols.size(); }
    Symbol operator[](std::size_t i) const { return symbols[i]; }
    bool operator==(const Word&) const = default;
};

struct ShiftSpec {
    int alphabet_size = 0;
    // adjacency[a][b] != 0 iff symbol b may follow symbol a
    std::vector<std::vector<std::uint8_t>> adjacency;

    static ShiftSpec full_shift(int s);
    static ShiftSpec golden_mean(); // [[1,1],[1,0]]

    bool allows(Symbol a, Symbol b) const {
        return adjacency[a][b] != 0;
    }
    // every row and column has at least one edge
    void validate() const;
    bool admissible(const Word& w) const;

    // symbols of the lexicographically minimal admissible continuation
    // starting (and including) `from`
    std::vector<Symbol> lex_min_tail(Symbol from, std::size_t len) const;
    // lexicographically minimal admissible past: result[j] may precede
    // result[j+1], ending at `to` (result.back() precedes `to`)
    std::vector<Symbol> lex_min_past(Symbol to, std::size_t len) const;
};

bool is_irreducible(const ShiftSpec& spec);
// first (from, to) pair with no path from `from` to `to`, if any
std::optional<std::pair<int, int>> irreducibility_defect(const ShiftSpec& spec);

// Streams the admissible words of length n in lexicographic order, optionally
// restricted to words ending in last_symbol.  Throws ConfigError for a
// non-irreducible spec and DomainError when S^n exceeds the enumeration cap.
void enumerate_words(const ShiftSpec& spec, std::size_t n,
                     std::optional<Symbol> last_symbol,
                     const std::function<void(const Word&)>& visit);
std::vector<Word> collect_words(const ShiftSpec& spec, std::size_t n,
                                std::optional<Symbol> last_symbol = {});
std::uint64_t count_words(const ShiftSpec& spec, std::size_t n,
                          std::optional<Symbol> last_symbol = {});

inline constexpr std::uint64_t kEnumerationCap = std::uint64_t{1} << 24;
inline constexpr int kMaxAlphabet = 64;

struct MarkovMeasure {
    std::vector<std::vector<double>> transition; // row-stochastic Q
    std::vector<double> stationary;              // pi, piQ = pi

    std::size_t states() const { return stationary.size(); }
    // checks row sums, stationarity and (when given) adjacency support
    void validate(const ShiftSpec* support = nullptr, double tol = 1e-12) const;
};

// stationary distribution of a row-stochastic matrix (irreducible support)
std::vector<double> stationary_of(const std::vector<std::vector<double>>& q);

double markov_entropy(const MarkovMeasure& m);
double cylinder_probability(const MarkovMeasure& m, const Word& w);

// ---- block recoding -------------------------------------------------------

// Encodes fixed-length words over alphabets up to kMaxAlphabet into integer
// keys (6 bits per symbol).
std::uint64_t encode_word(const Symbol* w, std::size_t len);
inline std::uint64_t encode_word(const Word& w) {
    return encode_word(w.symbols.data(), w.size());
}

// The alphabet of admissible m-words with the overlap adjacency.  State i is
// states[i]; (u, v) is admissible iff u and v overlap in m-1 symbols and the
// joined (m+1)-word is admissible in the base shift.
struct Recoding {
    ShiftSpec base;
    int block_len = 1; // m
    std::vector<Word> states;
    ShiftSpec block_spec;

    int state_of(const Symbol* w) const; // index of an m-word, -1 if absent
    int state_of(const Word& w) const { return state_of(w.symbols.data()); }
    // m-word obtained by shifting state u and appending symbol c, -1 if
    // inadmissible
    int step(int u, Symbol c) const;
    // the (m+1)-word of an edge u -> v
    Word edge_word(int u, int v) const;
    // recoded state path of an original word with |w| >= m
    std::vector<int> path(const Word& w) const;

private:
    std::vector<std::uint64_t> keys_; // sorted encode_word keys
    friend Recoding make_recoding(const ShiftSpec&, int);
};

Recoding make_recoding(const ShiftSpec& spec, int block_len);

} // namespace poelab
