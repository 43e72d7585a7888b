#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "poelab/rng.hpp"
#include "poelab/shift.hpp"

#include <cmath>
#include <numeric>

using namespace poelab;

namespace {

// oracle: word count as the sum of entries of A^{n-1} (restricted to a final
// symbol when given), computed with plain integer matrix powers
std::uint64_t count_by_matrix_power(const ShiftSpec& spec, std::size_t n,
                                    std::optional<Symbol> last) {
    const int s = spec.alphabet_size;
    std::vector<std::vector<std::uint64_t>> p(
        s, std::vector<std::uint64_t>(s, 0));
    for (int a = 0; a < s; ++a) p[a][a] = 1;
    for (std::size_t k = 1; k < n; ++k) {
        std::vector<std::vector<std::uint64_t>> q(
            s, std::vector<std::uint64_t>(s, 0));
        for (int a = 0; a < s; ++a)
            for (int b = 0; b < s; ++b)
                if (spec.allows(Symbol(a), Symbol(b)))
                    for (int c = 0; c < s; ++c) q[a][c] += p[b][c];
        p.swap(q);
    }
    std::uint64_t total = 0;
    for (int a = 0; a < s; ++a)
        for (int b = 0; b < s; ++b)
            if (!last || b == *last) total += p[a][b];
    return total;
}

MarkovMeasure bernoulli(std::vector<double> p) {
    MarkovMeasure m;
    m.stationary = p;
    m.transition.assign(p.size(), p);
    return m;
}

} // namespace

TEST_CASE("irreducibility") {
    CHECK(is_irreducible(ShiftSpec::full_shift(2)));
    CHECK(is_irreducible(ShiftSpec::golden_mean()));
    ShiftSpec bad;
    bad.alphabet_size = 2;
    bad.adjacency = {{1, 1}, {0, 1}}; // symbol 1 cannot reach 0
    CHECK(!is_irreducible(bad));
    auto defect = irreducibility_defect(bad);
    REQUIRE(defect.has_value());
    CHECK(defect->second == 0);
}

TEST_CASE("word enumeration matches closed forms") {
    auto full2 = ShiftSpec::full_shift(2);
    CHECK(collect_words(full2, 3).size() == 8);
    CHECK(collect_words(full2, 3, Symbol{0}).size() == 4);
    // golden-mean n=4: Fibonacci count F_6 = 8
    auto gm = ShiftSpec::golden_mean();
    auto words = collect_words(gm, 4);
    CHECK(words.size() == 8);
    for (const Word& w : words) CHECK(gm.admissible(w));
    // lexicographic order
    for (std::size_t i = 0; i + 1 < words.size(); ++i)
        CHECK(words[i].symbols < words[i + 1].symbols);
    CHECK(count_words(gm, 4) == 8);
}

TEST_CASE("word count equals the adjacency power oracle") {
    std::vector<ShiftSpec> specs{ShiftSpec::full_shift(2),
                                 ShiftSpec::golden_mean(),
                                 ShiftSpec::full_shift(3)};
    ShiftSpec s4;
    s4.alphabet_size = 4;
    s4.adjacency = {{1, 1, 0, 0}, {0, 1, 1, 0}, {0, 0, 1, 1}, {1, 0, 0, 1}};
    specs.push_back(s4);
    for (const auto& spec : specs) {
        for (std::size_t n = 1; n <= 12; ++n) {
            if (std::pow(spec.alphabet_size, n) > double(kEnumerationCap))
                break;
            CHECK(count_words(spec, n) == count_by_matrix_power(spec, n, {}));
            std::size_t enumerated = 0;
            enumerate_words(spec, n, {}, [&](const Word&) { ++enumerated; });
            CHECK(enumerated == count_words(spec, n));
            for (int a = 0; a < spec.alphabet_size; ++a) {
                CHECK(count_words(spec, n, Symbol(a)) ==
                      count_by_matrix_power(spec, n, Symbol(a)));
            }
        }
    }
}

TEST_CASE("enumeration rejects bad inputs") {
    ShiftSpec bad;
    bad.alphabet_size = 2;
    bad.adjacency = {{1, 1}, {0, 1}};
    CHECK_THROWS_AS(collect_words(bad, 3), ConfigError);
    auto full2 = ShiftSpec::full_shift(2);
    CHECK_THROWS_AS(collect_words(full2, 30), DomainError);
}

TEST_CASE("markov entropy") {
    CHECK(markov_entropy(bernoulli({0.5, 0.5})) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-14));
    // deterministic cycle
    MarkovMeasure cyc;
    cyc.stationary = {0.5, 0.5};
    cyc.transition = {{0, 1}, {1, 0}};
    CHECK(markov_entropy(cyc) == 0.0);
    CHECK(markov_entropy(bernoulli({0.7, 0.3})) ==
          doctest::Approx(0.6108643020548935).epsilon(1e-14));
}

TEST_CASE("entropy is invariant under alphabet relabeling") {
    MarkovMeasure m;
    m.transition = {{0.2, 0.5, 0.3}, {0.6, 0.1, 0.3}, {0.25, 0.25, 0.5}};
    m.stationary = stationary_of(m.transition);
    m.validate();
    // conjugate by the permutation (0 1 2) -> (2 0 1)
    std::vector<int> perm{2, 0, 1};
    MarkovMeasure pm;
    pm.transition.assign(3, std::vector<double>(3));
    pm.stationary.assign(3, 0.0);
    for (int a = 0; a < 3; ++a) {
        pm.stationary[perm[a]] = m.stationary[a];
        for (int b = 0; b < 3; ++b)
            pm.transition[perm[a]][perm[b]] = m.transition[a][b];
    }
    pm.validate();
    CHECK(markov_entropy(pm) ==
          doctest::Approx(markov_entropy(m)).epsilon(1e-14));
}

TEST_CASE("cylinder probabilities") {
    auto b = bernoulli({0.5, 0.5});
    CHECK(cylinder_probability(b, Word{{0, 1, 1}}) == doctest::Approx(0.125));
    auto b73 = bernoulli({0.7, 0.3});
    CHECK(cylinder_probability(b73, Word{{0, 1, 0}}) ==
          doctest::Approx(0.147).epsilon(1e-14));
    MarkovMeasure blocked;
    blocked.transition = {{1.0, 0.0}, {1.0, 0.0}};
    blocked.stationary = {1.0, 0.0};
    CHECK(cylinder_probability(blocked, Word{{0, 1}}) == 0.0);
}

TEST_CASE("cylinder probabilities sum to one over admissible words") {
    auto gm = ShiftSpec::golden_mean();
    MarkovMeasure parry;
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    parry.transition = {{1 / phi, 1 / (phi * phi)}, {1.0, 0.0}};
    parry.stationary = {phi * phi / (1 + phi * phi), 1 / (1 + phi * phi)};
    parry.validate(&gm);
    for (std::size_t n : {1, 4, 7, 10}) {
        double total = 0.0;
        enumerate_words(gm, n, {}, [&](const Word& w) {
            total += cylinder_probability(parry, w);
        });
        CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
    }
}

TEST_CASE("recoding to 2-blocks") {
    auto gm = ShiftSpec::golden_mean();
    auto rec = make_recoding(gm, 2);
    // admissible 2-words: 00, 01, 10
    REQUIRE(rec.states.size() == 3);
    CHECK(rec.states[0].symbols == std::vector<Symbol>{0, 0});
    CHECK(rec.states[1].symbols == std::vector<Symbol>{0, 1});
    CHECK(rec.states[2].symbols == std::vector<Symbol>{1, 0});
    // 00 -> 00 and 00 -> 01 allowed, 01 -> 10 only
    CHECK(rec.step(0, 0) == 0);
    CHECK(rec.step(0, 1) == 1);
    CHECK(rec.step(1, 0) == 2);
    CHECK(rec.step(1, 1) == -1);
    CHECK(is_irreducible(rec.block_spec));
    // paths recode admissible words of length >= 2
    Word w{{0, 0, 1, 0}};
    auto path = rec.path(w);
    CHECK(path == std::vector<int>{0, 1, 2});
    CHECK(rec.edge_word(0, 1).symbols == std::vector<Symbol>{0, 0, 1});
}

TEST_CASE("block word counts match base word counts") {
    auto gm = ShiftSpec::golden_mean();
    auto rec = make_recoding(gm, 2);
    // words of length n over the base <-> words of length n-1 over blocks
    for (std::size_t n = 2; n <= 10; ++n)
        CHECK(count_words(gm, n) == count_words(rec.block_spec, n - 1));
}

TEST_CASE("lex minimal tails and pasts") {
    auto gm = ShiftSpec::golden_mean();
    auto tail = gm.lex_min_tail(1, 5);
    CHECK(tail == std::vector<Symbol>{1, 0, 0, 0, 0});
    auto past = gm.lex_min_past(1, 3);
    CHECK(past == std::vector<Symbol>{0, 0, 0});
}
