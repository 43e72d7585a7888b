#pragma once
// Counter-based random streams: Philox4x64-10 (Salmon, Moraes, Dror, Shaw,
// SC'11), word order and carry semantics matching numpy.random.Philox.
// A stream is keyed by (seed, task id), so any worker can regenerate any
// task's draws independently of scheduling.

#include <array>
#include <cstdint>

namespace poelab {

class PhiloxStream {
public:
    PhiloxStream(std::uint64_t seed, std::uint64_t task)
        : key_{seed, task}, ctr_{0, 0, 0, 0} {}

    PhiloxStream(std::array<std::uint64_t, 2> key,
                 std::array<std::uint64_t, 4> counter)
        : key_(key), ctr_(counter) {}

    std::uint64_t next_u64() {
        if (pos_ == 4) {
            increment(); // numpy bumps the counter before each block
            buf_ = block(ctr_, key_);
            pos_ = 0;
        }
        return buf_[pos_++];
    }

    // uniform in [0,1) with 53 random bits
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // index i with probability weights[i] / sum(weights); weights >= 0
    template <class Vec>
    std::size_t pick(const Vec& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double u = uniform() * total;
        double c = 0.0;
        for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
            c += weights[i];
            if (u < c) return i;
        }
        return weights.size() - 1;
    }

    static std::array<std::uint64_t, 4> block(std::array<std::uint64_t, 4> x,
                                              std::array<std::uint64_t, 2> k) {
        for (int round = 0; round < 10; ++round) {
            x = single_round(x, k);
            k[0] += 0x9E3779B97F4A7C15ull;
            k[1] += 0xBB67AE8584CAA73Bull;
        }
        return x;
    }

private:
    static std::array<std::uint64_t, 4> single_round(
        const std::array<std::uint64_t, 4>& x,
        const std::array<std::uint64_t, 2>& k) {
        const unsigned __int128 p0 =
            static_cast<unsigned __int128>(0xD2E7470EE14C6C93ull) * x[0];
        const unsigned __int128 p1 =
            static_cast<unsigned __int128>(0xCA5A826395121157ull) * x[2];
        const std::uint64_t hi0 = static_cast<std::uint64_t>(p0 >> 64);
        const std::uint64_t lo0 = static_cast<std::uint64_t>(p0);
        const std::uint64_t hi1 = static_cast<std::uint64_t>(p1 >> 64);
        const std::uint64_t lo1 = static_cast<std::uint64_t>(p1);
        return {hi1 ^ x[1] ^ k[0], lo1, hi0 ^ x[3] ^ k[1], lo0};
    }

    void increment() {
        for (int i = 0; i < 4; ++i) {
            if (++ctr_[i] != 0) break;
        }
    }

    std::array<std::uint64_t, 2> key_;
    std::array<std::uint64_t, 4> ctr_;
    std::array<std::uint64_t, 4> buf_{};
    int pos_ = 4;
};

} // namespace poelab
