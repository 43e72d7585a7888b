#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "poelab/rng.hpp"

#include <cmath>

using poelab::PhiloxStream;

// Reference outputs generated with numpy.random.Philox (philox4x64-10),
// counter word 0 least significant.
TEST_CASE("philox matches numpy reference vectors") {
    PhiloxStream z({0, 0}, {0, 0, 0, 0});
    CHECK(z.next_u64() == 0x02f4ba6408e4d89bull);
    CHECK(z.next_u64() == 0x3dd62b0b9ca8c5b2ull);
    CHECK(z.next_u64() == 0x1c8667a55d902e79ull);
    CHECK(z.next_u64() == 0x907d7a052fd5b4dcull);
    // second block: counter incremented to (1,0,0,0)
    CHECK(z.next_u64() == 0x809bf322883987c3ull);
    CHECK(z.next_u64() == 0x471128b9e807f7ddull);
    CHECK(z.next_u64() == 0xf250ba0dbec065b7ull);
    CHECK(z.next_u64() == 0xfc6ed66767a457bcull);

    PhiloxStream a({5, 6}, {1, 2, 3, 4});
    CHECK(a.next_u64() == 0x92ab6a0e75619263ull);
    CHECK(a.next_u64() == 0xd8ff75bdc6bf8f60ull);
    CHECK(a.next_u64() == 0x450e124938725640ull);
    CHECK(a.next_u64() == 0x94eb1a7cffd20cbbull);

    PhiloxStream k({0xdeadbeefcafebabeull, 0}, {0, 0, 0, 0});
    CHECK(k.next_u64() == 0xc15b325be5b6c6e8ull);
    CHECK(k.next_u64() == 0x1c148a136ff8a268ull);
}

TEST_CASE("philox counter carry") {
    PhiloxStream z({5, 6}, {0xffffffffffffffffull, 0, 0, 0});
    CHECK(z.next_u64() == 0x038ec2ea94b580bdull);
    CHECK(z.next_u64() == 0x1e2da9cd5690d10dull);
    CHECK(z.next_u64() == 0x3023ae744f17e5a4ull);
    CHECK(z.next_u64() == 0x15d66c97ee41ec40ull);
    // counter wrapped to (0,1,0,0)
    CHECK(z.next_u64() == 0x17776608ab48620bull);
    CHECK(z.next_u64() == 0x0a5601e099b6504full);
    CHECK(z.next_u64() == 0xabdc3eee5faf4f94ull);
    CHECK(z.next_u64() == 0x25e68093eb1c48f3ull);
}

TEST_CASE("uniforms live in [0,1) and look uniform") {
    PhiloxStream z(42, 7);
    double sum = 0.0, sum2 = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        double u = z.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        sum += u;
        sum2 += u * u;
    }
    double mean = sum / n;
    double var = sum2 / n - mean * mean;
    CHECK(std::abs(mean - 0.5) < 0.005);
    CHECK(std::abs(var - 1.0 / 12.0) < 0.005);
}

TEST_CASE("streams keyed by task id are distinct and reproducible") {
    PhiloxStream a(1, 0), b(1, 1), a2(1, 0);
    CHECK(a.next_u64() != b.next_u64());
    PhiloxStream a3(1, 0);
    CHECK(a3.next_u64() == a2.next_u64());
}

TEST_CASE("pick follows the weight distribution") {
    PhiloxStream z(9, 9);
    std::vector<double> w{0.7, 0.3};
    int c0 = 0;
    const int n = 50000;
    for (int i = 0; i < n; ++i)
        if (z.pick(w) == 0) ++c0;
    CHECK(std::abs(c0 / double(n) - 0.7) < 0.01);
}
