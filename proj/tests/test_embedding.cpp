#include <cmath>
#include <vector>

#include <doctest.h>

#include "d3g/embedding.hpp"
#include "d3g/errors.hpp"
#include "d3g/rng.hpp"

using namespace d3g;

namespace {

Embedding random_embedding(const CounterRng& rng, uint64_t base, size_t dim) {
    Embedding e;
    for (size_t i = 0; i < dim; ++i) {
        e.values.push_back(rng.uniform(base * 1000 + i) * 2.0 - 1.0);
    }
    return e;
}

}  // namespace

TEST_CASE("l2_norm and l2_normalize") {
    CHECK(l2_norm({3.0, 4.0}) == doctest::Approx(5.0).epsilon(1e-12));

    const Embedding n = l2_normalize({3.0, 4.0});
    CHECK(n.values == std::vector<double>{0.6, 0.8});

    // a unit vector passes through unchanged
    const Embedding u{0.6, 0.8};
    const Embedding nu = l2_normalize(u);
    CHECK(nu[0] == doctest::Approx(0.6).epsilon(1e-9));
    CHECK(nu[1] == doctest::Approx(0.8).epsilon(1e-9));
    CHECK(l2_norm(nu) == doctest::Approx(1.0).epsilon(1e-9));

    CHECK_THROWS_AS(l2_normalize({0.0, 0.0, 0.0}), ZeroVectorError);
    CHECK_THROWS_AS(l2_normalize({1e-13, 0.0}), ZeroVectorError);
    CHECK_NOTHROW(l2_normalize({1e-11, 0.0}));
}

TEST_CASE("cosine basics") {
    const Embedding v{0.3, -1.2, 0.5};
    CHECK(cosine(v, v) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(cosine({1.0, 0.0}, {0.0, 1.0}) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(cosine({1.0, 0.0}, {-2.0, 0.0}) == doctest::Approx(-1.0).epsilon(1e-12));

    CHECK_THROWS_AS(cosine({1.0, 0.0}, {1.0, 0.0, 0.0}), DimMismatchError);
    CHECK_THROWS_AS(cosine({0.0, 0.0}, {1.0, 0.0}), ZeroVectorError);
}

TEST_CASE("cosine symmetry, range and scale invariance") {
    const CounterRng rng(12345, "cosine-props");
    for (uint64_t i = 0; i < 50; ++i) {
        const Embedding a = random_embedding(rng, 2 * i, 8);
        const Embedding b = random_embedding(rng, 2 * i + 1, 8);
        const double c = cosine(a, b);
        CHECK(c == cosine(b, a));  // commutative arithmetic, exactly equal
        CHECK(c >= -1.0 - 1e-9);
        CHECK(c <= 1.0 + 1e-9);

        Embedding a3 = a;
        Embedding b7 = b;
        for (double& x : a3.values) x *= 3.25;
        for (double& x : b7.values) x *= 0.125;
        CHECK(cosine(a3, b7) == doctest::Approx(c).epsilon(1e-9));
    }
}

TEST_CASE("mean_embedding") {
    const Embedding v{1.0, 2.0, -3.0};
    CHECK(mean_embedding(std::vector<Embedding>{v}) == v);

    const std::vector<Embedding> pair{{1.0, 0.0}, {0.0, 1.0}};
    CHECK(mean_embedding(pair) == Embedding{0.5, 0.5});

    // cancellation yields a zero vector; the caller sees ZeroVector as soon
    // as it normalizes, nothing is patched silently
    const std::vector<Embedding> opposed{{1.0, 0.0}, {-1.0, 0.0}};
    const Embedding zero = mean_embedding(opposed);
    CHECK(zero == Embedding{0.0, 0.0});
    CHECK_THROWS_AS(l2_normalize(zero), ZeroVectorError);

    CHECK_THROWS_AS(mean_embedding(std::vector<Embedding>{}), EmptyInputError);
    CHECK_THROWS_AS(mean_embedding(std::vector<Embedding>{{1.0, 0.0}, {1.0, 0.0, 0.0}}),
                    DimMismatchError);
}

TEST_CASE("mean_embedding permutation invariance") {
    const CounterRng rng(99, "mean-perm");
    std::vector<Embedding> vs;
    for (uint64_t i = 0; i < 7; ++i) vs.push_back(random_embedding(rng, i, 5));
    const Embedding forward = mean_embedding(vs);
    std::vector<Embedding> reversed(vs.rbegin(), vs.rend());
    const Embedding backward = mean_embedding(reversed);
    for (size_t i = 0; i < forward.dim(); ++i) {
        CHECK(forward[i] == doctest::Approx(backward[i]).epsilon(1e-9));
    }
}

TEST_CASE("FusionWeight validation and grid") {
    CHECK(FusionWeight(0.3).text() == 0.3);
    CHECK(FusionWeight(0.3).image() == 0.7);
    CHECK_THROWS_AS(FusionWeight(-0.01), InvalidConfigError);
    CHECK_THROWS_AS(FusionWeight(1.01), InvalidConfigError);

    CHECK(FusionWeight::from_grid(0).text() == 0.0);
    CHECK(FusionWeight::from_grid(100).text() == 1.0);
    CHECK(FusionWeight::from_grid(85).text() == 0.85);
    CHECK_THROWS_AS(FusionWeight::from_grid(-1), InvalidConfigError);
    CHECK_THROWS_AS(FusionWeight::from_grid(101), InvalidConfigError);
}

TEST_CASE("fuse boundaries and midpoint") {
    const Embedding t{2.0, 0.0};
    const Embedding i{0.0, 5.0};

    // w=1 keeps exactly the normalized text part, w=0 the image part
    CHECK(fuse(t, i, FusionWeight(1.0)).values == l2_normalize(t).values);
    CHECK(fuse(t, i, FusionWeight(0.0)).values == l2_normalize(i).values);
    CHECK(cosine(fuse(t, i, FusionWeight(1.0)), t) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(cosine(fuse(t, i, FusionWeight(0.0)), i) == doctest::Approx(1.0).epsilon(1e-9));

    CHECK(fuse({1.0, 0.0}, {0.0, 1.0}, FusionWeight(0.5)) == Embedding{0.5, 0.5});

    CHECK_THROWS_AS(fuse({1.0, 0.0}, {1.0, 0.0, 0.0}, FusionWeight(0.5)), DimMismatchError);
    CHECK_THROWS_AS(fuse({0.0, 0.0}, {1.0, 0.0}, FusionWeight(0.5)), ZeroVectorError);
}

TEST_CASE("fuse output is a convex combination of unit vectors") {
    const CounterRng rng(7, "fuse-norm");
    for (uint64_t i = 0; i < 30; ++i) {
        const Embedding t = random_embedding(rng, 2 * i, 6);
        const Embedding im = random_embedding(rng, 2 * i + 1, 6);
        for (int k = 0; k <= 100; k += 10) {
            CHECK(l2_norm(fuse(t, im, FusionWeight::from_grid(k))) <= 1.0 + 1e-9);
        }
    }
}

TEST_CASE("embedding validate rejects empty and non-finite") {
    CHECK_THROWS_AS(Embedding{}.validate("test"), DimMismatchError);
    Embedding bad{1.0, 0.0};
    bad.values[1] = std::nan("");
    CHECK_THROWS_AS(bad.validate("test"), DimMismatchError);
}
