#include <gtest/gtest.h>

#include <cmath>
#include <string>

#include "qnoise/linalg.hpp"
#include "qnoise/problems.hpp"
#include "qnoise/random.hpp"

using namespace qnoise;

namespace {
// Seeded validation points: x0 + U(-1/2, 1/2)^d.
DenseVector validation_point(const Problem& p, std::uint64_t seed) {
    rng::SplitMix64 gen(seed);
    DenseVector x = p.x0;
    for (auto& v : x) v += gen.uniform() - 0.5;
    return x;
}
}  // namespace

TEST(Registry, DimensionsAndNames) {
    for (const char* name : {"ARWHEAD", "ENGVAL1", "CRAGGLVY", "TRIDIA", "DQDRTIC", "WOODS", "NONDIA", "GENROSE"}) {
        const Problem p = registry_lookup(name);
        EXPECT_EQ(p.name, name);
        EXPECT_EQ(p.dim, 100u);
        EXPECT_EQ(p.x0.size(), 100u);
        EXPECT_FALSE(p.bounds);
    }
}

TEST(Registry, UnknownNameListsRegistered) {
    try {
        (void)registry_lookup("WATSON");
        FAIL() << "expected LookupError";
    } catch (const LookupError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("WATSON"), std::string::npos);
        EXPECT_NE(msg.find("ARWHEAD"), std::string::npos);
        EXPECT_NE(msg.find("TRIDIA"), std::string::npos);
    }
    EXPECT_FALSE(default_registry().contains("WATSON"));
    EXPECT_FALSE(default_registry().contains("QUAD-10-2-1"));
    EXPECT_FALSE(default_registry().contains("QUAD-x-1-2"));
}

TEST(Registry, QuadNames) {
    const Problem q = registry_lookup("QUAD-50-1-100-7");
    EXPECT_EQ(q.dim, 50u);
    ASSERT_TRUE(q.bounds);
    EXPECT_EQ(q.bounds->m, 1.0);
    EXPECT_EQ(q.bounds->M, 100.0);
    const Problem same = make_quadratic(50, 1.0, 100.0, 7);
    EXPECT_EQ(q.x0, same.x0);
    EXPECT_EQ(q.eval_f(q.x0), same.eval_f(same.x0));
}

TEST(Registry, AcceptsNewProblems) {
    ProblemRegistry r = make_default_registry();
    r.add("SPHERE2", [] {
        Problem p;
        p.name = "SPHERE2";
        p.dim = 2;
        p.objective = [](const DenseVector& x) { return dot(x, x); };
        p.gradient = [](const DenseVector& x) { return 2.0 * x; };
        p.x0 = {1, 1};
        return p;
    });
    EXPECT_TRUE(r.contains("SPHERE2"));
    EXPECT_EQ(r.lookup("SPHERE2").eval_f({1, 2}), 5.0);
}

TEST(Arwhead, AllOnes) {
    const Problem p = registry_lookup("ARWHEAD");
    EXPECT_DOUBLE_EQ(p.eval_f(DenseVector(100, 1.0)), 297.0);
    EXPECT_LE(check_gradient(p, p.x0, 1e-6), 1e-6);
}

TEST(Problems, KnownMinimizers) {
    // ARWHEAD: x_i = 1 (i < d), x_d = 0.
    DenseVector x(100, 1.0);
    x[99] = 0.0;
    EXPECT_NEAR(registry_lookup("ARWHEAD").eval_f(x), 0.0, 1e-12);
    EXPECT_NEAR(registry_lookup("GENROSE").eval_f(DenseVector(100, 1.0)), 1.0, 1e-12);
    EXPECT_NEAR(registry_lookup("WOODS").eval_f(DenseVector(100, 1.0)), 0.0, 1e-12);
    EXPECT_NEAR(registry_lookup("DQDRTIC").eval_f(DenseVector(100, 0.0)), 0.0, 1e-12);
    EXPECT_NEAR(registry_lookup("NONDIA").eval_f(DenseVector(100, 1.0)), 0.0, 1e-12);
    DenseVector tri(100, 1.0);
    for (std::size_t i = 1; i < 100; ++i) tri[i] = tri[i - 1] / 2.0;
    EXPECT_NEAR(registry_lookup("TRIDIA").eval_f(tri), 0.0, 1e-12);
    EXPECT_NEAR(norm2(registry_lookup("WOODS").eval_g(DenseVector(100, 1.0))), 0.0, 1e-12);
    EXPECT_NEAR(norm2(registry_lookup("GENROSE").eval_g(DenseVector(100, 1.0))), 0.0, 1e-12);
}

TEST(Problems, StartValuesAboveReference) {
    for (const auto& name : default_registry().names()) {
        const Problem p = registry_lookup(name);
        EXPECT_GT(p.eval_f(p.x0), p.phi_star) << name;
        for (std::uint64_t s = 1; s <= 5; ++s)
            EXPECT_GE(p.eval_f(validation_point(p, s)), p.phi_star - 1e-9 * std::max(1.0, std::abs(p.phi_star)))
                << name;
    }
}

TEST(Problems, GradientsMatchCentralDifferences) {
    for (const auto& name : default_registry().names()) {
        const Problem p = registry_lookup(name);
        EXPECT_LE(check_gradient(p, p.x0, 1e-5), 1e-6) << name << " at x0";
        for (std::uint64_t s = 1; s <= 5; ++s)
            EXPECT_LE(check_gradient(p, validation_point(p, s), 1e-5), 1e-6) << name << " seed " << s;
    }
}

TEST(CheckGradient, ConstantFunctionAndQuad) {
    Problem c;
    c.dim = 3;
    c.objective = [](const DenseVector&) { return 3.0; };
    c.gradient = [](const DenseVector& x) { return DenseVector(x.size()); };
    EXPECT_EQ(check_gradient(c, {1, 2, 3}, 1e-3), 0.0);
    EXPECT_THROW(check_gradient(c, {1, 2, 3}, 0.0), std::invalid_argument);

    const Problem q = make_quadratic(2, 1.0, 1.0, 0);
    EXPECT_LE(check_gradient(q, {1, 2}, 1e-5), 1e-8);
}

TEST(Quadratic, OneDimensional) {
    const Problem q = make_quadratic(1, 1.0, 1.0, 9);
    EXPECT_DOUBLE_EQ(q.eval_f({3.0}), 4.5);
    EXPECT_DOUBLE_EQ(q.eval_g({3.0})[0], 3.0);
    EXPECT_NEAR(std::abs(q.x0[0]), 10.0, 1e-12);
}

TEST(Quadratic, SpectrumIsRecovered) {
    const Problem q = make_quadratic(50, 1.0, 100.0, 3);
    // Assemble A column by column from the gradient.
    SymmetricMatrix a(50);
    DenseVector e(50);
    for (std::size_t j = 0; j < 50; ++j) {
        e[j] = 1.0;
        const DenseVector col = q.eval_g(e);
        for (std::size_t i = 0; i <= j; ++i) a.ref(i, j) = col[i];
        e[j] = 0.0;
    }
    const auto ex = eigen_extremes(a);
    ASSERT_TRUE(ex);
    EXPECT_NEAR(ex->lambda_min, 1.0, 1e-8);
    EXPECT_NEAR(ex->lambda_max, 100.0, 1e-8 * 100.0);
    EXPECT_NEAR(norm2(q.x0), 10.0, 1e-12);
    EXPECT_LE(check_gradient(q, q.x0, 1e-5), 1e-7);
    EXPECT_EQ(q.phi_star, 0.0);
}

TEST(Quadratic, StrongConvexityOnSampledPairs) {
    const Problem q = make_quadratic(20, 0.5, 40.0, 12);
    rng::SplitMix64 gen(99);
    for (int c = 0; c < 200; ++c) {
        DenseVector x(20), z(20);
        for (auto& v : x) v = gen.normal();
        for (auto& v : z) v = gen.normal();
        const DenseVector dx = x - z;
        const double curv = dot(q.eval_g(x) - q.eval_g(z), dx);
        const double nn = dot(dx, dx);
        EXPECT_GE(curv, 0.5 * nn * (1 - 1e-12));
        EXPECT_LE(curv, 40.0 * nn * (1 + 1e-12));
    }
}

TEST(Quadratic, DeterministicPerSeed) {
    const Problem a = make_quadratic(10, 1.0, 10.0, 5);
    const Problem b = make_quadratic(10, 1.0, 10.0, 5);
    const Problem c = make_quadratic(10, 1.0, 10.0, 6);
    EXPECT_EQ(a.x0, b.x0);
    EXPECT_EQ(a.eval_g(a.x0), b.eval_g(b.x0));
    EXPECT_NE(a.x0, c.x0);
    EXPECT_THROW(make_quadratic(3, 2.0, 1.0, 0), std::invalid_argument);
    EXPECT_THROW(make_quadratic(0, 1.0, 1.0, 0), std::invalid_argument);
}
