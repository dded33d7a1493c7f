#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "qnoise/linalg.hpp"
#include "qnoise/random.hpp"
#include "support/oracles.hpp"

using namespace qnoise;

TEST(DenseVector, Arithmetic) {
    DenseVector a{1, 2, 3}, b{4, 5, 6};
    EXPECT_DOUBLE_EQ(dot(a, b), 32.0);
    EXPECT_DOUBLE_EQ(norm2(DenseVector{3, 4}), 5.0);
    EXPECT_EQ(a + b, (DenseVector{5, 7, 9}));
    EXPECT_EQ(b - a, (DenseVector{3, 3, 3}));
    EXPECT_EQ(along(a, 2.0, b), (DenseVector{9, 12, 15}));
    EXPECT_THROW(dot(a, DenseVector{1, 2}), std::invalid_argument);
}

TEST(SymmetricMatrix, PackedStorageIsSymmetric) {
    SymmetricMatrix m(3);
    m.ref(0, 2) = 7.0;
    EXPECT_EQ(m(2, 0), 7.0);
    EXPECT_EQ(m.packed().size(), 6u);
    const auto dense = SymmetricMatrix::from_dense(2, std::vector<double>{1, 2, 4, 3});
    EXPECT_DOUBLE_EQ(dense(0, 1), 3.0);
    EXPECT_EQ(dense.multiply(DenseVector{1, 1}), (DenseVector{4, 6}));
}

TEST(BfgsUpdate, IdentityCollapses) {
    const auto h = bfgs_inverse_update(SymmetricMatrix::identity(2), CurvaturePair::make({1, 0}, {1, 0}));
    EXPECT_DOUBLE_EQ(h(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(h(0, 1), 0.0);
    EXPECT_DOUBLE_EQ(h(1, 1), 1.0);
}

TEST(BfgsUpdate, HandEvaluatedDiagonal) {
    const auto pair = CurvaturePair::make({1, 0}, {2, 0});
    const auto h = bfgs_inverse_update(SymmetricMatrix::identity(2), pair);
    EXPECT_DOUBLE_EQ(h(0, 0), 0.5);
    EXPECT_DOUBLE_EQ(h(0, 1), 0.0);
    EXPECT_DOUBLE_EQ(h(1, 1), 1.0);
    EXPECT_EQ(h.multiply(pair.y), pair.s);
}

TEST(BfgsUpdate, RejectsNonPositiveCurvature) {
    EXPECT_THROW(bfgs_inverse_update(SymmetricMatrix::identity(2), CurvaturePair::make({1, 0}, {-1, 0})),
                 CurvatureContractError);
    EXPECT_THROW(bfgs_inverse_update(SymmetricMatrix::identity(2), CurvaturePair::make({1, 0}, {0, 1})),
                 CurvatureContractError);
}

TEST(BfgsUpdate, MatchesProductFormAndSecant) {
    rng::SplitMix64 gen(11);
    for (std::size_t n = 1; n <= 8; ++n) {
        const auto h_rows = oracle::random_spd(gen, n);
        const auto a = oracle::random_spd(gen, n);
        auto h = SymmetricMatrix::from_dense(n, h_rows);
        const auto pair = oracle::random_pair(gen, a, n);

        const auto updated = bfgs_inverse_update(h, pair);
        const auto expect = oracle::dense_bfgs(h.to_dense(), pair, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                EXPECT_NEAR(updated(i, j), expect[i * n + j], 1e-10 * (1.0 + std::abs(expect[i * n + j])));

        // Secant condition and positive definiteness.
        EXPECT_LE(norm2(updated.multiply(pair.y) - pair.s) / norm2(pair.s), 1e-10);
        const auto ex = eigen_extremes(updated);
        ASSERT_TRUE(ex);
        EXPECT_GT(ex->lambda_min, 0.0);
    }
}

TEST(BfgsUpdate, SecantOnRandomSpdD5) {
    rng::SplitMix64 gen(5);
    const std::size_t n = 5;
    const auto a = oracle::random_spd(gen, n);
    for (int trial = 0; trial < 50; ++trial) {
        const auto h = SymmetricMatrix::from_dense(n, oracle::random_spd(gen, n));
        const auto pair = oracle::random_pair(gen, a, n);
        const auto updated = bfgs_inverse_update(h, pair);
        EXPECT_LE(norm2(updated.multiply(pair.y) - pair.s) / norm2(pair.s), 1e-10);
    }
}

TEST(LimitedMemory, EmptyIsGammaTimesG) {
    LimitedMemory mem(5);
    const DenseVector g{1, -2, 3};
    EXPECT_EQ(mem.gamma(), 1.0);
    EXPECT_EQ(two_loop_direction(mem, g), g);
    mem.set_gamma(0.5);
    EXPECT_EQ(two_loop_direction(mem, g), 0.5 * g);
}

TEST(LimitedMemory, GammaEvictionAndContract) {
    LimitedMemory mem(2);
    mem.push(CurvaturePair::make({1, 0}, {2, 0}));
    EXPECT_DOUBLE_EQ(mem.gamma(), 0.5);
    mem.push(CurvaturePair::make({0, 1}, {0, 4}));
    mem.push(CurvaturePair::make({1, 1}, {1, 1}));
    EXPECT_EQ(mem.size(), 2u);
    EXPECT_DOUBLE_EQ(mem.gamma(), 1.0);
    EXPECT_EQ(mem.pairs().front().s, (DenseVector{0, 1}));
    EXPECT_THROW(mem.push(CurvaturePair::make({1, 0}, {-1, 0})), CurvatureContractError);
    EXPECT_EQ(mem.size(), 2u);
}

TEST(LimitedMemory, OnePairMatchesDenseUpdate) {
    rng::SplitMix64 gen(3);
    const std::size_t n = 3;
    const auto a = oracle::random_spd(gen, n);
    const auto pair = oracle::random_pair(gen, a, n);
    LimitedMemory mem(4);
    mem.push(pair);
    mem.set_gamma(1.0);
    const DenseVector g = oracle::random_vector(gen, n);
    const auto dense = bfgs_inverse_update(SymmetricMatrix::identity(n), pair).multiply(g);
    EXPECT_LE(oracle::rel_diff(two_loop_direction(mem, g), dense), 1e-12);
}

TEST(LimitedMemory, EightPairsMatchDenseRecursion) {
    rng::SplitMix64 gen(8);
    const std::size_t n = 6;
    const auto a = oracle::random_spd(gen, n);
    LimitedMemory mem(10);
    std::vector<CurvaturePair> pairs;
    for (int j = 0; j < 8; ++j) {
        pairs.push_back(oracle::random_pair(gen, a, n));
        mem.push(pairs.back());
    }
    const double gamma = mem.gamma();
    auto h = SymmetricMatrix::identity(n, gamma);
    for (const auto& p : pairs) apply_bfgs_inverse_update(h, p);
    const DenseVector g = oracle::random_vector(gen, n);
    EXPECT_LE(oracle::rel_diff(two_loop_direction(mem, g), h.multiply(g)), 1e-10);
}

TEST(LimitedMemory, RandomizedTwoLoopEquivalence) {
    rng::SplitMix64 gen(2024);
    for (int c = 0; c < 100; ++c) {
        const std::size_t n = 1 + gen() % 20;
        const std::size_t t = 1 + gen() % 12;
        const std::size_t k = gen() % (t + 1);
        const auto a = oracle::random_spd(gen, n);
        LimitedMemory mem(t);
        for (std::size_t j = 0; j < k; ++j) mem.push(oracle::random_pair(gen, a, n));
        auto dense = SymmetricMatrix::identity(n, mem.gamma());
        for (const auto& p : mem.pairs()) apply_bfgs_inverse_update(dense, p);
        const DenseVector g = oracle::random_vector(gen, n);
        EXPECT_LE(oracle::rel_diff(two_loop_direction(mem, g), dense.multiply(g)), 1e-10) << "case " << c;
    }
}

TEST(LimitedMemory, ToDenseIsSymmetricAndMatches) {
    rng::SplitMix64 gen(4);
    const std::size_t n = 5;
    const auto a = oracle::random_spd(gen, n);
    LimitedMemory mem(3);
    for (int j = 0; j < 3; ++j) mem.push(oracle::random_pair(gen, a, n));
    const auto h = to_dense(mem, n);
    const DenseVector g = oracle::random_vector(gen, n);
    EXPECT_LE(oracle::rel_diff(h.multiply(g), two_loop_direction(mem, g)), 1e-12);
}

TEST(EigenExtremes, Examples) {
    auto e = eigen_extremes(SymmetricMatrix::identity(4));
    ASSERT_TRUE(e);
    EXPECT_NEAR(e->lambda_min, 1.0, 1e-12);
    EXPECT_NEAR(e->lambda_max, 1.0, 1e-12);

    e = eigen_extremes(SymmetricMatrix::diagonal({2, 5}));
    ASSERT_TRUE(e);
    EXPECT_NEAR(e->lambda_min, 2.0, 1e-12);
    EXPECT_NEAR(e->lambda_max, 5.0, 1e-12);
    EXPECT_NEAR(*e->condition_number(), 2.5, 1e-12);

    e = eigen_extremes(SymmetricMatrix::from_dense(2, std::vector<double>{2, 1, 1, 2}));
    ASSERT_TRUE(e);
    EXPECT_NEAR(e->lambda_min, 1.0, 1e-12);
    EXPECT_NEAR(e->lambda_max, 3.0, 1e-12);
}

TEST(EigenExtremes, DiagonalExact) {
    rng::SplitMix64 gen(6);
    for (int c = 0; c < 20; ++c) {
        DenseVector d(1 + gen() % 12);
        for (auto& v : d) v = 10.0 * gen.normal();
        const auto e = eigen_extremes(SymmetricMatrix::diagonal(d));
        ASSERT_TRUE(e);
        EXPECT_NEAR(e->lambda_min, *std::min_element(d.begin(), d.end()), 1e-12 * 10);
        EXPECT_NEAR(e->lambda_max, *std::max_element(d.begin(), d.end()), 1e-12 * 10);
    }
}

TEST(EigenExtremes, AgreesWithJacobiOracle) {
    rng::SplitMix64 gen(77);
    for (int c = 0; c < 30; ++c) {
        const std::size_t n = 2 + gen() % 30;
        std::vector<double> rows(n * n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j <= i; ++j) rows[i * n + j] = rows[j * n + i] = gen.normal();
        const auto ref = oracle::jacobi_eigenvalues(rows, n);
        const auto e = eigen_extremes(SymmetricMatrix::from_dense(n, rows));
        ASSERT_TRUE(e);
        const double scale = std::max(std::abs(ref.front()), std::abs(ref.back()));
        EXPECT_NEAR(e->lambda_min, ref.front(), 1e-8 * scale);
        EXPECT_NEAR(e->lambda_max, ref.back(), 1e-8 * scale);
    }
}

TEST(EigenExtremes, NonFiniteGivesNothing) {
    auto m = SymmetricMatrix::identity(2);
    m.ref(0, 1) = std::nan("");
    EXPECT_FALSE(eigen_extremes(m));
    EXPECT_FALSE((EigenExtremes{-1.0, 1.0}.condition_number()));
}
