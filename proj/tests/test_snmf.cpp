#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "nngcd/nngcd.hpp"
#include "support.hpp"

using namespace nngcd;

namespace {

// n x k one-hot indicator with cluster sizes as equal as possible.
DenseMatrix one_hot(std::size_t n, std::size_t k) {
    DenseMatrix H(n, k);
    for (std::size_t i = 0; i < n; ++i) H(i, i * k / n) = 1.0;
    return H;
}

}  // namespace

TEST(NmfObjective, HandValues) {
    const DenseMatrix W{{1, 2}, {0, 1}}, H{{1, 0}, {2, 1}};
    EXPECT_EQ(nmf_objective(matmul(W, H), W, H), 0.0);
    EXPECT_EQ(nmf_objective(DenseMatrix::identity(2), DenseMatrix(2, 1), DenseMatrix(1, 2)), 2.0);
    EXPECT_EQ(nmf_objective(DenseMatrix{{2}}, DenseMatrix{{1}}, DenseMatrix{{1}}), 1.0);
    EXPECT_THROW(nmf_objective(DenseMatrix{{-1}}, DenseMatrix{{1}}, DenseMatrix{{1}}), ValidationError);
    EXPECT_THROW(nmf_objective(DenseMatrix{{1}}, DenseMatrix(1, 2), DenseMatrix{{1}}), ValidationError);
}

TEST(SnmfObjective, HandValues) {
    EXPECT_EQ(snmf_objective(DenseMatrix::identity(2), DenseMatrix::identity(2)), 0.0);
    EXPECT_EQ(snmf_objective(DenseMatrix(3, 3, 1.0), DenseMatrix(3, 1, 1.0)), 0.0);
    EXPECT_EQ(snmf_objective(DenseMatrix::identity(2), DenseMatrix(2, 2)), 2.0);
    EXPECT_THROW(snmf_objective(DenseMatrix{{0, 1}, {0, 0}}, DenseMatrix(2, 1)), ValidationError);
    EXPECT_THROW(snmf_objective(DenseMatrix{{1, -1}, {-1, 1}}, DenseMatrix(2, 1)), ValidationError);
}

TEST(SnmfUpdate, FixedPointAndZeroRows) {
    std::mt19937_64 rng(5);
    const auto H = oracle::random_matrix(5, 2, rng, 0.1, 1.0);
    const auto V = oracle::gram(H);
    const auto next = snmf_update_step(V, H, 0.5);
    for (std::size_t k = 0; k < H.size(); ++k) EXPECT_NEAR(next.values()[k], H.values()[k], 1e-10);

    DenseMatrix Hz = H;
    Hz(2, 0) = Hz(2, 1) = 0.0;
    const auto stepped = snmf_update_step(oracle::gram(oracle::random_matrix(5, 3, rng, 0, 1)), Hz, 0.7);
    EXPECT_EQ(stepped(2, 0), 0.0);
    EXPECT_EQ(stepped(2, 1), 0.0);
}

TEST(SnmfUpdate, HandEvaluatedStep) {
    // V = ones(2,2), H = [0.5, 0.5]^T: VH = [1, 1], H H^T H = [0.25, 0.25],
    // ratio 4, H' = 0.5 (1 - 0.5 + 0.5 * 4) = 1.25 up to the 1e-12 guard.
    const DenseMatrix V(2, 2, 1.0), H{{0.5}, {0.5}};
    const auto next = snmf_update_step(V, H, 0.5);
    const double expected = 0.5 * (0.5 + 0.5 * 1.0 / (0.25 + 1e-12));
    EXPECT_DOUBLE_EQ(next(0, 0), expected);
    EXPECT_DOUBLE_EQ(next(1, 0), expected);
    EXPECT_NEAR(expected, 1.25, 1e-10);
    EXPECT_LE(snmf_objective(V, next), snmf_objective(V, H));
}

TEST(SnmfSolve, ZeroIterationsReturnsInitialization) {
    std::mt19937_64 rng(1);
    const auto V = oracle::gram(oracle::random_matrix(4, 2, rng, 0, 1));
    SnmfOptions o;
    o.max_iters = 0;
    o.seed = 9;
    const auto r = snmf_solve(V, 2, o);
    EXPECT_EQ(r.objective_history.size(), 1u);
    EXPECT_EQ(r.factor.H, snmf_initial_factor(4, 2, 9));
    EXPECT_EQ(r.objective_history[0], snmf_objective(V, r.factor.H));
}

TEST(SnmfSolve, IdentityFactorizes) {
    const auto r = snmf_solve(DenseMatrix::identity(2), 2);
    EXPECT_LT(r.objective_history.back(), 1e-8);
    const auto& H = r.factor.H;
    // one dominant entry per row, in different columns
    EXPECT_NE(row_argmax(H)[0], row_argmax(H)[1]);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_NEAR(std::max(H(i, 0), H(i, 1)), 1.0, 1e-4);
        EXPECT_NEAR(std::min(H(i, 0), H(i, 1)), 0.0, 1e-4);
    }
}

TEST(SnmfSolve, PlantedIndicatorRecovered) {
    for (std::size_t n = 6; n <= 30; n += 4) {
        const auto H0 = one_hot(n, 2);
        const auto V = oracle::gram(H0);
        SnmfOptions o;
        o.seed = n;
        const auto r = snmf_solve(V, 2, o);
        EXPECT_LT(r.objective_history.back(), 1e-6) << "n=" << n;
        EXPECT_EQ(hungarian_match(row_argmax(H0), row_argmax(r.factor.H)).matches, n);
    }
}

TEST(SnmfSolve, MonotoneOnRandomInputs) {
    std::mt19937_64 rng(2024);
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 3 + static_cast<std::size_t>(t % 8);
        auto V = oracle::random_matrix(n, n, rng, 0.0, 1.0);
        V = V + transpose(V);
        SnmfOptions o;
        o.seed = static_cast<std::uint64_t>(t);
        o.max_iters = 300;
        const auto r = snmf_solve(V, 1 + static_cast<std::size_t>(t % 3), o);
        for (std::size_t i = 1; i < r.objective_history.size(); ++i)
            ASSERT_LE(r.objective_history[i], r.objective_history[i - 1] + 1e-10) << "trial " << t << " step " << i;
        for (double v : r.factor.H.values()) ASSERT_GE(v, 0.0);
    }
}

TEST(SnmfSolve, Errors) {
    EXPECT_THROW(snmf_solve(DenseMatrix::identity(2), 3), ValidationError);
    EXPECT_THROW(snmf_solve(DenseMatrix::identity(2), 0), ValidationError);
    EXPECT_THROW(snmf_solve(DenseMatrix{{1, 2}, {0, 1}}, 1), ValidationError);
    EXPECT_THROW(snmf_update_step(DenseMatrix::identity(2), DenseMatrix(2, 1), 0.0), ValidationError);
}

TEST(SnmfSolve, Deterministic) {
    std::mt19937_64 rng(4);
    const auto V = oracle::gram(oracle::random_matrix(8, 3, rng, 0, 1));
    SnmfOptions o;
    o.seed = 17;
    const auto a = snmf_solve(V, 3, o), b = snmf_solve(V, 3, o);
    EXPECT_EQ(a.factor.H, b.factor.H);
    EXPECT_EQ(a.objective_history, b.objective_history);
}

TEST(Orthogonality, IndicatorHasZeroResidual) {
    ClusterAssignment a{{0, 0, 1, 2, 1}, 3};
    EXPECT_NEAR(orthogonality_residual(indicator_matrix(a)), 0.0, 1e-15);
    EXPECT_NEAR(orthogonality_residual(DenseMatrix(3, 1, 1.0)), 2.0, 1e-15);
}
