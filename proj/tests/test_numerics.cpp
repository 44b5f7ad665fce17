#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "nngcd/nngcd.hpp"
#include "support.hpp"

using namespace nngcd;

TEST(Norms, FrobeniusSquared) {
    EXPECT_EQ(frobenius_norm_sq(DenseMatrix(2, 2)), 0.0);
    EXPECT_EQ(frobenius_norm_sq(DenseMatrix::identity(2)), 2.0);
    EXPECT_EQ(frobenius_norm_sq(DenseMatrix{{3, 4}}), 25.0);
}

TEST(Norms, L1) {
    EXPECT_EQ(l1_norm(DenseMatrix(3, 2)), 0.0);
    EXPECT_EQ(l1_norm(DenseMatrix{{3, -4}}), 7.0);
    EXPECT_EQ(l1_norm(DenseMatrix::identity(3)), 3.0);
}

TEST(Norms, L21) {
    EXPECT_EQ(l21_norm(DenseMatrix(2, 2)), 0.0);
    EXPECT_EQ(l21_norm(DenseMatrix{{3, 4}}), 5.0);
    EXPECT_EQ(l21_norm(DenseMatrix{{1, 0}, {0, 1}}), 2.0);
}

TEST(Norms, OrderingProperty) {
    // ||W||_F <= ||W||_{2,1} <= ||W||_1 for every W
    std::mt19937_64 rng(7);
    for (int t = 0; t < 200; ++t) {
        const auto W = oracle::random_matrix(1 + t % 5, 1 + t % 7, rng);
        const double f = std::sqrt(frobenius_norm_sq(W));
        EXPECT_LE(f, l21_norm(W) + 1e-12);
        EXPECT_LE(l21_norm(W), l1_norm(W) + 1e-12);
    }
}

TEST(Products, IdentityAndTransposeForms) {
    const DenseMatrix M{{1, 2, 3}, {4, 5, 6}};
    EXPECT_EQ(matmul(DenseMatrix::identity(2), M), M);
    EXPECT_EQ(transpose(transpose(M)), M);
    const DenseMatrix expected{{14, 32}, {32, 77}};
    EXPECT_EQ(matmul(M, transpose(M)), expected);
    EXPECT_EQ(matmul_nt(M, M), expected);
    EXPECT_EQ(matmul_tn(M, M), matmul(transpose(M), M));
    EXPECT_THROW(matmul(M, M), ValidationError);
}

TEST(Products, RandomAgreementWithTripleLoop) {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 50; ++t) {
        const auto A = oracle::random_matrix(3, 4, rng), B = oracle::random_matrix(4, 2, rng);
        const auto C = matmul(A, B);
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 2; ++j) {
                double s = 0;
                for (std::size_t k = 0; k < 4; ++k) s += A(i, k) * B(k, j);
                EXPECT_NEAR(C(i, j), s, 1e-14);
            }
    }
}

TEST(Softmax, HandValues) {
    const auto u = softmax(std::vector<double>{0, 0}, 1.0);
    EXPECT_DOUBLE_EQ(u[0], 0.5);
    EXPECT_DOUBLE_EQ(u[1], 0.5);
    const auto p = softmax(std::vector<double>{1, 0}, 1.0);
    // e / (e + 1) to 16 digits
    EXPECT_NEAR(p[0], 0.7310585786300049, 1e-15);
    EXPECT_NEAR(p[1], 0.2689414213699951, 1e-15);
}

TEST(Softmax, StableForLargeLogitsAndRejectsBadInput) {
    const auto p = softmax(std::vector<double>{1000, 999}, 1.0);
    EXPECT_NEAR(p[0], 0.7310585786300049, 1e-15);
    EXPECT_THROW(softmax(std::vector<double>{1, 2}, 0.0), ValidationError);
    EXPECT_THROW(softmax(std::vector<double>{}, 1.0), ValidationError);
}

TEST(Softmax, SumsToOneAndTemperatureScaling) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n(0, 3);
    for (int t = 0; t < 100; ++t) {
        std::vector<double> v(5), v2(5);
        for (std::size_t k = 0; k < 5; ++k) v2[k] = 2 * (v[k] = n(rng));
        const auto p = softmax(v, 1.0), q = softmax(v2, 2.0);
        double s = 0;
        for (std::size_t k = 0; k < 5; ++k) {
            s += p[k];
            EXPECT_NEAR(p[k], q[k], 1e-14);
        }
        EXPECT_NEAR(s, 1.0, 1e-14);
    }
}

TEST(Matrix, ShapeErrors) {
    EXPECT_THROW(DenseMatrix(2, 2, std::vector<double>{1, 2, 3}), ValidationError);
    EXPECT_THROW((DenseMatrix{{1, 2}, {3}}), ValidationError);
    DenseMatrix a(2, 2);
    EXPECT_THROW(a += DenseMatrix(3, 2), ValidationError);
}

TEST(Matrix, FiniteCheck) {
    DenseMatrix m{{1, 2}};
    EXPECT_NO_THROW(check_finite(m, "m"));
    m(0, 1) = std::nan("");
    EXPECT_THROW(check_finite(m, "m"), NumericError);
}

class CsvTest : public ::testing::Test {
  protected:
    std::filesystem::path dir;
    void SetUp() override {
        dir = std::filesystem::temp_directory_path() /
              ("nngcd_csv_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
               ::testing::UnitTest::GetInstance()->current_test_info()->name());
        std::filesystem::create_directories(dir);
    }
    void TearDown() override { std::filesystem::remove_all(dir); }
    std::string path(const std::string& name) const { return (dir / name).string(); }
    void write(const std::string& name, const std::string& text) const { std::ofstream(path(name)) << text; }
};

TEST_F(CsvTest, RoundTripIsExact) {
    const DenseMatrix m{{0.1, -2.5e-300}, {1.0 / 3.0, 12345.678}};
    io::save_matrix(path("m.csv"), m);
    EXPECT_EQ(io::load_matrix(path("m.csv")), m);
}

TEST_F(CsvTest, HeaderSkipped) {
    write("h.csv", "#a,b\n1,2\n3,4\n");
    EXPECT_EQ(io::load_matrix(path("h.csv")), (DenseMatrix{{1, 2}, {3, 4}}));
}

TEST_F(CsvTest, RaggedRowNamesLine) {
    write("bad.csv", "1,2\n3,4,5\n");
    try {
        io::load_matrix(path("bad.csv"));
        FAIL() << "expected a validation error";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
    }
}

TEST_F(CsvTest, MalformedNumberAndMissingFile) {
    write("bad.csv", "1,abc\n");
    EXPECT_THROW(io::load_matrix(path("bad.csv")), ValidationError);
    EXPECT_THROW(io::load_matrix(path("missing.csv")), ValidationError);
}

TEST_F(CsvTest, LabelsAndMasks) {
    write("y.csv", "#class\n0\n2\n1\n");
    EXPECT_EQ(io::load_labels(path("y.csv")), (std::vector<int>{0, 2, 1}));
    write("bad_y.csv", "0\n1.5\n");
    EXPECT_THROW(io::load_labels(path("bad_y.csv")), ValidationError);
    write("m.csv", "#old,labeled\n1,0\n0,0\n1,1\n");
    EXPECT_EQ(io::load_mask(path("m.csv"), 0), (std::vector<bool>{true, false, true}));
    EXPECT_EQ(io::load_mask(path("m.csv"), 1), (std::vector<bool>{false, false, true}));
    write("bad_m.csv", "2\n");
    EXPECT_THROW(io::load_mask(path("bad_m.csv")), ValidationError);
}

TEST_F(CsvTest, JsonMatrixRoundTrip) {
    const DenseMatrix m{{1.5, 2}, {3, 4}};
    io::save_report(path("r.json"), io::matrix_to_json(m));
    EXPECT_EQ(io::matrix_from_json(io::load_json(path("r.json"))), m);
    write("bad.json", "{");
    EXPECT_THROW(io::load_json(path("bad.json")), ValidationError);
}
