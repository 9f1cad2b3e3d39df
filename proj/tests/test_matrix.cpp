#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "bqq/io.hpp"
#include "bqq/matrix.hpp"
#include "bqq/random.hpp"
#include "bqq/svd.hpp"

using namespace bqq;

TEST_CASE("dense matrix construction and finiteness") {
    DenseMatrix a{{1, 2, 3}, {4, 5, 6}};
    CHECK(a.rows() == 2);
    CHECK(a.cols() == 3);
    CHECK(a(1, 2) == 6);
    CHECK(a.min() == 1);
    CHECK(a.max() == 6);
    CHECK(a.mean() == doctest::Approx(3.5));

    CHECK_THROWS_AS(DenseMatrix(2, 2, std::vector<double>{1, 2, 3}), MatrixError);
    CHECK_THROWS_AS(DenseMatrix(1, 2, std::vector<double>{1, std::numeric_limits<double>::quiet_NaN()}), MatrixError);
    CHECK_THROWS_AS(DenseMatrix(1, 1, std::vector<double>{std::numeric_limits<double>::infinity()}), MatrixError);
    CHECK_THROWS_AS((DenseMatrix{{1, 2}, {3}}), MatrixError);
}

TEST_CASE("block extraction and placement") {
    DenseMatrix a{{1, 2, 3}, {4, 5, 6}, {7, 8, 9}};
    const DenseMatrix b = a.block(1, 1, 2, 2);
    CHECK(b == DenseMatrix{{5, 6}, {8, 9}});
    DenseMatrix z(3, 3, 0.0);
    z.set_block(1, 1, b);
    CHECK(z(2, 2) == 9);
    CHECK(z(0, 0) == 0);
    CHECK_THROWS_AS(a.block(2, 2, 2, 2), MatrixError);
}

TEST_CASE("bit matrix round trips") {
    CounterRng rng(5);
    for (std::size_t rows : {1u, 3u, 8u, 13u})
        for (std::size_t cols : {1u, 7u, 64u, 65u}) {
            DenseMatrix d(rows, cols);
            for (auto& v : d.values())
                v = rng.uniform() < 0.5 ? 0.0 : 1.0;
            const BitMatrix b = BitMatrix::from_dense(d);
            CHECK(b.to_dense() == d);
            const auto bytes = b.to_bytes();
            CHECK(bytes.size() == (rows * cols + 7) / 8);
            CHECK(BitMatrix::from_bytes(rows, cols, bytes) == b);
            std::size_t ones = 0;
            for (double v : d.values())
                ones += v == 1.0;
            CHECK(b.popcount() == ones);
        }
    CHECK_THROWS_AS(BitMatrix::from_dense(DenseMatrix{{0, 0.5}}), MatrixError);
}

TEST_CASE("bit packing is LSB first in row-major order") {
    BitMatrix b(2, 5);
    b.set(0, 0, true);
    b.set(1, 2, true);  // element 7
    b.set(1, 3, true);  // element 8
    const auto bytes = b.to_bytes();
    REQUIRE(bytes.size() == 2);
    CHECK(bytes[0] == 0x81);
    CHECK(bytes[1] == 0x01);
}

TEST_CASE("threshold maps one half to one") {
    RowMajorMatrix x(1, 4);
    x << 0.0, 0.4999, 0.5, 0.9;
    const BitMatrix b = BitMatrix::threshold(x);
    CHECK(!b.get(0, 0));
    CHECK(!b.get(0, 1));
    CHECK(b.get(0, 2));
    CHECK(b.get(0, 3));
}

TEST_CASE("standardize small cases") {
    const Standardized s = standardize(DenseMatrix{{1, 3}, {1, 3}});
    CHECK(s.matrix == DenseMatrix{{-1, 1}, {-1, 1}});
    CHECK(s.record.mean == 2.0);
    CHECK(s.record.std == 1.0);
    CHECK(!s.record.constant);

    const Standardized c = standardize(DenseMatrix{{5, 5}, {5, 5}});
    CHECK(c.matrix == DenseMatrix(2, 2, 0.0));
    CHECK(c.record.constant);
    CHECK(c.record.std == 1.0);
    CHECK(destandardize(c.matrix, c.record) == DenseMatrix(2, 2, 5.0));

    CHECK_THROWS_AS(standardize(DenseMatrix()), MatrixError);
}

TEST_CASE("standardize moments and inverse") {
    const DenseMatrix w = io::gen_gaussian(128, 128, 7);
    const Standardized s = standardize(w);
    double mean = 0.0;
    for (double v : s.matrix.values())
        mean += v;
    mean /= static_cast<double>(s.matrix.size());
    double var = 0.0;
    for (double v : s.matrix.values())
        var += (v - mean) * (v - mean);
    var /= static_cast<double>(s.matrix.size());
    CHECK(std::abs(mean) < 1e-12);
    CHECK(std::abs(var - 1.0) < 1e-12);

    const DenseMatrix back = destandardize(s.matrix, s.record);
    for (std::size_t i = 0; i < w.size(); ++i)
        CHECK(back.values()[i] == doctest::Approx(w.values()[i]).epsilon(1e-12));
}

TEST_CASE("mse") {
    const DenseMatrix a{{1, 2}, {3, 4}};
    CHECK(mse(a, a) == 0.0);
    CHECK(mse(DenseMatrix{{0, 0}}, DenseMatrix{{1, 1}}) == 1.0);
    CHECK(mse(a, DenseMatrix(2, 2, 0.0)) == 7.5);
    const DenseMatrix b{{0, 5}, {1, -2}};
    CHECK(mse(a, b) == mse(b, a));
    CHECK_THROWS_AS(mse(a, DenseMatrix(1, 4, 0.0)), MatrixError);
}

TEST_CASE("footprint accounting") {
    const auto f = bqq_footprint(384, 384, 192, 1, 32);
    CHECK(f.binary_bits == 147456);
    CHECK(f.scalar_count == 4);
    CHECK(f.total_bits == 147584);
    CHECK(std::round(f.kilobytes() * 10) / 10 == doctest::Approx(18.4));

    const auto g = bqq_footprint(128, 128, 64, 1, 32);
    CHECK(g.total_bits == 16512);
    CHECK(g.kilobytes() == doctest::Approx(2.064));

    const auto h = bqq_footprint(1, 1, 1, 1, 32);
    CHECK(h.binary_bits == 2);
    CHECK(h.total_bits == 130);

    CHECK(bqq_footprint(128, 128, 64, 2, 16).total_bits == 32768 + 7 * 16);

    // Monotone in every argument.
    for (std::uint64_t k = 1; k < 6; ++k) {
        CHECK(bqq_footprint(k, 4, 3, 2).total_bits <= bqq_footprint(k + 1, 4, 3, 2).total_bits);
        CHECK(bqq_footprint(4, k, 3, 2).total_bits <= bqq_footprint(4, k + 1, 3, 2).total_bits);
        CHECK(bqq_footprint(4, 4, k, 2).total_bits <= bqq_footprint(4, 4, k + 1, 2).total_bits);
        CHECK(bqq_footprint(4, 4, 3, k).total_bits <= bqq_footprint(4, 4, 3, k + 1).total_bits);
    }

    MemoryFootprint a = MemoryFootprint::make(10, 2);
    a += MemoryFootprint::make(5, 1);
    CHECK(a.total_bits == 15 + 3 * 32);
    CHECK_THROWS_AS(a += MemoryFootprint::make(1, 1, 16), MatrixError);
}

TEST_CASE("jacobi svd against gram eigenvalues") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const std::size_t m = 5 + seed * 3;
        const std::size_t n = 12 - seed;
        const RowMajorMatrix w = io::gen_gaussian(m, n, seed).eigen();
        const Svd svd = jacobi_svd(w);
        const std::size_t k = std::min(m, n);
        REQUIRE(static_cast<std::size_t>(svd.sigma.size()) == k);

        // Oracle: eigenvalues of the smaller Gram matrix are sigma^2.
        const Eigen::MatrixXd gram = m >= n ? Eigen::MatrixXd(w.transpose() * w) : Eigen::MatrixXd(w * w.transpose());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
        for (std::size_t j = 0; j < k; ++j) {
            const double expected = std::sqrt(std::max(0.0, eig.eigenvalues()(k - 1 - j)));
            CHECK(svd.sigma(j) == doctest::Approx(expected).epsilon(1e-9));
        }
        for (std::size_t j = 1; j < k; ++j)
            CHECK(svd.sigma(j - 1) >= svd.sigma(j));

        const RowMajorMatrix back = svd.u * svd.sigma.asDiagonal() * svd.v.transpose();
        CHECK((back - w).norm() < 1e-10 * w.norm());
        // Column orthogonality is what the sweep tolerance controls.
        CHECK((svd.u.transpose() * svd.u - Eigen::MatrixXd::Identity(k, k)).norm() < 1e-9);
        CHECK((svd.v.transpose() * svd.v - Eigen::MatrixXd::Identity(k, k)).norm() < 1e-9);
    }
}

TEST_CASE("truncated svd residual equals the tail") {
    const RowMajorMatrix w = io::gen_gaussian(20, 14, 3).eigen();
    const Svd svd = jacobi_svd(w);
    for (std::size_t r = 1; r <= 14; ++r) {
        const double residual = (w - truncated(svd, r)).norm();
        const double tail = tail_norm(svd, r);
        CHECK(std::abs(residual - tail) <= 1e-8 * tail + 1e-12 * w.norm());
    }
    CHECK(tail_norm(svd, 14) == 0.0);
}

TEST_CASE("svd of rank-deficient and tiny matrices") {
    RowMajorMatrix w(3, 3);
    w << 1, 2, 3, 2, 4, 6, 0, 0, 0;
    const Svd svd = jacobi_svd(w);
    CHECK(svd.sigma(0) == doctest::Approx(std::sqrt(70.0)));
    CHECK(svd.sigma(1) < 1e-12);
    const RowMajorMatrix one = RowMajorMatrix::Constant(1, 1, -4.0);
    CHECK(jacobi_svd(one).sigma(0) == doctest::Approx(4.0));
}

TEST_CASE("counter rng is a pure function of its key") {
    CounterRng a(42, 1), b(42, 1), c(42, 2);
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next_u64();
        CHECK(x == b.next_u64());
        CHECK(x != c.next_u64());
    }
    CounterRng u(9);
    double lo = 1, hi = 0;
    for (int i = 0; i < 10000; ++i) {
        const double v = u.uniform();
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        CHECK(u.below(7) < 7);
    }
    CHECK(lo >= 0.0);
    CHECK(hi < 1.0);
}
