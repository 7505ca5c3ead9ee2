#include "cwss/model.hpp"
#include "cwss/sampling.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

using namespace cwss;

TEST(Subsampling, FullRateIsIdentity) {
  const MeasurementMatrix phi = make_subsampling_matrix(16, 16, 3);
  for (int i = 0; i < 16; ++i) EXPECT_EQ(phi.selected_rows()[i], i);
  EXPECT_EQ(phi.dense(), RMatrix::Identity(16, 16));
}

TEST(Subsampling, SingleRowOutOfTwoCoversBothCases) {
  std::set<std::vector<int>> seen;
  for (std::uint64_t seed = 0; seed < 64; ++seed) {
    const auto rows = make_subsampling_matrix(1, 2, seed).selected_rows();
    ASSERT_EQ(rows.size(), 1u);
    seen.insert(rows);
  }
  EXPECT_EQ(seen, (std::set<std::vector<int>>{{0}, {1}}));
}

TEST(Subsampling, RowInclusionIsUniform) {
  std::vector<int> hits(16, 0);
  const int draws = 10000;
  for (int s = 0; s < draws; ++s) {
    const MeasurementMatrix phi = make_subsampling_matrix(4, 16, s);
    for (int r : phi.selected_rows()) ++hits[r];
  }
  for (int r = 0; r < 16; ++r) EXPECT_NEAR(hits[r] / double(draws), 0.25, 0.02) << "row " << r;
}

TEST(Subsampling, RowsAscendingDistinctAndNestedAcrossM) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::vector<int> prev;
    for (int m = 1; m <= 32; ++m) {
      const auto rows = make_subsampling_matrix(m, 32, seed).selected_rows();
      ASSERT_EQ(static_cast<int>(rows.size()), m);
      for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LT(rows[i - 1], rows[i]);
      for (int r : prev) EXPECT_TRUE(std::binary_search(rows.begin(), rows.end(), r));
      prev = rows;
    }
  }
}

TEST(Subsampling, RowCountFollowsRate) {
  for (int n : {7, 64, 128}) {
    for (double rate : {0.01, 0.2, 0.25, 0.33, 0.5, 0.8, 1.0}) {
      const long expect = std::max(1L, std::min<long>(n, static_cast<long>(std::floor(rate * n + 0.5))));
      EXPECT_EQ(rows_for_rate(rate, n), expect) << rate << " " << n;
    }
  }
  EXPECT_THROW(rows_for_rate(0.0, 8), std::invalid_argument);
  EXPECT_THROW(rows_for_rate(1.5, 8), std::invalid_argument);
}

TEST(Subsampling, RejectsBadShapes) {
  EXPECT_THROW(make_subsampling_matrix(0, 4, 1), std::invalid_argument);
  EXPECT_THROW(make_subsampling_matrix(5, 4, 1), std::invalid_argument);
  EXPECT_THROW(MeasurementMatrix(4, {2, 1}), std::invalid_argument);
  EXPECT_THROW(MeasurementMatrix(4, {1, 1}), std::invalid_argument);
  EXPECT_THROW(MeasurementMatrix(4, {4}), std::invalid_argument);
}

TEST(Compress, CoordinateSelection) {
  const MeasurementMatrix phi(2, {1});
  NyquistFrame x{0, CVector(2)};
  x.samples << 3.0, 7.0;
  const CompressiveFrame y = compress_frame(phi, x);
  ASSERT_EQ(y.samples.size(), 1);
  EXPECT_EQ(y.samples[0], cplx(7.0));
}

TEST(Compress, IdentityKeepsFrame) {
  const MeasurementMatrix phi = make_subsampling_matrix(8, 8, 1);
  NyquistFrame x{3, CVector::Random(8)};
  const CompressiveFrame y = compress_frame(phi, x);
  EXPECT_EQ(y.samples, x.samples);
  EXPECT_EQ(y.index, 3);
}

TEST(Compress, MatchesDenseProductAndContracts) {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 50; ++k) {
    const int n = 4 + static_cast<int>(rng() % 60);
    const int m = 1 + static_cast<int>(rng() % n);
    const MeasurementMatrix phi = make_subsampling_matrix(m, n, rng());
    NyquistFrame x{0, CVector::Random(n)};
    const CompressiveFrame y = compress_frame(phi, x);
    const CVector dense = phi.dense().cast<cplx>() * x.samples;
    EXPECT_EQ(y.samples, dense);
    EXPECT_LE(y.samples.norm(), x.samples.norm());
  }
}

TEST(Compress, LengthMismatchThrows) {
  const MeasurementMatrix phi(4, {0, 2});
  EXPECT_THROW(compress_frame(phi, NyquistFrame{0, CVector::Zero(5)}), std::invalid_argument);
}

TEST(Subsampling, JsonRoundTrip) {
  const MeasurementMatrix phi = make_subsampling_matrix(5, 20, 9);
  const MeasurementMatrix back = measurement_from_json(nlohmann::json::parse(to_json(phi).dump()));
  EXPECT_EQ(back.selected_rows(), phi.selected_rows());
  EXPECT_EQ(back.n(), 20);
}
