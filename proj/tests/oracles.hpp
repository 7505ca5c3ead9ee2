#pragma once

#include "cwss/types.hpp"

#include <complex>

namespace test_oracles {

// Independent construction with the 1-based index rules written out per entry:
//   bar(i, :) = 0 for i = 1, phi(M + 2 - i, :) otherwise
//   phi1(i, j) = conj(f(i + j - N - 1)) when i + j - N >= 2
//   phi2(i, j) = conj(f(i + j - 1))     when i + j - 1 <= N
//   phi3(i, j) = f(N + 1 - (j - i))     when j > i
//   phi4(i, j) = f(i - j + 1)           when i >= j
// where f(c) is phi(1, c). Nothing is assembled as a matrix.
inline cwss::CMatrix link_oracle(const cwss::CMatrix& phi) {
  const int M = static_cast<int>(phi.rows()), N = static_cast<int>(phi.cols());
  auto P = [&](int r, int c) { return phi(r - 1, c - 1); };
  auto f = [&](int c) { return phi(0, c - 1); };
  auto bar = [&](int i, int k) { return i == 1 ? cwss::cplx(0) : P(M + 2 - i, k); };
  cwss::CMatrix a(2 * M, 2 * N);
  for (int i = 1; i <= M; ++i)
    for (int j = 1; j <= N; ++j) {
      cwss::cplx s1 = 0, s2 = 0, s3 = 0, s4 = 0;
      for (int k = 1; k <= N; ++k) {
        if (k + j - N >= 2) s1 += bar(i, k) * std::conj(f(k + j - N - 1));
        if (k + j - 1 <= N) s2 += bar(i, k) * std::conj(f(k + j - 1));
        if (j > k) s3 += P(i, k) * f(N + 1 - (j - k));
        if (k >= j) s4 += P(i, k) * f(k - j + 1);
      }
      a(i - 1, j - 1) = s1;
      a(i - 1, N + j - 1) = s2;
      a(M + i - 1, j - 1) = s3;
      a(M + i - 1, N + j - 1) = s4;
    }
  return a;
}

}  // namespace test_oracles
