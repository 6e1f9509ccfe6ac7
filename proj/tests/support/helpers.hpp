#pragma once

#include <vector>

#include "fdrelay/mimo_channel.hpp"
#include "fdrelay/rng.hpp"
#include "oracles.hpp"

namespace testing_util {

inline fdrelay::CVector random_vector(std::size_t n, fdrelay::RngStream& rng, double variance = 1.0) {
  fdrelay::CVector v(n);
  for (auto& x : v) x = rng.complex_gaussian(variance);
  return v;
}

inline fdrelay::CMatrix random_matrix(std::size_t rows, std::size_t cols, fdrelay::RngStream& rng) {
  fdrelay::CMatrix m(rows, cols);
  for (auto& x : m.data()) x = rng.complex_gaussian(1.0);
  return m;
}

inline std::vector<oracle::Mat> taps_of(const fdrelay::FirMimoChannel& h) {
  std::vector<oracle::Mat> taps;
  for (const auto& t : h.taps()) taps.push_back(oracle::to_eigen(t));
  return taps;
}

/// Concatenates a sequence of vectors into one column (sample-major).
inline oracle::Vec stack_sequence(const std::vector<fdrelay::CVector>& seq) {
  const auto dim = static_cast<Eigen::Index>(seq.front().size());
  oracle::Vec out(dim * static_cast<Eigen::Index>(seq.size()));
  for (std::size_t n = 0; n < seq.size(); ++n) out.segment(static_cast<Eigen::Index>(n) * dim, dim) = oracle::to_eigen(seq[n]);
  return out;
}

inline double vector_relative_error(std::span<const fdrelay::cplx> got, std::span<const fdrelay::cplx> want) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < want.size(); ++i) {
    num += std::norm(got[i] - want[i]);
    den += std::norm(want[i]);
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

}  // namespace testing_util
