#pragma once
// Pairwise cosine-score kernels.
//
// Every score is a 64-bit accumulation of float*float products taken in
// index order k = 0..dim-1, clamped to [-1, 1] and rounded to float. Both
// the serial reference and the blocked OpenMP kernel follow that order
// exactly (float products are exact in double, so FMA contraction does not
// change the result), which makes them bit-identical for any block size or
// thread count.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace idcurate::kernels {

struct MatrixView {
  std::span<const float> data;  // row-major rows x dim
  std::size_t rows = 0;
  std::size_t dim = 0;

  std::span<const float> row(std::size_t i) const { return data.subspan(i * dim, dim); }
};

struct PairScore {
  std::uint32_t i = 0;
  std::uint32_t j = 0;
  float score = 0.0f;

  bool operator==(const PairScore&) const = default;
};

inline bool pair_order(const PairScore& a, const PairScore& b) {
  return a.i != b.i ? a.i < b.i : a.j < b.j;
}

/// Reference dot product with the canonical accumulation order.
float dot_score(std::span<const float> a, std::span<const float> b);

struct BlockOptions {
  std::size_t block = 128;  // rows/cols per tile
  int threads = 0;          // 0: OpenMP default
};

namespace serial {

/// Double loop over i < j, in row-major order.
void upper_triangle(const MatrixView& m, const std::function<void(const PairScore&)>& visit);

/// Pairs i < j with score > threshold, sorted by (i, j).
std::vector<PairScore> pairs_above(const MatrixView& m, double threshold);

/// Pairs (row of a, row of b) with score > threshold, sorted by (i, j).
std::vector<PairScore> cross_above(const MatrixView& a, const MatrixView& b, double threshold);

}  // namespace serial

namespace omp {

/// Blocked upper triangle, parallel over tiles. Sorted by (i, j).
std::vector<PairScore> pairs_above(const MatrixView& m, double threshold, const BlockOptions& opts = {});

std::vector<PairScore> cross_above(const MatrixView& a, const MatrixView& b, double threshold,
                                   const BlockOptions& opts = {});

/// Streams every pair i < j exactly once without materializing all scores.
/// Tiles are visited in row-block-major order (row block bi, then column
/// blocks bj >= bi); within a tile, scores come row-major. The sink runs on
/// the calling thread and receives one tile's scores per call. The multiset
/// of scores does not depend on opts.block; the order does.
void stream_upper_triangle(const MatrixView& m, const BlockOptions& opts,
                           const std::function<void(std::span<const PairScore>)>& sink);

}  // namespace omp

}  // namespace idcurate::kernels
