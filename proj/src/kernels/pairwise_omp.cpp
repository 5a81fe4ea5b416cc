#include <omp.h>

#include <algorithm>
#include <utility>

#include "idcurate/kernels.hpp"

namespace idcurate::kernels::omp {

namespace {

constexpr std::size_t kRows = 4;  // register tile height
constexpr std::size_t kCols = 8;  // register tile width (panel width)

struct Workspace {
  std::vector<double> panels;  // [panel][k][c], widened column block
  std::vector<double> group;   // [k][r], widened row group
  std::vector<float> tile;     // dense tile scores, row-major
};

// 4x8 register tile. Each accumulator sums its products in k order, so the
// result equals the sequential reference bit for bit.
inline void micro_kernel(const double* __restrict a, const double* __restrict b, std::size_t dim,
                         double (&acc)[kRows][kCols]) {
  double t[kRows][kCols] = {};
  for (std::size_t k = 0; k < dim; ++k) {
    const double* ak = a + k * kRows;
    const double* bk = b + k * kCols;
    for (std::size_t r = 0; r < kRows; ++r)
      for (std::size_t c = 0; c < kCols; ++c) t[r][c] += ak[r] * bk[c];
  }
  for (std::size_t r = 0; r < kRows; ++r)
    for (std::size_t c = 0; c < kCols; ++c) acc[r][c] = t[r][c];
}

void pack_columns(const MatrixView& b, std::size_t j0, std::size_t j1, std::vector<double>& panels) {
  const std::size_t dim = b.dim;
  const std::size_t npanels = (j1 - j0 + kCols - 1) / kCols;
  panels.assign(npanels * dim * kCols, 0.0);
  for (std::size_t p = 0; p < npanels; ++p)
    for (std::size_t c = 0; c < kCols; ++c) {
      const std::size_t j = j0 + p * kCols + c;
      if (j >= j1) break;
      const float* src = b.data.data() + j * dim;
      double* dst = panels.data() + p * dim * kCols + c;
      for (std::size_t k = 0; k < dim; ++k) dst[k * kCols] = src[k];
    }
}

/// Fills ws.tile with scores for rows [i0, i1) of a against rows [j0, j1)
/// of b. With `upper`, entries with j <= i are left unspecified.
void compute_tile(const MatrixView& a, const MatrixView& b, std::size_t i0, std::size_t i1, std::size_t j0,
                  std::size_t j1, bool upper, Workspace& ws) {
  const std::size_t dim = a.dim;
  const std::size_t width = j1 - j0;
  pack_columns(b, j0, j1, ws.panels);
  ws.tile.assign((i1 - i0) * width, 0.0f);
  ws.group.resize(dim * kRows);
  const std::size_t npanels = (width + kCols - 1) / kCols;

  double acc[kRows][kCols];
  for (std::size_t ig = i0; ig < i1; ig += kRows) {
    const std::size_t nr = std::min(kRows, i1 - ig);
    for (std::size_t r = 0; r < kRows; ++r) {
      const float* src = r < nr ? a.data.data() + (ig + r) * dim : nullptr;
      for (std::size_t k = 0; k < dim; ++k) ws.group[k * kRows + r] = src ? src[k] : 0.0;
    }
    for (std::size_t p = 0; p < npanels; ++p) {
      const std::size_t jb = j0 + p * kCols;
      if (upper && jb + kCols - 1 <= ig) continue;  // whole panel on or below the diagonal
      micro_kernel(ws.group.data(), ws.panels.data() + p * dim * kCols, dim, acc);
      for (std::size_t r = 0; r < nr; ++r)
        for (std::size_t c = 0; c < kCols && jb + c < j1; ++c)
          ws.tile[(ig + r - i0) * width + (jb + c - j0)] = static_cast<float>(std::clamp(acc[r][c], -1.0, 1.0));
    }
  }
}

struct Tile {
  std::size_t i0, i1, j0, j1;
};

std::vector<Tile> upper_tiles(std::size_t n, std::size_t block) {
  std::vector<Tile> tiles;
  for (std::size_t i0 = 0; i0 < n; i0 += block)
    for (std::size_t j0 = i0; j0 < n; j0 += block)
      tiles.push_back({i0, std::min(n, i0 + block), j0, std::min(n, j0 + block)});
  return tiles;
}

std::vector<Tile> cross_tiles(std::size_t na, std::size_t nb, std::size_t block) {
  std::vector<Tile> tiles;
  for (std::size_t i0 = 0; i0 < na; i0 += block)
    for (std::size_t j0 = 0; j0 < nb; j0 += block)
      tiles.push_back({i0, std::min(na, i0 + block), j0, std::min(nb, j0 + block)});
  return tiles;
}

template <class Keep>
void collect(const Workspace& ws, const Tile& t, bool upper, Keep&& keep, std::vector<PairScore>& out) {
  const std::size_t width = t.j1 - t.j0;
  for (std::size_t i = t.i0; i < t.i1; ++i) {
    const std::size_t jstart = upper ? std::max(t.j0, i + 1) : t.j0;
    for (std::size_t j = jstart; j < t.j1; ++j) {
      const float s = ws.tile[(i - t.i0) * width + (j - t.j0)];
      if (keep(s)) out.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), s});
    }
  }
}

int thread_count(const BlockOptions& opts) { return opts.threads > 0 ? opts.threads : omp_get_max_threads(); }

std::vector<PairScore> run_tiles(const MatrixView& a, const MatrixView& b, const std::vector<Tile>& tiles, bool upper,
                                 double threshold, const BlockOptions& opts) {
  std::vector<std::vector<PairScore>> per_tile(tiles.size());
  const auto nt = static_cast<std::int64_t>(tiles.size());
#pragma omp parallel num_threads(thread_count(opts))
  {
    Workspace ws;
#pragma omp for schedule(dynamic, 1)
    for (std::int64_t t = 0; t < nt; ++t) {
      const Tile& tile = tiles[static_cast<std::size_t>(t)];
      compute_tile(a, b, tile.i0, tile.i1, tile.j0, tile.j1, upper, ws);
      collect(ws, tile, upper, [threshold](float s) { return static_cast<double>(s) > threshold; },
              per_tile[static_cast<std::size_t>(t)]);
    }
  }
  std::size_t total = 0;
  for (const auto& v : per_tile) total += v.size();
  std::vector<PairScore> out;
  out.reserve(total);
  for (auto& v : per_tile) out.insert(out.end(), v.begin(), v.end());
  std::sort(out.begin(), out.end(), pair_order);
  return out;
}

}  // namespace

std::vector<PairScore> pairs_above(const MatrixView& m, double threshold, const BlockOptions& opts) {
  const std::size_t block = std::max<std::size_t>(opts.block, 1);
  return run_tiles(m, m, upper_tiles(m.rows, block), true, threshold, opts);
}

std::vector<PairScore> cross_above(const MatrixView& a, const MatrixView& b, double threshold,
                                   const BlockOptions& opts) {
  const std::size_t block = std::max<std::size_t>(opts.block, 1);
  return run_tiles(a, b, cross_tiles(a.rows, b.rows, block), false, threshold, opts);
}

void stream_upper_triangle(const MatrixView& m, const BlockOptions& opts,
                           const std::function<void(std::span<const PairScore>)>& sink) {
  const std::size_t block = std::max<std::size_t>(opts.block, 1);
  const auto tiles = upper_tiles(m.rows, block);
  const int threads = thread_count(opts);
  const std::size_t batch = static_cast<std::size_t>(std::max(1, threads)) * 4;
  std::vector<std::vector<PairScore>> buffers(batch);

  for (std::size_t first = 0; first < tiles.size(); first += batch) {
    const auto count = static_cast<std::int64_t>(std::min(batch, tiles.size() - first));
#pragma omp parallel num_threads(threads)
    {
      Workspace ws;
#pragma omp for schedule(dynamic, 1)
      for (std::int64_t t = 0; t < count; ++t) {
        const Tile& tile = tiles[first + static_cast<std::size_t>(t)];
        auto& buf = buffers[static_cast<std::size_t>(t)];
        buf.clear();
        compute_tile(m, m, tile.i0, tile.i1, tile.j0, tile.j1, true, ws);
        collect(ws, tile, true, [](float) { return true; }, buf);
      }
    }
    for (std::int64_t t = 0; t < count; ++t) sink(buffers[static_cast<std::size_t>(t)]);
  }
}

}  // namespace idcurate::kernels::omp
