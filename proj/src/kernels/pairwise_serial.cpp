#include <algorithm>

#include "idcurate/kernels.hpp"

namespace idcurate::kernels {

float dot_score(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += static_cast<double>(a[k]) * static_cast<double>(b[k]);
  return static_cast<float>(std::clamp(acc, -1.0, 1.0));
}

namespace serial {

void upper_triangle(const MatrixView& m, const std::function<void(const PairScore&)>& visit) {
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = i + 1; j < m.rows; ++j)
      visit({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), dot_score(m.row(i), m.row(j))});
}

std::vector<PairScore> pairs_above(const MatrixView& m, double threshold) {
  std::vector<PairScore> out;
  upper_triangle(m, [&](const PairScore& p) {
    if (static_cast<double>(p.score) > threshold) out.push_back(p);
  });
  return out;
}

std::vector<PairScore> cross_above(const MatrixView& a, const MatrixView& b, double threshold) {
  std::vector<PairScore> out;
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < b.rows; ++j) {
      const float s = dot_score(a.row(i), b.row(j));
      if (static_cast<double>(s) > threshold)
        out.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), s});
    }
  return out;
}

}  // namespace serial
}  // namespace idcurate::kernels
