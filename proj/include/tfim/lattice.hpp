#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "tfim/error.hpp"

namespace tfim {

struct Edge {
  int a;
  int b;
};

enum class SnakeAxis { rows, columns };

/// Open-boundary rectangular grid. Sites are numbered row-major,
/// i = r * cols + c. Square L x L lattices are the common case.
struct LatticeSpec {
  int rows = 0;
  int cols = 0;
  std::vector<Edge> nn_edges;
  std::vector<int> snake_order;
  int center_site = 0;

  int num_sites() const { return rows * cols; }
  int site(int r, int c) const { return r * cols + c; }
  int row_of(int i) const { return i / cols; }
  int col_of(int i) const { return i % cols; }
  bool is_square() const { return rows == cols; }

  /// Sites of the center-most horizontal row, left to right.
  std::vector<int> center_row() const {
    std::vector<int> out;
    const int r0 = row_of(center_site);
    for (int c = 0; c < cols; ++c) out.push_back(site(r0, c));
    return out;
  }

  /// Sites to the right of the reference site on its row (distances 1, 2, ...).
  std::vector<int> line_partners() const {
    std::vector<int> out;
    const int r0 = row_of(center_site);
    for (int c = col_of(center_site) + 1; c < cols; ++c) out.push_back(site(r0, c));
    return out;
  }

  std::vector<std::vector<int>> neighbors() const {
    std::vector<std::vector<int>> nb(num_sites());
    for (const auto& e : nn_edges) {
      nb[e.a].push_back(e.b);
      nb[e.b].push_back(e.a);
    }
    return nb;
  }
};

inline std::vector<int> make_snake(int rows, int cols, SnakeAxis axis) {
  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(rows * cols));
  if (axis == SnakeAxis::rows) {
    for (int r = 0; r < rows; ++r)
      for (int k = 0; k < cols; ++k) order.push_back(r * cols + (r % 2 == 0 ? k : cols - 1 - k));
  } else {
    for (int c = 0; c < cols; ++c)
      for (int k = 0; k < rows; ++k) order.push_back((c % 2 == 0 ? k : rows - 1 - k) * cols + c);
  }
  return order;
}

/// General rows x cols grid (1 x n chains included).
inline LatticeSpec build_grid(int rows, int cols, SnakeAxis axis = SnakeAxis::rows) {
  if (rows < 1 || cols < 1) throw Error(ErrorCategory::invalid_size, "grid dimensions must be positive");
  if (rows > 16 || cols > 64) throw Error(ErrorCategory::invalid_size, "grid too large");
  LatticeSpec lat;
  lat.rows = rows;
  lat.cols = cols;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (c + 1 < cols) lat.nn_edges.push_back({lat.site(r, c), lat.site(r, c + 1)});
      if (r + 1 < rows) lat.nn_edges.push_back({lat.site(r, c), lat.site(r + 1, c)});
    }
  }
  lat.snake_order = make_snake(rows, cols, axis);
  lat.center_site = lat.site((rows - 1) / 2, (cols - 1) / 2);
  return lat;
}

inline LatticeSpec build_lattice(int L, SnakeAxis axis = SnakeAxis::rows) {
  if (L < 2 || L > 16) throw Error(ErrorCategory::invalid_size, "lattice size L must satisfy 2 <= L <= 16");
  return build_grid(L, L, axis);
}

}  // namespace tfim
