#include "setpred/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace setpred {

namespace {

void check_matrix(const CostMatrix& cost) {
  if (cost.rows == 0 || cost.cols == 0)
    throw std::invalid_argument("assignment: empty cost matrix");
  if (cost.rows > cost.cols)
    throw std::invalid_argument("assignment: more rows than columns");
  if (cost.data.size() != cost.rows * cost.cols)
    throw std::invalid_argument("assignment: data size mismatch");
  for (double v : cost.data)
    if (!std::isfinite(v)) throw std::invalid_argument("assignment: non-finite entry");
}

// Shortest-augmenting-path Hungarian on a square n x n matrix; returns
// row -> column.
std::vector<std::size_t> solve_square(const std::vector<std::vector<double>>& a) {
  const std::size_t n = a.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n, 0);
  for (std::size_t j = 1; j <= n; ++j)
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

}  // namespace

AssignmentResult hungarian(const CostMatrix& cost) {
  check_matrix(cost);
  const std::size_t m = cost.rows, M = cost.cols;
  double sentinel = 0.0;
  for (double v : cost.data) sentinel = std::max(sentinel, std::fabs(v));
  sentinel += 1.0;

  std::vector<std::vector<double>> sq(M, std::vector<double>(M, sentinel));
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < M; ++c) sq[r][c] = cost.at(r, c);

  const std::vector<std::size_t> row_to_col = solve_square(sq);
  AssignmentResult out;
  out.perm.assign(row_to_col.begin(), row_to_col.begin() + static_cast<long>(m));
  for (std::size_t r = 0; r < m; ++r) out.cost += cost.at(r, out.perm[r]);
  return out;
}

AssignmentResult brute_force_assignment(const CostMatrix& cost) {
  check_matrix(cost);
  if (cost.rows > 8) throw std::invalid_argument("brute_force_assignment: m > 8");
  const std::size_t m = cost.rows, M = cost.cols;
  AssignmentResult best;
  best.cost = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> cur(m, 0);
  std::vector<char> taken(M, 0);
  double acc = 0.0;
  // Depth-first over columns in ascending order yields candidate perms in
  // lexicographic order, so strict improvement keeps the smallest tie.
  auto rec = [&](auto&& self, std::size_t depth) -> void {
    if (depth == m) {
      if (acc < best.cost) {
        best.cost = acc;
        best.perm = cur;
      }
      return;
    }
    for (std::size_t c = 0; c < M; ++c) {
      if (taken[c]) continue;
      taken[c] = 1;
      cur[depth] = c;
      acc += cost.at(depth, c);
      self(self, depth + 1);
      acc -= cost.at(depth, c);
      taken[c] = 0;
    }
  };
  rec(rec, 0);
  return best;
}

std::uint64_t factorial(std::size_t n) {
  std::uint64_t f = 1;
  for (std::size_t i = 2; i <= n; ++i) f *= i;
  return f;
}

std::uint64_t lehmer_encode(const std::vector<std::size_t>& perm) {
  const std::size_t M = perm.size();
  if (M == 0 || M > 8) throw std::invalid_argument("lehmer_encode: size must be in [1,8]");
  std::vector<char> seen(M, 0);
  for (std::size_t v : perm) {
    if (v >= M || seen[v]) throw std::invalid_argument("lehmer_encode: not a permutation");
    seen[v] = 1;
  }
  std::uint64_t index = 0;
  for (std::size_t i = 0; i < M; ++i) {
    std::uint64_t smaller_after = 0;
    for (std::size_t j = i + 1; j < M; ++j)
      if (perm[j] < perm[i]) ++smaller_after;
    index += smaller_after * factorial(M - 1 - i);
  }
  return index;
}

std::vector<std::size_t> lehmer_decode(std::uint64_t index, std::size_t M) {
  if (M == 0 || M > 8) throw std::invalid_argument("lehmer_decode: size must be in [1,8]");
  if (index >= factorial(M)) throw std::invalid_argument("lehmer_decode: index out of range");
  std::vector<std::size_t> avail(M);
  for (std::size_t i = 0; i < M; ++i) avail[i] = i;
  std::vector<std::size_t> perm(M, 0);
  for (std::size_t i = 0; i < M; ++i) {
    const std::uint64_t f = factorial(M - 1 - i);
    const std::size_t digit = static_cast<std::size_t>(index / f);
    index %= f;
    perm[i] = avail[digit];
    avail.erase(avail.begin() + static_cast<long>(digit));
  }
  return perm;
}

}  // namespace setpred
