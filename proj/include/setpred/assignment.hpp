#pragma once

#include <cstdint>
#include <vector>

namespace setpred {

// Dense m x M cost matrix, rows = ground-truth elements, cols = output slots.
// Invariant: m <= M, all entries finite.
struct CostMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;  // row-major

  CostMatrix() = default;
  CostMatrix(std::size_t m, std::size_t M) : rows(m), cols(M), data(m * M, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

// perm[j] = slot assigned to ground-truth row j; indices distinct.
struct AssignmentResult {
  std::vector<std::size_t> perm;
  double cost = 0.0;
};

// Cost-minimal injective row-to-column assignment. Rectangular inputs are
// padded internally to square with dummy rows at sentinel cost (max entry + 1);
// padded rows are never reported.
AssignmentResult hungarian(const CostMatrix& cost);

// Exhaustive minimum over all injections, m <= 8. Ties broken by the
// lexicographically smallest perm vector. Test oracle for hungarian.
AssignmentResult brute_force_assignment(const CostMatrix& cost);

std::uint64_t factorial(std::size_t n);

// Lexicographic rank of a full permutation of {0..M-1}; M <= 8.
std::uint64_t lehmer_encode(const std::vector<std::size_t>& perm);
std::vector<std::size_t> lehmer_decode(std::uint64_t index, std::size_t M);

}  // namespace setpred
