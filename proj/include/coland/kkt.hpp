#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

namespace coland {

/// Reverse Cuthill-McKee ordering for a symmetric sparsity graph given as
/// (i, j) pairs (order and diagonal entries irrelevant). Returns perm such
/// that perm[k] is the original index placed at position k.
std::vector<int> rcm_ordering(int dim,
                              const std::vector<std::pair<int, int>>& edges);

/// Symmetric indefinite solver on a fixed sparsity pattern: values are
/// scattered into a banded store under an optional RCM permutation and
/// factorized as L D L^T without pivoting. Pivot signs give the inertia,
/// which the interior-point loop uses to drive its regularization; with
/// quasi-definite regularization the factorization is stable at any
/// symmetric permutation. A full bandwidth pattern degenerates to a dense
/// factorization through the same code path.
class BandedLdlt {
 public:
  /// Registers the pattern. Entries are (row, col) in original indices,
  /// either triangle; duplicates allowed (values accumulate).
  void analyze(int dim, const std::vector<std::pair<int, int>>& entries,
               bool use_rcm = true);

  void set_zero();
  /// Accumulates a value at pattern entry k (index into the analyze list).
  void add(std::size_t entry_index, double value) {
    band_[scatter_[entry_index]] += value;
  }

  /// Factorizes the assembled matrix. Reports the numbers of positive,
  /// negative, and (numerically) zero pivots; returns false when a zero
  /// pivot makes the factorization unusable.
  bool factorize(int* num_pos = nullptr, int* num_neg = nullptr,
                 int* num_zero = nullptr);

  /// Back-substitution using the last successful factorization.
  void solve_inplace(Eigen::VectorXd& b) const;

  /// Solve with iterative refinement against the assembled matrix.
  /// Returns the achieved relative residual (inf norm).
  double solve_refined(const Eigen::VectorXd& b, Eigen::VectorXd& x,
                       int max_refine = 10) const;

  /// Multiplies the assembled (pre-factorization) matrix by x.
  Eigen::VectorXd multiply(const Eigen::VectorXd& x) const;

  int dim() const { return dim_; }
  int bandwidth() const { return hb_; }

 private:
  std::size_t band_index(int i, int j) const {
    // Lower-triangular band, column-major: (i, j) with j <= i <= j + hb_.
    return static_cast<std::size_t>(j) * (hb_ + 1) + (i - j);
  }

  int dim_ = 0;
  int hb_ = 0;
  std::vector<int> perm_, iperm_;
  std::vector<std::size_t> scatter_;
  std::vector<double> band_;  // assembled values (permuted)
  std::vector<double> fact_;  // L (strict) and D (diagonal)
  bool factorized_ = false;
};

}  // namespace coland
