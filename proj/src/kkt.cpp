#include "coland/kkt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace coland {

std::vector<int> rcm_ordering(int dim,
                              const std::vector<std::pair<int, int>>& edges) {
  std::vector<std::vector<int>> adj(dim);
  for (const auto& [i, j] : edges) {
    if (i == j) continue;
    adj[i].push_back(j);
    adj[j].push_back(i);
  }
  for (auto& nbrs : adj) {
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
  }

  std::vector<int> order;
  order.reserve(dim);
  std::vector<char> visited(dim, 0);
  auto degree = [&](int v) { return static_cast<int>(adj[v].size()); };

  for (int seed = 0; seed < dim; ++seed) {
    if (visited[seed]) continue;
    // Start each component from a minimum-degree vertex.
    int start = seed;
    for (int v = seed; v < dim; ++v) {
      if (!visited[v] && degree(v) < degree(start) && !visited[start]) {
        start = v;
      }
    }
    if (visited[start]) start = seed;

    std::vector<int> queue{start};
    visited[start] = 1;
    for (std::size_t head = 0; head < queue.size(); ++head) {
      int v = queue[head];
      order.push_back(v);
      std::vector<int> next;
      for (int w : adj[v]) {
        if (!visited[w]) {
          visited[w] = 1;
          next.push_back(w);
        }
      }
      std::sort(next.begin(), next.end(),
                [&](int a, int b) { return degree(a) < degree(b); });
      queue.insert(queue.end(), next.begin(), next.end());
    }
  }
  std::reverse(order.begin(), order.end());
  return order;
}

void BandedLdlt::analyze(int dim,
                         const std::vector<std::pair<int, int>>& entries,
                         bool use_rcm) {
  dim_ = dim;
  if (use_rcm) {
    perm_ = rcm_ordering(dim, entries);
  } else {
    perm_.resize(dim);
    std::iota(perm_.begin(), perm_.end(), 0);
  }
  iperm_.assign(dim, 0);
  for (int k = 0; k < dim; ++k) iperm_[perm_[k]] = k;

  hb_ = 0;
  for (const auto& [i, j] : entries) {
    hb_ = std::max(hb_, std::abs(iperm_[i] - iperm_[j]));
  }

  scatter_.resize(entries.size());
  for (std::size_t k = 0; k < entries.size(); ++k) {
    int pi = iperm_[entries[k].first];
    int pj = iperm_[entries[k].second];
    if (pi < pj) std::swap(pi, pj);
    scatter_[k] = band_index(pi, pj);
  }

  band_.assign(static_cast<std::size_t>(hb_ + 1) * dim_, 0.0);
  fact_.assign(band_.size(), 0.0);
  factorized_ = false;
}

void BandedLdlt::set_zero() {
  std::fill(band_.begin(), band_.end(), 0.0);
  factorized_ = false;
}

bool BandedLdlt::factorize(int* num_pos, int* num_neg, int* num_zero) {
  fact_ = band_;
  int pos = 0, neg = 0, zero = 0;

  double max_diag = 0.0;
  for (int j = 0; j < dim_; ++j) {
    max_diag = std::max(max_diag, std::abs(band_[band_index(j, j)]));
  }
  const double zero_tol = std::max(1e-300, 1e-14 * max_diag) * 1e-6;

  // Right-looking outer-product elimination. Column j of the band is
  // contiguous in memory, so both the scaling of column j and the rank-one
  // update of each trailing column run over contiguous ranges.
  bool ok = true;
  for (int j = 0; j < dim_; ++j) {
    double* colj = &fact_[static_cast<std::size_t>(j) * (hb_ + 1)];
    double dj = colj[0];
    if (std::abs(dj) <= zero_tol || !std::isfinite(dj)) {
      ++zero;
      ok = false;
      // Leave a sentinel pivot so back-substitution stays finite; the
      // caller is expected to re-regularize after a zero-pivot report.
      dj = (dj >= 0 ? 1.0 : -1.0) * 1e300;
      colj[0] = dj;
    } else if (dj > 0) {
      ++pos;
    } else {
      ++neg;
    }
    const int len = std::min(hb_, dim_ - 1 - j);
    for (int t = 1; t <= len; ++t) {
      const double s = colj[t] / dj;
      double* colt = &fact_[static_cast<std::size_t>(j + t) * (hb_ + 1)];
      const int m = len - t;
      for (int r = 0; r <= m; ++r) colt[r] -= s * colj[t + r];
    }
    for (int t = 1; t <= len; ++t) colj[t] /= dj;
  }

  if (num_pos) *num_pos = pos;
  if (num_neg) *num_neg = neg;
  if (num_zero) *num_zero = zero;
  factorized_ = ok;
  return ok;
}

void BandedLdlt::solve_inplace(Eigen::VectorXd& b) const {
  Eigen::VectorXd pb(dim_);
  for (int k = 0; k < dim_; ++k) pb[k] = b[perm_[k]];

  // Forward: L y = pb.
  for (int j = 0; j < dim_; ++j) {
    const double yj = pb[j];
    const int i_hi = std::min(dim_ - 1, j + hb_);
    for (int i = j + 1; i <= i_hi; ++i) {
      pb[i] -= fact_[band_index(i, j)] * yj;
    }
  }
  // Diagonal.
  for (int j = 0; j < dim_; ++j) pb[j] /= fact_[band_index(j, j)];
  // Backward: L^T x = y.
  for (int j = dim_ - 1; j >= 0; --j) {
    double xj = pb[j];
    const int i_hi = std::min(dim_ - 1, j + hb_);
    for (int i = j + 1; i <= i_hi; ++i) {
      xj -= fact_[band_index(i, j)] * pb[i];
    }
    pb[j] = xj;
  }

  for (int k = 0; k < dim_; ++k) b[perm_[k]] = pb[k];
}

Eigen::VectorXd BandedLdlt::multiply(const Eigen::VectorXd& x) const {
  Eigen::VectorXd px(dim_), py = Eigen::VectorXd::Zero(dim_);
  for (int k = 0; k < dim_; ++k) px[k] = x[perm_[k]];
  for (int j = 0; j < dim_; ++j) {
    py[j] += band_[band_index(j, j)] * px[j];
    const int i_hi = std::min(dim_ - 1, j + hb_);
    for (int i = j + 1; i <= i_hi; ++i) {
      const double v = band_[band_index(i, j)];
      py[i] += v * px[j];
      py[j] += v * px[i];
    }
  }
  Eigen::VectorXd y(dim_);
  for (int k = 0; k < dim_; ++k) y[perm_[k]] = py[k];
  return y;
}

double BandedLdlt::solve_refined(const Eigen::VectorXd& b, Eigen::VectorXd& x,
                                 int max_refine) const {
  const double bnorm = std::max(1.0, b.lpNorm<Eigen::Infinity>());
  x = b;
  solve_inplace(x);
  Eigen::VectorXd best = x;
  double best_res = (b - multiply(x)).lpNorm<Eigen::Infinity>() / bnorm;
  for (int it = 0; it < max_refine && best_res > 1e-12; ++it) {
    Eigen::VectorXd r = b - multiply(x);
    Eigen::VectorXd dx = r;
    solve_inplace(dx);
    x += dx;
    double res = (b - multiply(x)).lpNorm<Eigen::Infinity>() / bnorm;
    if (res < best_res) {
      best_res = res;
      best = x;
    } else {
      break;
    }
  }
  x = best;
  return best_res;
}

}  // namespace coland
