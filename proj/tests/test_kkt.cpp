#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <random>

#include "coland/kkt.hpp"

using namespace coland;

namespace {

// Registers every lower-triangle entry of a dense symmetric matrix and
// assembles it, returning the list used for add().
std::vector<std::pair<int, int>> assemble_dense(BandedLdlt& ldlt,
                                                const Eigen::MatrixXd& a,
                                                bool use_rcm) {
  const int n = static_cast<int>(a.rows());
  std::vector<std::pair<int, int>> entries;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) entries.emplace_back(i, j);
  }
  ldlt.analyze(n, entries, use_rcm);
  ldlt.set_zero();
  for (std::size_t k = 0; k < entries.size(); ++k) {
    ldlt.add(k, a(entries[k].first, entries[k].second));
  }
  return entries;
}

Eigen::MatrixXd random_spd(int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) m(i, j) = gauss(rng);
  }
  return m.transpose() * m + Eigen::MatrixXd::Identity(n, n);
}

}  // namespace

TEST_SUITE_BEGIN("kkt");

TEST_CASE("dense spd factorization matches eigen") {
  const int n = 40;
  Eigen::MatrixXd a = random_spd(n, 3);
  Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(n, -1.0, 1.0);

  BandedLdlt ldlt;
  assemble_dense(ldlt, a, true);
  int pos = 0, neg = 0, zero = 0;
  REQUIRE(ldlt.factorize(&pos, &neg, &zero));
  CHECK(pos == n);
  CHECK(neg == 0);
  CHECK(zero == 0);

  Eigen::VectorXd x;
  double res = ldlt.solve_refined(b, x);
  CHECK(res < 1e-12);
  Eigen::VectorXd x_ref = a.ldlt().solve(b);
  CHECK((x - x_ref).lpNorm<Eigen::Infinity>() < 1e-9);
}

TEST_CASE("large sparse spd system vs dense oracle") {
  const int n = 500;
  std::mt19937 rng(17);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> offset(1, 40);

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  std::vector<std::pair<int, int>> entries;
  std::vector<double> values;
  for (int i = 0; i < n; ++i) {
    entries.emplace_back(i, i);
    values.push_back(50.0 + std::abs(gauss(rng)));
    a(i, i) = values.back();
  }
  for (int k = 0; k < 4 * n; ++k) {
    int i = std::uniform_int_distribution<int>(0, n - 1)(rng);
    int j = std::max(0, i - offset(rng));
    if (i == j) continue;
    double v = gauss(rng);
    entries.emplace_back(i, j);
    values.push_back(v);
    a(i, j) += v;
    a(j, i) += v;
  }

  BandedLdlt ldlt;
  ldlt.analyze(n, entries, true);
  ldlt.set_zero();
  for (std::size_t k = 0; k < entries.size(); ++k) ldlt.add(k, values[k]);
  int pos = 0, neg = 0, zero = 0;
  REQUIRE(ldlt.factorize(&pos, &neg, &zero));
  CHECK(pos == n);

  Eigen::VectorXd b(n);
  for (int i = 0; i < n; ++i) b[i] = gauss(rng);
  Eigen::VectorXd x;
  double res = ldlt.solve_refined(b, x);
  CHECK(res < 1e-10);
  Eigen::VectorXd x_ref = a.ldlt().solve(b);
  CHECK((x - x_ref).lpNorm<Eigen::Infinity>() /
            x_ref.lpNorm<Eigen::Infinity>() <
        1e-9);
  CHECK(ldlt.bandwidth() < n - 1);  // reordering kept some structure
}

TEST_CASE("saddle-point inertia matches eigenvalue signs") {
  const int n = 8, m = 4;
  Eigen::MatrixXd q = random_spd(n, 5);
  std::mt19937 rng(9);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd j(m, n);
  for (int i = 0; i < m; ++i) {
    for (int c = 0; c < n; ++c) j(i, c) = gauss(rng);
  }
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n + m, n + m);
  k.topLeftCorner(n, n) = q;
  k.bottomLeftCorner(m, n) = j;
  k.topRightCorner(n, m) = j.transpose();
  k.bottomRightCorner(m, m) = -1e-8 * Eigen::MatrixXd::Identity(m, m);

  BandedLdlt ldlt;
  assemble_dense(ldlt, k, true);
  int pos = 0, neg = 0, zero = 0;
  REQUIRE(ldlt.factorize(&pos, &neg, &zero));
  CHECK(pos == n);
  CHECK(neg == m);
  CHECK(zero == 0);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
  int pos_ref = (es.eigenvalues().array() > 0).count();
  CHECK(pos == pos_ref);

  Eigen::VectorXd b = Eigen::VectorXd::Ones(n + m);
  Eigen::VectorXd x;
  CHECK(ldlt.solve_refined(b, x) < 1e-10);
  Eigen::VectorXd x_ref = k.fullPivLu().solve(b);
  CHECK((x - x_ref).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("rcm recovers bandwidth one on a shuffled chain") {
  const int n = 100;
  std::vector<int> label(n);
  std::iota(label.begin(), label.end(), 0);
  std::mt19937 rng(13);
  std::shuffle(label.begin(), label.end(), rng);

  std::vector<std::pair<int, int>> entries;
  for (int i = 0; i < n; ++i) entries.emplace_back(label[i], label[i]);
  for (int i = 0; i + 1 < n; ++i) entries.emplace_back(label[i], label[i + 1]);

  BandedLdlt ldlt;
  ldlt.analyze(n, entries, true);
  CHECK(ldlt.bandwidth() == 1);
  BandedLdlt no_rcm;
  no_rcm.analyze(n, entries, false);
  CHECK(no_rcm.bandwidth() > 1);
}

TEST_CASE("permuted and unpermuted solves agree") {
  const int n = 60;
  Eigen::MatrixXd a = random_spd(n, 21);
  Eigen::VectorXd b = Eigen::VectorXd::Random(n);

  BandedLdlt with, without;
  assemble_dense(with, a, true);
  assemble_dense(without, a, false);
  REQUIRE(with.factorize());
  REQUIRE(without.factorize());
  Eigen::VectorXd x1, x2;
  with.solve_refined(b, x1);
  without.solve_refined(b, x2);
  CHECK((x1 - x2).lpNorm<Eigen::Infinity>() < 1e-9);
}

TEST_CASE("multiply matches dense product") {
  const int n = 30;
  Eigen::MatrixXd a = random_spd(n, 31);
  BandedLdlt ldlt;
  assemble_dense(ldlt, a, true);
  Eigen::VectorXd x = Eigen::VectorXd::Random(n);
  CHECK((ldlt.multiply(x) - a * x).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("zero pivot is reported") {
  Eigen::MatrixXd a(2, 2);
  a << 1.0, 0.0, 0.0, 0.0;
  BandedLdlt ldlt;
  assemble_dense(ldlt, a, false);
  int pos = 0, neg = 0, zero = 0;
  CHECK_FALSE(ldlt.factorize(&pos, &neg, &zero));
  CHECK(zero >= 1);
}

TEST_SUITE_END();
