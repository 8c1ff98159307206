#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <set>

#include "reprobandit/optimal_design.hpp"

using namespace reprobandit;
using Catch::Approx;

namespace {

Eigen::MatrixXd random_unit_arms(int d, int k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Eigen::MatrixXd a(d, k);
  for (int j = 0; j < k; ++j) {
    for (int i = 0; i < d; ++i) a(i, j) = n(rng);
    a.col(j).normalize();
  }
  return a;
}

// Oracle: explicit inverse of V and a full scan of the arms.
double dense_g(const Design& des, const Eigen::MatrixXd& arms) {
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(des.dim(), des.dim());
  for (std::size_t j = 0; j < des.size(); ++j) {
    v += des.weights[static_cast<Eigen::Index>(j)] * des.support.col(static_cast<Eigen::Index>(j)) *
         des.support.col(static_cast<Eigen::Index>(j)).transpose();
  }
  const Eigen::MatrixXd inv = v.inverse();
  double g = 0;
  for (Eigen::Index j = 0; j < arms.cols(); ++j) g = std::max(g, double(arms.col(j).transpose() * inv * arms.col(j)));
  return g;
}

Design uniform_on(const Eigen::MatrixXd& arms) {
  const auto k = arms.cols();
  return make_design(arms, Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k)));
}

}  // namespace

TEST_CASE("basis with uniform weights has g = d") {
  for (int d = 1; d <= 6; ++d) {
    const Eigen::MatrixXd basis = Eigen::MatrixXd::Identity(d, d);
    CHECK(g_value(uniform_on(basis), basis) == Approx(d).margin(1e-9));
    const auto fw = frank_wolfe_design(basis, uniform_on(basis));
    CHECK(fw.converged);
    CHECK(fw.iterations == 0);
    CHECK(fw.g == Approx(d).margin(1e-9));
  }
}

TEST_CASE("g of a single arm in one dimension") {
  Eigen::MatrixXd a(1, 1);
  a << 1.0;
  CHECK(g_value(uniform_on(a), a) == Approx(1.0));
}

TEST_CASE("g matches a dense-inverse oracle") {
  const auto arms = random_unit_arms(3, 30, 4);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::VectorXd w(8);
    for (int j = 0; j < 8; ++j) w[j] = u(rng);
    w /= w.sum();
    const Design des = make_design(arms.leftCols(8), w);
    CHECK(g_value(des, arms) == Approx(dense_g(des, arms)).epsilon(1e-9));
    CHECK(g_value(des, arms) >= 3 - 1e-9);
  }
}

TEST_CASE("singular information matrix is reported") {
  Eigen::MatrixXd a(2, 2);
  a << 1, 2, 0, 0;
  CHECK_THROWS_AS(g_value(uniform_on(a), a), SingularDesign);
}

TEST_CASE("initialization on the cross-polytope picks every vertex") {
  for (int d = 1; d <= 5; ++d) {
    Eigen::MatrixXd arms(d, 2 * d);
    arms << Eigen::MatrixXd::Identity(d, d), -Eigen::MatrixXd::Identity(d, d);
    for (std::uint64_t s = 0; s < 10; ++s) {
      const Design des = ky_initialize(arms, SharedSeed{s});
      REQUIRE(des.size() == static_cast<std::size_t>(2 * d));
      std::set<std::size_t> idx(des.indices.begin(), des.indices.end());
      CHECK(idx.size() == static_cast<std::size_t>(2 * d));
      for (Eigen::Index j = 0; j < des.weights.size(); ++j) CHECK(des.weights[j] == Approx(1.0 / (2 * d)));
    }
  }
}

TEST_CASE("one-dimensional initialization picks the extremes") {
  Eigen::MatrixXd arms(1, 3);
  arms << 0.2, 0.9, -0.5;
  const Design des = ky_initialize(arms, SharedSeed{3});
  std::set<std::size_t> idx(des.indices.begin(), des.indices.end());
  CHECK(idx == std::set<std::size_t>{1, 2});
}

TEST_CASE("initialization spans on random arm sets") {
  const auto arms = random_unit_arms(3, 50, 1);
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const Design des = ky_initialize(arms, SharedSeed{s});
    REQUIRE(des.size() <= 6);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(des.info_matrix());
    REQUIRE(lu.rank() == 3);
    CHECK(des.weights.sum() == Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("non-spanning arms are rejected") {
  Eigen::MatrixXd arms(3, 4);
  arms << 1, 0, 1, 0.5, 0, 1, 1, 0.5, 0, 0, 0, 0;
  CHECK_THROWS_AS(ky_initialize(arms, SharedSeed{1}), DegenerateArmSet);
}

TEST_CASE("Frank-Wolfe reaches 2d on random unit vectors") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto arms = random_unit_arms(3, 20, 100 + s);
    const auto fw = g_optimal_design(arms, SharedSeed{s});
    CHECK(fw.converged);
    CHECK(dense_g(fw.design, arms) <= 6.0 + 1e-9);
    CHECK(fw.g == Approx(dense_g(fw.design, arms)).epsilon(1e-8));
  }
}

TEST_CASE("three arms in the plane") {
  Eigen::MatrixXd arms(2, 3);
  const double r = 1 / std::sqrt(2.0);
  arms << 1, 0, r, 0, 1, r;
  const auto fw = g_optimal_design(arms, SharedSeed{1});
  CHECK(fw.g <= 4.0);
  CHECK(fw.g >= 2.0 - 1e-9);
  // Grid search over the simplex for the optimal g.
  double best = 1e9;
  for (int i = 1; i < 400; ++i) {
    for (int j = 1; i + j < 400; ++j) {
      Eigen::Vector3d w(i / 400.0, j / 400.0, (400 - i - j) / 400.0);
      best = std::min(best, g_value(make_design(arms, w), arms));
    }
  }
  CHECK(best == Approx(2.0).margin(1e-3));
  CHECK(fw.g >= best - 1e-9);
  // Tighter target converges toward the grid optimum.
  const auto tight = frank_wolfe_design(arms, ky_initialize(arms, SharedSeed{1}), 2.001, 200000);
  CHECK(tight.g <= 2.001);
}

TEST_CASE("log det never decreases along Frank-Wolfe") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto arms = random_unit_arms(4, 60, 300 + s);
    const auto fw = g_optimal_design(arms, SharedSeed{s}, std::nullopt, 4.2);
    for (std::size_t i = 1; i < fw.log_det.size(); ++i) CHECK(fw.log_det[i] >= fw.log_det[i - 1] - 1e-12);
  }
}

TEST_CASE("Kiefer-Wolfowitz lower bound") {
  for (int d = 2; d <= 6; ++d) {
    for (std::uint64_t s = 0; s < 10; ++s) {
      const auto arms = random_unit_arms(d, 3 * d + 5, 17 * d + s);
      const auto fw = g_optimal_design(arms, SharedSeed{s});
      CHECK(fw.g >= d - 1e-9);
      CHECK(g_value(ky_initialize(arms, SharedSeed{s}), arms) >= d - 1e-9);
    }
  }
}

TEST_CASE("core-set size stays within the calibrated bound") {
  for (int d = 2; d <= 8; ++d) {
    std::size_t worst = 0;
    for (std::uint64_t s = 0; s < 10; ++s) {
      const auto arms = random_unit_arms(d, 200, 1000 * d + s);
      const auto fw = g_optimal_design(arms, SharedSeed{s});
      REQUIRE(fw.converged);
      worst = std::max(worst, fw.design.size());
    }
    INFO("d=" << d << " worst core size " << worst << " bound " << core_set_bound(d));
    CHECK(static_cast<double>(worst) <= core_set_bound(d));
  }
}

TEST_CASE("designs are deterministic") {
  const auto arms = random_unit_arms(5, 80, 5);
  const auto a = g_optimal_design(arms, SharedSeed{8});
  const auto b = g_optimal_design(arms, SharedSeed{8});
  CHECK(a.design.indices == b.design.indices);
  CHECK(a.design.weights == b.design.weights);
  CHECK(a.g == b.g);
}

TEST_CASE("effective support leaves balanced designs alone") {
  const Eigen::MatrixXd basis = Eigen::MatrixXd::Identity(3, 3);
  const Design des = uniform_on(basis);
  const Design out = effective_support(des);
  CHECK(out.weights == des.weights);
}

TEST_CASE("effective support lifts a skewed two-arm design") {
  const Eigen::MatrixXd basis = Eigen::MatrixXd::Identity(2, 2);
  const Design des = make_design(basis, Eigen::Vector2d(0.999, 0.001));
  const Design out = effective_support(des);
  CHECK(out.size() == 2);
  CHECK(out.weights.minCoeff() >= effective_support_floor(2));
  CHECK(g_value(out, basis) <= 8.0);
  CHECK(out.weights.sum() == Approx(1.0).margin(1e-12));
}

TEST_CASE("one mixing step inflates norms by at most 1/(1-x)") {
  const auto arms = random_unit_arms(3, 40, 21);
  const auto fw = g_optimal_design(arms, SharedSeed{2});
  const Design& des = fw.design;
  const double x = effective_support_step(3);
  Eigen::MatrixXd v = des.info_matrix();
  Eigen::MatrixXd mixed = (1 - x) * v + x * arms.col(0) * arms.col(0).transpose();
  const Eigen::MatrixXd vi = v.inverse(), mi = mixed.inverse();
  for (Eigen::Index j = 0; j < arms.cols(); ++j) {
    const double before = arms.col(j).transpose() * vi * arms.col(j);
    const double after = arms.col(j).transpose() * mi * arms.col(j);
    CHECK(after <= before / (1 - x) + 1e-9);
  }
}

TEST_CASE("effective support keeps g within 4d on optimized designs") {
  for (int d = 2; d <= 8; ++d) {
    for (std::uint64_t s = 0; s < 5; ++s) {
      const auto arms = random_unit_arms(d, 100, 77 * d + s);
      const auto fw = g_optimal_design(arms, SharedSeed{s});
      const Design out = effective_support(fw.design);
      CHECK(out.size() == fw.design.size());
      CHECK(out.indices == fw.design.indices);
      CHECK(g_value(out, arms) <= 4.0 * d);
      CHECK(out.weights.minCoeff() >= effective_support_floor(d));
    }
  }
}

TEST_CASE("rounding a design into pull counts") {
  const Eigen::MatrixXd basis = Eigen::MatrixXd::Identity(4, 4);
  const auto n = design_to_multiset(uniform_on(basis), std::uint64_t{100});
  CHECK(n == std::vector<std::uint64_t>{25, 25, 25, 25});

  const auto arms = random_unit_arms(3, 30, 6);
  const Design des = g_optimal_design(arms, SharedSeed{1}).design;
  const std::uint64_t big = multiset_size(3, 0.1, 0.01);
  const auto counts = design_to_multiset(des, 0.1, 0.01);
  const std::uint64_t total = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
  CHECK(total >= big);
  CHECK(total <= big + des.size());
  const std::uint64_t quarter = multiset_size(3, 0.2, 0.01);
  CHECK(static_cast<double>(big) == Approx(4.0 * quarter).margin(4));
}
