#include "doctest.h"

#include "pros/error.hpp"
#include "pros/stats.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace pros;

TEST_CASE("ols exact line and singular designs") {
  Eigen::MatrixXd x(5, 1);
  Eigen::VectorXd y(5);
  for (int i = 0; i < 5; ++i) {
    x(i, 0) = i;
    y(i) = 2 * i + 1;
  }
  const auto m = ols_fit(x, y);
  CHECK(m.coefficients[0] == doctest::Approx(2).epsilon(1e-12));
  CHECK(m.intercept == doctest::Approx(1).epsilon(1e-12));
  CHECK(m.residual_sigma == doctest::Approx(0).epsilon(1e-9));
  const double x0 = 2.5;
  const auto iv = ols_predict_interval(m, std::span<const double>(&x0, 1), 0.05, Sidedness::two_sided);
  CHECK(iv.upper - iv.lower == doctest::Approx(0).epsilon(1e-9));

  Eigen::MatrixXd c = Eigen::MatrixXd::Constant(5, 1, 3.0);
  CHECK_THROWS_AS((void)ols_fit(c, y), FitError);
  Eigen::MatrixXd col(5, 2);
  col.col(0) = x.col(0);
  col.col(1) = 2 * x.col(0);
  CHECK_THROWS_AS((void)ols_fit(col, y), FitError);
}

TEST_CASE("ols matches the normal equations") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0, 1);
  const int n = 200;
  Eigen::MatrixXd x(n, 3);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) { x(i, j) = g(rng); }
    y(i) = 0.5 - x(i, 0) + 2 * x(i, 1) + 0.1 * x(i, 2) + g(rng);
  }
  Eigen::MatrixXd design(n, 4);
  design.col(0).setOnes();
  design.rightCols(3) = x;
  const Eigen::VectorXd beta = (design.transpose() * design).inverse() * (design.transpose() * y);
  const auto m = ols_fit(x, y);
  CHECK(std::abs(m.intercept - beta(0)) < 1e-8);
  for (int j = 0; j < 3; ++j) { CHECK(std::abs(m.coefficients[static_cast<std::size_t>(j)] - beta(j + 1)) < 1e-8); }
  const Eigen::VectorXd resid = y - design * beta;
  CHECK(m.residual_sigma == doctest::Approx(std::sqrt(resid.squaredNorm() / (n - 4))).epsilon(1e-10));

  double mean_x[3] = {x.col(0).mean(), x.col(1).mean(), x.col(2).mean()};
  CHECK(m.predict(mean_x) == doctest::Approx(y.mean()).epsilon(1e-10));
}

TEST_CASE("ols prediction intervals cover at the nominal rate") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0, 1);
  std::uniform_real_distribution<double> u(0, 10);
  const int n = 100;
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = u(rng);
    y(i) = 1 + 0.5 * x(i, 0) + g(rng);
  }
  const auto m = ols_fit(x, y);
  int inside = 0, above_lower = 0;
  const int draws = 10000;
  for (int t = 0; t < draws; ++t) {
    const double x0 = u(rng);
    const double y0 = 1 + 0.5 * x0 + g(rng);
    const auto two = ols_predict_interval(m, std::span<const double>(&x0, 1), 0.05, Sidedness::two_sided);
    const auto one = ols_predict_interval(m, std::span<const double>(&x0, 1), 0.05, Sidedness::lower_only);
    if (y0 >= two.lower && y0 <= two.upper) { ++inside; }
    if (y0 >= one.lower) { ++above_lower; }
    CHECK(one.lower <= one.point);
    CHECK(std::isinf(one.upper));
  }
  CHECK(std::abs(inside / double(draws) - 0.95) <= 0.02);
  CHECK(std::abs(above_lower / double(draws) - 0.95) <= 0.02);
}

TEST_CASE("logistic symmetric data has zero intercept") {
  Eigen::MatrixXd x(8, 1);
  std::vector<int> labels;
  const double xs[8] = {-1, -1, -1, 1, 1, 1, -1, 1};
  const int ls[8] = {0, 0, 1, 1, 1, 0, 0, 1};
  for (int i = 0; i < 8; ++i) {
    x(i, 0) = xs[i];
    labels.push_back(ls[i]);
  }
  const auto m = logistic_fit(x, labels);
  CHECK(std::abs(m.intercept) < 1e-8);
  CHECK(m.coefficients[0] > 0);
}

TEST_CASE("logistic separated data stays finite under the ridge") {
  Eigen::MatrixXd x(6, 1);
  std::vector<int> labels{0, 0, 0, 1, 1, 1};
  for (int i = 0; i < 6; ++i) { x(i, 0) = i; }
  const auto m = logistic_fit(x, labels, 1e-3);
  CHECK(std::isfinite(m.coefficients[0]));
  double prev = -1;
  for (double v = -2; v < 8; v += 0.5) {
    const double p = m.predict(std::span<const double>(&v, 1));
    CHECK(p >= prev);
    prev = p;
  }
}

TEST_CASE("logistic recovers known coefficients") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0, 1);
  std::uniform_real_distribution<double> u(0, 1);
  const int n = 500;
  Eigen::MatrixXd x(n, 2);
  std::vector<int> labels;
  for (int i = 0; i < n; ++i) {
    x(i, 0) = g(rng);
    x(i, 1) = g(rng);
  }
  // averaging over replicate draws keeps the relative error check stable
  double b0 = 0, b1 = 0, c = 0;
  const int reps = 20;
  for (int r = 0; r < reps; ++r) {
    labels.clear();
    for (int i = 0; i < n; ++i) {
      const double eta = 0.5 + 1.5 * x(i, 0) - 1.0 * x(i, 1);
      labels.push_back(u(rng) < 1 / (1 + std::exp(-eta)) ? 1 : 0);
    }
    const auto m = logistic_fit(x, labels);
    b0 += m.coefficients[0] / reps;
    b1 += m.coefficients[1] / reps;
    c += m.intercept / reps;
  }
  CHECK(std::abs(b0 - 1.5) / 1.5 < 0.10);
  CHECK(std::abs(b1 + 1.0) / 1.0 < 0.10);
  CHECK(std::abs(c - 0.5) / 0.5 < 0.10);
}

TEST_CASE("logistic gradient vanishes and matches finite differences") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0, 1);
  std::uniform_real_distribution<double> u(0, 1);
  const int n = 300;
  Eigen::MatrixXd x(n, 2);
  std::vector<int> labels;
  for (int i = 0; i < n; ++i) {
    x(i, 0) = g(rng);
    x(i, 1) = g(rng);
    labels.push_back(u(rng) < 1 / (1 + std::exp(-(x(i, 0) - 0.5 * x(i, 1)))) ? 1 : 0);
  }
  const auto m = logistic_fit(x, labels);
  const auto grad = logistic_gradient(m, x, labels);
  const double h = 1e-5;
  for (int j = 0; j < 3; ++j) {
    auto plus = m, minus = m;
    if (j == 0) {
      plus.intercept += h;
      minus.intercept -= h;
    } else {
      plus.coefficients[static_cast<std::size_t>(j - 1)] += h;
      minus.coefficients[static_cast<std::size_t>(j - 1)] -= h;
    }
    const double fd = (logistic_objective(plus, x, labels) - logistic_objective(minus, x, labels)) / (2 * h);
    CHECK(std::abs(grad(j) - fd) < 1e-6);
    CHECK(std::abs(grad(j)) < 1e-6);
  }
  std::vector<int> one_class(static_cast<std::size_t>(n), 1);
  CHECK_THROWS_AS((void)logistic_fit(x, one_class), InvalidArgument);
}

TEST_CASE("quantile fit, intercept only") {
  Eigen::MatrixXd none(5, 0);
  Eigen::VectorXd y(5);
  y << 1, 2, 3, 4, 5;
  CHECK(quantile_fit(none, y, 0.5).intercept == doctest::Approx(3).epsilon(1e-9));

  Eigen::MatrixXd none100(100, 0);
  Eigen::VectorXd y100(100);
  for (int i = 0; i < 100; ++i) { y100(i) = i + 1; }
  const double q = quantile_fit(none100, y100, 0.95).intercept;
  CHECK(q >= 94 - 1e-9);
  CHECK(q <= 96 + 1e-9);
}

namespace {

  // The check-loss LP optimum is attained at a fit that interpolates p + 1 points, so an
  // exhaustive search over lines through point pairs finds the minimal objective.
  double lp_vertex_oracle(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double tau) {
    double best = std::numeric_limits<double>::infinity();
    const auto n = x.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        if (x(i, 0) == x(j, 0)) { continue; }
        const double b = (y(j) - y(i)) / (x(j, 0) - x(i, 0));
        const double c = y(i) - b * x(i, 0);
        double obj = 0;
        for (Eigen::Index r = 0; r < n; ++r) { obj += check_loss(y(r) - b * x(r, 0) - c, tau); }
        best = std::min(best, obj);
      }
    }
    return best;
  }

} // namespace

TEST_CASE("quantile fit matches the linear-programming optimum") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> g(0, 1);
  std::exponential_distribution<double> e(1);
  for (int trial = 0; trial < 6; ++trial) {
    const int n = 40 + 30 * trial;
    Eigen::MatrixXd x(n, 1);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      x(i, 0) = g(rng);
      y(i) = 1 + 2 * x(i, 0) + e(rng);
    }
    for (double tau : {0.5, 0.95, 0.99}) {
      const auto m = quantile_fit(x, y, tau);
      const double got = quantile_objective(m, x, y);
      const double want = lp_vertex_oracle(x, y, tau);
      CHECK(got <= want + 1e-6);
      CHECK(got >= want - 1e-6);
    }
  }
}

TEST_CASE("quantile fit of a constant response") {
  Eigen::MatrixXd x(30, 1);
  Eigen::VectorXd y = Eigen::VectorXd::Constant(30, 4.0);
  for (int i = 0; i < 30; ++i) { x(i, 0) = i * 0.1; }
  const auto m = quantile_fit(x, y, 0.95);
  for (double v : {0.0, 1.0, 2.5}) { CHECK(m.predict(std::span<const double>(&v, 1)) == doctest::Approx(4).epsilon(1e-9)); }
}

TEST_CASE("kde normalization, 2D and 3D, both bandwidth rules") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g(0, 1);
  Eigen::MatrixXd p2(300, 2), p3(300, 3);
  for (int i = 0; i < 300; ++i) {
    const double a = g(rng), b = g(rng), c = g(rng);
    p2(i, 0) = a;
    p2(i, 1) = 0.8 * a + 0.3 * b;
    p3(i, 0) = a;
    p3(i, 1) = a + 0.2 * b;
    p3(i, 2) = 0.5 * c - a;
  }
  const std::vector<std::size_t> c2{200, 200};
  const std::vector<std::size_t> c3{40, 60, 60};
  for (auto rule : {BandwidthRule::full, BandwidthRule::diagonal}) {
    const auto g2 = kde_fit(p2, c2, std::nullopt, 1.0, rule);
    CHECK(g2.riemann_sum() >= 0.98);
    CHECK(g2.riemann_sum() <= 1.02);
    const auto g3 = kde_fit(p3, c3, std::nullopt, 1.0, rule);
    CHECK(g3.riemann_sum() >= 0.98);
    CHECK(g3.riemann_sum() <= 1.02);
  }
  const auto diag = kde_fit(p2, c2, std::nullopt, 1.0, BandwidthRule::diagonal);
  CHECK(diag.bandwidth_matrix[1] == 0);
  const auto full = kde_fit(p2, c2, std::nullopt, 1.0, BandwidthRule::full);
  CHECK(full.bandwidth_matrix[1] > 0);
  CHECK(full.bandwidth_matrix[1] == full.bandwidth_matrix[2]);
}

TEST_CASE("kde rebuilt from its bandwidth is identical") {
  std::mt19937_64 rng(19);
  std::normal_distribution<double> g(0, 1);
  Eigen::MatrixXd p(50, 2);
  for (int i = 0; i < 50; ++i) {
    p(i, 0) = g(rng);
    p(i, 1) = p(i, 0) + 0.01 * g(rng);
  }
  const std::vector<std::size_t> c{100, 100};
  const auto a = kde_fit(p, c, std::nullopt, 1.3);
  const auto b = kde_fit(p, c, a.bandwidth_matrix);
  CHECK(a.density == b.density);
  CHECK(a.bandwidth_floored);
}

TEST_CASE("kde single cluster peaks at the nearest cell") {
  Eigen::MatrixXd p(20, 2);
  for (int i = 0; i < 20; ++i) {
    p(i, 0) = 1.0;
    p(i, 1) = -2.0;
  }
  const std::vector<std::size_t> c{101, 101};
  const auto grid = kde_fit(p, c);
  CHECK(grid.bandwidth_floored);
  const auto it = std::max_element(grid.density.begin(), grid.density.end());
  const auto flat = static_cast<std::size_t>(it - grid.density.begin());
  const std::size_t i = flat / 101, j = flat % 101;
  CHECK(i == grid.axes[0].nearest(1.0));
  CHECK(j == grid.axes[1].nearest(-2.0));
}

TEST_CASE("kde of mirrored clusters is mirror symmetric") {
  Eigen::MatrixXd p(4, 2);
  p << -1, 0, 1, 0, -1, 1, 1, 1;
  const std::vector<std::size_t> c{81, 41};
  const double h[4] = {0.09, 0, 0, 0.04};
  const auto grid = kde_fit(p, c, std::vector<double>(h, h + 4));
  for (std::size_t i = 0; i < 81; ++i) {
    for (std::size_t j = 0; j < 41; ++j) {
      CHECK(std::abs(grid.density[i * 41 + j] - grid.density[(80 - i) * 41 + j]) < 1e-9);
    }
  }
}

TEST_CASE("kde conditional slices") {
  std::mt19937_64 rng(29);
  std::normal_distribution<double> g(0, 1);
  const int n = 200;
  Eigen::MatrixXd p(n, 2);
  for (int i = 0; i < n; ++i) {
    p(i, 1) = g(rng);
    p(i, 0) = 2 + 0.7 * p(i, 1) + 0.5 * g(rng);
  }
  const std::vector<std::size_t> c{200, 200};
  for (auto rule : {BandwidthRule::diagonal, BandwidthRule::full}) {
    const auto grid = kde_fit(p, c, std::nullopt, 1.0, rule);
    const double hxx = grid.bandwidth_matrix[0], hxy = grid.bandwidth_matrix[1], hyy = grid.bandwidth_matrix[3];
    for (double y : {-1.0, 0.0, 0.8}) {
      const double yg = grid.axes[1].at(grid.axes[1].nearest(y));
      const auto cond = kde_conditional(grid, 0, std::span<const double>(&y, 1));
      // Nadaraya-Watson with the kernel's own regression of x on y
      double num = 0, den = 0;
      for (int i = 0; i < n; ++i) {
        const double w = std::exp(-0.5 * (yg - p(i, 1)) * (yg - p(i, 1)) / hyy);
        num += w * (p(i, 0) + hxy / hyy * (yg - p(i, 1)));
        den += w;
      }
      (void)hxx;
      CHECK(std::abs(cond.mean() - num / den) <= grid.axes[0].step());
      CHECK(cond.quantile(0) == doctest::Approx(grid.axes[0].lo));
      CHECK(cond.quantile(1) == doctest::Approx(grid.axes[0].hi));
      double s = 0;
      for (double w : cond.weights) { s += w; }
      CHECK(s == doctest::Approx(1));
    }
  }

  Eigen::MatrixXd few(3, 2);
  few << 0, 0, 5, 5, 10, 10;
  const std::vector<std::size_t> odd{201, 201};
  const auto grid = kde_fit(few, odd, std::vector<double>{0.2, 0, 0, 0.2});
  const double y = 5;
  const auto cond = kde_conditional(grid, 0, std::span<const double>(&y, 1));
  CHECK(cond.mode_index() == grid.axes[0].nearest(5));
  const double far = 100;
  CHECK(kde_conditional(grid, 0, std::span<const double>(&far, 1)).clamped);
}

TEST_CASE("empirical quantile") {
  const std::vector<double> a{5, 1, 4, 2, 3};
  CHECK(empirical_quantile(a, 0.5) == 3);
  CHECK(empirical_quantile(a, 0) == 1);
  CHECK(empirical_quantile(a, 1) == 5);
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> u(0, 20);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> v(static_cast<std::size_t>(1 + t % 17));
    for (auto& x : v) { x = u(rng); }
    auto s = v;
    std::sort(s.begin(), s.end());
    for (double q : {0.0, 0.1, 0.25, 0.5, 0.9, 0.975, 1.0}) {
      const double h = (static_cast<double>(s.size()) - 1) * q;
      const auto lo = static_cast<std::size_t>(std::floor(h));
      const auto hi = std::min(lo + 1, s.size() - 1);
      const double want = s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
      CHECK(empirical_quantile(v, q) == doctest::Approx(want));
    }
  }
}
