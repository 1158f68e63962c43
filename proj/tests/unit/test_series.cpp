#include "doctest.h"
#include "oracles.hpp"

#include "pros/error.hpp"
#include "pros/series.hpp"

using namespace pros;

TEST_CASE("z_normalize small cases") {
  const std::vector<double> a{1, 2, 3};
  const auto z = z_normalize(a);
  CHECK(z[0] == doctest::Approx(-1.224744871391589).epsilon(1e-12));
  CHECK(z[1] == doctest::Approx(0.0));
  CHECK(z[2] == doctest::Approx(1.224744871391589).epsilon(1e-12));

  const std::vector<double> flat{5, 5, 5, 5};
  for (double v : z_normalize(flat)) { CHECK(v == 0.0); }

  const std::vector<double> two{0, 2};
  const auto t = z_normalize(two);
  CHECK(t[0] == doctest::Approx(-1));
  CHECK(t[1] == doctest::Approx(1));
}

TEST_CASE("z_normalize rejects bad input") {
  const std::vector<double> one{1};
  CHECK_THROWS_AS((void)z_normalize(one), InvalidArgument);
  const std::vector<double> nan{1, std::nan("")};
  CHECK_THROWS_AS((void)z_normalize(nan), InvalidArgument);
}

TEST_CASE("euclidean") {
  const std::vector<double> a{0, 0, 0};
  const std::vector<double> b{3, 4, 0};
  CHECK(euclidean(a, b) == doctest::Approx(5));
  CHECK(euclidean(b, b) == 0);
  std::mt19937_64 rng(5);
  for (int t = 0; t < 20; ++t) {
    const auto x = oracle::random_walk(rng, 64);
    const auto y = oracle::random_walk(rng, 64);
    CHECK(euclidean(x, y) == doctest::Approx(oracle::ed(x, y)).epsilon(1e-12));
  }
}

TEST_CASE("squared_euclidean abandons strictly above the threshold") {
  const std::vector<double> a{0, 0};
  const std::vector<float> b{3, 4};
  CHECK(squared_euclidean(a, b) == doctest::Approx(25));
  CHECK(squared_euclidean(a, b, 25) == doctest::Approx(25));
  CHECK(std::isinf(squared_euclidean(a, b, 24.9)));
}

TEST_CASE("dtw") {
  const std::vector<double> a{0, 1, 0, 0};
  const std::vector<double> b{0, 0, 1, 0};
  CHECK(dtw(a, b, 1) == doctest::Approx(0));
  CHECK(dtw(a, b, 0) == doctest::Approx(euclidean(a, b)));
  std::mt19937_64 rng(9);
  for (int t = 0; t < 20; ++t) {
    const auto x = oracle::random_walk(rng, 32);
    const auto y = oracle::random_walk(rng, 32);
    CHECK(dtw(x, y, 31) == doctest::Approx(oracle::dtw(x, y, 31)).epsilon(1e-12));
    CHECK(dtw(x, y, 3) == doctest::Approx(oracle::dtw(x, y, 3)).epsilon(1e-12));
    CHECK(dtw(x, y, 0) == doctest::Approx(oracle::ed(x, y)).epsilon(1e-12));
  }
}

TEST_CASE("distance kind text form") {
  CHECK(DistanceKind::parse("ed") == DistanceKind::euclidean());
  CHECK(DistanceKind::parse("dtw:7") == DistanceKind::dtw(7));
  CHECK(DistanceKind::dtw(7).to_string() == "dtw:7");
  CHECK_THROWS_AS((void)DistanceKind::parse("dtw:"), InvalidArgument);
  CHECK_THROWS_AS((void)DistanceKind::parse("manhattan"), InvalidArgument);
}

TEST_CASE("envelope") {
  const std::vector<double> q{1, 3, 2};
  const auto env = build_envelope(q, 1);
  CHECK(env.upper == std::vector<double>{3, 3, 3});
  CHECK(env.lower == std::vector<double>{1, 1, 2});
  const auto id = build_envelope(q, 0);
  CHECK(id.upper == q);
  CHECK(id.lower == q);

  std::mt19937_64 rng(11);
  const auto r = oracle::random_walk(rng, 256);
  std::vector<double> up, lo;
  oracle::envelope(r, 25, up, lo);
  const auto e = build_envelope(r, 25);
  CHECK(e.upper == up);
  CHECK(e.lower == lo);
}

TEST_CASE("lb_keogh") {
  const std::vector<double> q{1, 3, 2};
  const auto env = build_envelope(q, 1);
  const std::vector<double> inside{2, 2, 2};
  CHECK(lb_keogh(env, inside) == 0);
  const std::vector<double> c{4, 3, 2};
  CHECK(lb_keogh(env, c) == doctest::Approx(1));

  std::mt19937_64 rng(13);
  std::uniform_int_distribution<std::size_t> radius(0, 12);
  int violations = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto x = oracle::random_walk(rng, 24);
    const auto y = oracle::random_walk(rng, 24);
    const std::size_t rr = radius(rng);
    std::vector<double> up, lo;
    oracle::envelope(x, rr, up, lo);
    const double lb = lb_keogh(build_envelope(x, rr), y);
    CHECK(lb == doctest::Approx(oracle::keogh(up, lo, y)).epsilon(1e-12));
    if (lb > oracle::dtw(x, y, rr) * (1 + 1e-12)) { ++violations; }
  }
  CHECK(violations == 0);
}
