#include "doctest.h"
#include "tmpdir.hpp"

#include "pros/dataset.hpp"
#include "pros/error.hpp"
#include "pros/series.hpp"

#include <fstream>
#include <set>

using namespace pros;

TEST_CASE("random walk generation is deterministic") {
  TempDir dir;
  generate_random_walk(dir / "a.bin", 200, 32, 7);
  generate_random_walk(dir / "b.bin", 200, 32, 7);
  CHECK(slurp(dir / "a.bin") == slurp(dir / "b.bin"));
  generate_random_walk(dir / "c.bin", 200, 32, 8);
  CHECK(slurp(dir / "a.bin") != slurp(dir / "c.bin"));
}

TEST_CASE("random walk last-point variance grows like the length") {
  const std::size_t len = 64;
  double s = 0, s2 = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const double v = random_walk_raw(len, 3, static_cast<std::uint64_t>(i)).back();
    s += v;
    s2 += v * v;
  }
  const double var = s2 / n - (s / n) * (s / n);
  CHECK(var > 0.9 * len);
  CHECK(var < 1.1 * len);
}

TEST_CASE("tiny random walk is finite and normalized") {
  const auto ds = make_random_walk(1, 2, 1);
  const auto v = ds.series_as_double(0);
  REQUIRE(v.size() == 2);
  CHECK(std::isfinite(v[0]));
  CHECK(std::isfinite(v[1]));
  CHECK(std::abs(v[0] + v[1]) < 1e-6);
}

TEST_CASE("cbf labels") {
  TempDir dir;
  const auto d = generate_cbf(dir / "cbf.bin", 300, 128, CbfParams{3.0, {1, 0, 0}}, 2);
  REQUIRE(d.label_path);
  std::ifstream in(*d.label_path);
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    CHECK(line == "0");
    ++lines;
  }
  CHECK(lines == 300);
  const auto ds = load_dataset(d);
  CHECK(ds.class_count() == 1);
}

namespace {
  double one_nn_accuracy(const Dataset& ds) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto q = ds.series_as_double(i);
      double best = kInfinity;
      std::size_t arg = 0;
      for (std::size_t j = 0; j < ds.size(); ++j) {
        if (j == i) { continue; }
        const double d = squared_euclidean(q, ds.series(j), best);
        if (d < best) {
          best = d;
          arg = j;
        }
      }
      if (ds.label(arg) == ds.label(i)) { ++correct; }
    }
    return static_cast<double>(correct) / static_cast<double>(ds.size());
  }
} // namespace

TEST_CASE("cbf amplitude orders 1-NN accuracy") {
  const auto strong = make_cbf(2000, 128, CbfParams{3.0, {1.0 / 3, 1.0 / 3, 1.0 / 3}}, 5);
  const auto weak = make_cbf(2000, 128, CbfParams{1.0, {1.0 / 3, 1.0 / 3, 1.0 / 3}}, 5);
  const double a3 = one_nn_accuracy(strong);
  const double a1 = one_nn_accuracy(weak);
  MESSAGE("1-NN accuracy amplitude 3: " << a3 << ", amplitude 1: " << a1);
  CHECK(a3 > a1);
}

TEST_CASE("pools and draws") {
  const auto pools = sample_pools(5000, 300, 400, 9);
  std::set<std::uint32_t> w(pools.witness_pool.begin(), pools.witness_pool.end());
  for (auto id : pools.query_pool) { CHECK(w.count(id) == 0); }
  CHECK(w.size() == 300);

  const auto a = draw_repetition(pools, 50, 100, 200, 9, 0);
  const auto b = draw_repetition(pools, 50, 100, 200, 9, 0);
  CHECK(a.witnesses == b.witnesses);
  CHECK(a.training == b.training);
  CHECK(a.testing == b.testing);
  std::set<std::size_t> tr(a.training.begin(), a.training.end());
  for (auto t : a.testing) { CHECK(tr.count(t) == 0); }
  const auto c = draw_repetition(pools, 50, 100, 200, 9, 1);
  CHECK(c.training != a.training);

  const auto outside = ids_outside_pools(pools, 5000);
  CHECK(outside.size() == 5000 - 700);
  for (auto id : outside) { CHECK(w.count(id) == 0); }
  CHECK_THROWS_AS((void)sample_pools(10, 6, 6, 1), InvalidArgument);
}

TEST_CASE("write and read round trip") {
  TempDir dir;
  const auto ds = make_cbf(50, 16, CbfParams{}, 4);
  const auto d = write_dataset(ds, dir / "x.bin");
  const auto back = load_dataset(load_descriptor(descriptor_path_for(dir / "x.bin")));
  CHECK(back.values() == ds.values());
  CHECK(back.labels() == ds.labels());
  const auto s7 = read_series(d, 7);
  CHECK(std::equal(s7.begin(), s7.end(), ds.series(7).begin()));
  std::size_t seen = 0;
  stream_dataset(d, [&](std::size_t id, std::span<const float> s) {
    CHECK(std::equal(s.begin(), s.end(), ds.series(id).begin()));
    ++seen;
  });
  CHECK(seen == 50);
  CHECK_THROWS((void)read_series(d, 50));
}

TEST_CASE("descriptor validation") {
  TempDir dir;
  auto d = generate_random_walk(dir / "r.bin", 10, 8, 1);
  d.count = 11;
  CHECK_THROWS_AS(validate_descriptor(d), IoError);
  CHECK_THROWS_AS((void)load_descriptor(dir / "missing.json"), IoError);
}
