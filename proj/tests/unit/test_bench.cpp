#include "doctest.h"
#include "tmpdir.hpp"

#include "pros/bench.hpp"
#include "pros/error.hpp"

using namespace pros;

TEST_CASE("coverage and rmse") {
  const std::vector<Interval> iv{{0, 2}, {0, 1}};
  const std::vector<double> truth{1, 1.5};
  CHECK(coverage(iv, truth) == 0.5);
  const std::vector<Interval> closed{{1, 1}};
  CHECK(coverage(closed, std::vector<double>{1}) == 1);
  CHECK(rmse(std::vector<double>{0, 0}, std::vector<double>{3, 4}) == doctest::Approx(3.5355).epsilon(1e-4));
  CHECK_THROWS_AS((void)coverage(iv, std::vector<double>{1}), InvalidArgument);
}

TEST_CASE("savings and exact ratios") {
  CHECK(time_savings(std::vector<std::size_t>{100}, std::vector<std::size_t>{400}) == 0.75);
  CHECK(time_savings(std::vector<std::size_t>{50, 50}, std::vector<std::size_t>{100, 300}) == 0.75);
  std::vector<QueryOutcome> outs(200);
  for (std::size_t i = 0; i < 190; ++i) { outs[i].was_exact = true; }
  for (std::size_t i = 0; i < 195; ++i) { outs[i].was_exact_class = true; }
  CHECK(exact_ratio(outs) == 0.95);
  CHECK(exact_class_ratio(outs) == 0.975);
}

TEST_CASE("presets") {
  for (const char* name : {"desk", "desk25", "cbf", "cbf1", "tiny"}) {
    const auto c = bench_preset(name);
    CHECK_NOTHROW(c.validate());
    CHECK(BenchConfig::from_json(c.to_json()).to_json() == c.to_json());
  }
  CHECK(bench_preset("desk").dataset.count == 100000);
  CHECK(bench_preset("desk25").n_r == 25);
  CHECK(bench_preset("cbf").k == 10);
  CHECK(bench_preset("cbf1").dataset.amplitude == 1.0);
  CHECK_THROWS_AS((void)bench_preset("huge"), InvalidArgument);
}

TEST_CASE("tiny run: cell sizes and determinism") {
  auto c = bench_preset("tiny");
  c.repetitions = 1;
  c.n_t = 5;
  c.dataset.count = 3000;
  const auto a = run_bench(c);
  for (const auto& cell : a.cells) {
    if (!cell.pooled && cell.checkpoint == 0) { CHECK(cell.n == 5); }
  }
  for (const auto& p : a.policies) {
    CHECK(p.n == 5);
    CHECK(p.exact_ratio >= 0);
    CHECK(p.exact_ratio <= 1);
  }
  CHECK(a.policy("none").exact_ratio == 1);
  CHECK(a.policy("none").time_savings == 0);
  CHECK_THROWS_AS((void)a.policy("time:phi=0.2"), InvalidArgument);

  const auto b = run_bench(c);
  TempDir dir;
  write_report(a, dir / "a.json", dir / "a.csv");
  write_report(b, dir / "b.json", dir / "b.csv");
  CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  CHECK_FALSE(a.runtime_seconds.has_value());
}

TEST_CASE("exact class is at least as frequent as an exact answer") {
  auto c = bench_preset("tiny");
  c.dataset = {"cbf", 3000, 64, 3.0, 2, std::nullopt};
  c.k = 5;
  c.repetitions = 1;
  c.n_t = 40;
  c.estimators = {EstimatorMethod::kde2};
  c.policies = {StoppingPolicy::class_probability(0.05), StoppingPolicy::probability(0.05)};
  const auto r = run_bench(c);
  for (const auto& p : r.policies) {
    REQUIRE(p.exact_class_ratio.has_value());
    CHECK(*p.exact_class_ratio >= p.exact_ratio);
    REQUIRE(p.accuracy_ratio.has_value());
  }
}
