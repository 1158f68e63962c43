#include "doctest.h"
#include "oracles.hpp"
#include "fixtures.hpp"
#include "tmpdir.hpp"

#include "pros/error.hpp"
#include "pros/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace pros;


TEST_CASE("witness weights") {
  const std::vector<double> d{1, 2};
  const auto a = witness_weights(d, 5);
  CHECK(a[0] == doctest::Approx(32.0 / 33));
  CHECK(a[1] == doctest::Approx(1.0 / 33));
  const std::vector<double> same{3, 3, 3};
  const std::vector<double> knn{1, 2, 6};
  CHECK(witness_weighted_distance(same, knn, 5) == doctest::Approx(3));
  const std::vector<double> pair{0.7, 0.7};
  const std::vector<double> knn2{2, 4};
  CHECK(witness_weighted_distance(pair, knn2, 5) == doctest::Approx(3));
  const std::vector<double> hit{0.5, 0, 2};
  CHECK(witness_weighted_distance(hit, knn, 5) == 2);
  CHECK_THROWS_AS((void)witness_weights(std::vector<double>{}, 5), InvalidArgument);
}

TEST_CASE("agreement") {
  const std::vector<std::int32_t> five{2, 2, 2, 0, 1};
  auto a = agreement(five);
  CHECK(a.majority == 2);
  CHECK(a.majority_count == 3);
  CHECK(*a.agreement == doctest::Approx(0.5));
  a = agreement(std::vector<std::int32_t>{1, 1, 1});
  CHECK(*a.agreement == 1);
  a = agreement(std::vector<std::int32_t>{4, 2, 3});
  CHECK(a.majority == 2);
  CHECK(*a.agreement == 0);
  a = agreement(std::vector<std::int32_t>{7});
  CHECK(a.majority == 7);
  CHECK_FALSE(a.agreement.has_value());
}

TEST_CASE("training records agree with brute force") {
  const auto& t = walk_env();
  REQUIRE(t.records.size() == 200);
  const auto inside = t.tree.indexed_ids();
  for (std::size_t i = 0; i < 5; ++i) {
    const auto& r = t.records[i * 37];
    const auto q = t.ds->series_as_double(r.query_id);
    const auto want = oracle::knn(inside.size(), 1, [&](std::size_t j) {
      return oracle::ed(q, t.ds->series_as_double(inside[j]));
    });
    CHECK(r.exact_kth() == doctest::Approx(want[0].first).epsilon(1e-12));
    CHECK(r.trace.exact_ids[0] == inside[want[0].second]);
    CHECK(r.witness_distance > 0);
    CHECK(r.leaves_to_exact_answer() <= r.trace.total_leaves);
  }
  for (const auto& r : t.records) {
    CHECK(r.exact_at(r.trace.total_leaves));
    const double bsf = r.at(1).kth_distance();
    CHECK(r.family_target(1) == doctest::Approx(r.exact_kth() * r.exact_kth() / bsf));
    CHECK(r.family_target(r.trace.total_leaves) == r.exact_kth());
  }
}

TEST_CASE("single-leaf training is exact at every checkpoint") {
  const auto& s = single_leaf();
  REQUIRE(s.tree.leaf_count() == 1);
  REQUIRE(s.records.size() == 40);
  for (const auto& r : s.records) {
    CHECK(r.trace.total_leaves == 1);
    for (std::size_t t : {1UL, 4UL, 64UL}) { CHECK(r.exact_at(t)); }
  }
  const auto& cp = s.bundle.per_checkpoint.front();
  REQUIRE(cp.linear.has_value());
  CHECK(cp.linear->coefficients[0] == doctest::Approx(1).epsilon(1e-9));
  CHECK(cp.linear->residual_sigma == doctest::Approx(0).epsilon(1e-9));
  const auto p = exact_probability(s.bundle, 1, 1.0);
  REQUIRE(p.has_value());
  CHECK(*p == 1);
  const std::vector<std::int32_t> labels{0, 0, 1};
  const auto pc = class_probability(s.bundle, 1, 1.0, labels);
  REQUIRE(pc.has_value());
  CHECK(*pc == 1);
  for (const auto& tb : s.bundle.time_bounds) { CHECK(tb.bound(2.0) == 1); }

  const auto& r = s.records.front();
  const EstimateInput in{r.exact_kth(), 1, r.witness_distance};
  const auto e = estimate_distance(s.bundle, in, 0.05, EstimatorMethod::linear);
  CHECK(e.point == doctest::Approx(r.exact_kth()).epsilon(1e-9));
  CHECK(e.lower == doctest::Approx(r.exact_kth()).epsilon(1e-9));
  CHECK(e.upper == r.exact_kth());
}

TEST_CASE("baseline is the empirical quantile of the witness k-NN distances") {
  WitnessSet w;
  w.ids = {0, 1, 2, 3};
  w.knn_distances = {2.5, 2.5, 2.5, 2.5};
  CHECK(baseline_quantile(w, 0.025) == 2.5);
  CHECK(baseline_quantile(w, 0.975) == 2.5);
  const auto& t = walk_env();
  auto sorted = t.witnesses.knn_distances;
  std::sort(sorted.begin(), sorted.end());
  CHECK(baseline_quantile(t.witnesses, 0.0) == sorted.front());
  CHECK(baseline_quantile(t.witnesses, 1.0) == sorted.back());
  const auto e = estimate_distance(t.bundle, EstimateInput{}, 0.05, EstimatorMethod::baseline, Sidedness::two_sided);
  CHECK(e.lower == baseline_quantile(t.witnesses, 0.025));
  CHECK(e.upper == baseline_quantile(t.witnesses, 0.975));
}

TEST_CASE("query-sensitive model on an exact line") {
  std::vector<TrainingRecord> rs(12);
  for (std::size_t i = 0; i < rs.size(); ++i) {
    rs[i].witness_distance = 1.0 + 0.25 * static_cast<double>(i);
    rs[i].trace.exact_distances = {2.0 * rs[i].witness_distance + 1.0};
  }
  const auto m = fit_query_sensitive(rs);
  CHECK(m.coefficients[0] == doctest::Approx(2));
  CHECK(m.intercept == doctest::Approx(1));
  CHECK(m.residual_sigma == doctest::Approx(0).epsilon(1e-9));
  const double mean = 1.0 + 0.25 * 5.5;
  CHECK(m.predict(std::span<const double>(&mean, 1)) == doctest::Approx(2 * mean + 1));
  CHECK_THROWS_AS((void)fit_query_sensitive(std::span<const TrainingRecord>(rs.data(), 5)), InvalidArgument);
}

TEST_CASE("time bound is a 1 - phi quantile of log2 leaves") {
  const auto& t = walk_env();
  for (const auto& tb : t.bundle.time_bounds) {
    const double tau = 1.0 - tb.phi;
    std::size_t below = 0;
    std::size_t at_or_below = 0;
    for (const auto& r : t.records) {
      const double x = r.first_approximate_distance();
      const double fit = tb.model.predict(std::span<const double>(&x, 1));
      const double y = std::log2(static_cast<double>(r.leaves_to_exact_answer()));
      if (y < fit - 1e-7) { ++below; }
      if (y <= fit + 1e-7) { ++at_or_below; }
    }
    const double n = static_cast<double>(t.records.size());
    CHECK(static_cast<double>(below) / n <= tau + 2.0 / n);
    CHECK(static_cast<double>(at_or_below) / n >= tau - 2.0 / n);
  }
  CHECK_THROWS_AS((void)t.bundle.time_bound(0.2), ModelMismatch);
}

TEST_CASE("estimates stay below the best-so-far distance") {
  const auto& t = walk_env();
  for (const auto& r : t.records) {
    for (std::size_t leaves : {1UL, 8UL, 64UL}) {
      if (!r.running_at(leaves)) { continue; }
      const double bsf = r.at(leaves).kth_distance();
      for (auto m : {EstimatorMethod::linear, EstimatorMethod::kde2}) {
        const auto e = estimate_distance(t.bundle, EstimateInput{bsf, leaves, r.witness_distance}, 0.05, m);
        CHECK(e.lower <= e.point);
        CHECK(e.point <= e.upper);
        CHECK(e.upper <= bsf);
        CHECK(e.lower >= 0);
      }
    }
  }
  CHECK_THROWS_AS((void)estimate_distance(t.bundle, EstimateInput{1.0, 1, 1.0}, 1.5, EstimatorMethod::kde2),
                  InvalidArgument);
}

TEST_CASE("exact probability falls with the best-so-far distance") {
  const auto& t = walk_env();
  for (const auto& cp : t.bundle.per_checkpoint) {
    if (!cp.exact_probability || !cp.exact_probability->logistic) { continue; }
    if (cp.leaves > 64) { break; }
    CHECK(cp.exact_probability->logistic->coefficients[0] <= 0);
  }
}

TEST_CASE("bundle json round trip") {
  const auto& t = walk_env();
  TempDir dir;
  const auto a = dir / "a.json";
  const auto b = dir / "b.json";
  save_bundle(t.bundle, a);
  const auto loaded = load_bundle(a);
  save_bundle(loaded, b);
  CHECK(slurp(a) == slurp(b));
  const auto& r = t.records[3];
  const double bsf = r.at(4).kth_distance();
  const EstimateInput in{bsf, 4, r.witness_distance};
  for (auto m : {EstimatorMethod::linear, EstimatorMethod::kde2, EstimatorMethod::witness}) {
    const auto x = estimate_distance(t.bundle, in, 0.05, m);
    const auto y = estimate_distance(loaded, in, 0.05, m);
    CHECK(x.point == doctest::Approx(y.point).epsilon(1e-12));
    CHECK(x.lower == doctest::Approx(y.lower).epsilon(1e-12));
  }
  CHECK(t.bundle.time_bound(0.05).bound(3.0) == loaded.time_bound(0.05).bound(3.0));

  auto j = to_json(t.bundle);
  j["version"] = "pros-models-0";
  CHECK_THROWS_AS((void)bundle_from_json(j), ModelMismatch);
  CHECK_THROWS_AS(loaded.check_compatible(5, DistanceKind::euclidean(), IndexKind::isax, 64), ModelMismatch);
  CHECK_THROWS_AS(loaded.check_compatible(1, DistanceKind::dtw(3), IndexKind::isax, 64), ModelMismatch);
  CHECK_THROWS_AS(loaded.check_compatible(1, DistanceKind::euclidean(), IndexKind::dstree, 64), ModelMismatch);
  CHECK_NOTHROW(loaded.check_compatible(1, DistanceKind::euclidean(), IndexKind::isax, 64));
}
