#include "doctest.h"
#include "oracles.hpp"

#include "pros/error.hpp"
#include "pros/index.hpp"
#include "pros/search.hpp"

#include <atomic>

using namespace pros;

TEST_CASE("brute force agrees with an independent re-scan") {
  const auto ds = make_random_walk(1000, 32, 4);
  std::mt19937_64 rng(8);
  for (int i = 0; i < 10; ++i) {
    const auto q = oracle::random_walk(rng, 32);
    for (const auto& dist : {DistanceKind::euclidean(), DistanceKind::dtw(3)}) {
      const auto got = brute_force_knn(ds, q, 10, dist);
      const auto want = oracle::knn(ds.size(), 10, [&](std::size_t id) {
        const auto c = ds.series_as_double(id);
        return dist.is_dtw() ? oracle::dtw(q, c, 3) : oracle::ed(q, c);
      });
      REQUIRE(got.size() == 10);
      for (std::size_t r = 0; r < 10; ++r) {
        CHECK(got[r].id == want[r].second);
        CHECK(got[r].distance == doctest::Approx(want[r].first).epsilon(1e-12));
      }
    }
  }
  const auto self = brute_force_knn(ds, ds.series_as_double(5), 1, DistanceKind::euclidean());
  CHECK(self[0].id == 5);
  CHECK(self[0].distance == 0);
  const auto all = brute_force_knn(ds, ds.series_as_double(5), ds.size(), DistanceKind::euclidean());
  CHECK(all.size() == ds.size());
  CHECK(std::is_sorted(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
    return a.distance < b.distance;
  }));
}

TEST_CASE("ties are broken by the smaller id") {
  std::vector<float> v;
  const auto one = make_random_walk(1, 8, 1);
  for (int i = 0; i < 5; ++i) { v.insert(v.end(), one.values().begin(), one.values().end()); }
  const Dataset ds(8, v);
  const auto got = brute_force_knn(ds, ds.series_as_double(0), 3, DistanceKind::euclidean());
  CHECK(got[0].id == 0);
  CHECK(got[1].id == 1);
  CHECK(got[2].id == 2);
}

TEST_CASE("single-leaf search is one exact event") {
  auto ds = std::make_shared<const Dataset>(make_random_walk(50, 32, 2));
  const auto t = build_index(ds, IndexConfig{});
  std::mt19937_64 rng(1);
  const auto q = oracle::random_walk(rng, 32);
  SearchConfig cfg;
  cfg.k = 2;
  const auto trace = progressive_knn(t, q, cfg);
  CHECK(trace.total_leaves == 1);
  REQUIRE(trace.events.size() == 1);
  CHECK(trace.events[0].has(ProgressiveEvent::final));
  CHECK(trace.events[0].neighbors() == brute_force_knn(*ds, q, 2, DistanceKind::euclidean()));
  CHECK(trace.leaves_to_exact == std::vector<std::size_t>{1, 1});
}

TEST_CASE("progressive search is exact and monotone") {
  auto ds = std::make_shared<const Dataset>(make_random_walk(4000, 64, 7));
  std::mt19937_64 rng(19);
  for (auto kind : {IndexKind::isax, IndexKind::dstree}) {
    IndexConfig icfg;
    icfg.kind = kind;
    icfg.leaf_threshold = 40;
    const auto t = build_index(ds, icfg);
    for (const auto& dist : {DistanceKind::euclidean(), DistanceKind::dtw(6)}) {
      for (std::size_t k : {1UL, 7UL}) {
        for (int i = 0; i < 5; ++i) {
          const auto q = oracle::random_walk(rng, 64);
          SearchConfig cfg;
          cfg.k = k;
          cfg.distance = dist;
          const auto trace = progressive_knn(t, q, cfg);
          CHECK(trace.completed());
          CHECK(trace.improvements.back().neighbors() == brute_force_knn(*ds, q, k, dist));
          for (std::size_t e = 1; e < trace.improvements.size(); ++e) {
            for (std::size_t r = 0; r < k; ++r) {
              CHECK(trace.improvements[e].bsf_distances[r] <= trace.improvements[e - 1].bsf_distances[r]);
            }
            CHECK(trace.improvements[e].leaves_visited > trace.improvements[e - 1].leaves_visited);
          }
          CHECK(std::is_sorted(trace.leaves_to_exact.begin(), trace.leaves_to_exact.end()));
          CHECK(trace.leaves_to_exact.back() <= trace.total_leaves);
          for (const auto& e : trace.events) { CHECK(e.bsf_distances.size() == k); }
        }
      }
    }
  }
}

TEST_CASE("checkpoints, callbacks and stops") {
  auto ds = std::make_shared<const Dataset>(make_random_walk(5000, 64, 3));
  IndexConfig icfg;
  icfg.leaf_threshold = 20;
  const auto t = build_index(ds, icfg);
  std::mt19937_64 rng(2);
  const auto q = oracle::random_walk(rng, 64);
  SearchConfig cfg;
  cfg.checkpoints = {1, 4, 16};
  const auto full = progressive_knn(t, q, cfg);
  REQUIRE(full.total_leaves > 16);
  std::vector<std::size_t> cps;
  for (const auto& e : full.events) {
    if (e.has(ProgressiveEvent::checkpoint)) { cps.push_back(e.leaves_visited); }
  }
  CHECK(cps == std::vector<std::size_t>{1, 4, 16});

  const auto stopped = progressive_knn(t, q, cfg, [](const ProgressiveEvent& e) {
    return EventResponse{.stop = e.leaves_visited >= 4, .leaf_limit = std::nullopt};
  });
  CHECK(!stopped.completed());
  CHECK(stopped.total_leaves == 4);
  CHECK(stopped.events.back().has(ProgressiveEvent::stopped));
  CHECK(stopped.bsf_at(4).bsf_distances == full.bsf_at(4).bsf_distances);

  const auto limited = progressive_knn(t, q, cfg, [](const ProgressiveEvent&) {
    return EventResponse{.stop = false, .leaf_limit = 7};
  });
  CHECK(limited.total_leaves == 7);

  std::atomic<bool> flag{true};
  cfg.stop_flag = &flag;
  const auto user = progressive_knn(t, q, cfg);
  CHECK(user.total_leaves == 1);
  CHECK(user.events.back().bsf_distances == full.bsf_at(1).bsf_distances);
}

TEST_CASE("relative and family-corrected errors") {
  CHECK(relative_error(1.1, 1.0) == doctest::Approx(0.1));
  CHECK(relative_error(3.0, 3.0) == 0);
  CHECK(relative_error(2.2, 4.0 / 3.0) == doctest::Approx(0.65));

  const std::vector<double> exact{1, 2};
  const std::vector<double> bsf{1.5, 2.2};
  CHECK(family_corrected_knn(exact, bsf) == doctest::Approx(4.0 / 3.0));
  CHECK(family_error(exact, bsf) == doctest::Approx(0.65));
  CHECK(family_error(exact, bsf) >= 0.5);
  CHECK(family_corrected_knn(exact, exact) == 2);
  CHECK(is_exact(exact, exact));
  CHECK(!is_exact(exact, bsf));
  const std::vector<double> with_zero{0, 2};
  const std::vector<double> bsf_zero{0.5, 2.2};
  CHECK(family_corrected_knn(with_zero, bsf_zero) == doctest::Approx(2 / 1.1));
}
