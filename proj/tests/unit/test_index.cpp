#include "doctest.h"
#include "oracles.hpp"
#include "tmpdir.hpp"

#include "pros/error.hpp"
#include "pros/index.hpp"
#include "pros/search.hpp"

#include <fstream>

using namespace pros;

namespace {

  std::vector<std::uint32_t> ids_under(const IndexTree& t, std::uint32_t node) {
    std::vector<std::uint32_t> out;
    std::vector<std::uint32_t> stack{node};
    while (!stack.empty()) {
      const auto n = stack.back();
      stack.pop_back();
      const auto& nd = t.node(n);
      out.insert(out.end(), nd.ids.begin(), nd.ids.end());
      stack.insert(stack.end(), nd.children.begin(), nd.children.end());
    }
    return out;
  }

  double true_distance(const Dataset& ds, const std::vector<double>& q, std::uint32_t id, const DistanceKind& d) {
    const auto c = ds.series_as_double(id);
    return d.is_dtw() ? oracle::dtw(q, c, d.band_radius) : oracle::ed(q, c);
  }

} // namespace

TEST_CASE("single series gives a single leaf") {
  auto ds = std::make_shared<const Dataset>(make_random_walk(1, 16, 1));
  for (auto kind : {IndexKind::isax, IndexKind::dstree}) {
    IndexConfig cfg;
    cfg.kind = kind;
    cfg.segment_count = 4;
    const auto t = build_index(ds, cfg);
    CHECK(t.leaf_count() == 1);
    CHECK(t.indexed_count() == 1);
  }
}

TEST_CASE("identical series overflow a leaf instead of splitting forever") {
  std::vector<float> v;
  const auto one = make_random_walk(1, 16, 3);
  for (int i = 0; i < 12; ++i) { v.insert(v.end(), one.values().begin(), one.values().end()); }
  auto ds = std::make_shared<const Dataset>(16, v);
  for (auto kind : {IndexKind::isax, IndexKind::dstree}) {
    IndexConfig cfg;
    cfg.kind = kind;
    cfg.segment_count = 4;
    cfg.leaf_threshold = 10;
    const auto t = build_index(ds, cfg);
    std::size_t total = 0;
    for (auto l : t.leaves()) { total += t.node(l).ids.size(); }
    CHECK(total == 12);
  }
}

TEST_CASE("leaf sizes respect the threshold and cover every series") {
  auto ds = std::make_shared<const Dataset>(make_random_walk(10000, 64, 2));
  for (auto kind : {IndexKind::isax, IndexKind::dstree}) {
    IndexConfig cfg;
    cfg.kind = kind;
    const auto t = build_index(ds, cfg);
    std::vector<int> seen(ds->size(), 0);
    for (auto l : t.leaves()) {
      CHECK(t.node(l).ids.size() <= cfg.leaf_threshold);
      for (auto id : t.node(l).ids) { ++seen[id]; }
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
    CHECK(t.indexed_ids().size() == ds->size());
    CHECK(t.held_out_ids().empty());
  }
}

TEST_CASE("subset builds index only the subset") {
  auto ds = std::make_shared<const Dataset>(make_random_walk(500, 32, 4));
  std::vector<std::uint32_t> even;
  for (std::uint32_t i = 0; i < 500; i += 2) { even.push_back(i); }
  const auto t = build_index(ds, IndexConfig{}, std::span<const std::uint32_t>(even));
  CHECK(t.indexed_ids() == even);
  CHECK(t.held_out_ids().size() == 250);
}

TEST_CASE("node mindist never exceeds the true distance of contained series") {
  auto ds = std::make_shared<const Dataset>(make_random_walk(3000, 64, 6));
  std::mt19937_64 rng(17);
  int violations = 0;
  int audits = 0;
  for (auto kind : {IndexKind::isax, IndexKind::dstree}) {
    IndexConfig cfg;
    cfg.kind = kind;
    cfg.leaf_threshold = 50;
    const auto t = build_index(ds, cfg);
    for (const auto& dist : {DistanceKind::euclidean(), DistanceKind::dtw(6)}) {
      for (int qi = 0; qi < 5; ++qi) {
        const auto q = oracle::random_walk(rng, 64);
        const auto qs = t.summarize_query(q, dist);
        for (std::uint32_t n = 0; n < t.nodes().size(); n += 3) {
          const auto ids = ids_under(t, n);
          double best = kInfinity;
          for (auto id : ids) { best = std::min(best, true_distance(*ds, q, id, dist)); }
          ++audits;
          if (t.mindist(qs, n) > best * (1 + 1e-12)) { ++violations; }
        }
      }
    }
  }
  CHECK(audits >= 1000);
  CHECK(violations == 0);
}

TEST_CASE("query overlapping a node region gives mindist zero") {
  auto ds = std::make_shared<const Dataset>(make_random_walk(400, 32, 8));
  IndexConfig cfg;
  cfg.kind = IndexKind::dstree;
  cfg.leaf_threshold = 40;
  const auto t = build_index(ds, cfg);
  for (auto l : t.leaves()) {
    const auto q = ds->series_as_double(t.node(l).ids.front());
    CHECK(t.mindist(t.summarize_query(q, DistanceKind::euclidean()), l) == 0);
  }
}

TEST_CASE("approximate search") {
  auto small = std::make_shared<const Dataset>(make_random_walk(80, 32, 1));
  const auto one_leaf = build_index(small, IndexConfig{});
  REQUIRE(one_leaf.leaf_count() == 1);
  std::mt19937_64 rng(3);
  const auto q = oracle::random_walk(rng, 32);
  CHECK(approximate_search(one_leaf, q, 3, DistanceKind::euclidean()) ==
        brute_force_knn(*small, q, 3, DistanceKind::euclidean()));

  auto ds = std::make_shared<const Dataset>(make_random_walk(5000, 64, 9));
  const auto t = build_index(ds, IndexConfig{});
  const auto self = approximate_search(t, ds->series_as_double(123), 1, DistanceKind::euclidean());
  CHECK(self[0].distance == 0);
  for (int i = 0; i < 100; ++i) {
    const auto qq = oracle::random_walk(rng, 64);
    const auto approx = approximate_search(t, qq, 5, DistanceKind::euclidean());
    const auto exact = brute_force_knn(*ds, qq, 5, DistanceKind::euclidean());
    for (std::size_t r = 0; r < 5; ++r) { CHECK(approx[r].distance >= exact[r].distance); }
  }
}

TEST_CASE("save and load round trip") {
  TempDir dir;
  auto ds = std::make_shared<const Dataset>(make_random_walk(3000, 64, 12));
  for (auto kind : {IndexKind::isax, IndexKind::dstree}) {
    IndexConfig cfg;
    cfg.kind = kind;
    const auto t = build_index(ds, cfg);
    save_index(t, dir / "t.idx");
    const auto back = load_index(dir / "t.idx", ds);
    CHECK(back.leaf_count() == t.leaf_count());
    std::mt19937_64 rng(5);
    for (int i = 0; i < 50; ++i) {
      const auto q = oracle::random_walk(rng, 64);
      CHECK(approximate_search(t, q, 3, DistanceKind::euclidean()) ==
            approximate_search(back, q, 3, DistanceKind::euclidean()));
    }
    save_index(back, dir / "u.idx");
    CHECK(slurp(dir / "t.idx") == slurp(dir / "u.idx"));
  }
}

TEST_CASE("corrupted or missing index files are rejected") {
  TempDir dir;
  auto ds = std::make_shared<const Dataset>(make_random_walk(500, 32, 12));
  const auto t = build_index(ds, IndexConfig{});
  save_index(t, dir / "t.idx");
  auto bytes = slurp(dir / "t.idx");
  bytes[bytes.size() / 2] = static_cast<char>(bytes[bytes.size() / 2] ^ 0x5a);
  {
    std::ofstream out(dir / "bad.idx", std::ios::binary);
    out << bytes;
  }
  CHECK_THROWS_AS((void)load_index(dir / "bad.idx", ds), IoError);
  {
    std::ofstream out(dir / "short.idx", std::ios::binary);
    out << bytes.substr(0, 20);
  }
  CHECK_THROWS_AS((void)load_index(dir / "short.idx", ds), IoError);
  CHECK_THROWS((void)load_index("", ds));
  CHECK_THROWS((void)save_index(t, ""));
  auto other = std::make_shared<const Dataset>(make_random_walk(400, 32, 12));
  CHECK_THROWS_AS((void)load_index(dir / "t.idx", other), IoError);
}
