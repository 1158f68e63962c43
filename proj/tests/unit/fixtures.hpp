#pragma once

#include "pros/models.hpp"

#include <memory>
#include <numeric>
#include <span>
#include <vector>

/// A trained setup: pools kept out of the index, witnesses, training records and a bundle.
/// `testing` holds query ids never used for training.
struct TrainedEnv {
  std::shared_ptr<const pros::Dataset> ds;
  pros::IndexTree tree;
  pros::WitnessSet witnesses;
  std::vector<pros::TrainingRecord> records;
  pros::GuaranteeBundle bundle;
  std::vector<std::uint32_t> testing;
};

inline TrainedEnv make_env(pros::Dataset data, std::size_t k, std::size_t leaf_threshold) {
  using namespace pros;
  TrainedEnv out;
  out.ds = std::make_shared<const Dataset>(std::move(data));
  const auto pools = sample_pools(out.ds->size(), 150, 300, 5);
  const auto inside = ids_outside_pools(pools, out.ds->size());
  IndexConfig ic;
  ic.leaf_threshold = leaf_threshold;
  out.tree = build_index(out.ds, ic, std::span<const std::uint32_t>(inside));
  const std::vector<std::uint32_t> w(pools.witness_pool.begin(), pools.witness_pool.begin() + 100);
  out.witnesses = make_witness_set(out.tree, *out.ds, w, k, DistanceKind::euclidean());
  const std::vector<std::uint32_t> q(pools.query_pool.begin(), pools.query_pool.begin() + 200);
  out.testing.assign(pools.query_pool.begin() + 200, pools.query_pool.end());
  CollectConfig cc;
  cc.k = k;
  out.records = collect_training(out.tree, *out.ds, q, out.witnesses, cc);
  TrainingConfig tc;
  tc.fit_kde3 = false;
  out.bundle = fit_bundle(out.records, out.witnesses, out.tree, cc, tc);
  return out;
}

/// 20K random walks of length 64, k = 1.
inline const TrainedEnv& walk_env() {
  static const TrainedEnv e = make_env(pros::make_random_walk(20000, 64, 31), 1, 100);
  return e;
}

/// 10K CBF series of length 64, k = 5.
inline const TrainedEnv& cbf_env() {
  static const TrainedEnv e = make_env(pros::make_cbf(10000, 64, pros::CbfParams{}, 13), 5, 50);
  return e;
}

struct SingleLeafEnv {
  std::shared_ptr<const pros::Dataset> ds;
  pros::IndexTree tree;
  std::vector<pros::TrainingRecord> records;
  pros::GuaranteeBundle bundle;
};

/// Every query finishes in one leaf, so every progressive answer is exact. Labeled, k = 3.
inline const SingleLeafEnv& single_leaf() {
  using namespace pros;
  static const SingleLeafEnv s = [] {
    SingleLeafEnv out;
    out.ds = std::make_shared<const Dataset>(make_cbf(150, 32, CbfParams{}, 3));
    std::vector<std::uint32_t> inside(90);
    std::iota(inside.begin(), inside.end(), 0U);
    out.tree = build_index(out.ds, IndexConfig{}, std::span<const std::uint32_t>(inside));
    std::vector<std::uint32_t> w(20), q(40);
    std::iota(w.begin(), w.end(), 90U);
    std::iota(q.begin(), q.end(), 110U);
    CollectConfig cc;
    cc.k = 3;
    const auto ws = make_witness_set(out.tree, *out.ds, w, 3, DistanceKind::euclidean());
    out.records = collect_training(out.tree, *out.ds, q, ws, cc);
    TrainingConfig tc;
    tc.fit_kde3 = false;
    out.bundle = fit_bundle(out.records, ws, out.tree, cc, tc);
    return out;
  }();
  return s;
}
