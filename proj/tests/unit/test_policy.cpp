#include "doctest.h"
#include "fixtures.hpp"

#include "pros/error.hpp"
#include "pros/policy.hpp"

using namespace pros;

namespace {

  GuaranteeBundle pinned_bundle(double p) {
    GuaranteeBundle b;
    b.checkpoints = {1, 2};
    CheckpointModels m;
    m.leaves = 1;
    m.exact_probability = OutcomeModel{std::nullopt, p};
    b.per_checkpoint.push_back(m);
    return b;
  }

  ProgressiveEvent event_at(std::size_t leaves, double bsf) {
    ProgressiveEvent e;
    e.leaves_visited = leaves;
    e.bsf_distances = {bsf};
    e.bsf_ids = {0};
    return e;
  }

} // namespace

TEST_CASE("decision moments") {
  const auto m = plan_moments(1600, 16);
  REQUIRE(m.size() == 16);
  for (std::size_t i = 0; i < 16; ++i) { CHECK(m[i] == 100 * (i + 1)); }
  CHECK(plan_moments(1600, 1) == std::vector<std::size_t>{1600});
  CHECK(plan_moments(10, 16) == std::vector<std::size_t>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  CHECK(plan_moments(1, 16) == std::vector<std::size_t>{1});
  CHECK_THROWS_AS((void)plan_moments(0, 16), InvalidArgument);
}

TEST_CASE("policy text and json") {
  for (const char* text : {"none", "distance:eps=0.05,theta=0.01", "time:phi=0.05", "prob:phi=0.01", "class:phi=0.05"}) {
    const auto p = StoppingPolicy::parse(text);
    CHECK(p.to_string() == text);
    CHECK(StoppingPolicy::from_json(p.to_json()).to_string() == text);
  }
  CHECK_THROWS_AS((void)StoppingPolicy::parse("time:phi=2"), InvalidArgument);
  CHECK_THROWS_AS((void)StoppingPolicy::parse("sometimes"), InvalidArgument);
}

TEST_CASE("decisions at a single moment") {
  const auto prob = StoppingPolicy::probability(0.05);
  CHECK(decide(prob, pinned_bundle(0.96), event_at(1, 1), {}).stop);
  CHECK_FALSE(decide(prob, pinned_bundle(0.94), event_at(1, 1), {}).stop);
  CHECK_FALSE(decide(prob, GuaranteeBundle{}, event_at(1, 1), {}).stop);

  const auto time = StoppingPolicy::time_bound(0.05);
  CHECK(decide(time, GuaranteeBundle{}, event_at(512, 1), {512, {}}).stop);
  CHECK_FALSE(decide(time, GuaranteeBundle{}, event_at(511, 1), {512, {}}).stop);

  CHECK(distance_error_met(1.04, 1.0, 0.05));
  CHECK_FALSE(distance_error_met(1.06, 1.0, 0.05));
  CHECK_FALSE(decide(StoppingPolicy::none(), pinned_bundle(1), event_at(1, 1), {}).stop);

  const auto& s = single_leaf();
  const auto& r = s.records.front();
  ProgressiveEvent e = r.at(1);
  CHECK(decide(StoppingPolicy::distance_error(0.05, 0.05), s.bundle, e, {}).stop);
}

TEST_CASE("no policy runs to the exact answer") {
  const auto& env = walk_env();
  RunConfig rc;
  for (std::size_t i = 0; i < 5; ++i) {
    const auto q = env.ds->series_as_double(env.testing[i]);
    const auto out = run_with_policy(env.tree, env.bundle, q, StoppingPolicy::none(), rc);
    CHECK_FALSE(out.stopped);
    CHECK(out.was_exact);
    CHECK(out.savings() == 0);
    CHECK(out.stopped_at == *out.total_leaves);
    CHECK(out.family_error == 0);
  }
}

TEST_CASE("replaying a trace matches running the policy") {
  for (const TrainedEnv* env : {&walk_env(), &cbf_env()}) {
    const std::size_t k = env->bundle.k;
    std::vector<StoppingPolicy> policies{StoppingPolicy::none(), StoppingPolicy::time_bound(0.05),
                                         StoppingPolicy::time_bound(0.01), StoppingPolicy::probability(0.05),
                                         StoppingPolicy::distance_error(0.05, 0.05)};
    if (env->ds->has_labels()) { policies.push_back(StoppingPolicy::class_probability(0.05)); }
    auto planned = StoppingPolicy::probability(0.05);
    planned.moments = plan_moments(env->records, 16);
    policies.push_back(planned);
    RunConfig rc;
    rc.k = k;
    SearchConfig sc;
    sc.k = k;
    std::size_t stops = 0;
    for (std::size_t i = 0; i < 40; ++i) {
      const auto q = env->ds->series_as_double(env->testing[i]);
      const auto trace = progressive_knn(env->tree, q, sc);
      for (const auto& p : policies) {
        const auto run = run_with_policy(env->tree, env->bundle, q, p, rc);
        const auto sim = simulate_policy(trace, env->bundle, p, env->ds.get());
        CHECK(run.stopped == sim.stopped);
        CHECK(run.stopped_at == sim.stopped_at);
        CHECK(run.stop_reason == sim.stop_reason);
        CHECK(run.time_bound == sim.time_bound);
        CHECK(run.answer == sim.answer);
        CHECK(run.was_exact == sim.was_exact);
        CHECK(run.family_error == doctest::Approx(sim.family_error));
        CHECK(run.predicted_class == sim.predicted_class);
        stops += run.stopped ? 1 : 0;
      }
    }
    CHECK(stops > 0);
  }
}

TEST_CASE("leaf budget of the time bound") {
  const auto& env = walk_env();
  RunConfig rc;
  for (std::size_t i = 0; i < 20; ++i) {
    const auto q = env.ds->series_as_double(env.testing[i]);
    const auto out = run_with_policy(env.tree, env.bundle, q, StoppingPolicy::time_bound(0.05), rc);
    REQUIRE(out.time_bound.has_value());
    CHECK(out.stopped_at <= std::max<std::size_t>(*out.time_bound, 1));
    if (out.stopped) { CHECK(out.stopped_at == *out.time_bound); }
  }
}
