#include "pros/bench.hpp"

#include "pros/error.hpp"
#include "pros/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

namespace pros {

  using nlohmann::json;

  double coverage(std::span<const Interval> intervals, std::span<const double> truths) {
    require(intervals.size() == truths.size(), "coverage: length mismatch");
    require(!truths.empty(), "coverage: empty input");
    std::size_t hit = 0;
    for (std::size_t i = 0; i < truths.size(); ++i) {
      if (intervals[i].lower <= truths[i] && truths[i] <= intervals[i].upper) { ++hit; }
    }
    return static_cast<double>(hit) / static_cast<double>(truths.size());
  }

  double rmse(std::span<const double> points, std::span<const double> truths) {
    require(points.size() == truths.size(), "rmse: length mismatch");
    require(!points.empty(), "rmse: empty input");
    double ss = 0;
    for (std::size_t i = 0; i < points.size(); ++i) { ss += (points[i] - truths[i]) * (points[i] - truths[i]); }
    return std::sqrt(ss / static_cast<double>(points.size()));
  }

  double time_savings(std::span<const std::size_t> stopped, std::span<const std::size_t> totals) {
    require(stopped.size() == totals.size(), "time_savings: length mismatch");
    double s = 0;
    double t = 0;
    for (std::size_t i = 0; i < stopped.size(); ++i) {
      require(stopped[i] <= totals[i], "time_savings: stopped exceeds total");
      s += static_cast<double>(stopped[i]);
      t += static_cast<double>(totals[i]);
    }
    require(t > 0, "time_savings: zero total work");
    return 1.0 - s / t;
  }

  double exact_ratio(std::span<const QueryOutcome> outcomes) {
    if (outcomes.empty()) { return 0; }
    std::size_t n = 0;
    for (const auto& o : outcomes) { n += o.was_exact ? 1 : 0; }
    return static_cast<double>(n) / static_cast<double>(outcomes.size());
  }

  double exact_class_ratio(std::span<const QueryOutcome> outcomes) {
    if (outcomes.empty()) { return 0; }
    std::size_t n = 0;
    for (const auto& o : outcomes) { n += o.was_exact_class ? 1 : 0; }
    return static_cast<double>(n) / static_cast<double>(outcomes.size());
  }

  // ---- configuration -----------------------------------------------------------------------

  json BenchConfig::to_json() const {
    json ds{{"generator", dataset.generator},
            {"count", dataset.count},
            {"length", dataset.length},
            {"amplitude", dataset.amplitude},
            {"seed", dataset.seed}};
    if (dataset.descriptor) { ds["descriptor"] = dataset.descriptor->generic_string(); }
    json est = json::array();
    for (auto m : estimators) { est.push_back(pros::to_string(m)); }
    json pol = json::array();
    for (const auto& p : policies) { pol.push_back(p.to_string()); }
    return {{"name", name},
            {"dataset", ds},
            {"index",
             {{"kind", pros::to_string(index.kind)},
              {"segments", index.segment_count},
              {"leaf_threshold", index.leaf_threshold}}},
            {"k", k},
            {"distance", distance.to_string()},
            {"witness_pool", witness_pool},
            {"query_pool", query_pool},
            {"n_w", n_w},
            {"n_r", n_r},
            {"n_t", n_t},
            {"repetitions", repetitions},
            {"checkpoints", checkpoints},
            {"estimators", est},
            {"thetas", thetas},
            {"policies", pol},
            {"moments", moments},
            {"bandwidth_scale", bandwidth_scale},
            {"bandwidth_rule", bandwidth_rule == BandwidthRule::full ? "full" : "diagonal"},
            {"seed", seed},
            {"wallclock", wallclock}};
  }

  BenchConfig BenchConfig::from_json(const json& j) {
    BenchConfig c = j.contains("preset") ? bench_preset(j["preset"].get<std::string>()) : BenchConfig{};
    try {
      if (j.contains("name")) { j["name"].get_to(c.name); }
      if (j.contains("dataset")) {
        const auto& d = j["dataset"];
        if (d.contains("generator")) { d["generator"].get_to(c.dataset.generator); }
        if (d.contains("count")) { d["count"].get_to(c.dataset.count); }
        if (d.contains("length")) { d["length"].get_to(c.dataset.length); }
        if (d.contains("amplitude")) { d["amplitude"].get_to(c.dataset.amplitude); }
        if (d.contains("seed")) { d["seed"].get_to(c.dataset.seed); }
        if (d.contains("descriptor")) { c.dataset.descriptor = d["descriptor"].get<std::string>(); }
      }
      if (j.contains("index")) {
        const auto& i = j["index"];
        if (i.contains("kind")) { c.index.kind = parse_index_kind(i["kind"].get<std::string>()); }
        if (i.contains("segments")) { i["segments"].get_to(c.index.segment_count); }
        if (i.contains("leaf_threshold")) { i["leaf_threshold"].get_to(c.index.leaf_threshold); }
      }
      if (j.contains("k")) { j["k"].get_to(c.k); }
      if (j.contains("distance")) { c.distance = DistanceKind::parse(j["distance"].get<std::string>()); }
      for (const char* key : {"witness_pool", "query_pool", "n_w", "n_r", "n_t", "repetitions", "moments"}) {
        if (!j.contains(key)) { continue; }
        auto v = j[key].get<std::size_t>();
        const std::string k = key;
        if (k == "witness_pool") { c.witness_pool = v; }
        if (k == "query_pool") { c.query_pool = v; }
        if (k == "n_w") { c.n_w = v; }
        if (k == "n_r") { c.n_r = v; }
        if (k == "n_t") { c.n_t = v; }
        if (k == "repetitions") { c.repetitions = v; }
        if (k == "moments") { c.moments = v; }
      }
      if (j.contains("checkpoints")) { j["checkpoints"].get_to(c.checkpoints); }
      if (j.contains("estimators")) {
        c.estimators.clear();
        for (const auto& e : j["estimators"]) { c.estimators.push_back(parse_estimator(e.get<std::string>())); }
      }
      if (j.contains("thetas")) { j["thetas"].get_to(c.thetas); }
      if (j.contains("policies")) {
        c.policies.clear();
        for (const auto& p : j["policies"]) {
          c.policies.push_back(p.is_string() ? StoppingPolicy::parse(p.get<std::string>()) : StoppingPolicy::from_json(p));
        }
      }
      if (j.contains("bandwidth_scale")) { j["bandwidth_scale"].get_to(c.bandwidth_scale); }
      if (j.contains("bandwidth_rule")) {
        const auto r = j["bandwidth_rule"].get<std::string>();
        require(r == "full" || r == "diagonal", "bandwidth_rule must be 'full' or 'diagonal'");
        c.bandwidth_rule = r == "full" ? BandwidthRule::full : BandwidthRule::diagonal;
      }
      if (j.contains("seed")) { j["seed"].get_to(c.seed); }
      if (j.contains("wallclock")) { j["wallclock"].get_to(c.wallclock); }
    } catch (const json::exception& e) {
      throw InvalidArgument(std::string("malformed bench config: ") + e.what());
    }
    c.validate();
    return c;
  }

  void BenchConfig::validate() const {
    require(dataset.generator == "random_walk" || dataset.generator == "cbf",
            "bench: generator must be random_walk or cbf");
    require(k >= 1, "bench: k must be at least 1");
    require(repetitions >= 1, "bench: need at least one repetition");
    require(n_w >= 10 && n_w <= witness_pool, "bench: n_w must be in [10, witness_pool]");
    require(n_r >= 10 && n_r + n_t <= query_pool, "bench: need n_r >= 10 and n_r + n_t <= query_pool");
    require(n_t >= 1, "bench: n_t must be positive");
    require(moments >= 1, "bench: moments must be positive");
    for (double t : thetas) { require(t > 0 && t < 1, "bench: theta must be in (0, 1)"); }
    for (const auto& p : policies) { p.validate(); }
  }

  BenchConfig bench_preset(const std::string& name) {
    BenchConfig c;
    c.name = name;
    if (name == "desk" || name == "desk25") {
      c.dataset = {"random_walk", 100000, 64, 0, 1, std::nullopt};
      if (name == "desk25") { c.n_r = 25; }
      c.policies = {StoppingPolicy::none(),
                    StoppingPolicy::time_bound(0.05),
                    StoppingPolicy::probability(0.05),
                    StoppingPolicy::distance_error(0.01, 0.05),
                    StoppingPolicy::time_bound(0.01),
                    StoppingPolicy::probability(0.01)};
    } else if (name == "cbf" || name == "cbf1") {
      c.dataset = {"cbf", 100000, 128, name == "cbf" ? 3.0 : 1.0, 3, std::nullopt};
      c.k = 10;
      c.estimators = {EstimatorMethod::linear, EstimatorMethod::kde2};
      c.policies = {StoppingPolicy::none(), StoppingPolicy::class_probability(0.05), StoppingPolicy::probability(0.05),
                    StoppingPolicy::time_bound(0.05)};
    } else if (name == "tiny") {
      c.dataset = {"random_walk", 5000, 64, 0, 1, std::nullopt};
      c.index.leaf_threshold = 50;
      c.witness_pool = 200;
      c.query_pool = 200;
      c.n_w = 50;
      c.n_r = 50;
      c.n_t = 50;
      c.repetitions = 2;
      c.policies = {StoppingPolicy::none(), StoppingPolicy::time_bound(0.05), StoppingPolicy::probability(0.05),
                    StoppingPolicy::distance_error(0.05, 0.05)};
    } else {
      throw InvalidArgument("unknown preset '" + name + "' (desk, desk25, cbf, cbf1, tiny)");
    }
    return c;
  }

  // ---- report ------------------------------------------------------------------------------

  json Report::to_json() const {
    json j;
    j["config"] = config;
    j["indexed_count"] = indexed_count;
    j["leaf_count"] = leaf_count;
    json cs = json::array();
    for (const auto& c : cells) {
      cs.push_back({{"method", c.method},
                    {"checkpoint", c.pooled ? json("all") : json(c.checkpoint)},
                    {"theta", c.theta},
                    {"sidedness", c.sidedness},
                    {"n", c.n},
                    {"coverage", c.coverage},
                    {"mean_width", c.mean_width},
                    {"median_width", c.median_width},
                    {"rmse", c.rmse}});
    }
    j["estimators"] = cs;
    json ps = json::array();
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    for (const auto& p : policies) {
      ps.push_back({{"policy", p.policy},
                    {"n", p.n},
                    {"exact_ratio", p.exact_ratio},
                    {"exact_class_ratio", opt(p.exact_class_ratio)},
                    {"exact_accuracy", opt(p.exact_accuracy)},
                    {"stopped_accuracy", opt(p.stopped_accuracy)},
                    {"accuracy_ratio", opt(p.accuracy_ratio)},
                    {"time_savings", p.time_savings},
                    {"wallclock_savings", opt(p.wallclock_savings)},
                    {"mean_family_error", p.mean_family_error},
                    {"within_epsilon", opt(p.within_epsilon)},
                    {"per_repetition", {{"exact_ratio", p.per_repetition_exact_ratio}, {"savings", p.per_repetition_savings}}}});
    }
    j["policies"] = ps;
    if (runtime_seconds) { j["runtime_seconds"] = *runtime_seconds; }
    return j;
  }

  std::string Report::to_csv() const {
    std::ostringstream os;
    os.precision(17);
    auto opt = [](const std::optional<double>& v) {
      if (!v) { return std::string(); }
      std::ostringstream s;
      s.precision(17);
      s << *v;
      return s.str();
    };
    os << "kind,name,checkpoint,theta,sidedness,n,coverage,mean_width,median_width,rmse,exact_ratio,"
          "exact_class_ratio,accuracy_ratio,time_savings\n";
    for (const auto& c : cells) {
      os << "estimator," << c.method << ',' << (c.pooled ? std::string("all") : std::to_string(c.checkpoint)) << ','
         << c.theta << ',' << c.sidedness << ',' << c.n << ',' << c.coverage << ',' << c.mean_width << ','
         << c.median_width << ',' << c.rmse << ",,,,\n";
    }
    for (const auto& p : policies) {
      os << "policy,\"" << p.policy << "\",,,," << p.n << ",,,,," << p.exact_ratio << ',' << opt(p.exact_class_ratio)
         << ',' << opt(p.accuracy_ratio) << ',' << p.time_savings << '\n';
    }
    return os.str();
  }

  const EstimatorCell& Report::cell(const std::string& method, std::size_t checkpoint, double theta,
                                    bool pooled) const {
    for (const auto& c : cells) {
      if (c.method == method && c.pooled == pooled && (pooled || c.checkpoint == checkpoint) &&
          std::abs(c.theta - theta) < 1e-12) {
        return c;
      }
    }
    throw InvalidArgument("report has no cell for " + method);
  }

  const PolicyRow& Report::policy(const std::string& spec) const {
    const auto want = StoppingPolicy::parse(spec).to_string();
    for (const auto& p : policies) {
      if (p.policy == want) { return p; }
    }
    throw InvalidArgument("report has no row for policy " + spec);
  }

  void write_report(const Report& report, const std::filesystem::path& json_path,
                    const std::optional<std::filesystem::path>& csv_path) {
    {
      std::ofstream out(json_path, std::ios::binary | std::ios::trunc);
      if (!out) { throw IoError("cannot write report " + json_path.string()); }
      out << report.to_json().dump(2) << '\n';
    }
    if (csv_path) {
      std::ofstream out(*csv_path, std::ios::binary | std::ios::trunc);
      if (!out) { throw IoError("cannot write report " + csv_path->string()); }
      out << report.to_csv();
    }
  }

  // ---- harness -----------------------------------------------------------------------------

  std::shared_ptr<const Dataset> bench_dataset(const DatasetSpec& spec) {
    if (spec.descriptor) { return std::make_shared<const Dataset>(load_dataset(load_descriptor(*spec.descriptor))); }
    if (spec.generator == "cbf") {
      CbfParams p;
      p.amplitude = spec.amplitude;
      return std::make_shared<const Dataset>(make_cbf(spec.count, spec.length, p, spec.seed));
    }
    return std::make_shared<const Dataset>(make_random_walk(spec.count, spec.length, spec.seed));
  }

  namespace {

    struct CellAccumulator {
      std::size_t n = 0;
      std::size_t covered = 0;
      double squared_error = 0;
      std::vector<double> widths;

      void add(const DistanceEstimate& e, double truth) {
        ++n;
        if (e.lower <= truth && truth <= e.upper) { ++covered; }
        squared_error += (e.point - truth) * (e.point - truth);
        widths.push_back(e.upper - e.lower);
      }
    };

    struct PolicyAccumulator {
      std::size_t n = 0;
      std::size_t exact = 0;
      std::size_t exact_class = 0;
      std::size_t correct_exact = 0;
      std::size_t correct_stopped = 0;
      std::size_t within = 0;
      double stopped_leaves = 0;
      double total_leaves = 0;
      double family_error = 0;
      double wall_stopped = 0;
      double wall_full = 0;
      std::vector<double> rep_exact;
      std::vector<double> rep_savings;
    };

    using CellKey = std::tuple<std::string, bool, std::size_t, double, std::string>;

    double seconds_since(std::chrono::steady_clock::time_point t0) {
      return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }

  } // namespace

  Report run_bench(const BenchConfig& config) { return run_bench(config, bench_dataset(config.dataset)); }

  Report run_bench(const BenchConfig& config, std::shared_ptr<const Dataset> dataset) {
    config.validate();
    const auto started = std::chrono::steady_clock::now();
    const Dataset& ds = *dataset;
    const bool labeled = ds.has_labels();
    const auto pools = sample_pools(ds.size(), config.witness_pool, config.query_pool, derive_seed(config.seed, 1));
    const auto rest = ids_outside_pools(pools, ds.size());
    IndexConfig icfg = config.index;
    icfg.distance = config.distance;
    const auto tree = build_index(dataset, icfg, std::span<const std::uint32_t>(rest));

    // Complete searches for every pool member, shared by all repetitions.
    const auto witness_pool = make_witness_set(tree, ds, pools.witness_pool, config.k, config.distance);
    CollectConfig collect;
    collect.k = config.k;
    collect.distance = config.distance;
    const auto pool_records = collect_training(tree, ds, pools.query_pool, WitnessSet{}, collect);
    const std::size_t wp = pools.witness_pool.size();
    std::vector<double> to_witness(pools.query_pool.size() * wp);
    parallel_for(pools.query_pool.size(), [&](std::size_t q) {
      const auto qs = ds.series_as_double(pools.query_pool[q]);
      for (std::size_t w = 0; w < wp; ++w) {
        to_witness[q * wp + w] = config.distance.is_dtw()
                                     ? dtw(qs, witness_pool.series[w], config.distance.band_radius)
                                     : euclidean(qs, witness_pool.series[w]);
      }
    });

    std::vector<double> phis;
    for (const auto& p : config.policies) {
      if (p.kind == StoppingPolicy::Kind::time_bound) { phis.push_back(p.phi); }
    }
    for (double t : {0.05, 0.01}) {
      if (std::find(phis.begin(), phis.end(), t) == phis.end()) { phis.push_back(t); }
    }
    const bool want_kde3 =
        std::find(config.estimators.begin(), config.estimators.end(), EstimatorMethod::kde3) != config.estimators.end();

    std::map<CellKey, CellAccumulator> cells;
    std::vector<PolicyAccumulator> pacc(config.policies.size());

    for (std::size_t rep = 0; rep < config.repetitions; ++rep) {
      try {
        const auto draw = draw_repetition(pools, config.n_w, config.n_r, config.n_t, config.seed, rep);
        WitnessSet ws;
        for (auto w : draw.witnesses) {
          ws.ids.push_back(witness_pool.ids[w]);
          ws.series.push_back(witness_pool.series[w]);
          ws.knn_distances.push_back(witness_pool.knn_distances[w]);
        }
        auto pick = [&](const std::vector<std::size_t>& positions) {
          std::vector<TrainingRecord> out;
          std::vector<double> d(draw.witnesses.size());
          for (auto q : positions) {
            TrainingRecord r = pool_records[q];
            for (std::size_t j = 0; j < d.size(); ++j) { d[j] = to_witness[q * wp + draw.witnesses[j]]; }
            r.witness_distance = witness_weighted_distance(d, ws.knn_distances, collect.witness_exponent);
            out.push_back(std::move(r));
          }
          return out;
        };
        const auto training = pick(draw.training);
        const auto testing = pick(draw.testing);

        TrainingConfig est_cfg;
        est_cfg.checkpoints = config.checkpoints;
        est_cfg.time_bound_phis = phis;
        est_cfg.bandwidth_scale = config.bandwidth_scale;
        est_cfg.bandwidth_rule = config.bandwidth_rule;
        est_cfg.fit_kde3 = want_kde3;
        const auto est = fit_bundle(training, ws, tree, collect, est_cfg);

        TrainingConfig pol_cfg = est_cfg;
        pol_cfg.checkpoints = plan_moments(training, config.moments);
        pol_cfg.fit_kde3 = false;
        const auto pol = fit_bundle(training, ws, tree, collect, pol_cfg);

        for (auto method : config.estimators) {
          const auto mname = to_string(method);
          for (double theta : config.thetas) {
            if (method == EstimatorMethod::witness || method == EstimatorMethod::baseline) {
              auto& acc = cells[{mname, false, 0, theta, "two_sided"}];
              for (const auto& r : testing) {
                try {
                  const auto e = estimate_distance(est, {kInfinity, 0, r.witness_distance}, theta, method,
                                                   Sidedness::two_sided);
                  acc.add(e, r.exact_kth());
                } catch (const ModelMismatch&) {
                }
              }
              continue;
            }
            for (auto t : config.checkpoints) {
              auto& acc = cells[{mname, false, t, theta, "lower_only"}];
              auto& pooled = cells[{mname, true, 0, theta, "lower_only"}];
              for (const auto& r : testing) {
                if (!r.running_at(t)) { continue; }
                try {
                  const auto e = estimate_distance(est, {r.at(t).kth_distance(), t, r.witness_distance}, theta, method);
                  const double truth = r.family_target(t);
                  acc.add(e, truth);
                  pooled.add(e, truth);
                } catch (const ModelMismatch&) {
                } catch (const FitError&) {
                }
              }
            }
          }
        }

        for (std::size_t p = 0; p < config.policies.size(); ++p) {
          const auto& policy = config.policies[p];
          auto& acc = pacc[p];
          std::size_t rep_exact = 0;
          double rep_stop = 0;
          double rep_total = 0;
          for (const auto& r : testing) {
            const auto o = simulate_policy(r.trace, pol, policy, labeled ? &ds : nullptr);
            ++acc.n;
            acc.exact += o.was_exact ? 1 : 0;
            rep_exact += o.was_exact ? 1 : 0;
            acc.exact_class += o.was_exact_class ? 1 : 0;
            acc.stopped_leaves += static_cast<double>(o.stopped_at);
            acc.total_leaves += static_cast<double>(*o.total_leaves);
            rep_stop += static_cast<double>(o.stopped_at);
            rep_total += static_cast<double>(*o.total_leaves);
            acc.family_error += o.family_error;
            if (policy.kind == StoppingPolicy::Kind::distance_error && o.family_error < policy.epsilon) { ++acc.within; }
            if (labeled) {
              const auto truth = ds.label(r.query_id);
              acc.correct_exact += *o.exact_class == truth ? 1 : 0;
              acc.correct_stopped += *o.predicted_class == truth ? 1 : 0;
            }
            if (config.wallclock) {
              const auto q = ds.series_as_double(r.query_id);
              RunConfig rc;
              rc.k = config.k;
              rc.distance = config.distance;
              rc.audit = false;
              auto t0 = std::chrono::steady_clock::now();
              (void)run_with_policy(tree, pol, q, policy, rc);
              acc.wall_stopped += seconds_since(t0);
              t0 = std::chrono::steady_clock::now();
              (void)run_with_policy(tree, pol, q, StoppingPolicy::none(), rc);
              acc.wall_full += seconds_since(t0);
            }
          }
          acc.rep_exact.push_back(static_cast<double>(rep_exact) / static_cast<double>(testing.size()));
          acc.rep_savings.push_back(rep_total > 0 ? 1.0 - rep_stop / rep_total : 0.0);
        }
      } catch (const Error& e) {
        throw Error("repetition " + std::to_string(rep) + ": " + e.what());
      }
    }

    Report report;
    report.config = config.to_json();
    report.indexed_count = tree.indexed_count();
    report.leaf_count = tree.leaf_count();
    for (auto& [key, acc] : cells) {
      if (acc.n == 0) { continue; }
      EstimatorCell c;
      std::tie(c.method, c.pooled, c.checkpoint, c.theta, c.sidedness) = key;
      c.n = acc.n;
      c.coverage = static_cast<double>(acc.covered) / static_cast<double>(acc.n);
      double sum = 0;
      for (double w : acc.widths) { sum += w; }
      c.mean_width = sum / static_cast<double>(acc.n);
      c.median_width = empirical_quantile(acc.widths, 0.5);
      c.rmse = std::sqrt(acc.squared_error / static_cast<double>(acc.n));
      report.cells.push_back(std::move(c));
    }
    for (std::size_t p = 0; p < config.policies.size(); ++p) {
      const auto& acc = pacc[p];
      PolicyRow row;
      row.policy = config.policies[p].to_string();
      row.n = acc.n;
      const double n = static_cast<double>(std::max<std::size_t>(acc.n, 1));
      row.exact_ratio = static_cast<double>(acc.exact) / n;
      row.time_savings = acc.total_leaves > 0 ? 1.0 - acc.stopped_leaves / acc.total_leaves : 0.0;
      row.mean_family_error = acc.family_error / n;
      if (config.policies[p].kind == StoppingPolicy::Kind::distance_error) {
        row.within_epsilon = static_cast<double>(acc.within) / n;
      }
      if (labeled) {
        row.exact_class_ratio = static_cast<double>(acc.exact_class) / n;
        row.exact_accuracy = static_cast<double>(acc.correct_exact) / n;
        row.stopped_accuracy = static_cast<double>(acc.correct_stopped) / n;
        if (*row.exact_accuracy > 0) { row.accuracy_ratio = accuracy_ratio(*row.stopped_accuracy, *row.exact_accuracy); }
      }
      if (config.wallclock && acc.wall_full > 0) { row.wallclock_savings = 1.0 - acc.wall_stopped / acc.wall_full; }
      row.per_repetition_exact_ratio = acc.rep_exact;
      row.per_repetition_savings = acc.rep_savings;
      report.policies.push_back(std::move(row));
    }
    if (config.wallclock) { report.runtime_seconds = seconds_since(started); }
    return report;
  }

} // namespace pros
