#include "pros/policy.hpp"

#include "pros/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pros {

  namespace {

    const char* kind_name(StoppingPolicy::Kind kind) {
      switch (kind) {
        case StoppingPolicy::Kind::none: return "none";
        case StoppingPolicy::Kind::distance_error: return "distance";
        case StoppingPolicy::Kind::time_bound: return "time";
        case StoppingPolicy::Kind::probability: return "prob";
        case StoppingPolicy::Kind::class_probability: return "class";
      }
      return "?";
    }

    double parse_number(const std::string& key, const std::string& value) {
      try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used == value.size()) { return v; }
      } catch (const std::exception&) {
      }
      throw InvalidArgument("policy parameter " + key + " is not a number: '" + value + "'");
    }

    std::string format_number(double v) {
      std::ostringstream os;
      os << v;
      return os.str();
    }

  } // namespace

  StoppingPolicy StoppingPolicy::distance_error(double epsilon, double theta) {
    StoppingPolicy p;
    p.kind = Kind::distance_error;
    p.epsilon = epsilon;
    p.theta = theta;
    return p;
  }

  StoppingPolicy StoppingPolicy::time_bound(double phi) {
    StoppingPolicy p;
    p.kind = Kind::time_bound;
    p.phi = phi;
    return p;
  }

  StoppingPolicy StoppingPolicy::probability(double phi) {
    StoppingPolicy p;
    p.kind = Kind::probability;
    p.phi = phi;
    return p;
  }

  StoppingPolicy StoppingPolicy::class_probability(double phi) {
    StoppingPolicy p;
    p.kind = Kind::class_probability;
    p.phi = phi;
    return p;
  }

  void StoppingPolicy::validate() const {
    if (kind == Kind::distance_error) {
      require(epsilon > 0, "policy: epsilon must be positive");
      require(theta > 0 && theta < 1, "policy: theta must be in (0, 1)");
    }
    if (kind == Kind::time_bound || kind == Kind::probability || kind == Kind::class_probability) {
      require(phi > 0 && phi < 1, "policy: phi must be in (0, 1)");
    }
    for (std::size_t i = 0; i < moments.size(); ++i) {
      require(moments[i] >= 1, "policy: moments must be positive");
      require(i == 0 || moments[i] > moments[i - 1], "policy: moments must be strictly increasing");
    }
  }

  StoppingPolicy StoppingPolicy::parse(const std::string& text) {
    const auto colon = text.find(':');
    const std::string name = text.substr(0, colon);
    StoppingPolicy p;
    if (name == "none") {
      p.kind = Kind::none;
    } else if (name == "distance") {
      p.kind = Kind::distance_error;
    } else if (name == "time") {
      p.kind = Kind::time_bound;
    } else if (name == "prob") {
      p.kind = Kind::probability;
    } else if (name == "class") {
      p.kind = Kind::class_probability;
    } else {
      throw InvalidArgument("unknown policy '" + name + "' (none, distance, time, prob, class)");
    }
    if (colon != std::string::npos) {
      std::stringstream ss(text.substr(colon + 1));
      std::string item;
      while (std::getline(ss, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) { throw InvalidArgument("policy parameter must be key=value: '" + item + "'"); }
        const auto key = item.substr(0, eq);
        const double v = parse_number(key, item.substr(eq + 1));
        if (key == "eps" && p.kind == Kind::distance_error) {
          p.epsilon = v;
        } else if (key == "theta" && p.kind == Kind::distance_error) {
          p.theta = v;
        } else if (key == "phi" && p.kind != Kind::distance_error && p.kind != Kind::none) {
          p.phi = v;
        } else {
          throw InvalidArgument("policy '" + name + "' does not take parameter '" + key + "'");
        }
      }
    }
    p.validate();
    return p;
  }

  std::string StoppingPolicy::to_string() const {
    switch (kind) {
      case Kind::none: return "none";
      case Kind::distance_error: return "distance:eps=" + format_number(epsilon) + ",theta=" + format_number(theta);
      default: return std::string(kind_name(kind)) + ":phi=" + format_number(phi);
    }
  }

  nlohmann::json StoppingPolicy::to_json() const {
    nlohmann::json j{{"kind", kind_name(kind)}};
    if (kind == Kind::distance_error) {
      j["epsilon"] = epsilon;
      j["theta"] = theta;
    } else if (kind != Kind::none) {
      j["phi"] = phi;
    }
    if (!moments.empty()) { j["moments"] = moments; }
    return j;
  }

  StoppingPolicy StoppingPolicy::from_json(const nlohmann::json& j) {
    auto p = parse(j.at("kind").get<std::string>());
    if (j.contains("epsilon")) { j["epsilon"].get_to(p.epsilon); }
    if (j.contains("theta")) { j["theta"].get_to(p.theta); }
    if (j.contains("phi")) { j["phi"].get_to(p.phi); }
    if (j.contains("moments")) { j["moments"].get_to(p.moments); }
    p.validate();
    return p;
  }

  std::vector<std::size_t> plan_moments(std::size_t t_max, std::size_t m) {
    require(t_max >= 1 && m >= 1, "plan_moments: t_max and m must be positive");
    std::vector<std::size_t> out;
    for (std::size_t i = 1; i <= m; ++i) {
      const std::size_t t = (i * t_max + m - 1) / m;
      if (out.empty() || t > out.back()) { out.push_back(t); }
    }
    return out;
  }

  std::vector<std::size_t> plan_moments(std::span<const TrainingRecord> records, std::size_t m) {
    require(!records.empty(), "plan_moments: no records");
    std::size_t t_max = 1;
    for (const auto& r : records) { t_max = std::max(t_max, r.leaves_to_exact_answer()); }
    return plan_moments(t_max, m);
  }

  bool distance_error_met(double bsf_k, double lower, double epsilon) noexcept {
    if (!(lower > 0)) { return bsf_k <= 0; }
    return bsf_k / lower - 1.0 < epsilon;
  }

  Decision decide(const StoppingPolicy& policy, const GuaranteeBundle& bundle, const ProgressiveEvent& event,
                  const DecisionContext& context) {
    const double bsf = event.kth_distance();
    const std::size_t t = event.leaves_visited;
    switch (policy.kind) {
      case StoppingPolicy::Kind::none: return {};
      case StoppingPolicy::Kind::distance_error: {
        try {
          const auto e = estimate_distance(bundle, {bsf, t, 0}, policy.theta, EstimatorMethod::kde2);
          if (distance_error_met(bsf, e.lower, policy.epsilon)) { return {true, "distance error bound"}; }
        } catch (const ModelMismatch&) {
        } catch (const FitError&) {
        }
        return {};
      }
      case StoppingPolicy::Kind::time_bound:
        if (context.time_bound && t >= *context.time_bound) { return {true, "time bound"}; }
        return {};
      case StoppingPolicy::Kind::probability: {
        const auto p = exact_probability(bundle, t, bsf);
        if (p && *p >= 1.0 - policy.phi) { return {true, "exact-answer probability"}; }
        return {};
      }
      case StoppingPolicy::Kind::class_probability: {
        if (context.bsf_labels.empty()) { return {}; }
        const auto p = class_probability(bundle, t, bsf, context.bsf_labels);
        if (p && *p >= 1.0 - policy.phi) { return {true, "exact-class probability"}; }
        return {};
      }
    }
    return {};
  }

  double QueryOutcome::savings() const {
    if (!stopped || !total_leaves || *total_leaves == 0) { return 0.0; }
    return 1.0 - static_cast<double>(stopped_at) / static_cast<double>(*total_leaves);
  }

  namespace {

    std::vector<std::size_t> moments_of(const StoppingPolicy& policy, const GuaranteeBundle& bundle) {
      return policy.moments.empty() ? bundle.checkpoints : policy.moments;
    }

    void fill_audit(QueryOutcome& out, const SearchTrace& full, const Dataset* labels) {
      out.total_leaves = full.total_leaves;
      out.exact.resize(full.exact_ids.size());
      for (std::size_t i = 0; i < out.exact.size(); ++i) { out.exact[i] = {full.exact_ids[i], full.exact_distances[i]}; }
      std::vector<double> got(out.answer.size());
      for (std::size_t i = 0; i < got.size(); ++i) { got[i] = out.answer[i].distance; }
      out.exact_per_rank.resize(got.size());
      for (std::size_t i = 0; i < got.size(); ++i) { out.exact_per_rank[i] = got[i] == full.exact_distances[i]; }
      out.was_exact = is_exact(full.exact_distances, got);
      out.family_error = family_error(full.exact_distances, got);
      if (labels != nullptr && labels->has_labels()) {
        std::vector<std::uint32_t> ids(out.answer.size());
        for (std::size_t i = 0; i < ids.size(); ++i) { ids[i] = out.answer[i].id; }
        out.predicted_class = agreement(labels_of(*labels, ids)).majority;
        out.exact_class = agreement(labels_of(*labels, full.exact_ids)).majority;
        out.was_exact_class = *out.predicted_class == *out.exact_class;
      }
    }

  } // namespace

  QueryOutcome run_with_policy(const IndexTree& tree, const GuaranteeBundle& bundle, std::span<const double> query,
                               const StoppingPolicy& policy, const RunConfig& config, const OutcomeCallback& on_event) {
    policy.validate();
    bundle.check_compatible(config.k, config.distance, tree.config().kind, tree.series_length());
    const TimeBoundModel* tb = nullptr;
    if (policy.kind == StoppingPolicy::Kind::time_bound) { tb = &bundle.time_bound(policy.phi); }
    if (policy.kind == StoppingPolicy::Kind::class_probability && !tree.dataset().has_labels()) {
      throw InvalidArgument("class_probability policy needs a labeled dataset");
    }

    SearchConfig cfg;
    cfg.k = config.k;
    cfg.distance = config.distance;
    cfg.checkpoints = moments_of(policy, bundle);
    cfg.stop_flag = config.stop_flag;
    cfg.record_wallclock = config.record_wallclock;

    QueryOutcome out;
    const Dataset& ds = tree.dataset();
    auto callback = [&](const ProgressiveEvent& e) {
      Decision d;
      EventResponse r;
      if (tb != nullptr && e.has(ProgressiveEvent::initial)) {
        out.time_bound = tb->bound(e.kth_distance());
        r.leaf_limit = *out.time_bound;
        if (e.leaves_visited >= *out.time_bound) { d = {true, "time bound"}; }
      }
      if (e.has(ProgressiveEvent::checkpoint) && !d.stop && tb == nullptr) {
        std::vector<std::int32_t> labels;
        if (policy.kind == StoppingPolicy::Kind::class_probability) { labels = labels_of(ds, e.bsf_ids); }
        d = decide(policy, bundle, e, {out.time_bound, labels});
      }
      if (e.has(ProgressiveEvent::final)) { d.stop = false; }
      r.stop = d.stop;
      if (d.stop && out.stop_reason.empty()) { out.stop_reason = d.reason; }
      if (on_event) { on_event(e, d); }
      return r;
    };
    const auto trace = progressive_knn(tree, query, cfg, callback);
    out.events = trace.events;
    out.stopped = !trace.completed();
    out.stopped_at = trace.total_leaves;
    out.answer = trace.bsf_at(out.stopped_at).neighbors();
    if (out.stopped && out.stop_reason.empty()) {
      out.stop_reason = out.time_bound && out.stopped_at >= *out.time_bound ? "time bound" : "stopped by user";
    }
    if (config.audit) {
      if (out.stopped) {
        SearchConfig full;
        full.k = config.k;
        full.distance = config.distance;
        full.checkpoints = {};
        fill_audit(out, progressive_knn(tree, query, full), &ds);
      } else {
        fill_audit(out, trace, &ds);
      }
    }
    return out;
  }

  QueryOutcome simulate_policy(const SearchTrace& trace, const GuaranteeBundle& bundle, const StoppingPolicy& policy,
                               const Dataset* labels) {
    policy.validate();
    require(trace.completed() && !trace.improvements.empty(), "simulate_policy: needs a complete trace");
    QueryOutcome out;
    const std::size_t total = trace.total_leaves;
    const std::size_t first = trace.first_full_leaf;
    std::optional<std::size_t> stop_at;

    if (policy.kind == StoppingPolicy::Kind::time_bound) {
      out.time_bound = bundle.time_bound(policy.phi).bound(trace.improvements.front().kth_distance());
      const std::size_t limit = std::max(*out.time_bound, first);
      if (limit < total) {
        stop_at = limit;
        out.stop_reason = "time bound";
      }
    } else if (policy.kind != StoppingPolicy::Kind::none) {
      std::size_t last_fired = 0;
      for (auto t : moments_of(policy, bundle)) {
        const std::size_t fire = std::max(t, first);
        if (fire >= total) { break; }
        if (fire == last_fired) { continue; }
        last_fired = fire;
        ProgressiveEvent e = trace.bsf_at(fire);
        e.leaves_visited = fire;
        std::vector<std::int32_t> bsf_labels;
        if (policy.kind == StoppingPolicy::Kind::class_probability) {
          require(labels != nullptr && labels->has_labels(), "simulate_policy: class policy needs labels");
          bsf_labels = labels_of(*labels, e.bsf_ids);
        }
        const auto d = decide(policy, bundle, e, {std::nullopt, bsf_labels});
        if (d.stop) {
          stop_at = fire;
          out.stop_reason = d.reason;
          break;
        }
      }
    }
    out.stopped = stop_at.has_value();
    out.stopped_at = stop_at.value_or(total);
    out.answer = trace.bsf_at(out.stopped_at).neighbors();
    fill_audit(out, trace, labels);
    return out;
  }

} // namespace pros
