#pragma once

#include "pros/models.hpp"

#include "json.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pros {

  struct StoppingPolicy {
    enum class Kind { none, distance_error, time_bound, probability, class_probability };

    Kind kind = Kind::none;
    double epsilon = 0.05; // distance_error
    double theta = 0.05;   // distance_error
    double phi = 0.05;     // time_bound, probability, class_probability
    /// Decision moments in leaves. Empty means the bundle's checkpoints.
    std::vector<std::size_t> moments;

    static StoppingPolicy none() { return {}; }
    static StoppingPolicy distance_error(double epsilon, double theta);
    static StoppingPolicy time_bound(double phi);
    static StoppingPolicy probability(double phi);
    static StoppingPolicy class_probability(double phi);

    /// "none", "distance:eps=0.05,theta=0.05", "time:phi=0.05", "prob:phi=0.05", "class:phi=0.05".
    [[nodiscard]] static StoppingPolicy parse(const std::string& text);
    [[nodiscard]] std::string to_string() const;
    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] static StoppingPolicy from_json(const nlohmann::json& j);

    void validate() const;
  };

  /// ceil(i * t_max / m) for i = 1..m, deduplicated.
  [[nodiscard]] std::vector<std::size_t> plan_moments(std::size_t t_max, std::size_t m = 16);
  /// t_max is the largest leaves-to-exact among the records.
  [[nodiscard]] std::vector<std::size_t> plan_moments(std::span<const TrainingRecord> records, std::size_t m = 16);

  struct Decision {
    bool stop = false;
    std::string reason;
  };

  struct DecisionContext {
    std::optional<std::size_t> time_bound;     // tau-hat, fixed at the first answer
    std::span<const std::int32_t> bsf_labels;  // labels of the current answer, for class_probability
  };

  /// bsf / lower - 1 < epsilon.
  [[nodiscard]] bool distance_error_met(double bsf_k, double lower, double epsilon) noexcept;

  /// Pure decision at one scheduled moment. A missing model means continue.
  [[nodiscard]] Decision decide(const StoppingPolicy& policy, const GuaranteeBundle& bundle,
                                const ProgressiveEvent& event, const DecisionContext& context);

  struct QueryOutcome {
    std::vector<Neighbor> answer;
    std::size_t stopped_at = 0;   // leaves visited when the answer was returned
    bool stopped = false;         // stopped before natural completion
    std::string stop_reason;
    std::optional<std::size_t> time_bound;
    std::vector<ProgressiveEvent> events;

    // audit
    std::optional<std::size_t> total_leaves; // of the full search
    std::vector<Neighbor> exact;
    std::vector<bool> exact_per_rank;
    bool was_exact = false;
    double family_error = 0;
    std::optional<std::int32_t> predicted_class;
    std::optional<std::int32_t> exact_class;
    bool was_exact_class = false;

    /// 1 - stopped_at / total_leaves when stopped, else 0.
    [[nodiscard]] double savings() const;
  };

  struct RunConfig {
    std::size_t k = 1;
    DistanceKind distance = DistanceKind::euclidean();
    bool audit = true;
    const std::atomic<bool>* stop_flag = nullptr;
    bool record_wallclock = false;
  };

  using OutcomeCallback = std::function<void(const ProgressiveEvent&, const Decision&)>;

  /// Runs the progressive search and consults the policy at each scheduled moment.
  [[nodiscard]] QueryOutcome run_with_policy(const IndexTree& tree, const GuaranteeBundle& bundle,
                                             std::span<const double> query, const StoppingPolicy& policy,
                                             const RunConfig& config, const OutcomeCallback& on_event = {});

  /// Replays the policy on a complete trace; gives the same outcome as run_with_policy on the
  /// same query without re-running the search.
  [[nodiscard]] QueryOutcome simulate_policy(const SearchTrace& trace, const GuaranteeBundle& bundle,
                                             const StoppingPolicy& policy, const Dataset* labels = nullptr);

} // namespace pros
