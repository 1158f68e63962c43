#pragma once

#include "pros/classify.hpp"
#include "pros/dataset.hpp"
#include "pros/models.hpp"
#include "pros/policy.hpp"

#include "json.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pros {

  // ---- measures ----------------------------------------------------------------------------

  struct Interval {
    double lower = 0;
    double upper = 0;
  };

  /// Fraction of truths inside their closed interval.
  [[nodiscard]] double coverage(std::span<const Interval> intervals, std::span<const double> truths);
  [[nodiscard]] double rmse(std::span<const double> points, std::span<const double> truths);
  /// 1 - sum(stopped) / sum(totals).
  [[nodiscard]] double time_savings(std::span<const std::size_t> stopped, std::span<const std::size_t> totals);
  [[nodiscard]] double exact_ratio(std::span<const QueryOutcome> outcomes);
  [[nodiscard]] double exact_class_ratio(std::span<const QueryOutcome> outcomes);

  // ---- configuration -----------------------------------------------------------------------

  struct DatasetSpec {
    std::string generator = "random_walk"; // random_walk | cbf
    std::size_t count = 100000;
    std::size_t length = 64;
    double amplitude = 3.0;
    std::uint64_t seed = 1;
    /// When set, the dataset is read from this descriptor instead of generated.
    std::optional<std::filesystem::path> descriptor;
  };

  struct BenchConfig {
    std::string name = "custom";
    DatasetSpec dataset;
    IndexConfig index;
    std::size_t k = 1;
    DistanceKind distance = DistanceKind::euclidean();
    std::size_t witness_pool = 1000;
    std::size_t query_pool = 1000;
    std::size_t n_w = 200;
    std::size_t n_r = 100;
    std::size_t n_t = 200;
    std::size_t repetitions = 20;
    std::vector<std::size_t> checkpoints = default_checkpoints();
    std::vector<EstimatorMethod> estimators{EstimatorMethod::linear, EstimatorMethod::kde2, EstimatorMethod::kde3,
                                            EstimatorMethod::witness, EstimatorMethod::baseline};
    std::vector<double> thetas{0.05, 0.01};
    std::vector<StoppingPolicy> policies;
    std::size_t moments = 16;
    double bandwidth_scale = 1.0;
    BandwidthRule bandwidth_rule = BandwidthRule::full;
    std::uint64_t seed = 42;
    bool wallclock = false;

    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] static BenchConfig from_json(const nlohmann::json& j);
    void validate() const;
  };

  /// Named presets: "desk" (100K x 64 random walks), "desk25" (desk with 25 training queries), "cbf" (100K x 128 CBF, amplitude 3, k=10),
  /// "cbf1" (as cbf with amplitude 1), "tiny" (small, for smoke runs).
  [[nodiscard]] BenchConfig bench_preset(const std::string& name);

  // ---- report ------------------------------------------------------------------------------

  /// One (method, checkpoint, level) cell. checkpoint 0 is the initial pre-search estimate;
  /// `pooled` cells aggregate all checkpoints.
  struct EstimatorCell {
    std::string method;
    std::size_t checkpoint = 0;
    bool pooled = false;
    double theta = 0.05;
    std::string sidedness;
    std::size_t n = 0;
    double coverage = 0;
    double mean_width = 0;
    double median_width = 0;
    double rmse = 0;
  };

  struct PolicyRow {
    std::string policy;
    std::size_t n = 0;
    double exact_ratio = 0;
    std::optional<double> exact_class_ratio;
    std::optional<double> exact_accuracy;   // exact classifier vs ground truth
    std::optional<double> stopped_accuracy; // stopped classifier vs ground truth
    std::optional<double> accuracy_ratio;
    double time_savings = 0;
    std::optional<double> wallclock_savings;
    double mean_family_error = 0;
    std::optional<double> within_epsilon; // distance policies: fraction with family error < epsilon
    std::vector<double> per_repetition_exact_ratio;
    std::vector<double> per_repetition_savings;
  };

  struct Report {
    nlohmann::json config;
    std::vector<EstimatorCell> cells;
    std::vector<PolicyRow> policies;
    std::size_t indexed_count = 0;
    std::size_t leaf_count = 0;
    std::optional<double> runtime_seconds;

    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] std::string to_csv() const;
    [[nodiscard]] const EstimatorCell& cell(const std::string& method, std::size_t checkpoint, double theta,
                                            bool pooled = false) const;
    [[nodiscard]] const PolicyRow& policy(const std::string& spec) const;
  };

  /// Builds (or loads) the dataset described by the spec.
  [[nodiscard]] std::shared_ptr<const Dataset> bench_dataset(const DatasetSpec& spec);

  /// Monte Carlo cross-validation: per repetition draw witnesses, training and testing
  /// queries from the held-out pools, fit the models, and evaluate estimators and policies
  /// against complete searches.
  [[nodiscard]] Report run_bench(const BenchConfig& config);
  [[nodiscard]] Report run_bench(const BenchConfig& config, std::shared_ptr<const Dataset> dataset);

  void write_report(const Report& report, const std::filesystem::path& json_path,
                    const std::optional<std::filesystem::path>& csv_path = std::nullopt);

} // namespace pros
