#pragma once

#include "pros/index.hpp"
#include "pros/search.hpp"
#include "pros/stats.hpp"

#include "json.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pros {

  inline constexpr const char* kBundleVersion = "pros-models-1";
  inline constexpr double kWitnessExponent = 5.0;

  /// Witness series with their exact k-NN distances in the indexed collection.
  struct WitnessSet {
    std::vector<std::uint32_t> ids;
    std::vector<std::vector<double>> series;
    std::vector<double> knn_distances;

    [[nodiscard]] std::size_t size() const noexcept { return ids.size(); }
  };

  /// Computes the exact k-NN distance of each witness with a full progressive search.
  [[nodiscard]] WitnessSet make_witness_set(const IndexTree& tree, const Dataset& source,
                                            std::span<const std::uint32_t> ids, std::size_t k,
                                            const DistanceKind& distance);

  /// a_j = d_j^-exp / sum_i d_i^-exp. Requires every distance > 0.
  [[nodiscard]] std::vector<double> witness_weights(std::span<const double> distances, double exponent = kWitnessExponent);

  /// sum_j a_j * knn_j. A witness at distance zero returns its own k-NN distance.
  [[nodiscard]] double witness_weighted_distance(std::span<const double> query_to_witness,
                                                 std::span<const double> witness_knn,
                                                 double exponent = kWitnessExponent);
  [[nodiscard]] double witness_weighted_distance(std::span<const double> query, const WitnessSet& witnesses,
                                                 const DistanceKind& distance, double exponent = kWitnessExponent);

  /// One fully executed training query.
  struct TrainingRecord {
    std::uint32_t query_id = 0;
    double witness_distance = 0;
    SearchTrace trace;

    [[nodiscard]] std::size_t k() const noexcept { return trace.exact_distances.size(); }
    [[nodiscard]] double exact_kth() const { return trace.exact_distances.back(); }
    [[nodiscard]] double first_approximate_distance() const { return trace.improvements.front().kth_distance(); }
    /// A progressive answer exists at t: the answer set is full and the search has not ended before t.
    [[nodiscard]] bool running_at(std::size_t leaves) const noexcept {
      return leaves >= trace.first_full_leaf && leaves <= trace.total_leaves;
    }
    [[nodiscard]] const ProgressiveEvent& at(std::size_t leaves) const { return trace.bsf_at(leaves); }
    /// Family-corrected k-NN distance against the answer at t.
    [[nodiscard]] double family_target(std::size_t leaves) const;
    [[nodiscard]] bool exact_at(std::size_t leaves) const;
    [[nodiscard]] std::size_t leaves_to_exact_answer() const { return trace.leaves_to_exact.back(); }
  };

  struct CollectConfig {
    std::size_t k = 1;
    DistanceKind distance = DistanceKind::euclidean();
    double witness_exponent = kWitnessExponent;
    std::size_t threads = 0;
  };

  /// One record per query from complete progressive searches. `witnesses` may be empty,
  /// in which case witness distances are left at 0.
  [[nodiscard]] std::vector<TrainingRecord> collect_training(const IndexTree& tree, const Dataset& source,
                                                             std::span<const std::uint32_t> query_ids,
                                                             const WitnessSet& witnesses, const CollectConfig& config);

  /// Majority class of k labels (ties to the smallest class id) and agreement (n_maj - 1)/(k - 1).
  struct Agreement {
    std::int32_t majority = 0;
    std::size_t majority_count = 0;
    std::optional<double> agreement; // undefined for k = 1
  };

  [[nodiscard]] Agreement agreement(std::span<const std::int32_t> labels);
  [[nodiscard]] std::vector<std::int32_t> labels_of(const Dataset& dataset, std::span<const std::uint32_t> ids);

  enum class EstimatorMethod { linear, kde2, kde3, witness, baseline };

  [[nodiscard]] std::string to_string(EstimatorMethod method);
  [[nodiscard]] EstimatorMethod parse_estimator(const std::string& text);

  /// A fitted KDE kept with its training points so it can be rebuilt from JSON.
  struct KdeModel {
    Eigen::MatrixXd points;
    std::vector<std::size_t> grid_counts;
    std::vector<double> bandwidth; // kernel covariance, row-major d x d
    KdeGrid grid;

    static KdeModel fit(Eigen::MatrixXd points, std::vector<std::size_t> grid_counts, double bandwidth_scale,
                        BandwidthRule rule = BandwidthRule::full);
    static KdeModel rebuild(Eigen::MatrixXd points, std::vector<std::size_t> grid_counts, std::vector<double> bandwidth);
  };

  /// Binary outcome model at one checkpoint: a logistic fit, or a pinned probability when
  /// only one outcome occurred in training.
  struct OutcomeModel {
    std::optional<LogisticModel> logistic;
    double pinned = 0;

    [[nodiscard]] double predict(std::span<const double> x) const { return logistic ? logistic->predict(x) : pinned; }
  };

  struct CheckpointModels {
    std::size_t leaves = 0;
    std::size_t rows = 0;
    std::optional<LinearModel> linear;
    std::optional<KdeModel> kde2; // axes (final d^f, bsf_k)
    std::optional<OutcomeModel> exact_probability;
    std::optional<OutcomeModel> class_probability;
  };

  struct TimeBoundModel {
    double phi = 0.05;
    QuantileModel model;

    /// Leaves after which the answer is exact with probability 1 - phi, rounded up.
    [[nodiscard]] std::size_t bound(double first_approximate_distance) const;
  };

  struct GuaranteeBundle {
    std::string version = kBundleVersion;
    std::size_t k = 1;
    DistanceKind distance = DistanceKind::euclidean();
    IndexKind index_kind = IndexKind::isax;
    std::size_t series_length = 0;
    std::vector<std::size_t> checkpoints;
    double bandwidth_scale = 1.0;
    double witness_exponent = kWitnessExponent;

    WitnessSet witnesses;
    std::optional<LinearModel> witness_model;
    std::vector<CheckpointModels> per_checkpoint;
    std::optional<KdeModel> kde3; // axes (log2 leaves, final d^f, bsf_k)
    std::vector<TimeBoundModel> time_bounds;

    std::size_t class_count = 0; // 0 when no class models were trained
    bool class_one_hot = false;

    /// Index of the last checkpoint <= leaves for which `has` holds, if any.
    template<typename Pred>
    [[nodiscard]] std::optional<std::size_t> model_at(std::size_t leaves, Pred has) const {
      std::optional<std::size_t> found;
      for (std::size_t i = 0; i < per_checkpoint.size() && per_checkpoint[i].leaves <= leaves; ++i) {
        if (has(per_checkpoint[i])) { found = i; }
      }
      return found;
    }

    [[nodiscard]] const TimeBoundModel& time_bound(double phi) const;
    /// Throws ModelMismatch if the bundle was trained for a different query setup.
    void check_compatible(std::size_t k, const DistanceKind& distance, IndexKind index_kind,
                          std::size_t series_length) const;
  };

  struct TrainingConfig {
    std::vector<std::size_t> checkpoints = default_checkpoints();
    std::vector<double> time_bound_phis{0.05, 0.01};
    double bandwidth_scale = 1.0;
    BandwidthRule bandwidth_rule = BandwidthRule::full;
    std::array<std::size_t, 2> kde2_grid{200, 200};
    std::array<std::size_t, 3> kde3_grid{60, 180, 180};
    bool fit_kde3 = true;
    std::size_t min_rows = 10;
    /// One-hot class predictors only when the class count is at most this.
    std::size_t one_hot_max_classes = 10;
  };

  [[nodiscard]] double baseline_quantile(const WitnessSet& witnesses, double q);
  [[nodiscard]] LinearModel fit_query_sensitive(std::span<const TrainingRecord> records);

  /// Linear models and 2D KDEs per checkpoint, plus the 3D KDE over all checkpoints.
  void fit_checkpoint_estimators(GuaranteeBundle& bundle, std::span<const TrainingRecord> records,
                                 const TrainingConfig& config);
  void fit_exact_probability(GuaranteeBundle& bundle, std::span<const TrainingRecord> records,
                             const TrainingConfig& config);
  [[nodiscard]] TimeBoundModel fit_time_bound(std::span<const TrainingRecord> records, double phi);
  void fit_class_probability(GuaranteeBundle& bundle, std::span<const TrainingRecord> records, const Dataset& dataset,
                             const TrainingConfig& config);

  /// Fits every model the records support. Class models are fitted when `dataset` has labels.
  [[nodiscard]] GuaranteeBundle fit_bundle(std::span<const TrainingRecord> records, const WitnessSet& witnesses,
                                           const IndexTree& tree, const CollectConfig& collect,
                                           const TrainingConfig& config);

  struct DistanceEstimate {
    double point = 0;
    double lower = 0;
    double upper = 0;
  };

  struct EstimateInput {
    double bsf_k = kInfinity;     // current k-th best distance; +inf before the search starts
    std::size_t leaves = 0;       // leaves visited
    double witness_distance = 0;  // dw_Q, for the witness method
  };

  /// Point estimate and interval for the (family-corrected) k-NN distance. lower_only gives a
  /// theta-level lower bound with the bsf as upper bound; two_sided is for the initial
  /// witness and baseline estimates. Bounds are clamped to lower <= point <= upper <= bsf_k.
  [[nodiscard]] DistanceEstimate estimate_distance(const GuaranteeBundle& bundle, const EstimateInput& input,
                                                   double theta, EstimatorMethod method,
                                                   Sidedness sidedness = Sidedness::lower_only);

  /// Probability that the current answer is exact; nullopt when no model covers `leaves`.
  [[nodiscard]] std::optional<double> exact_probability(const GuaranteeBundle& bundle, std::size_t leaves,
                                                        double bsf_k);
  /// Probability that the current majority class is the exact class.
  [[nodiscard]] std::optional<double> class_probability(const GuaranteeBundle& bundle, std::size_t leaves, double bsf_k,
                                                        std::span<const std::int32_t> bsf_labels);
  [[nodiscard]] std::vector<double> class_predictors(double bsf_k, std::span<const std::int32_t> bsf_labels,
                                                     std::size_t class_count, bool one_hot);

  [[nodiscard]] nlohmann::json to_json(const GuaranteeBundle& bundle);
  [[nodiscard]] GuaranteeBundle bundle_from_json(const nlohmann::json& j);
  void save_bundle(const GuaranteeBundle& bundle, const std::filesystem::path& path);
  [[nodiscard]] GuaranteeBundle load_bundle(const std::filesystem::path& path);

} // namespace pros
