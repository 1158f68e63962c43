#pragma once

#include "pros/policy.hpp"

#include <cstdint>
#include <optional>
#include <span>

namespace pros {

  /// Most common label; ties go to the smallest class id.
  [[nodiscard]] std::int32_t majority_class(std::span<const std::int32_t> labels);

  struct ClassificationOutcome {
    std::int32_t predicted = 0;
    std::optional<std::int32_t> exact_class;   // majority over the exact k-NN set
    std::optional<std::int32_t> correct_class; // ground truth, when known
    std::size_t stopped_at = 0;
    bool stopped = false;
    double savings = 0;
    QueryOutcome query;
  };

  /// k-NN classification over a progressive search stopped by `policy`.
  [[nodiscard]] ClassificationOutcome classify_progressive(const IndexTree& tree, const GuaranteeBundle& bundle,
                                                           std::span<const double> query,
                                                           const StoppingPolicy& policy, const RunConfig& config,
                                                           std::optional<std::int32_t> correct_class = std::nullopt);

  /// stopped_accuracy / exact_accuracy; may exceed 1.
  [[nodiscard]] double accuracy_ratio(double stopped_accuracy, double exact_accuracy);

} // namespace pros
