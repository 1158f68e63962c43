#include "pros/classify.hpp"

#include "pros/error.hpp"

namespace pros {

  std::int32_t majority_class(std::span<const std::int32_t> labels) { return agreement(labels).majority; }

  ClassificationOutcome classify_progressive(const IndexTree& tree, const GuaranteeBundle& bundle,
                                             std::span<const double> query, const StoppingPolicy& policy,
                                             const RunConfig& config, std::optional<std::int32_t> correct_class) {
    const Dataset& ds = tree.dataset();
    require(ds.has_labels(), "classify_progressive: the indexed dataset has no labels");
    ClassificationOutcome out;
    out.query = run_with_policy(tree, bundle, query, policy, config);
    std::vector<std::uint32_t> ids;
    for (const auto& n : out.query.answer) { ids.push_back(n.id); }
    out.predicted = majority_class(labels_of(ds, ids));
    out.exact_class = out.query.exact_class;
    out.correct_class = correct_class;
    out.stopped_at = out.query.stopped_at;
    out.stopped = out.query.stopped;
    out.savings = out.query.savings();
    return out;
  }

  double accuracy_ratio(double stopped_accuracy, double exact_accuracy) {
    require(exact_accuracy > 0, "accuracy_ratio: exact accuracy must be positive");
    return stopped_accuracy / exact_accuracy;
  }

} // namespace pros
