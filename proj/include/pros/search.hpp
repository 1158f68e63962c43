#pragma once

#include "pros/index.hpp"

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace pros {

  struct Neighbor {
    std::uint32_t id = 0;
    double distance = 0;

    friend bool operator==(const Neighbor&, const Neighbor&) = default;
  };

  /// Default checkpoint schedule in leaves visited: 1, 4, 16, 64, 256, 1024.
  [[nodiscard]] std::vector<std::size_t> default_checkpoints();

  /// Best-so-far answer set after some number of visited leaves.
  struct ProgressiveEvent {
    enum Flag : std::uint8_t {
      initial = 1U << 0U,    // first moment the answer set holds k series
      checkpoint = 1U << 1U, // a scheduled checkpoint was reached
      final = 1U << 2U,      // the search completed naturally; the answer is exact
      stopped = 1U << 3U,    // the search was stopped at this leaf boundary
    };

    std::size_t leaves_visited = 0;
    std::vector<double> bsf_distances; // ascending, k entries
    std::vector<std::uint32_t> bsf_ids;
    std::optional<std::int64_t> wallclock_ns;
    std::uint8_t flags = 0;

    [[nodiscard]] bool has(Flag f) const noexcept { return (flags & f) != 0; }
    [[nodiscard]] double kth_distance() const { return bsf_distances.back(); }
    [[nodiscard]] std::vector<Neighbor> neighbors() const;
  };

  struct SearchTrace {
    /// Events delivered to the consumer (initial, checkpoints, final/stop).
    std::vector<ProgressiveEvent> events;
    /// One snapshot per leaf boundary at which the full answer set changed.
    std::vector<ProgressiveEvent> improvements;
    /// Exact k-NN distances; filled only when the search completed naturally.
    std::vector<double> exact_distances;
    std::vector<std::uint32_t> exact_ids;
    /// leaves_to_exact[i]: first leaf count at which ranks 0..i all hold their exact distance.
    std::vector<std::size_t> leaves_to_exact;
    std::size_t total_leaves = 0;
    std::size_t first_full_leaf = 0;
    std::optional<std::size_t> stopped_early_at;

    [[nodiscard]] bool completed() const noexcept { return !stopped_early_at.has_value(); }
    /// Best-so-far snapshot after `leaves` visited leaves (clamped to the first full answer
    /// and to the end of the search).
    [[nodiscard]] const ProgressiveEvent& bsf_at(std::size_t leaves) const;
  };

  struct SearchConfig {
    std::size_t k = 1;
    DistanceKind distance = DistanceKind::euclidean();
    std::vector<std::size_t> checkpoints = default_checkpoints();
    /// Shared stop flag, checked at every leaf boundary. May be set from another thread.
    const std::atomic<bool>* stop_flag = nullptr;
    bool record_wallclock = false;
  };

  /// What the consumer wants after an event.
  struct EventResponse {
    bool stop = false;
    /// Stop once this many leaves have been visited.
    std::optional<std::size_t> leaf_limit;
  };

  using EventCallback = std::function<EventResponse(const ProgressiveEvent&)>;

  /// Exact k-NN by full scan; ties broken by smaller id. `subset` restricts the scan.
  [[nodiscard]] std::vector<Neighbor> brute_force_knn(const Dataset& dataset, std::span<const double> query,
                                                      std::size_t k, const DistanceKind& distance,
                                                      std::optional<std::span<const std::uint32_t>> subset = std::nullopt);

  /// Progressive exact k-NN search. The first leaf is the one reached by greedy descent on
  /// mindist; the rest are visited best-first by mindist (ties by node creation order) and
  /// pruned when their mindist exceeds the current k-th best distance.
  [[nodiscard]] SearchTrace progressive_knn(const IndexTree& tree, std::span<const double> query,
                                            const SearchConfig& config, const EventCallback& on_event = {});

  /// Answer after the greedy-descent leaf, padded from the following leaves when it holds
  /// fewer than k series.
  [[nodiscard]] std::vector<Neighbor> approximate_search(const IndexTree& tree, std::span<const double> query,
                                                         std::size_t k, const DistanceKind& distance);

  /// bsf_k / dhat - 1.
  [[nodiscard]] double relative_error(double bsf_k, double dhat);

  /// Exact distances below this are excluded from the family-wise correction.
  inline constexpr double kFamilyEpsilon = 1e-12;

  /// d_knn / max_i (bsf_i / d_inn), ranks with d_inn < kFamilyEpsilon excluded.
  [[nodiscard]] double family_corrected_knn(std::span<const double> exact, std::span<const double> bsf);
  [[nodiscard]] double family_corrected_knn(const SearchTrace& trace, std::size_t leaves);

  /// bsf_k / d^f - 1, the worst relative error over all ranks.
  [[nodiscard]] double family_error(std::span<const double> exact, std::span<const double> bsf);

  /// True when every rank of `bsf` equals the exact distance.
  [[nodiscard]] bool is_exact(std::span<const double> exact, std::span<const double> bsf) noexcept;

} // namespace pros
