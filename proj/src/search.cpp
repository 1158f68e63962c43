#include "pros/search.hpp"

#include "pros/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <queue>

namespace pros {

  std::vector<std::size_t> default_checkpoints() { return {1, 4, 16, 64, 256, 1024}; }

  std::vector<Neighbor> ProgressiveEvent::neighbors() const {
    std::vector<Neighbor> out(bsf_ids.size());
    for (std::size_t i = 0; i < out.size(); ++i) { out[i] = {bsf_ids[i], bsf_distances[i]}; }
    return out;
  }

  const ProgressiveEvent& SearchTrace::bsf_at(std::size_t leaves) const {
    require(!improvements.empty(), "trace holds no answer");
    auto it = std::upper_bound(improvements.begin(), improvements.end(), leaves,
                               [](std::size_t t, const ProgressiveEvent& e) { return t < e.leaves_visited; });
    if (it == improvements.begin()) { return improvements.front(); }
    return *(it - 1);
  }

  namespace {

    /// The k smallest (squared distance, id) pairs seen so far, ascending.
    class KnnSet {
    public:
      explicit KnnSet(std::size_t k) : k_(k) { items_.reserve(k + 1); }

      [[nodiscard]] bool full() const noexcept { return items_.size() == k_; }
      /// Squared distance a candidate must not exceed to enter the set.
      [[nodiscard]] double threshold() const noexcept { return full() ? items_.back().first : kInfinity; }

      bool offer(double sq, std::uint32_t id) {
        const std::pair<double, std::uint32_t> cand{sq, id};
        if (full() && !(cand < items_.back())) { return false; }
        auto pos = std::lower_bound(items_.begin(), items_.end(), cand);
        items_.insert(pos, cand);
        if (items_.size() > k_) { items_.pop_back(); }
        return true;
      }

      void snapshot(ProgressiveEvent& e) const {
        e.bsf_distances.resize(items_.size());
        e.bsf_ids.resize(items_.size());
        for (std::size_t i = 0; i < items_.size(); ++i) {
          e.bsf_distances[i] = std::sqrt(items_[i].first);
          e.bsf_ids[i] = items_[i].second;
        }
      }

    private:
      std::size_t k_;
      std::vector<std::pair<double, std::uint32_t>> items_;
    };

    struct QueueEntry {
      double bound;
      std::uint32_t node;

      bool operator>(const QueueEntry& o) const noexcept {
        return bound != o.bound ? bound > o.bound : node > o.node;
      }
    };

    // Node bounds are compared against the k-th distance with a relative slack so that
    // floating-point rounding in the bound can never prune a tied or equal-distance series.
    bool prunable(double bound, double kth_sq) noexcept {
      if (!std::isfinite(kth_sq)) { return false; }
      const double kth = std::sqrt(kth_sq);
      return bound > kth + 1e-12 * (1.0 + kth);
    }

    class Searcher {
    public:
      Searcher(const IndexTree& tree, std::span<const double> query, const SearchConfig& cfg)
          : tree_(tree), query_(query), cfg_(cfg), set_(cfg.k), summary_(tree.summarize_query(query, cfg.distance)) {
        if (cfg.distance.is_dtw()) { envelope_ = build_envelope(query, cfg.distance.band_radius); }
      }

      void visit_leaf(std::uint32_t leaf) {
        const auto& ds = tree_.dataset();
        const bool dtw = cfg_.distance.is_dtw();
        for (auto id : tree_.node(leaf).ids) {
          const auto s = ds.series(id);
          const double limit = set_.threshold();
          double sq = 0;
          if (dtw) {
            if (squared_lb_keogh(envelope_, s, limit) == kInfinity) { continue; }
            sq = squared_dtw(query_, s, cfg_.distance.band_radius, limit);
          } else {
            sq = squared_euclidean(query_, s, limit);
          }
          if (sq == kInfinity) { continue; }
          if (set_.offer(sq, id)) { changed_ = true; }
        }
      }

      std::uint32_t descend() const {
        std::uint32_t n = 0;
        while (!tree_.node(n).is_leaf()) {
          const auto& kids = tree_.node(n).children;
          std::uint32_t best = kids.front();
          double best_d = tree_.mindist(summary_, best);
          for (std::size_t i = 1; i < kids.size(); ++i) {
            const double d = tree_.mindist(summary_, kids[i]);
            if (d < best_d) {
              best_d = d;
              best = kids[i];
            }
          }
          n = best;
        }
        return n;
      }

      std::optional<std::uint32_t> next_leaf() {
        while (!queue_.empty()) {
          const auto top = queue_.top();
          if (prunable(top.bound, set_.threshold())) { return std::nullopt; }
          queue_.pop();
          const auto& node = tree_.node(top.node);
          if (node.is_leaf()) {
            if (top.node == first_leaf_) { continue; }
            return top.node;
          }
          for (auto child : node.children) {
            const double b = tree_.mindist(summary_, child);
            if (!prunable(b, set_.threshold())) { queue_.push({b, child}); }
          }
        }
        return std::nullopt;
      }

      SearchTrace run(const EventCallback& on_event) {
        require(cfg_.k >= 1, "k must be at least 1");
        require(cfg_.k <= tree_.indexed_count(), "k = " + std::to_string(cfg_.k) + " exceeds the " +
                                                     std::to_string(tree_.indexed_count()) + " indexed series");
        for (std::size_t i = 1; i < cfg_.checkpoints.size(); ++i) {
          require(cfg_.checkpoints[i] > cfg_.checkpoints[i - 1], "checkpoints must be strictly increasing");
        }
        const auto start = std::chrono::steady_clock::now();
        SearchTrace trace;
        std::size_t leaves = 0;
        std::size_t next_checkpoint = 0;
        bool pending_checkpoint = false;
        bool announced = false;
        std::optional<std::size_t> leaf_limit;

        first_leaf_ = descend();
        queue_.push({tree_.mindist(summary_, 0), 0});
        std::optional<std::uint32_t> leaf = first_leaf_;
        while (leaf) {
          changed_ = false;
          visit_leaf(*leaf);
          ++leaves;
          while (next_checkpoint < cfg_.checkpoints.size() && cfg_.checkpoints[next_checkpoint] <= leaves) {
            pending_checkpoint = true;
            ++next_checkpoint;
          }
          leaf = next_leaf();

          ProgressiveEvent e;
          e.leaves_visited = leaves;
          if (set_.full()) {
            if (!announced) {
              e.flags |= ProgressiveEvent::initial;
              trace.first_full_leaf = leaves;
              announced = true;
            }
            if (pending_checkpoint) {
              e.flags |= ProgressiveEvent::checkpoint;
              pending_checkpoint = false;
            }
            if (!leaf) { e.flags |= ProgressiveEvent::final; }
          }
          const bool external_stop = cfg_.stop_flag != nullptr && cfg_.stop_flag->load(std::memory_order_relaxed);
          const bool limit_hit = leaf_limit && leaves >= *leaf_limit;
          if (leaf && set_.full() && (external_stop || limit_hit)) { e.flags |= ProgressiveEvent::stopped; }

          if (set_.full() && (changed_ || trace.improvements.empty() || e.flags != 0)) {
            set_.snapshot(e);
            if (cfg_.record_wallclock) {
              e.wallclock_ns =
                  std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start).count();
            }
            if (changed_ || trace.improvements.empty()) { trace.improvements.push_back(e); }
          }

          bool stop = e.has(ProgressiveEvent::stopped);
          if (e.flags != 0) {
            trace.events.push_back(e);
            if (on_event) {
              const auto response = on_event(e);
              if (response.leaf_limit) { leaf_limit = response.leaf_limit; }
              if (leaf && response.stop) { stop = true; }
              if (leaf && leaf_limit && leaves >= *leaf_limit) { stop = true; }
            }
          }
          if (stop) {
            if (!trace.events.empty() && trace.events.back().leaves_visited == leaves) {
              trace.events.back().flags |= ProgressiveEvent::stopped;
            }
            trace.stopped_early_at = leaves;
            break;
          }
        }
        trace.total_leaves = leaves;

        if (trace.completed()) {
          const auto& last = trace.improvements.back();
          trace.exact_distances = last.bsf_distances;
          trace.exact_ids = last.bsf_ids;
          trace.leaves_to_exact.assign(cfg_.k, leaves);
          std::size_t rank = 0;
          for (const auto& imp : trace.improvements) {
            while (rank < cfg_.k && imp.bsf_distances[rank] == trace.exact_distances[rank]) {
              trace.leaves_to_exact[rank] = imp.leaves_visited;
              ++rank;
            }
            if (rank == cfg_.k) { break; }
          }
        }
        return trace;
      }

    private:
      const IndexTree& tree_;
      std::span<const double> query_;
      const SearchConfig& cfg_;
      KnnSet set_;
      QuerySummary summary_;
      Envelope envelope_;
      std::priority_queue<QueueEntry, std::vector<QueueEntry>, std::greater<>> queue_;
      std::uint32_t first_leaf_ = 0;
      bool changed_ = false;
    };

  } // namespace

  std::vector<Neighbor> brute_force_knn(const Dataset& dataset, std::span<const double> query, std::size_t k,
                                        const DistanceKind& distance,
                                        std::optional<std::span<const std::uint32_t>> subset) {
    require(query.size() == dataset.length(), "brute_force_knn: query length mismatch");
    std::vector<std::pair<double, std::uint32_t>> all;
    auto consider = [&](std::uint32_t id) {
      const auto s = dataset.series(id);
      const double sq = distance.is_dtw() ? squared_dtw(query, s, distance.band_radius) : squared_euclidean(query, s);
      all.emplace_back(sq, id);
    };
    if (subset) {
      all.reserve(subset->size());
      for (auto id : *subset) { consider(id); }
    } else {
      all.reserve(dataset.size());
      for (std::uint32_t id = 0; id < dataset.size(); ++id) { consider(id); }
    }
    require(k >= 1 && k <= all.size(), "brute_force_knn: k must be in [1, n]");
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end());
    std::vector<Neighbor> out(k);
    for (std::size_t i = 0; i < k; ++i) { out[i] = {all[i].second, std::sqrt(all[i].first)}; }
    return out;
  }

  SearchTrace progressive_knn(const IndexTree& tree, std::span<const double> query, const SearchConfig& config,
                              const EventCallback& on_event) {
    Searcher s(tree, query, config);
    return s.run(on_event);
  }

  std::vector<Neighbor> approximate_search(const IndexTree& tree, std::span<const double> query, std::size_t k,
                                           const DistanceKind& distance) {
    SearchConfig cfg;
    cfg.k = k;
    cfg.distance = distance;
    cfg.checkpoints = {};
    std::vector<Neighbor> answer;
    (void)progressive_knn(tree, query, cfg, [&](const ProgressiveEvent& e) {
      if (e.has(ProgressiveEvent::initial)) { answer = e.neighbors(); }
      return EventResponse{.stop = true, .leaf_limit = std::nullopt};
    });
    return answer;
  }

  double relative_error(double bsf_k, double dhat) {
    require(dhat > 0, "relative_error: distance estimate must be positive");
    return bsf_k / dhat - 1.0;
  }

  double family_corrected_knn(std::span<const double> exact, std::span<const double> bsf) {
    require(!exact.empty() && exact.size() == bsf.size(), "family_corrected_knn: rank count mismatch");
    double worst = 1.0;
    for (std::size_t i = 0; i < exact.size(); ++i) {
      if (exact[i] < kFamilyEpsilon) { continue; }
      worst = std::max(worst, bsf[i] / exact[i]);
    }
    return exact.back() / worst;
  }

  double family_corrected_knn(const SearchTrace& trace, std::size_t leaves) {
    require(!trace.exact_distances.empty(), "family_corrected_knn: trace has no exact distances");
    return family_corrected_knn(trace.exact_distances, trace.bsf_at(leaves).bsf_distances);
  }

  double family_error(std::span<const double> exact, std::span<const double> bsf) {
    const double df = family_corrected_knn(exact, bsf);
    if (df <= 0) { return bsf.back() > 0 ? kInfinity : 0.0; }
    return bsf.back() / df - 1.0;
  }

  bool is_exact(std::span<const double> exact, std::span<const double> bsf) noexcept {
    if (exact.size() != bsf.size()) { return false; }
    for (std::size_t i = 0; i < exact.size(); ++i) {
      if (bsf[i] != exact[i]) { return false; }
    }
    return true;
  }

} // namespace pros
