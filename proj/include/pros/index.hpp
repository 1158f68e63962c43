#pragma once

#include "pros/dataset.hpp"
#include "pros/series.hpp"
#include "pros/summaries.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pros {

  enum class IndexKind : std::uint8_t { isax = 0, dstree = 1 };

  [[nodiscard]] std::string to_string(IndexKind kind);
  [[nodiscard]] IndexKind parse_index_kind(const std::string& text);

  struct IndexConfig {
    IndexKind kind = IndexKind::isax;
    std::size_t segment_count = 16;
    /// Maximum number of series per leaf. A leaf may exceed it only when its series cannot
    /// be separated any further (identical summaries or exhausted SAX cardinality).
    std::size_t leaf_threshold = 100;
    std::uint32_t sax_max_cardinality = kMaxSaxCardinality;
    DistanceKind distance = DistanceKind::euclidean();
  };

  /// Per-segment bounds of every series stored under a node.
  /// For iSAX nodes [low, high] is the SAX region of the node's prefix; for DSTree nodes it is
  /// [mean_min, mean_max]. Standard deviation ranges are kept for DSTree nodes but do not enter
  /// the lower bounds.
  struct NodeSynopsis {
    IndexKind kind = IndexKind::isax;
    std::vector<double> low;
    std::vector<double> high;
    std::vector<double> stdev_min;
    std::vector<double> stdev_max;
    std::vector<std::uint16_t> sax_symbols;
    std::vector<std::uint8_t> sax_bits;
  };

  struct IndexNode {
    static constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

    std::uint32_t parent = kNone;
    std::vector<std::uint32_t> children;
    std::vector<std::uint32_t> ids; // leaf payload
    NodeSynopsis synopsis;
    std::int32_t split_segment = -1;
    double split_threshold = 0;

    [[nodiscard]] bool is_leaf() const noexcept { return children.empty(); }
  };

  /// Query-side summary matching a tree's segment layout. For DTW it also carries the
  /// summarized envelope.
  struct QuerySummary {
    std::vector<double> means;
    std::vector<std::size_t> endpoints;
    std::optional<SummarizedEnvelope> envelope;
  };

  class IndexTree {
  public:
    IndexTree() = default;

    [[nodiscard]] const IndexConfig& config() const noexcept { return config_; }
    [[nodiscard]] std::size_t series_length() const noexcept { return length_; }
    [[nodiscard]] const std::vector<std::size_t>& endpoints() const noexcept { return endpoints_; }
    [[nodiscard]] const std::vector<IndexNode>& nodes() const noexcept { return nodes_; }
    [[nodiscard]] const IndexNode& node(std::uint32_t i) const { return nodes_.at(i); }
    [[nodiscard]] const Dataset& dataset() const noexcept { return *dataset_; }
    [[nodiscard]] std::shared_ptr<const Dataset> dataset_handle() const noexcept { return dataset_; }
    [[nodiscard]] std::size_t leaf_count() const noexcept { return leaf_count_; }
    /// Number of series indexed (the dataset size, or the subset size).
    [[nodiscard]] std::size_t indexed_count() const noexcept { return indexed_count_; }

    /// Leaves in node creation order.
    [[nodiscard]] std::vector<std::uint32_t> leaves() const;
    /// Ids stored in the tree, ascending.
    [[nodiscard]] std::vector<std::uint32_t> indexed_ids() const;
    /// Dataset ids not stored in the tree, ascending.
    [[nodiscard]] std::vector<std::uint32_t> held_out_ids() const;

    [[nodiscard]] QuerySummary summarize_query(std::span<const double> query, const DistanceKind& distance) const;

    [[nodiscard]] double mindist(const QuerySummary& q, std::uint32_t node) const;

    friend IndexTree build_index(std::shared_ptr<const Dataset>, const IndexConfig&,
                                 std::optional<std::span<const std::uint32_t>>);
    friend IndexTree load_index(const std::filesystem::path&, std::shared_ptr<const Dataset>);
    friend std::vector<std::uint8_t> serialize_index(const IndexTree&);

  private:
    IndexConfig config_;
    std::size_t length_ = 0;
    std::size_t indexed_count_ = 0;
    std::size_t leaf_count_ = 0;
    std::vector<std::size_t> endpoints_;
    std::vector<IndexNode> nodes_;
    std::shared_ptr<const Dataset> dataset_;
  };

  /// Builds a tree over every series of the dataset, or over `subset` ids only.
  [[nodiscard]] IndexTree build_index(std::shared_ptr<const Dataset> dataset, const IndexConfig& config,
                                      std::optional<std::span<const std::uint32_t>> subset = std::nullopt);

  /// Node-level lower bound on the distance between the query and every series under the node.
  ///   ED,  iSAX:   sqrt(n/M) * sqrt(sum gap(mean_i, [low_i, high_i])^2)
  ///   ED,  DSTree: sqrt(sum (m_i - m_{i-1}) * gap(mean_i, [low_i, high_i])^2)
  ///   DTW, iSAX:   sqrt(n/M) * sqrt(sum gap([L^_i, U^_i], [low_i, high_i])^2)
  ///   DTW, DSTree: sqrt(sum (m_i - m_{i-1}) * gap([L^_i, U^_i], [mean_min_i, mean_max_i])^2)
  [[nodiscard]] double mindist(const QuerySummary& query, const NodeSynopsis& node, const DistanceKind& distance);

  inline constexpr char kIndexMagic[8] = {'P', 'R', 'O', 'S', 'I', 'D', 'X', '1'};
  inline constexpr std::uint8_t kIndexVersion = 1;

  [[nodiscard]] std::vector<std::uint8_t> serialize_index(const IndexTree& tree);
  void save_index(const IndexTree& tree, const std::filesystem::path& path);
  /// Throws IoError on bad magic, version mismatch, checksum failure, truncation, or a dataset
  /// that does not match the saved tree.
  [[nodiscard]] IndexTree load_index(const std::filesystem::path& path, std::shared_ptr<const Dataset> dataset);

} // namespace pros
