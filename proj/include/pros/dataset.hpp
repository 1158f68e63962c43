#pragma once

#include "json.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pros {

  /// In-memory collection of equal-length float32 series, row-major, with optional labels.
  class Dataset {
  public:
    Dataset() = default;
    Dataset(std::size_t length, std::vector<float> values, std::vector<std::int32_t> labels = {});

    [[nodiscard]] std::size_t size() const noexcept { return count_; }
    [[nodiscard]] std::size_t length() const noexcept { return length_; }
    [[nodiscard]] bool has_labels() const noexcept { return !labels_.empty(); }

    [[nodiscard]] std::span<const float> series(std::size_t id) const noexcept {
      return {values_.data() + id * length_, length_};
    }
    /// Series as doubles, the representation queries use.
    [[nodiscard]] std::vector<double> series_as_double(std::size_t id) const;

    [[nodiscard]] std::int32_t label(std::size_t id) const { return labels_.at(id); }
    [[nodiscard]] const std::vector<std::int32_t>& labels() const noexcept { return labels_; }
    [[nodiscard]] const std::vector<float>& values() const noexcept { return values_; }

    /// Number of distinct classes (max label + 1); 0 when unlabeled.
    [[nodiscard]] std::size_t class_count() const noexcept;

  private:
    std::size_t length_ = 0;
    std::size_t count_ = 0;
    std::vector<float> values_;
    std::vector<std::int32_t> labels_;
  };

  /// JSON sidecar describing a raw little-endian float32 file.
  struct DatasetDescriptor {
    std::filesystem::path raw_path;
    std::size_t count = 0;
    std::size_t length = 0;
    std::optional<std::filesystem::path> label_path;
    bool normalized = true;
    nlohmann::json provenance = nlohmann::json::object();

    [[nodiscard]] nlohmann::json to_json(const std::filesystem::path& relative_to) const;
    [[nodiscard]] static DatasetDescriptor from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  };

  /// Sidecar path convention: "<raw>.json".
  [[nodiscard]] std::filesystem::path descriptor_path_for(const std::filesystem::path& raw_path);

  /// Writes raw file, labels (if any) and sidecar. Returns the descriptor.
  DatasetDescriptor write_dataset(const Dataset& dataset, const std::filesystem::path& raw_path,
                                  nlohmann::json provenance = nlohmann::json::object(), bool normalized = true);

  void save_descriptor(const DatasetDescriptor& descriptor, const std::filesystem::path& json_path);
  /// Loads a sidecar and validates it against the raw file size (4 * n * length bytes).
  [[nodiscard]] DatasetDescriptor load_descriptor(const std::filesystem::path& json_path);
  void validate_descriptor(const DatasetDescriptor& descriptor);

  [[nodiscard]] std::vector<float> read_series(const DatasetDescriptor& descriptor, std::size_t id);
  void stream_dataset(const DatasetDescriptor& descriptor,
                      const std::function<void(std::size_t, std::span<const float>)>& visit);
  [[nodiscard]] Dataset load_dataset(const DatasetDescriptor& descriptor);
  [[nodiscard]] std::vector<std::int32_t> read_labels(const std::filesystem::path& path, std::size_t expected);

  /// Deterministic per-series seed derived from a dataset seed and a series index.
  [[nodiscard]] std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept;

  /// Cumulative sum of i.i.d. N(0,1) steps before normalization.
  [[nodiscard]] std::vector<double> random_walk_raw(std::size_t length, std::uint64_t seed, std::uint64_t index);

  /// n z-normalized random walks.
  [[nodiscard]] Dataset make_random_walk(std::size_t count, std::size_t length, std::uint64_t seed);

  enum class CbfClass : std::int32_t { cylinder = 0, bell = 1, funnel = 2 };

  struct CbfParams {
    double amplitude = 3.0;
    std::array<double, 3> class_probs{1.0 / 3, 1.0 / 3, 1.0 / 3};
  };

  /// One raw (unnormalized) Cylinder-Bell-Funnel instance of the given class.
  [[nodiscard]] std::vector<double> cbf_raw(CbfClass cls, std::size_t length, double amplitude, std::uint64_t seed,
                                            std::uint64_t index);

  /// Labeled z-normalized CBF dataset.
  [[nodiscard]] Dataset make_cbf(std::size_t count, std::size_t length, const CbfParams& params, std::uint64_t seed);

  DatasetDescriptor generate_random_walk(const std::filesystem::path& raw_path, std::size_t count, std::size_t length,
                                         std::uint64_t seed);
  DatasetDescriptor generate_cbf(const std::filesystem::path& raw_path, std::size_t count, std::size_t length,
                                 const CbfParams& params, std::uint64_t seed);

  /// Two disjoint pools of series ids: witnesses and queries (training + testing).
  struct PoolSplit {
    std::vector<std::uint32_t> witness_pool;
    std::vector<std::uint32_t> query_pool;
  };

  [[nodiscard]] PoolSplit sample_pools(std::size_t dataset_size, std::size_t witness_pool_size,
                                       std::size_t query_pool_size, std::uint64_t seed);

  /// One Monte Carlo repetition's draw: witnesses from the witness pool, disjoint training and
  /// testing queries from the query pool. Indices refer to positions in the pools.
  struct RepetitionDraw {
    std::vector<std::size_t> witnesses;
    std::vector<std::size_t> training;
    std::vector<std::size_t> testing;
  };

  [[nodiscard]] RepetitionDraw draw_repetition(const PoolSplit& pools, std::size_t n_w, std::size_t n_r,
                                               std::size_t n_t, std::uint64_t seed, std::size_t repetition);

  /// Ids of [0, dataset_size) not contained in either pool, ascending.
  [[nodiscard]] std::vector<std::uint32_t> ids_outside_pools(const PoolSplit& pools, std::size_t dataset_size);

} // namespace pros
