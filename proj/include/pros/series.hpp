#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace pros {

  /// A fixed-length data series. Values live in z-normalized space.
  struct DataSeries {
    std::uint64_t id = 0;
    std::vector<double> values;

    [[nodiscard]] std::size_t length() const noexcept { return values.size(); }
  };

  /// Sakoe-Chiba envelope of a query: running max/min over [j - r, j + r].
  struct Envelope {
    std::vector<double> upper;
    std::vector<double> lower;
    std::size_t band_radius = 0;

    [[nodiscard]] std::size_t length() const noexcept { return upper.size(); }
  };

  /// The two supported distance measures.
  struct DistanceKind {
    enum class Measure : std::uint8_t { ed = 0, dtw = 1 };

    Measure measure = Measure::ed;
    std::size_t band_radius = 0;

    [[nodiscard]] static DistanceKind euclidean() noexcept { return {}; }
    [[nodiscard]] static DistanceKind dtw(std::size_t radius) noexcept { return {Measure::dtw, radius}; }

    [[nodiscard]] bool is_dtw() const noexcept { return measure == Measure::dtw; }

    /// "ed" or "dtw:<radius>".
    [[nodiscard]] std::string to_string() const;
    [[nodiscard]] static DistanceKind parse(const std::string& text);

    friend bool operator==(const DistanceKind&, const DistanceKind&) = default;
  };

  inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

  /// Zero-variance guard used by z-normalization.
  inline constexpr double kZNormEpsilon = 1e-12;

  /// Mean 0, population standard deviation 1. Constant series map to all zeros.
  /// Throws InvalidArgument on non-finite values or length < 2.
  [[nodiscard]] std::vector<double> z_normalize(std::span<const double> values);
  [[nodiscard]] DataSeries z_normalize(const DataSeries& series);

  [[nodiscard]] double euclidean(std::span<const double> a, std::span<const double> b);
  [[nodiscard]] double euclidean(std::span<const double> a, std::span<const float> b);

  /// Squared Euclidean distance. Returns +inf as soon as the running sum exceeds
  /// `abandon_above` (strictly), so callers can prune candidates early.
  [[nodiscard]] double squared_euclidean(std::span<const double> a, std::span<const float> b,
                                         double abandon_above = kInfinity) noexcept;

  /// Band-constrained DTW in root space: sqrt of the summed squared aligned differences.
  /// band_radius = 0 reproduces euclidean exactly.
  [[nodiscard]] double dtw(std::span<const double> a, std::span<const double> b, std::size_t band_radius);
  [[nodiscard]] double dtw(std::span<const double> a, std::span<const float> b, std::size_t band_radius);

  /// Squared DTW with early abandoning when every cell of a row exceeds `abandon_above`.
  [[nodiscard]] double squared_dtw(std::span<const double> a, std::span<const float> b,
                                   std::size_t band_radius, double abandon_above = kInfinity);

  /// Envelope by the streaming min/max (monotonic deque) algorithm, O(length).
  [[nodiscard]] Envelope build_envelope(std::span<const double> query, std::size_t band_radius);

  [[nodiscard]] double lb_keogh(const Envelope& env, std::span<const double> candidate);
  [[nodiscard]] double lb_keogh(const Envelope& env, std::span<const float> candidate);
  [[nodiscard]] double squared_lb_keogh(const Envelope& env, std::span<const float> candidate,
                                        double abandon_above = kInfinity) noexcept;

} // namespace pros
