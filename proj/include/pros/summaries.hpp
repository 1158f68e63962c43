#pragma once

#include "pros/series.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace pros {

  /// Piecewise Aggregate Approximation: M equal-length segment means.
  struct PaaSummary {
    std::vector<double> means;
    std::size_t series_length = 0;

    [[nodiscard]] std::size_t segment_count() const noexcept { return means.size(); }
  };

  /// SAX word. Every symbol uses the same cardinality (a power of two, at most 256).
  struct SaxWord {
    std::vector<std::uint16_t> symbols;
    std::uint32_t cardinality = 2;
  };

  /// Variable-length segments. endpoints[i] is the 1-based right endpoint m_i of
  /// segment i, so segment i covers 0-based positions [endpoints[i-1], endpoints[i]).
  struct EapcaSummary {
    std::vector<std::size_t> endpoints;
    std::vector<double> means;
    std::vector<double> stdevs;

    [[nodiscard]] std::size_t segment_count() const noexcept { return means.size(); }
  };

  /// Segment-wise max of U and min of L over a segment layout.
  struct SummarizedEnvelope {
    std::vector<double> upper_hat;
    std::vector<double> lower_hat;
    std::vector<std::size_t> endpoints;

    [[nodiscard]] std::size_t segment_count() const noexcept { return upper_hat.size(); }
    [[nodiscard]] std::size_t series_length() const noexcept { return endpoints.empty() ? 0 : endpoints.back(); }
  };

  inline constexpr std::uint32_t kMaxSaxCardinality = 256;

  /// Equal-length layout used by PAA: endpoints (l/M, 2l/M, ..., l).
  [[nodiscard]] std::vector<std::size_t> equal_endpoints(std::size_t length, std::size_t segments);

  /// Near-equal layout for any length: m_i = round(i * l / M). Requires segments <= length.
  [[nodiscard]] std::vector<std::size_t> balanced_endpoints(std::size_t length, std::size_t segments);

  /// Throws InvalidArgument unless endpoints are strictly increasing and end at `length`.
  void validate_endpoints(std::span<const std::size_t> endpoints, std::size_t length);

  [[nodiscard]] PaaSummary paa(std::span<const double> series, std::size_t segments);
  [[nodiscard]] PaaSummary paa(std::span<const float> series, std::size_t segments);

  /// Breakpoints splitting the real line into `cardinality` equiprobable N(0,1) regions.
  [[nodiscard]] std::span<const double> sax_breakpoints(std::uint32_t cardinality);

  /// Region index of a value: the number of breakpoints <= value (ties go up).
  [[nodiscard]] std::uint16_t sax_symbol(double value, std::uint32_t cardinality);

  [[nodiscard]] SaxWord sax(const PaaSummary& summary, std::uint32_t cardinality);

  /// Closed value interval [low, high] of a SAX region at the given cardinality; the outer
  /// regions are unbounded.
  struct SaxInterval {
    double low;
    double high;
  };
  [[nodiscard]] SaxInterval sax_interval(std::uint16_t symbol, std::uint32_t cardinality);

  [[nodiscard]] EapcaSummary eapca(std::span<const double> series, std::span<const std::size_t> endpoints);
  [[nodiscard]] EapcaSummary eapca(std::span<const float> series, std::span<const std::size_t> endpoints);

  [[nodiscard]] SummarizedEnvelope summarize_envelope_paa(const Envelope& env, std::size_t segments);
  [[nodiscard]] SummarizedEnvelope summarize_envelope_eapca(const Envelope& env,
                                                            std::span<const std::size_t> endpoints);

  /// sqrt(n/M) * sqrt(sum of per-segment penalties of the PAA means against [L^, U^]).
  [[nodiscard]] double lb_paa(const SummarizedEnvelope& senv, const PaaSummary& cbar);

  /// sqrt(sum (m_i - m_{i-1}) * a_i) with a_i the squared gap of the segment mean to [L^_i, U^_i].
  [[nodiscard]] double lb_eapca(const SummarizedEnvelope& senv, const EapcaSummary& cbar);

} // namespace pros
