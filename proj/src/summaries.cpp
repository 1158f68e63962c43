#include "pros/summaries.hpp"

#include "pros/error.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace pros {

  std::vector<std::size_t> equal_endpoints(std::size_t length, std::size_t segments) {
    require(segments >= 1, "segment count must be at least 1");
    if (length % segments != 0) {
      throw InvalidArgument("segment count " + std::to_string(segments) + " does not divide series length " +
                            std::to_string(length));
    }
    std::vector<std::size_t> out(segments);
    const std::size_t width = length / segments;
    for (std::size_t i = 0; i < segments; ++i) { out[i] = (i + 1) * width; }
    return out;
  }

  std::vector<std::size_t> balanced_endpoints(std::size_t length, std::size_t segments) {
    require(segments >= 1 && segments <= length, "segment count must be in [1, length]");
    std::vector<std::size_t> out(segments);
    for (std::size_t i = 0; i < segments; ++i) { out[i] = ((i + 1) * length + segments / 2) / segments; }
    out.back() = length;
    return out;
  }

  void validate_endpoints(std::span<const std::size_t> endpoints, std::size_t length) {
    require(!endpoints.empty(), "segment layout is empty");
    std::size_t prev = 0;
    for (std::size_t e : endpoints) {
      require(e > prev, "segment endpoints must be strictly increasing and positive");
      prev = e;
    }
    require(prev == length, "last segment endpoint must equal the series length");
  }

  namespace {

    template<typename T>
    PaaSummary paa_impl(std::span<const T> series, std::size_t segments) {
      const auto ends = equal_endpoints(series.size(), segments);
      PaaSummary out;
      out.series_length = series.size();
      out.means.resize(segments);
      std::size_t start = 0;
      for (std::size_t i = 0; i < segments; ++i) {
        double sum = 0;
        for (std::size_t j = start; j < ends[i]; ++j) { sum += static_cast<double>(series[j]); }
        out.means[i] = sum / static_cast<double>(ends[i] - start);
        start = ends[i];
      }
      return out;
    }

    template<typename T>
    EapcaSummary eapca_impl(std::span<const T> series, std::span<const std::size_t> endpoints) {
      validate_endpoints(endpoints, series.size());
      EapcaSummary out;
      out.endpoints.assign(endpoints.begin(), endpoints.end());
      out.means.resize(endpoints.size());
      out.stdevs.resize(endpoints.size());
      std::size_t start = 0;
      for (std::size_t i = 0; i < endpoints.size(); ++i) {
        const auto count = static_cast<double>(endpoints[i] - start);
        double sum = 0;
        for (std::size_t j = start; j < endpoints[i]; ++j) { sum += static_cast<double>(series[j]); }
        const double mean = sum / count;
        double ss = 0;
        for (std::size_t j = start; j < endpoints[i]; ++j) {
          const double d = static_cast<double>(series[j]) - mean;
          ss += d * d;
        }
        out.means[i] = mean;
        out.stdevs[i] = std::sqrt(ss / count);
        start = endpoints[i];
      }
      return out;
    }

    struct BreakpointTables {
      // tables[b] holds the 2^b - 1 breakpoints for cardinality 2^b, b in [1, 8].
      std::array<std::vector<double>, 9> tables;

      BreakpointTables() {
        const boost::math::normal_distribution<double> standard;
        for (unsigned b = 1; b <= 8; ++b) {
          const unsigned card = 1U << b;
          auto& t = tables[b];
          t.resize(card - 1);
          for (unsigned i = 1; i < card; ++i) {
            // Quantiles at multiples of 1/card; nested across cardinalities by construction.
            t[i - 1] = (2 * i == card) ? 0.0 : boost::math::quantile(standard, static_cast<double>(i) / card);
          }
        }
      }
    };

    const BreakpointTables& breakpoint_tables() {
      static const BreakpointTables tables;
      return tables;
    }

    unsigned cardinality_bits(std::uint32_t cardinality) {
      for (unsigned b = 1; b <= 8; ++b) {
        if ((1U << b) == cardinality) { return b; }
      }
      throw InvalidArgument("SAX cardinality must be a power of two in [2, 256], got " + std::to_string(cardinality));
    }

    double segment_penalty(double value, double low, double high) noexcept {
      if (value > high) { return (value - high) * (value - high); }
      if (value < low) { return (low - value) * (low - value); }
      return 0.0;
    }

  } // namespace

  PaaSummary paa(std::span<const double> series, std::size_t segments) { return paa_impl(series, segments); }
  PaaSummary paa(std::span<const float> series, std::size_t segments) { return paa_impl(series, segments); }

  std::span<const double> sax_breakpoints(std::uint32_t cardinality) {
    return breakpoint_tables().tables[cardinality_bits(cardinality)];
  }

  std::uint16_t sax_symbol(double value, std::uint32_t cardinality) {
    const auto bp = sax_breakpoints(cardinality);
    return static_cast<std::uint16_t>(std::upper_bound(bp.begin(), bp.end(), value) - bp.begin());
  }

  SaxWord sax(const PaaSummary& summary, std::uint32_t cardinality) {
    SaxWord word;
    word.cardinality = cardinality;
    word.symbols.reserve(summary.means.size());
    for (double m : summary.means) { word.symbols.push_back(sax_symbol(m, cardinality)); }
    return word;
  }

  SaxInterval sax_interval(std::uint16_t symbol, std::uint32_t cardinality) {
    if (cardinality == 1) { return {-kInfinity, kInfinity}; }
    const auto bp = sax_breakpoints(cardinality);
    require(symbol < cardinality, "SAX symbol out of range");
    const double low = symbol == 0 ? -kInfinity : bp[symbol - 1];
    const double high = symbol + 1U == cardinality ? kInfinity : bp[symbol];
    return {low, high};
  }

  EapcaSummary eapca(std::span<const double> series, std::span<const std::size_t> endpoints) {
    return eapca_impl(series, endpoints);
  }
  EapcaSummary eapca(std::span<const float> series, std::span<const std::size_t> endpoints) {
    return eapca_impl(series, endpoints);
  }

  SummarizedEnvelope summarize_envelope_eapca(const Envelope& env, std::span<const std::size_t> endpoints) {
    validate_endpoints(endpoints, env.length());
    SummarizedEnvelope out;
    out.endpoints.assign(endpoints.begin(), endpoints.end());
    out.upper_hat.resize(endpoints.size());
    out.lower_hat.resize(endpoints.size());
    std::size_t start = 0;
    for (std::size_t i = 0; i < endpoints.size(); ++i) {
      const auto first = static_cast<std::ptrdiff_t>(start);
      const auto last = static_cast<std::ptrdiff_t>(endpoints[i]);
      out.upper_hat[i] = *std::max_element(env.upper.begin() + first, env.upper.begin() + last);
      out.lower_hat[i] = *std::min_element(env.lower.begin() + first, env.lower.begin() + last);
      start = endpoints[i];
    }
    return out;
  }

  SummarizedEnvelope summarize_envelope_paa(const Envelope& env, std::size_t segments) {
    return summarize_envelope_eapca(env, equal_endpoints(env.length(), segments));
  }

  double lb_paa(const SummarizedEnvelope& senv, const PaaSummary& cbar) {
    const std::size_t m = senv.segment_count();
    require(cbar.segment_count() == m && cbar.series_length == senv.series_length(),
            "lb_paa: summary layout does not match the envelope layout");
    double acc = 0;
    for (std::size_t i = 0; i < m; ++i) { acc += segment_penalty(cbar.means[i], senv.lower_hat[i], senv.upper_hat[i]); }
    const double scale = static_cast<double>(cbar.series_length) / static_cast<double>(m);
    return std::sqrt(scale) * std::sqrt(acc);
  }

  double lb_eapca(const SummarizedEnvelope& senv, const EapcaSummary& cbar) {
    require(cbar.endpoints == senv.endpoints, "lb_eapca: segment layouts differ");
    double acc = 0;
    std::size_t prev = 0;
    for (std::size_t i = 0; i < cbar.segment_count(); ++i) {
      const auto width = static_cast<double>(cbar.endpoints[i] - prev);
      acc += width * segment_penalty(cbar.means[i], senv.lower_hat[i], senv.upper_hat[i]);
      prev = cbar.endpoints[i];
    }
    return std::sqrt(acc);
  }

} // namespace pros
