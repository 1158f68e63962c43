#include "pros/series.hpp"

#include "pros/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>

namespace pros {

  std::string DistanceKind::to_string() const {
    if (measure == Measure::ed) { return "ed"; }
    return "dtw:" + std::to_string(band_radius);
  }

  DistanceKind DistanceKind::parse(const std::string& text) {
    if (text == "ed") { return euclidean(); }
    if (text.rfind("dtw:", 0) == 0) {
      std::size_t radius = 0;
      const char* first = text.data() + 4;
      const char* last = text.data() + text.size();
      auto [ptr, ec] = std::from_chars(first, last, radius);
      if (ec == std::errc{} && ptr == last && first != last) { return dtw(radius); }
    }
    throw InvalidArgument("distance must be 'ed' or 'dtw:<radius>', got '" + text + "'");
  }

  std::vector<double> z_normalize(std::span<const double> values) {
    require(values.size() >= 2, "z_normalize: series length must be at least 2");
    double sum = 0;
    for (double v : values) {
      if (!std::isfinite(v)) { throw InvalidArgument("z_normalize: non-finite value"); }
      sum += v;
    }
    const double mean = sum / static_cast<double>(values.size());
    double ss = 0;
    for (double v : values) { ss += (v - mean) * (v - mean); }
    const double sd = std::sqrt(ss / static_cast<double>(values.size()));
    std::vector<double> out(values.size(), 0.0);
    if (sd < kZNormEpsilon) { return out; }
    for (std::size_t i = 0; i < values.size(); ++i) { out[i] = (values[i] - mean) / sd; }
    return out;
  }

  DataSeries z_normalize(const DataSeries& series) {
    return DataSeries{series.id, z_normalize(std::span<const double>(series.values))};
  }

  namespace {

    template<typename A, typename B>
    void check_lengths(std::span<const A> a, std::span<const B> b, const char* what) {
      if (a.size() != b.size()) {
        throw InvalidArgument(std::string(what) + ": length mismatch (" + std::to_string(a.size()) + " vs " +
                              std::to_string(b.size()) + ")");
      }
    }

    template<typename A, typename B>
    double squared_ed_impl(std::span<const A> a, std::span<const B> b, double abandon_above) noexcept {
      double acc = 0;
      const std::size_t n = a.size();
      std::size_t i = 0;
      // Abandon checks every 8 points keep the inner loop tight.
      while (i < n) {
        const std::size_t stop = std::min(n, i + 8);
        for (; i < stop; ++i) {
          const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
          acc += d * d;
        }
        if (acc > abandon_above) { return kInfinity; }
      }
      return acc;
    }

    template<typename A, typename B>
    double squared_dtw_impl(std::span<const A> a, std::span<const B> b, std::size_t r, double abandon_above) {
      const std::size_t n = a.size();
      if (n == 0) { return 0.0; }
      r = std::min(r, n - 1);
      std::vector<double> prev(n + 1, kInfinity);
      std::vector<double> curr(n + 1, kInfinity);
      prev[0] = 0.0;
      // Row i (1-based) covers columns j in [i - r, i + r]; index 0 is the virtual origin.
      for (std::size_t i = 1; i <= n; ++i) {
        const std::size_t jlo = (i > r) ? i - r : 1;
        const std::size_t jhi = std::min(n, i + r);
        curr[jlo - 1] = kInfinity;
        double row_min = kInfinity;
        const double ai = static_cast<double>(a[i - 1]);
        for (std::size_t j = jlo; j <= jhi; ++j) {
          const double d = ai - static_cast<double>(b[j - 1]);
          const double best = std::min({prev[j - 1], prev[j], curr[j - 1]});
          curr[j] = d * d + best;
          row_min = std::min(row_min, curr[j]);
        }
        if (row_min > abandon_above) { return kInfinity; }
        std::swap(prev, curr);
      }
      return prev[n];
    }

    template<typename B>
    double squared_lb_keogh_impl(const Envelope& env, std::span<const B> c, double abandon_above) noexcept {
      double acc = 0;
      const std::size_t n = c.size();
      for (std::size_t i = 0; i < n; ++i) {
        const double v = static_cast<double>(c[i]);
        if (v > env.upper[i]) {
          const double d = v - env.upper[i];
          acc += d * d;
        } else if (v < env.lower[i]) {
          const double d = env.lower[i] - v;
          acc += d * d;
        }
        if ((i & 7U) == 7U && acc > abandon_above) { return kInfinity; }
      }
      return acc > abandon_above ? kInfinity : acc;
    }

  } // namespace

  double euclidean(std::span<const double> a, std::span<const double> b) {
    check_lengths(a, b, "euclidean");
    return std::sqrt(squared_ed_impl(a, b, kInfinity));
  }

  double euclidean(std::span<const double> a, std::span<const float> b) {
    check_lengths(a, b, "euclidean");
    return std::sqrt(squared_ed_impl(a, b, kInfinity));
  }

  double squared_euclidean(std::span<const double> a, std::span<const float> b, double abandon_above) noexcept {
    return squared_ed_impl(a, b, abandon_above);
  }

  double dtw(std::span<const double> a, std::span<const double> b, std::size_t band_radius) {
    check_lengths(a, b, "dtw");
    if (band_radius == 0) { return std::sqrt(squared_ed_impl(a, b, kInfinity)); }
    return std::sqrt(squared_dtw_impl(a, b, band_radius, kInfinity));
  }

  double dtw(std::span<const double> a, std::span<const float> b, std::size_t band_radius) {
    check_lengths(a, b, "dtw");
    return std::sqrt(squared_dtw(a, b, band_radius));
  }

  double squared_dtw(std::span<const double> a, std::span<const float> b, std::size_t band_radius,
                     double abandon_above) {
    if (band_radius == 0) { return squared_ed_impl(a, b, abandon_above); }
    return squared_dtw_impl(a, b, band_radius, abandon_above);
  }

  Envelope build_envelope(std::span<const double> q, std::size_t band_radius) {
    const std::size_t n = q.size();
    require(n >= 1, "build_envelope: empty query");
    require(band_radius <= n - 1, "build_envelope: band radius must be at most length - 1");
    Envelope env;
    env.band_radius = band_radius;
    env.upper.resize(n);
    env.lower.resize(n);
    // Lemire's streaming algorithm: deques hold indices of candidate extrema in the window.
    std::deque<std::size_t> maxq;
    std::deque<std::size_t> minq;
    const std::size_t r = band_radius;
    std::size_t next = 0; // next index to push
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t hi = std::min(n - 1, j + r);
      while (next <= hi) {
        while (!maxq.empty() && q[maxq.back()] <= q[next]) { maxq.pop_back(); }
        maxq.push_back(next);
        while (!minq.empty() && q[minq.back()] >= q[next]) { minq.pop_back(); }
        minq.push_back(next);
        ++next;
      }
      const std::size_t lo = (j > r) ? j - r : 0;
      while (maxq.front() < lo) { maxq.pop_front(); }
      while (minq.front() < lo) { minq.pop_front(); }
      env.upper[j] = q[maxq.front()];
      env.lower[j] = q[minq.front()];
    }
    return env;
  }

  double lb_keogh(const Envelope& env, std::span<const double> candidate) {
    require(env.length() == candidate.size(), "lb_keogh: length mismatch");
    return std::sqrt(squared_lb_keogh_impl(env, candidate, kInfinity));
  }

  double lb_keogh(const Envelope& env, std::span<const float> candidate) {
    require(env.length() == candidate.size(), "lb_keogh: length mismatch");
    return std::sqrt(squared_lb_keogh_impl(env, candidate, kInfinity));
  }

  double squared_lb_keogh(const Envelope& env, std::span<const float> candidate, double abandon_above) noexcept {
    return squared_lb_keogh_impl(env, candidate, abandon_above);
  }

} // namespace pros
