#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pros {

  /// y = coefficients . x + intercept, with Gaussian equal-variance residuals.
  struct LinearModel {
    std::vector<double> coefficients;
    double intercept = 0;
    double residual_sigma = 0;
    std::size_t training_count = 0;
    /// (X'X)^-1 of the design [1, x], row-major, (p+1)^2 entries. Drives the leverage term.
    std::vector<double> xtx_inverse;

    [[nodiscard]] std::size_t predictor_count() const noexcept { return coefficients.size(); }
    [[nodiscard]] double predict(std::span<const double> x) const;
  };

  enum class Sidedness { two_sided, lower_only };

  struct PredictionInterval {
    double point = 0;
    double lower = 0;
    double upper = 0; // +inf for lower_only
  };

  /// Rows of `x` are observations. Throws FitError naming the predictor that makes the design singular.
  [[nodiscard]] LinearModel ols_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

  /// Predictive t-interval with n-p-1 degrees of freedom. two_sided spans the theta/2 and
  /// 1-theta/2 quantiles; lower_only gives the theta quantile and an unbounded upper end.
  [[nodiscard]] PredictionInterval ols_predict_interval(const LinearModel& model, std::span<const double> x0,
                                                        double theta, Sidedness sidedness);

  struct LogisticModel {
    std::vector<double> coefficients;
    double intercept = 0;
    double ridge_penalty = 0;
    std::size_t iterations = 0;

    [[nodiscard]] double log_odds(std::span<const double> x) const;
    [[nodiscard]] double predict(std::span<const double> x) const;
  };

  inline constexpr double kLogisticRidge = 1e-6;
  inline constexpr double kLogisticTolerance = 1e-8;

  /// Maximizes sum log-likelihood - ridge/2 * |coefficients|^2 (intercept not penalized).
  /// Labels must be 0/1 and both values present.
  [[nodiscard]] LogisticModel logistic_fit(const Eigen::MatrixXd& x, std::span<const int> labels,
                                           double ridge = kLogisticRidge, std::size_t max_iterations = 500);

  /// Gradient of the penalized log-likelihood at the model, intercept first.
  [[nodiscard]] Eigen::VectorXd logistic_gradient(const LogisticModel& model, const Eigen::MatrixXd& x,
                                                  std::span<const int> labels);
  [[nodiscard]] double logistic_objective(const LogisticModel& model, const Eigen::MatrixXd& x,
                                          std::span<const int> labels);

  struct QuantileModel {
    std::vector<double> coefficients;
    double intercept = 0;
    double tau = 0.5;

    [[nodiscard]] double predict(std::span<const double> x) const;
  };

  [[nodiscard]] double check_loss(double residual, double tau) noexcept;
  [[nodiscard]] double quantile_objective(const QuantileModel& model, const Eigen::MatrixXd& x,
                                          const Eigen::VectorXd& y);

  inline constexpr double kQuantileSmoothing = 1e-6;

  /// Minimizes sum rho_tau(y - b.x - c). `x` may have zero columns (intercept only).
  [[nodiscard]] QuantileModel quantile_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double tau);

  struct GridAxis {
    double lo = 0;
    double hi = 1;
    std::size_t count = 2;

    [[nodiscard]] double step() const noexcept { return (hi - lo) / static_cast<double>(count - 1); }
    [[nodiscard]] double at(std::size_t i) const noexcept { return lo + step() * static_cast<double>(i); }
    /// Nearest grid index, clamped.
    [[nodiscard]] std::size_t nearest(double v) const noexcept;
  };

  /// Gaussian product-kernel density on a regular grid. Density is row-major with the
  /// last axis fastest.
  struct KdeGrid {
    std::vector<GridAxis> axes;
    std::vector<double> bandwidth;        // per-axis kernel standard deviation, sqrt(diag H)
    std::vector<double> bandwidth_matrix; // kernel covariance H, row-major d x d
    std::vector<double> density;
    bool bandwidth_floored = false;

    [[nodiscard]] std::size_t dims() const noexcept { return axes.size(); }
    [[nodiscard]] double cell_volume() const noexcept;
    [[nodiscard]] double riemann_sum() const noexcept;
    [[nodiscard]] double at(std::span<const std::size_t> idx) const;
  };

  /// Normal-reference rule: h_j = sd_j * n^(-1/(d+4)), floored for degenerate axes.
  [[nodiscard]] std::vector<double> scott_bandwidth(const Eigen::MatrixXd& points, bool* floored = nullptr);

  enum class BandwidthRule { diagonal, full };

  /// Kernel covariance H (row-major d x d). diagonal: h_j^2 from scott_bandwidth; full:
  /// n^(-2/(d+4)) times the sample covariance. Both are multiplied by scale^2, and every
  /// eigenvalue is floored at the squared grid step so the grid resolves the kernel.
  [[nodiscard]] std::vector<double> normal_reference_bandwidth(const Eigen::MatrixXd& points,
                                                               std::span<const std::size_t> grid_counts,
                                                               BandwidthRule rule, double scale = 1.0,
                                                               bool* floored = nullptr);

  /// Rows of `points` are observations in 2 or 3 dimensions. `bandwidth_matrix` (d x d) is
  /// used as given; otherwise it comes from normal_reference_bandwidth. Axis ranges are
  /// [min - 3h, max + 3h] per axis.
  [[nodiscard]] KdeGrid kde_fit(const Eigen::MatrixXd& points, std::span<const std::size_t> grid_counts,
                                std::optional<std::vector<double>> bandwidth_matrix = std::nullopt,
                                double bandwidth_scale = 1.0, BandwidthRule rule = BandwidthRule::full);

  /// One-dimensional slice of a KdeGrid, normalized to sum 1.
  struct ConditionalDensity {
    GridAxis axis;
    std::vector<double> weights;
    bool clamped = false;

    [[nodiscard]] double mean() const;
    /// Inverse of the piecewise-linear CDF; q=0 and q=1 give the ends of the support.
    [[nodiscard]] double quantile(double q) const;
    [[nodiscard]] std::size_t mode_index() const;
  };

  /// Slice along `free_axis` at the grid points nearest to `fixed` (values of the remaining
  /// axes in axis order). Out-of-range values are clamped to the edge and flagged.
  [[nodiscard]] ConditionalDensity kde_conditional(const KdeGrid& grid, std::size_t free_axis,
                                                   std::span<const double> fixed);

  /// Order-statistic quantile with linear interpolation, h = (n - 1) q.
  [[nodiscard]] double empirical_quantile(std::span<const double> samples, double q);

} // namespace pros
