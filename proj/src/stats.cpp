#include "pros/stats.hpp"

#include "pros/error.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace pros {

  namespace {

    double dot_with(std::span<const double> coef, double intercept, std::span<const double> x, const char* what) {
      if (x.size() != coef.size()) {
        throw InvalidArgument(std::string(what) + ": expected " + std::to_string(coef.size()) + " predictors, got " +
                              std::to_string(x.size()));
      }
      double s = intercept;
      for (std::size_t i = 0; i < x.size(); ++i) { s += coef[i] * x[i]; }
      return s;
    }

    Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& x) {
      Eigen::MatrixXd d(x.rows(), x.cols() + 1);
      d.col(0).setOnes();
      d.rightCols(x.cols()) = x;
      return d;
    }

    Eigen::Index rank_of(const Eigen::MatrixXd& m) {
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m);
      qr.setThreshold(1e-10);
      return qr.rank();
    }

    // First predictor (0-based) whose column is constant or linearly dependent on the columns
    // before it, or -1.
    Eigen::Index offending_predictor(const Eigen::MatrixXd& design) {
      for (Eigen::Index j = 1; j < design.cols(); ++j) {
        if (rank_of(design.leftCols(j + 1)) < j + 1) { return j - 1; }
      }
      return -1;
    }

    void check_finite(const Eigen::MatrixXd& x, const char* what) {
      if (!x.allFinite()) { throw InvalidArgument(std::string(what) + ": non-finite input"); }
    }

  } // namespace

  double LinearModel::predict(std::span<const double> x) const {
    return dot_with(coefficients, intercept, x, "LinearModel::predict");
  }

  LinearModel ols_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    const auto n = x.rows();
    const auto p = x.cols();
    require(y.size() == n, "ols_fit: row count mismatch");
    require(n >= p + 2, "ols_fit: need at least predictors + 2 rows, got " + std::to_string(n));
    check_finite(x, "ols_fit");
    check_finite(y, "ols_fit");
    const Eigen::MatrixXd design = with_intercept(x);
    if (rank_of(design) < p + 1) {
      const auto j = offending_predictor(design);
      throw FitError("ols_fit: singular design, predictor " + std::to_string(j) +
                     " is constant or collinear with earlier predictors");
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(design);
    const Eigen::VectorXd beta = qr.solve(y);
    const Eigen::MatrixXd r = qr.matrixQR().topRows(p + 1).triangularView<Eigen::Upper>();
    const Eigen::MatrixXd r_inv =
        r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p + 1, p + 1));
    const Eigen::MatrixXd v = r_inv * r_inv.transpose();

    LinearModel m;
    m.intercept = beta(0);
    m.coefficients.assign(beta.data() + 1, beta.data() + beta.size());
    const double sse = (y - design * beta).squaredNorm();
    m.residual_sigma = std::sqrt(sse / static_cast<double>(n - p - 1));
    m.training_count = static_cast<std::size_t>(n);
    m.xtx_inverse.resize(static_cast<std::size_t>((p + 1) * (p + 1)));
    for (Eigen::Index i = 0; i <= p; ++i) {
      for (Eigen::Index j = 0; j <= p; ++j) { m.xtx_inverse[static_cast<std::size_t>(i * (p + 1) + j)] = v(i, j); }
    }
    return m;
  }

  PredictionInterval ols_predict_interval(const LinearModel& model, std::span<const double> x0, double theta,
                                          Sidedness sidedness) {
    require(theta > 0 && theta < 1, "ols_predict_interval: theta must be in (0, 1)");
    const std::size_t p = model.predictor_count();
    require(model.training_count > p + 1, "ols_predict_interval: model is not fitted");
    require(model.xtx_inverse.size() == (p + 1) * (p + 1), "ols_predict_interval: model lacks leverage data");
    PredictionInterval pi;
    pi.point = model.predict(x0);
    double leverage = 0;
    for (std::size_t i = 0; i <= p; ++i) {
      const double xi = i == 0 ? 1.0 : x0[i - 1];
      for (std::size_t j = 0; j <= p; ++j) {
        const double xj = j == 0 ? 1.0 : x0[j - 1];
        leverage += xi * model.xtx_inverse[i * (p + 1) + j] * xj;
      }
    }
    const double se = model.residual_sigma * std::sqrt(1.0 + std::max(0.0, leverage));
    const boost::math::students_t dist(static_cast<double>(model.training_count - p - 1));
    if (sidedness == Sidedness::two_sided) {
      const double t = boost::math::quantile(dist, 1.0 - theta / 2.0);
      pi.lower = pi.point - t * se;
      pi.upper = pi.point + t * se;
    } else {
      const double t = boost::math::quantile(dist, 1.0 - theta);
      pi.lower = pi.point - t * se;
      pi.upper = std::numeric_limits<double>::infinity();
    }
    return pi;
  }

  // ---- logistic regression ----------------------------------------------------------------

  namespace {

    double softplus(double z) noexcept { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
    double sigmoid(double z) noexcept {
      if (z >= 0) { return 1.0 / (1.0 + std::exp(-z)); }
      const double e = std::exp(z);
      return e / (1.0 + e);
    }

    double penalized_loglik(const Eigen::MatrixXd& d, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                            double ridge) {
      const Eigen::VectorXd eta = d * w;
      double ll = 0;
      for (Eigen::Index i = 0; i < eta.size(); ++i) { ll += y(i) * eta(i) - softplus(eta(i)); }
      return ll - 0.5 * ridge * w.tail(w.size() - 1).squaredNorm();
    }

    Eigen::VectorXd penalized_gradient(const Eigen::MatrixXd& d, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                                       double ridge) {
      const Eigen::VectorXd eta = d * w;
      Eigen::VectorXd resid(eta.size());
      for (Eigen::Index i = 0; i < eta.size(); ++i) { resid(i) = y(i) - sigmoid(eta(i)); }
      Eigen::VectorXd g = d.transpose() * resid;
      g.tail(g.size() - 1) -= ridge * w.tail(w.size() - 1);
      return g;
    }

    Eigen::VectorXd label_vector(std::span<const int> labels, Eigen::Index n) {
      require(static_cast<Eigen::Index>(labels.size()) == n, "logistic: label count mismatch");
      Eigen::VectorXd y(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const int l = labels[static_cast<std::size_t>(i)];
        require(l == 0 || l == 1, "logistic: labels must be 0 or 1");
        y(i) = l;
      }
      return y;
    }

    Eigen::VectorXd weights_of(const LogisticModel& m) {
      Eigen::VectorXd w(static_cast<Eigen::Index>(m.coefficients.size()) + 1);
      w(0) = m.intercept;
      for (std::size_t i = 0; i < m.coefficients.size(); ++i) { w(static_cast<Eigen::Index>(i) + 1) = m.coefficients[i]; }
      return w;
    }

  } // namespace

  double LogisticModel::log_odds(std::span<const double> x) const {
    return dot_with(coefficients, intercept, x, "LogisticModel::predict");
  }

  double LogisticModel::predict(std::span<const double> x) const { return sigmoid(log_odds(x)); }

  LogisticModel logistic_fit(const Eigen::MatrixXd& x, std::span<const int> labels, double ridge,
                             std::size_t max_iterations) {
    require(ridge >= 0, "logistic_fit: ridge must be non-negative");
    check_finite(x, "logistic_fit");
    const Eigen::VectorXd y = label_vector(labels, x.rows());
    const double positives = y.sum();
    require(positives > 0 && positives < static_cast<double>(y.size()), "logistic_fit: both label values must be present");
    const Eigen::MatrixXd d = with_intercept(x);
    const auto m = d.cols();
    Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
    w(0) = std::log(positives / (static_cast<double>(y.size()) - positives));
    double obj = penalized_loglik(d, y, w, ridge);

    for (std::size_t it = 1; it <= max_iterations; ++it) {
      const Eigen::VectorXd g = penalized_gradient(d, y, w, ridge);
      const Eigen::VectorXd eta = d * w;
      Eigen::VectorXd s(eta.size());
      for (Eigen::Index i = 0; i < eta.size(); ++i) {
        const double p = sigmoid(eta(i));
        s(i) = p * (1 - p);
      }
      Eigen::MatrixXd h = d.transpose() * s.asDiagonal() * d;
      for (Eigen::Index j = 1; j < m; ++j) { h(j, j) += ridge; }
      h.diagonal().array() += 1e-14 * (1.0 + h.diagonal().cwiseAbs().maxCoeff());
      const Eigen::VectorXd step = h.ldlt().solve(g);

      double scale = 1.0;
      Eigen::VectorXd next = w + step;
      double next_obj = penalized_loglik(d, y, next, ridge);
      while (next_obj < obj && scale > 1e-10) {
        scale *= 0.5;
        next = w + scale * step;
        next_obj = penalized_loglik(d, y, next, ridge);
      }
      const double moved = (scale * step).cwiseAbs().maxCoeff();
      w = next;
      obj = std::max(obj, next_obj);
      if (moved < kLogisticTolerance || g.cwiseAbs().maxCoeff() < 1e-12) {
        LogisticModel out;
        out.intercept = w(0);
        out.coefficients.assign(w.data() + 1, w.data() + w.size());
        out.ridge_penalty = ridge;
        out.iterations = it;
        return out;
      }
    }
    throw FitError("logistic_fit: no convergence after " + std::to_string(max_iterations) + " iterations");
  }

  Eigen::VectorXd logistic_gradient(const LogisticModel& model, const Eigen::MatrixXd& x, std::span<const int> labels) {
    return penalized_gradient(with_intercept(x), label_vector(labels, x.rows()), weights_of(model), model.ridge_penalty);
  }

  double logistic_objective(const LogisticModel& model, const Eigen::MatrixXd& x, std::span<const int> labels) {
    return penalized_loglik(with_intercept(x), label_vector(labels, x.rows()), weights_of(model), model.ridge_penalty);
  }

  // ---- quantile regression -----------------------------------------------------------------

  double QuantileModel::predict(std::span<const double> x) const {
    return dot_with(coefficients, intercept, x, "QuantileModel::predict");
  }

  double check_loss(double residual, double tau) noexcept {
    return residual >= 0 ? tau * residual : (tau - 1.0) * residual;
  }

  double quantile_objective(const QuantileModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    double total = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      double fit = model.intercept;
      for (Eigen::Index j = 0; j < x.cols(); ++j) { fit += model.coefficients[static_cast<std::size_t>(j)] * x(i, j); }
      total += check_loss(y(i) - fit, model.tau);
    }
    return total;
  }

  namespace {

    double objective_of(const Eigen::MatrixXd& d, const Eigen::VectorXd& y, const Eigen::VectorXd& b, double tau) {
      const Eigen::VectorXd r = y - d * b;
      double total = 0;
      for (Eigen::Index i = 0; i < r.size(); ++i) { total += check_loss(r(i), tau); }
      return total;
    }

    // Least-squares reweighting on the smoothed check loss.
    Eigen::VectorXd irls(const Eigen::MatrixXd& d, const Eigen::VectorXd& y, double tau) {
      Eigen::VectorXd b = d.colPivHouseholderQr().solve(y);
      Eigen::VectorXd wts(y.size());
      for (int it = 0; it < 100; ++it) {
        const Eigen::VectorXd r = y - d * b;
        for (Eigen::Index i = 0; i < r.size(); ++i) {
          const double a = std::max(std::abs(r(i)), kQuantileSmoothing);
          wts(i) = (r(i) >= 0 ? tau : 1.0 - tau) / a;
        }
        const Eigen::MatrixXd dw = d.transpose() * wts.asDiagonal();
        const Eigen::VectorXd next = (dw * d).ldlt().solve(dw * y);
        if (!next.allFinite()) { break; }
        const double delta = (next - b).cwiseAbs().maxCoeff();
        b = next;
        if (delta < 1e-10 * (1.0 + b.cwiseAbs().maxCoeff())) { break; }
      }
      return b;
    }

    std::optional<Eigen::VectorXd> solve_basis(const Eigen::MatrixXd& d, const Eigen::VectorXd& y,
                                               const std::vector<Eigen::Index>& basis) {
      const auto m = static_cast<Eigen::Index>(basis.size());
      Eigen::MatrixXd a(m, d.cols());
      Eigen::VectorXd rhs(m);
      for (Eigen::Index i = 0; i < m; ++i) {
        a.row(i) = d.row(basis[static_cast<std::size_t>(i)]);
        rhs(i) = y(basis[static_cast<std::size_t>(i)]);
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
      lu.setThreshold(1e-10);
      if (!lu.isInvertible()) { return std::nullopt; }
      return Eigen::VectorXd(lu.solve(rhs));
    }

  } // namespace

  QuantileModel quantile_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double tau) {
    require(tau > 0 && tau < 1, "quantile_fit: tau must be in (0, 1)");
    require(y.size() == x.rows(), "quantile_fit: row count mismatch");
    require(x.rows() >= 3, "quantile_fit: need at least 3 rows");
    check_finite(x, "quantile_fit");
    check_finite(y, "quantile_fit");
    const Eigen::MatrixXd d = with_intercept(x);
    const auto n = d.rows();
    const auto m = d.cols();
    if (rank_of(d) < m) {
      throw FitError("quantile_fit: degenerate design, predictor " + std::to_string(offending_predictor(d)) +
                     " is constant or collinear");
    }

    // Start from the smoothed solution, then walk LP vertices (fits through m points) to the
    // exact minimizer.
    const Eigen::VectorXd start = irls(d, y, tau);
    const Eigen::VectorXd r0 = y - d * start;
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return std::abs(r0(a)) < std::abs(r0(b)); });
    std::vector<Eigen::Index> basis;
    for (auto i : order) {
      basis.push_back(i);
      Eigen::MatrixXd rows(static_cast<Eigen::Index>(basis.size()), m);
      for (std::size_t k = 0; k < basis.size(); ++k) { rows.row(static_cast<Eigen::Index>(k)) = d.row(basis[k]); }
      if (rank_of(rows) < static_cast<Eigen::Index>(basis.size())) { basis.pop_back(); }
      if (static_cast<Eigen::Index>(basis.size()) == m) { break; }
    }
    auto b = solve_basis(d, y, basis);
    if (!b) { throw FitError("quantile_fit: could not form an initial basis"); }
    double obj = objective_of(d, y, *b, tau);

    auto key = [](std::vector<Eigen::Index> v) {
      std::sort(v.begin(), v.end());
      return v;
    };
    std::set<std::vector<Eigen::Index>> visited{key(basis)};
    std::vector<char> in_basis(static_cast<std::size_t>(n), 0);
    for (auto i : basis) { in_basis[static_cast<std::size_t>(i)] = 1; }

    for (int iter = 0; iter < 100000; ++iter) {
      const double eps = 1e-12 * (1.0 + std::abs(obj));
      double best_obj = obj;
      std::optional<std::pair<std::size_t, Eigen::Index>> best_swap;
      std::optional<std::pair<std::size_t, Eigen::Index>> flat_swap;
      for (std::size_t bi = 0; bi < basis.size(); ++bi) {
        for (Eigen::Index j = 0; j < n; ++j) {
          if (in_basis[static_cast<std::size_t>(j)] != 0) { continue; }
          auto trial = basis;
          trial[bi] = j;
          const auto cand = solve_basis(d, y, trial);
          if (!cand) { continue; }
          const double o = objective_of(d, y, *cand, tau);
          if (o < best_obj - eps) {
            best_obj = o;
            best_swap = {bi, j};
          } else if (!best_swap && !flat_swap && std::abs(o - obj) <= eps && !visited.contains(key(trial))) {
            flat_swap = {bi, j};
          }
        }
      }
      const auto swap = best_swap ? best_swap : flat_swap;
      if (!swap) { break; }
      in_basis[static_cast<std::size_t>(basis[swap->first])] = 0;
      basis[swap->first] = swap->second;
      in_basis[static_cast<std::size_t>(swap->second)] = 1;
      visited.insert(key(basis));
      b = solve_basis(d, y, basis);
      obj = objective_of(d, y, *b, tau);
    }

    QuantileModel out;
    out.tau = tau;
    out.intercept = (*b)(0);
    out.coefficients.assign(b->data() + 1, b->data() + b->size());
    return out;
  }

  // ---- kernel density ----------------------------------------------------------------------

  std::size_t GridAxis::nearest(double v) const noexcept {
    if (!(v > lo)) { return 0; }
    if (v >= hi) { return count - 1; }
    return static_cast<std::size_t>(std::lround((v - lo) / step()));
  }

  double KdeGrid::cell_volume() const noexcept {
    double v = 1;
    for (const auto& a : axes) { v *= a.step(); }
    return v;
  }

  double KdeGrid::riemann_sum() const noexcept {
    return std::accumulate(density.begin(), density.end(), 0.0) * cell_volume();
  }

  double KdeGrid::at(std::span<const std::size_t> idx) const {
    require(idx.size() == axes.size(), "KdeGrid::at: wrong index arity");
    std::size_t flat = 0;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      require(idx[a] < axes[a].count, "KdeGrid::at: index out of range");
      flat = flat * axes[a].count + idx[a];
    }
    return density[flat];
  }

  std::vector<double> scott_bandwidth(const Eigen::MatrixXd& points, bool* floored) {
    const auto n = points.rows();
    const auto d = points.cols();
    require(n >= 2, "scott_bandwidth: need at least 2 points");
    const double factor = std::pow(static_cast<double>(n), -1.0 / (static_cast<double>(d) + 4.0));
    std::vector<double> h(static_cast<std::size_t>(d));
    bool any_floor = false;
    for (Eigen::Index j = 0; j < d; ++j) {
      const double mean = points.col(j).mean();
      const double var = (points.col(j).array() - mean).square().sum() / static_cast<double>(n - 1);
      const double floor = 1e-6 * std::max(1.0, std::abs(mean));
      double hj = std::sqrt(var) * factor;
      if (!(hj >= floor)) {
        hj = floor;
        any_floor = true;
      }
      h[static_cast<std::size_t>(j)] = hj;
    }
    if (floored != nullptr) { *floored = any_floor; }
    return h;
  }

  namespace {

    // Per-axis resolution used to floor the kernel: the data range split into the grid count.
    Eigen::VectorXd resolution(const Eigen::MatrixXd& points, std::span<const std::size_t> grid_counts) {
      Eigen::VectorXd r(points.cols());
      for (Eigen::Index a = 0; a < points.cols(); ++a) {
        const auto sa = static_cast<std::size_t>(a);
        require(grid_counts[sa] >= 2, "kde: each axis needs at least 2 grid points");
        const double span = points.col(a).maxCoeff() - points.col(a).minCoeff();
        const double tiny = 1e-6 * std::max(1.0, std::abs(points.col(a).mean()));
        r(a) = std::max(span / static_cast<double>(grid_counts[sa] - 1), tiny);
      }
      return r;
    }

  } // namespace

  std::vector<double> normal_reference_bandwidth(const Eigen::MatrixXd& points,
                                                 std::span<const std::size_t> grid_counts, BandwidthRule rule,
                                                 double scale, bool* floored) {
    const auto n = points.rows();
    const auto d = points.cols();
    require(n >= 2, "normal_reference_bandwidth: need at least 2 points");
    require(static_cast<Eigen::Index>(grid_counts.size()) == d,
            "normal_reference_bandwidth: one grid count per axis required");
    require(scale > 0, "normal_reference_bandwidth: scale must be positive");
    check_finite(points, "normal_reference_bandwidth");

    Eigen::MatrixXd h(d, d);
    if (rule == BandwidthRule::diagonal) {
      const auto sd = scott_bandwidth(points);
      h.setZero();
      for (Eigen::Index j = 0; j < d; ++j) { h(j, j) = sd[static_cast<std::size_t>(j)] * sd[static_cast<std::size_t>(j)]; }
    } else {
      const Eigen::MatrixXd centered = points.rowwise() - points.colwise().mean();
      const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
      h = cov * std::pow(static_cast<double>(n), -2.0 / (static_cast<double>(d) + 4.0));
    }
    h *= scale * scale;

    const Eigen::VectorXd r = resolution(points, grid_counts);
    const Eigen::MatrixXd m = r.cwiseInverse().asDiagonal() * h * r.cwiseInverse().asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
    Eigen::VectorXd lambda = eig.eigenvalues();
    bool any = false;
    for (Eigen::Index i = 0; i < d; ++i) {
      if (!(lambda(i) >= 1.0)) {
        lambda(i) = 1.0;
        any = true;
      }
    }
    if (floored != nullptr) { *floored = any; }
    if (any) {
      const Eigen::MatrixXd fixed = eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose();
      h = r.asDiagonal() * fixed * r.asDiagonal();
    }
    std::vector<double> out(static_cast<std::size_t>(d * d));
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) { out[static_cast<std::size_t>(i * d + j)] = 0.5 * (h(i, j) + h(j, i)); }
    }
    return out;
  }

  KdeGrid kde_fit(const Eigen::MatrixXd& points, std::span<const std::size_t> grid_counts,
                  std::optional<std::vector<double>> bandwidth_matrix, double bandwidth_scale, BandwidthRule rule) {
    const auto n = points.rows();
    const auto dims = points.cols();
    const auto d = static_cast<std::size_t>(dims);
    require(dims == 2 || dims == 3, "kde_fit: points must be 2- or 3-dimensional");
    require(n >= 2, "kde_fit: need at least 2 points");
    require(static_cast<Eigen::Index>(grid_counts.size()) == dims, "kde_fit: one grid count per axis required");
    require(bandwidth_scale > 0, "kde_fit: bandwidth scale must be positive");
    for (auto c : grid_counts) { require(c >= 2, "kde_fit: each axis needs at least 2 grid points"); }
    check_finite(points, "kde_fit");

    KdeGrid g;
    if (bandwidth_matrix) {
      require(bandwidth_matrix->size() == d * d, "kde_fit: bandwidth matrix must be d x d");
      g.bandwidth_matrix = *bandwidth_matrix;
    } else {
      g.bandwidth_matrix = normal_reference_bandwidth(points, grid_counts, rule, bandwidth_scale, &g.bandwidth_floored);
    }
    const Eigen::MatrixXd h = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        g.bandwidth_matrix.data(), dims, dims);
    Eigen::LLT<Eigen::MatrixXd> llt(h);
    require(llt.info() == Eigen::Success && (h - h.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * h.cwiseAbs().maxCoeff(),
            "kde_fit: bandwidth matrix must be symmetric positive definite");
    const Eigen::MatrixXd prec = llt.solve(Eigen::MatrixXd::Identity(dims, dims));
    const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();

    for (std::size_t a = 0; a < d; ++a) {
      const double sd = std::sqrt(h(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a)));
      g.bandwidth.push_back(sd);
      const auto col = points.col(static_cast<Eigen::Index>(a));
      g.axes.push_back(GridAxis{col.minCoeff() - 3 * sd, col.maxCoeff() + 3 * sd, grid_counts[a]});
    }

    std::vector<std::size_t> stride(d, 1);
    for (std::size_t a = d - 1; a-- > 0;) { stride[a] = stride[a + 1] * g.axes[a + 1].count; }
    g.density.assign(stride[0] * g.axes[0].count, 0.0);

    const double norm = std::exp(-0.5 * (static_cast<double>(d) * std::log(2.0 * M_PI) + log_det)) /
                        static_cast<double>(n);
    const std::size_t last = d - 1;
    const auto el = static_cast<Eigen::Index>(last);
    const double step_last = g.axes[last].step();
    const double decay = std::exp(-prec(el, el) * step_last * step_last);

    std::vector<std::size_t> lo(d), hi(d), idx(d);
    Eigen::VectorXd u(dims);
    for (Eigen::Index p = 0; p < n; ++p) {
      for (std::size_t a = 0; a < d; ++a) {
        const auto& ax = g.axes[a];
        const double reach = 5.5 * g.bandwidth[a];
        const double x = points(p, static_cast<Eigen::Index>(a));
        lo[a] = static_cast<std::size_t>(std::max(0.0, std::ceil((x - reach - ax.lo) / ax.step())));
        hi[a] = std::min(ax.count - 1, static_cast<std::size_t>(std::max(0.0, std::floor((x + reach - ax.lo) / ax.step()))));
      }
      if (lo[last] > hi[last]) { continue; }
      // Walk every outer index in the box; along the last axis the kernel is a Gaussian in
      // the index, so consecutive values follow a multiplicative recurrence.
      for (std::size_t a = 0; a < last; ++a) { idx[a] = lo[a]; }
      bool more = true;
      for (std::size_t a = 0; a < last; ++a) { more = more && lo[a] <= hi[a]; }
      while (more) {
        for (std::size_t a = 0; a < d; ++a) {
          const std::size_t i = a == last ? lo[last] : idx[a];
          u(static_cast<Eigen::Index>(a)) = g.axes[a].at(i) - points(p, static_cast<Eigen::Index>(a));
        }
        const Eigen::VectorXd pu = prec * u;
        double value = norm * std::exp(-0.5 * u.dot(pu));
        double ratio = std::exp(-(pu(el) * step_last + 0.5 * prec(el, el) * step_last * step_last));
        std::size_t base = 0;
        for (std::size_t a = 0; a < last; ++a) { base += idx[a] * stride[a]; }
        for (std::size_t l = lo[last]; l <= hi[last]; ++l) {
          g.density[base + l] += value;
          value *= ratio;
          ratio *= decay;
        }
        std::size_t a = last;
        more = false;
        while (a-- > 0) {
          if (idx[a] < hi[a]) {
            ++idx[a];
            more = true;
            break;
          }
          idx[a] = lo[a];
        }
      }
    }
    return g;
  }

  double ConditionalDensity::mean() const {
    double s = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) { s += weights[i] * axis.at(i); }
    return s;
  }

  std::size_t ConditionalDensity::mode_index() const {
    return static_cast<std::size_t>(std::max_element(weights.begin(), weights.end()) - weights.begin());
  }

  double ConditionalDensity::quantile(double q) const {
    require(q >= 0 && q <= 1, "ConditionalDensity::quantile: q must be in [0, 1]");
    std::size_t first = 0;
    while (first < weights.size() && weights[first] <= 0) { ++first; }
    std::size_t last = weights.size() - 1;
    while (last > first && weights[last] <= 0) { --last; }
    if (q <= 0) { return axis.at(first); }
    if (q >= 1) { return axis.at(last); }
    double cum = 0;
    for (std::size_t i = first; i <= last; ++i) {
      const double next = cum + weights[i];
      if (next >= q) {
        if (i == first) { return axis.at(first); }
        const double frac = (q - cum) / weights[i];
        return axis.at(i - 1) + frac * axis.step();
      }
      cum = next;
    }
    return axis.at(last);
  }

  ConditionalDensity kde_conditional(const KdeGrid& grid, std::size_t free_axis, std::span<const double> fixed) {
    const std::size_t dims = grid.dims();
    require(free_axis < dims, "kde_conditional: free axis out of range");
    require(fixed.size() + 1 == dims, "kde_conditional: one fixed value per remaining axis required");
    ConditionalDensity out;
    out.axis = grid.axes[free_axis];
    std::vector<std::size_t> idx(dims, 0);
    std::size_t f = 0;
    for (std::size_t a = 0; a < dims; ++a) {
      if (a == free_axis) { continue; }
      const double v = fixed[f++];
      const auto& ax = grid.axes[a];
      if (v < ax.lo || v > ax.hi) { out.clamped = true; }
      idx[a] = ax.nearest(v);
    }
    out.weights.resize(out.axis.count);
    double total = 0;
    for (std::size_t i = 0; i < out.axis.count; ++i) {
      idx[free_axis] = i;
      out.weights[i] = grid.at(idx);
      total += out.weights[i];
    }
    if (!(total > 0)) { throw FitError("kde_conditional: no density mass at the conditioning value"); }
    for (auto& w : out.weights) { w /= total; }
    return out;
  }

  double empirical_quantile(std::span<const double> samples, double q) {
    require(!samples.empty(), "empirical_quantile: empty sample");
    require(q >= 0 && q <= 1, "empirical_quantile: q must be in [0, 1]");
    std::vector<double> s(samples.begin(), samples.end());
    std::sort(s.begin(), s.end());
    const double h = static_cast<double>(s.size() - 1) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, s.size() - 1);
    return s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
  }

} // namespace pros
