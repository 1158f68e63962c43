#include "pros/models.hpp"

#include "pros/error.hpp"
#include "pros/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

namespace pros {

  using nlohmann::json;

  namespace {

    double series_distance(std::span<const double> a, std::span<const double> b, const DistanceKind& distance) {
      return distance.is_dtw() ? dtw(a, b, distance.band_radius) : euclidean(a, b);
    }

    SearchConfig full_search(std::size_t k, const DistanceKind& distance) {
      SearchConfig cfg;
      cfg.k = k;
      cfg.distance = distance;
      cfg.checkpoints = {};
      return cfg;
    }

  } // namespace

  WitnessSet make_witness_set(const IndexTree& tree, const Dataset& source, std::span<const std::uint32_t> ids,
                              std::size_t k, const DistanceKind& distance) {
    WitnessSet w;
    w.ids.assign(ids.begin(), ids.end());
    w.series.resize(ids.size());
    w.knn_distances.resize(ids.size());
    const auto cfg = full_search(k, distance);
    parallel_for(ids.size(), [&](std::size_t i) {
      w.series[i] = source.series_as_double(ids[i]);
      const auto trace = progressive_knn(tree, w.series[i], cfg);
      w.knn_distances[i] = trace.exact_distances.back();
    });
    return w;
  }

  std::vector<double> witness_weights(std::span<const double> distances, double exponent) {
    require(!distances.empty(), "witness_weights: no witnesses");
    require(exponent > 0, "witness_weights: exponent must be positive");
    std::vector<double> logw(distances.size());
    for (std::size_t j = 0; j < distances.size(); ++j) {
      require(distances[j] > 0, "witness_weights: distances must be positive");
      logw[j] = -exponent * std::log(distances[j]);
    }
    const double top = *std::max_element(logw.begin(), logw.end());
    double total = 0;
    for (auto& v : logw) {
      v = std::exp(v - top);
      total += v;
    }
    for (auto& v : logw) { v /= total; }
    return logw;
  }

  double witness_weighted_distance(std::span<const double> query_to_witness, std::span<const double> witness_knn,
                                   double exponent) {
    require(query_to_witness.size() == witness_knn.size(), "witness_weighted_distance: size mismatch");
    require(!witness_knn.empty(), "witness_weighted_distance: no witnesses");
    for (std::size_t j = 0; j < query_to_witness.size(); ++j) {
      if (query_to_witness[j] <= 0) { return witness_knn[j]; }
    }
    const auto a = witness_weights(query_to_witness, exponent);
    double s = 0;
    for (std::size_t j = 0; j < a.size(); ++j) { s += a[j] * witness_knn[j]; }
    return s;
  }

  double witness_weighted_distance(std::span<const double> query, const WitnessSet& witnesses,
                                   const DistanceKind& distance, double exponent) {
    std::vector<double> d(witnesses.size());
    for (std::size_t j = 0; j < d.size(); ++j) { d[j] = series_distance(query, witnesses.series[j], distance); }
    return witness_weighted_distance(d, witnesses.knn_distances, exponent);
  }

  double TrainingRecord::family_target(std::size_t leaves) const {
    return family_corrected_knn(trace.exact_distances, at(leaves).bsf_distances);
  }

  bool TrainingRecord::exact_at(std::size_t leaves) const {
    return is_exact(trace.exact_distances, at(leaves).bsf_distances);
  }

  std::vector<TrainingRecord> collect_training(const IndexTree& tree, const Dataset& source,
                                               std::span<const std::uint32_t> query_ids, const WitnessSet& witnesses,
                                               const CollectConfig& config) {
    require(source.length() == tree.series_length(), "collect_training: query length does not match the index");
    std::vector<TrainingRecord> out(query_ids.size());
    const auto cfg = full_search(config.k, config.distance);
    parallel_for(
        query_ids.size(),
        [&](std::size_t i) {
          auto& r = out[i];
          r.query_id = query_ids[i];
          const auto q = source.series_as_double(r.query_id);
          if (witnesses.size() > 0) {
            r.witness_distance = witness_weighted_distance(q, witnesses, config.distance, config.witness_exponent);
          }
          r.trace = progressive_knn(tree, q, cfg);
        },
        config.threads);
    return out;
  }

  Agreement agreement(std::span<const std::int32_t> labels) {
    require(!labels.empty(), "agreement: no labels");
    std::map<std::int32_t, std::size_t> counts;
    for (auto l : labels) { ++counts[l]; }
    Agreement a;
    for (const auto& [label, count] : counts) {
      if (count > a.majority_count) {
        a.majority = label;
        a.majority_count = count;
      }
    }
    if (labels.size() > 1) {
      a.agreement = static_cast<double>(a.majority_count - 1) / static_cast<double>(labels.size() - 1);
    }
    return a;
  }

  std::vector<std::int32_t> labels_of(const Dataset& dataset, std::span<const std::uint32_t> ids) {
    std::vector<std::int32_t> out(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) { out[i] = dataset.label(ids[i]); }
    return out;
  }

  std::string to_string(EstimatorMethod method) {
    switch (method) {
      case EstimatorMethod::linear: return "linear";
      case EstimatorMethod::kde2: return "kde2";
      case EstimatorMethod::kde3: return "kde3";
      case EstimatorMethod::witness: return "witness";
      case EstimatorMethod::baseline: return "baseline";
    }
    return "?";
  }

  EstimatorMethod parse_estimator(const std::string& text) {
    for (auto m : {EstimatorMethod::linear, EstimatorMethod::kde2, EstimatorMethod::kde3, EstimatorMethod::witness,
                   EstimatorMethod::baseline}) {
      if (to_string(m) == text) { return m; }
    }
    throw InvalidArgument("unknown estimator '" + text + "' (linear, kde2, kde3, witness, baseline)");
  }

  KdeModel KdeModel::fit(Eigen::MatrixXd points, std::vector<std::size_t> grid_counts, double bandwidth_scale,
                         BandwidthRule rule) {
    KdeModel m;
    m.grid = kde_fit(points, grid_counts, std::nullopt, bandwidth_scale, rule);
    m.bandwidth = m.grid.bandwidth_matrix;
    m.points = std::move(points);
    m.grid_counts = std::move(grid_counts);
    return m;
  }

  KdeModel KdeModel::rebuild(Eigen::MatrixXd points, std::vector<std::size_t> grid_counts,
                             std::vector<double> bandwidth) {
    KdeModel m;
    m.grid = kde_fit(points, grid_counts, bandwidth, 1.0);
    m.bandwidth = std::move(bandwidth);
    m.points = std::move(points);
    m.grid_counts = std::move(grid_counts);
    return m;
  }

  std::size_t TimeBoundModel::bound(double first_approximate_distance) const {
    const double leaves = std::exp2(model.predict(std::span<const double>(&first_approximate_distance, 1)));
    if (!(leaves > 1)) { return 1; }
    if (leaves > 1e18) { return std::numeric_limits<std::size_t>::max(); }
    return static_cast<std::size_t>(std::ceil(leaves * (1.0 - 1e-12)));
  }

  const TimeBoundModel& GuaranteeBundle::time_bound(double phi) const {
    for (const auto& t : time_bounds) {
      if (std::abs(t.phi - phi) < 1e-12) { return t; }
    }
    throw ModelMismatch("bundle has no time-bound model for phi = " + std::to_string(phi));
  }

  void GuaranteeBundle::check_compatible(std::size_t query_k, const DistanceKind& query_distance, IndexKind kind,
                                         std::size_t length) const {
    if (query_k != k) {
      throw ModelMismatch("bundle was trained for k = " + std::to_string(k) + ", query asks for k = " +
                          std::to_string(query_k));
    }
    if (query_distance.to_string() != distance.to_string()) {
      throw ModelMismatch("bundle was trained for distance " + distance.to_string() + ", query uses " +
                          query_distance.to_string());
    }
    if (kind != index_kind) {
      throw ModelMismatch("bundle was trained on a " + to_string(index_kind) + " index, query runs on " + to_string(kind));
    }
    if (length != series_length) {
      throw ModelMismatch("bundle was trained for series length " + std::to_string(series_length));
    }
  }

  double baseline_quantile(const WitnessSet& witnesses, double q) {
    return empirical_quantile(witnesses.knn_distances, q);
  }

  LinearModel fit_query_sensitive(std::span<const TrainingRecord> records) {
    require(records.size() >= 10, "fit_query_sensitive: need at least 10 training queries");
    Eigen::MatrixXd x(static_cast<Eigen::Index>(records.size()), 1);
    Eigen::VectorXd y(x.rows());
    for (std::size_t i = 0; i < records.size(); ++i) {
      x(static_cast<Eigen::Index>(i), 0) = records[i].witness_distance;
      y(static_cast<Eigen::Index>(i)) = records[i].exact_kth();
    }
    return ols_fit(x, y);
  }

  namespace {

    std::vector<const TrainingRecord*> running(std::span<const TrainingRecord> records, std::size_t t) {
      std::vector<const TrainingRecord*> out;
      for (const auto& r : records) {
        if (r.running_at(t)) { out.push_back(&r); }
      }
      return out;
    }

    OutcomeModel fit_outcome(const Eigen::MatrixXd& x, const std::vector<int>& labels) {
      OutcomeModel m;
      std::size_t positives = 0;
      for (int l : labels) { positives += static_cast<std::size_t>(l); }
      m.pinned = static_cast<double>(positives) / static_cast<double>(labels.size());
      if (positives == 0 || positives == labels.size()) { return m; }
      try {
        m.logistic = logistic_fit(x, labels);
      } catch (const FitError&) {
        m.logistic.reset();
      }
      return m;
    }

  } // namespace

  void fit_checkpoint_estimators(GuaranteeBundle& bundle, std::span<const TrainingRecord> records,
                                 const TrainingConfig& config) {
    bundle.per_checkpoint.resize(config.checkpoints.size());
    std::vector<std::array<double, 3>> all;
    for (std::size_t c = 0; c < config.checkpoints.size(); ++c) {
      const auto t = config.checkpoints[c];
      auto& cm = bundle.per_checkpoint[c];
      cm.leaves = t;
      const auto rows = running(records, t);
      cm.rows = rows.size();
      if (rows.size() < config.min_rows) { continue; }
      Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), 1);
      Eigen::VectorXd y(x.rows());
      Eigen::MatrixXd pts(x.rows(), 2);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const double bsf = rows[i]->at(t).kth_distance();
        const double target = rows[i]->family_target(t);
        x(ii, 0) = bsf;
        y(ii) = target;
        pts(ii, 0) = target;
        pts(ii, 1) = bsf;
        all.push_back({std::log2(static_cast<double>(t)), target, bsf});
      }
      try {
        cm.linear = ols_fit(x, y);
      } catch (const FitError&) {
        cm.linear.reset();
      }
      cm.kde2 = KdeModel::fit(std::move(pts), {config.kde2_grid[0], config.kde2_grid[1]}, config.bandwidth_scale,
                              config.bandwidth_rule);
    }
    if (config.fit_kde3 && all.size() >= config.min_rows) {
      Eigen::MatrixXd pts(static_cast<Eigen::Index>(all.size()), 3);
      for (std::size_t i = 0; i < all.size(); ++i) {
        for (Eigen::Index a = 0; a < 3; ++a) { pts(static_cast<Eigen::Index>(i), a) = all[i][static_cast<std::size_t>(a)]; }
      }
      bundle.kde3 = KdeModel::fit(std::move(pts), {config.kde3_grid[0], config.kde3_grid[1], config.kde3_grid[2]},
                                  config.bandwidth_scale, config.bandwidth_rule);
    }
  }

  void fit_exact_probability(GuaranteeBundle& bundle, std::span<const TrainingRecord> records,
                             const TrainingConfig& config) {
    bundle.per_checkpoint.resize(config.checkpoints.size());
    for (std::size_t c = 0; c < config.checkpoints.size(); ++c) {
      const auto t = config.checkpoints[c];
      auto& cm = bundle.per_checkpoint[c];
      cm.leaves = t;
      const auto rows = running(records, t);
      cm.rows = rows.size();
      if (rows.size() < config.min_rows) { continue; }
      Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), 1);
      std::vector<int> labels(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        x(static_cast<Eigen::Index>(i), 0) = rows[i]->at(t).kth_distance();
        labels[i] = rows[i]->exact_at(t) ? 1 : 0;
      }
      cm.exact_probability = fit_outcome(x, labels);
    }
  }

  TimeBoundModel fit_time_bound(std::span<const TrainingRecord> records, double phi) {
    require(phi > 0 && phi < 1, "fit_time_bound: phi must be in (0, 1)");
    require(records.size() >= 20, "fit_time_bound: need at least 20 training queries");
    Eigen::MatrixXd x(static_cast<Eigen::Index>(records.size()), 1);
    Eigen::VectorXd y(x.rows());
    for (std::size_t i = 0; i < records.size(); ++i) {
      x(static_cast<Eigen::Index>(i), 0) = records[i].first_approximate_distance();
      y(static_cast<Eigen::Index>(i)) = std::log2(static_cast<double>(records[i].leaves_to_exact_answer()));
    }
    return {phi, quantile_fit(x, y, 1.0 - phi)};
  }

  std::vector<double> class_predictors(double bsf_k, std::span<const std::int32_t> bsf_labels, std::size_t class_count,
                                       bool one_hot) {
    std::vector<double> x{bsf_k};
    const auto a = agreement(bsf_labels);
    if (a.agreement) { x.push_back(*a.agreement); }
    if (one_hot) {
      for (std::size_t c = 1; c < class_count; ++c) { x.push_back(a.majority == static_cast<std::int32_t>(c) ? 1.0 : 0.0); }
    }
    return x;
  }

  void fit_class_probability(GuaranteeBundle& bundle, std::span<const TrainingRecord> records, const Dataset& dataset,
                             const TrainingConfig& config) {
    require(dataset.has_labels(), "fit_class_probability: dataset has no labels");
    bundle.class_count = dataset.class_count();
    bundle.class_one_hot = bundle.class_count <= config.one_hot_max_classes;
    bundle.per_checkpoint.resize(config.checkpoints.size());
    for (std::size_t c = 0; c < config.checkpoints.size(); ++c) {
      const auto t = config.checkpoints[c];
      auto& cm = bundle.per_checkpoint[c];
      cm.leaves = t;
      const auto rows = running(records, t);
      cm.rows = rows.size();
      if (rows.size() < config.min_rows) { continue; }
      std::vector<std::vector<double>> xs;
      std::vector<int> labels;
      for (const auto* r : rows) {
        const auto& e = r->at(t);
        const auto bsf_labels = labels_of(dataset, e.bsf_ids);
        xs.push_back(class_predictors(e.kth_distance(), bsf_labels, bundle.class_count, bundle.class_one_hot));
        const auto exact_class = agreement(labels_of(dataset, r->trace.exact_ids)).majority;
        labels.push_back(agreement(bsf_labels).majority == exact_class ? 1 : 0);
      }
      Eigen::MatrixXd x(static_cast<Eigen::Index>(xs.size()), static_cast<Eigen::Index>(xs.front().size()));
      for (std::size_t i = 0; i < xs.size(); ++i) {
        for (std::size_t j = 0; j < xs[i].size(); ++j) {
          x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = xs[i][j];
        }
      }
      cm.class_probability = fit_outcome(x, labels);
    }
  }

  GuaranteeBundle fit_bundle(std::span<const TrainingRecord> records, const WitnessSet& witnesses,
                             const IndexTree& tree, const CollectConfig& collect, const TrainingConfig& config) {
    require(!records.empty(), "fit_bundle: no training records");
    for (std::size_t i = 1; i < config.checkpoints.size(); ++i) {
      require(config.checkpoints[i] > config.checkpoints[i - 1], "fit_bundle: checkpoints must be strictly increasing");
    }
    for (const auto& r : records) {
      require(r.trace.completed() && r.k() == collect.k, "fit_bundle: records must come from complete k-NN searches");
    }
    GuaranteeBundle b;
    b.k = collect.k;
    b.distance = collect.distance;
    b.index_kind = tree.config().kind;
    b.series_length = tree.series_length();
    b.checkpoints = config.checkpoints;
    b.bandwidth_scale = config.bandwidth_scale;
    b.witness_exponent = collect.witness_exponent;
    b.witnesses = witnesses;
    if (witnesses.size() > 0 && records.size() >= 10) {
      try {
        b.witness_model = fit_query_sensitive(records);
      } catch (const FitError&) {
        b.witness_model.reset();
      }
    }
    fit_checkpoint_estimators(b, records, config);
    fit_exact_probability(b, records, config);
    if (records.size() >= 20) {
      for (double phi : config.time_bound_phis) { b.time_bounds.push_back(fit_time_bound(records, phi)); }
    }
    if (tree.dataset().has_labels()) { fit_class_probability(b, records, tree.dataset(), config); }
    return b;
  }

  DistanceEstimate estimate_distance(const GuaranteeBundle& bundle, const EstimateInput& input, double theta,
                                     EstimatorMethod method, Sidedness sidedness) {
    require(theta > 0 && theta < 1, "estimate_distance: theta must be in (0, 1)");
    const double upper_q = sidedness == Sidedness::two_sided ? 1.0 - theta / 2 : 1.0;
    const double lower_q = sidedness == Sidedness::two_sided ? theta / 2 : theta;
    auto no_model = [&] {
      return ModelMismatch("no " + to_string(method) + " model at or before " + std::to_string(input.leaves) + " leaves");
    };
    DistanceEstimate e;
    e.upper = kInfinity;
    switch (method) {
      case EstimatorMethod::linear: {
        const auto i = bundle.model_at(input.leaves, [](const CheckpointModels& m) { return m.linear.has_value(); });
        if (!i) { throw no_model(); }
        const auto pi = ols_predict_interval(*bundle.per_checkpoint[*i].linear,
                                             std::span<const double>(&input.bsf_k, 1), theta, sidedness);
        e = {pi.point, pi.lower, pi.upper};
        break;
      }
      case EstimatorMethod::kde2:
      case EstimatorMethod::kde3: {
        ConditionalDensity cond;
        if (method == EstimatorMethod::kde2) {
          const auto i = bundle.model_at(input.leaves, [](const CheckpointModels& m) { return m.kde2.has_value(); });
          if (!i) { throw no_model(); }
          const double fixed[] = {input.bsf_k};
          cond = kde_conditional(bundle.per_checkpoint[*i].kde2->grid, 0, fixed);
        } else {
          if (!bundle.kde3 || input.leaves == 0) { throw no_model(); }
          const double fixed[] = {std::log2(static_cast<double>(input.leaves)), input.bsf_k};
          cond = kde_conditional(bundle.kde3->grid, 1, fixed);
        }
        e.point = cond.mean();
        e.lower = cond.quantile(lower_q);
        if (sidedness == Sidedness::two_sided) { e.upper = cond.quantile(upper_q); }
        break;
      }
      case EstimatorMethod::witness: {
        if (!bundle.witness_model) { throw no_model(); }
        const auto pi = ols_predict_interval(*bundle.witness_model,
                                             std::span<const double>(&input.witness_distance, 1), theta, sidedness);
        e = {pi.point, pi.lower, pi.upper};
        break;
      }
      case EstimatorMethod::baseline: {
        if (bundle.witnesses.size() == 0) { throw no_model(); }
        e.point = baseline_quantile(bundle.witnesses, 0.5);
        e.lower = baseline_quantile(bundle.witnesses, lower_q);
        if (sidedness == Sidedness::two_sided) { e.upper = baseline_quantile(bundle.witnesses, upper_q); }
        break;
      }
    }
    e.upper = std::min(e.upper, input.bsf_k);
    e.lower = std::min(e.lower, e.upper);
    if (e.lower <= 0) { e.lower = std::min(e.upper, std::numeric_limits<double>::min()); }
    e.point = std::clamp(e.point, e.lower, e.upper);
    return e;
  }

  std::optional<double> exact_probability(const GuaranteeBundle& bundle, std::size_t leaves, double bsf_k) {
    const auto i = bundle.model_at(leaves, [](const CheckpointModels& m) { return m.exact_probability.has_value(); });
    if (!i) { return std::nullopt; }
    return bundle.per_checkpoint[*i].exact_probability->predict(std::span<const double>(&bsf_k, 1));
  }

  std::optional<double> class_probability(const GuaranteeBundle& bundle, std::size_t leaves, double bsf_k,
                                          std::span<const std::int32_t> bsf_labels) {
    if (bundle.class_count == 0) { return std::nullopt; }
    const auto i = bundle.model_at(leaves, [](const CheckpointModels& m) { return m.class_probability.has_value(); });
    if (!i) { return std::nullopt; }
    const auto x = class_predictors(bsf_k, bsf_labels, bundle.class_count, bundle.class_one_hot);
    return bundle.per_checkpoint[*i].class_probability->predict(x);
  }

  // ---- JSON ---------------------------------------------------------------------------------

  namespace {

    json linear_json(const LinearModel& m) {
      return {{"coefficients", m.coefficients},   {"intercept", m.intercept},
              {"residual_sigma", m.residual_sigma}, {"training_count", m.training_count},
              {"xtx_inverse", m.xtx_inverse}};
    }

    LinearModel linear_from(const json& j) {
      LinearModel m;
      j.at("coefficients").get_to(m.coefficients);
      j.at("intercept").get_to(m.intercept);
      j.at("residual_sigma").get_to(m.residual_sigma);
      j.at("training_count").get_to(m.training_count);
      j.at("xtx_inverse").get_to(m.xtx_inverse);
      return m;
    }

    json outcome_json(const OutcomeModel& m) {
      json j{{"pinned", m.pinned}};
      if (m.logistic) {
        j["logistic"] = {{"coefficients", m.logistic->coefficients},
                         {"intercept", m.logistic->intercept},
                         {"ridge", m.logistic->ridge_penalty}};
      }
      return j;
    }

    OutcomeModel outcome_from(const json& j) {
      OutcomeModel m;
      j.at("pinned").get_to(m.pinned);
      if (j.contains("logistic")) {
        LogisticModel l;
        j["logistic"].at("coefficients").get_to(l.coefficients);
        j["logistic"].at("intercept").get_to(l.intercept);
        j["logistic"].at("ridge").get_to(l.ridge_penalty);
        m.logistic = l;
      }
      return m;
    }

    json kde_json(const KdeModel& m) {
      json pts = json::array();
      for (Eigen::Index i = 0; i < m.points.rows(); ++i) {
        std::vector<double> row(static_cast<std::size_t>(m.points.cols()));
        for (Eigen::Index a = 0; a < m.points.cols(); ++a) { row[static_cast<std::size_t>(a)] = m.points(i, a); }
        pts.push_back(row);
      }
      return {{"points", pts}, {"grid", m.grid_counts}, {"bandwidth", m.bandwidth}};
    }

    KdeModel kde_from(const json& j) {
      const auto& pts = j.at("points");
      std::vector<std::size_t> grid = j.at("grid").get<std::vector<std::size_t>>();
      std::vector<double> bw = j.at("bandwidth").get<std::vector<double>>();
      require(!pts.empty() && bw.size() == grid.size() * grid.size(), "bundle: malformed kde block");
      Eigen::MatrixXd m(static_cast<Eigen::Index>(pts.size()), static_cast<Eigen::Index>(grid.size()));
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto row = pts[i].get<std::vector<double>>();
        require(row.size() == grid.size(), "bundle: kde point has wrong arity");
        for (std::size_t a = 0; a < row.size(); ++a) { m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a)) = row[a]; }
      }
      return KdeModel::rebuild(std::move(m), std::move(grid), std::move(bw));
    }

  } // namespace

  json to_json(const GuaranteeBundle& b) {
    json j;
    j["version"] = b.version;
    j["k"] = b.k;
    j["distance"] = b.distance.to_string();
    j["index"] = to_string(b.index_kind);
    j["series_length"] = b.series_length;
    j["checkpoints"] = b.checkpoints;
    j["bandwidth_scale"] = b.bandwidth_scale;
    j["witness_exponent"] = b.witness_exponent;
    j["witnesses"] = {{"ids", b.witnesses.ids}, {"series", b.witnesses.series}, {"knn", b.witnesses.knn_distances}};
    j["witness_model"] = b.witness_model ? linear_json(*b.witness_model) : json(nullptr);
    json cps = json::array();
    for (const auto& c : b.per_checkpoint) {
      json cj{{"leaves", c.leaves}, {"rows", c.rows}};
      cj["linear"] = c.linear ? linear_json(*c.linear) : json(nullptr);
      cj["kde2"] = c.kde2 ? kde_json(*c.kde2) : json(nullptr);
      cj["exact_probability"] = c.exact_probability ? outcome_json(*c.exact_probability) : json(nullptr);
      cj["class_probability"] = c.class_probability ? outcome_json(*c.class_probability) : json(nullptr);
      cps.push_back(cj);
    }
    j["per_checkpoint"] = cps;
    j["kde3"] = b.kde3 ? kde_json(*b.kde3) : json(nullptr);
    json tb = json::array();
    for (const auto& t : b.time_bounds) {
      tb.push_back({{"phi", t.phi},
                    {"tau", t.model.tau},
                    {"coefficients", t.model.coefficients},
                    {"intercept", t.model.intercept}});
    }
    j["time_bounds"] = tb;
    j["class_count"] = b.class_count;
    j["class_one_hot"] = b.class_one_hot;
    return j;
  }

  GuaranteeBundle bundle_from_json(const json& j) {
    GuaranteeBundle b;
    try {
      j.at("version").get_to(b.version);
      if (b.version != kBundleVersion) {
        throw ModelMismatch("bundle version '" + b.version + "' is not " + kBundleVersion);
      }
      j.at("k").get_to(b.k);
      b.distance = DistanceKind::parse(j.at("distance").get<std::string>());
      b.index_kind = parse_index_kind(j.at("index").get<std::string>());
      j.at("series_length").get_to(b.series_length);
      j.at("checkpoints").get_to(b.checkpoints);
      j.at("bandwidth_scale").get_to(b.bandwidth_scale);
      j.at("witness_exponent").get_to(b.witness_exponent);
      const auto& w = j.at("witnesses");
      w.at("ids").get_to(b.witnesses.ids);
      w.at("series").get_to(b.witnesses.series);
      w.at("knn").get_to(b.witnesses.knn_distances);
      require(b.witnesses.series.size() == b.witnesses.ids.size() &&
                  b.witnesses.knn_distances.size() == b.witnesses.ids.size(),
              "bundle: witness arrays differ in length");
      if (!j.at("witness_model").is_null()) { b.witness_model = linear_from(j["witness_model"]); }
      for (const auto& cj : j.at("per_checkpoint")) {
        CheckpointModels c;
        cj.at("leaves").get_to(c.leaves);
        cj.at("rows").get_to(c.rows);
        if (!cj.at("linear").is_null()) { c.linear = linear_from(cj["linear"]); }
        if (!cj.at("kde2").is_null()) { c.kde2 = kde_from(cj["kde2"]); }
        if (!cj.at("exact_probability").is_null()) { c.exact_probability = outcome_from(cj["exact_probability"]); }
        if (!cj.at("class_probability").is_null()) { c.class_probability = outcome_from(cj["class_probability"]); }
        b.per_checkpoint.push_back(std::move(c));
      }
      if (!j.at("kde3").is_null()) { b.kde3 = kde_from(j["kde3"]); }
      for (const auto& tj : j.at("time_bounds")) {
        TimeBoundModel t;
        tj.at("phi").get_to(t.phi);
        tj.at("tau").get_to(t.model.tau);
        tj.at("coefficients").get_to(t.model.coefficients);
        tj.at("intercept").get_to(t.model.intercept);
        b.time_bounds.push_back(t);
      }
      j.at("class_count").get_to(b.class_count);
      j.at("class_one_hot").get_to(b.class_one_hot);
    } catch (const json::exception& e) {
      throw IoError(std::string("malformed model bundle: ") + e.what());
    }
    return b;
  }

  void save_bundle(const GuaranteeBundle& bundle, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) { throw IoError("cannot write bundle " + path.string()); }
    out << to_json(bundle).dump() << '\n';
    if (!out) { throw IoError("failed writing bundle " + path.string()); }
  }

  GuaranteeBundle load_bundle(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) { throw IoError("cannot open bundle " + path.string()); }
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw IoError("bundle " + path.string() + " is not valid JSON: " + e.what());
    }
    return bundle_from_json(j);
  }

} // namespace pros
