#include "pros/service.hpp"

#include "pros/classify.hpp"
#include "pros/error.hpp"

#include "httplib.h"

#include <cmath>
#include <limits>

namespace pros {

  using nlohmann::json;

  std::string to_string(SessionState state) {
    switch (state) {
    case SessionState::running: return "running";
    case SessionState::stopped_by_user: return "stopped_by_user";
    case SessionState::stopped_by_policy: return "stopped_by_policy";
    case SessionState::finished: return "finished";
    case SessionState::failed: return "failed";
    }
    return "unknown";
  }

  namespace {

    json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

    template <class T>
    json optional_json(const std::optional<T>& v) {
      return v ? json(*v) : json(nullptr);
    }

    // The phi whose time bound is reported: the policy's own, else the loosest one trained.
    std::optional<double> reported_phi(const GuaranteeBundle& bundle, const StoppingPolicy& policy) {
      if (policy.kind == StoppingPolicy::Kind::time_bound) { return policy.phi; }
      std::optional<double> phi;
      for (const auto& t : bundle.time_bounds) {
        if (!phi || t.phi > *phi) { phi = t.phi; }
      }
      return phi;
    }

  } // namespace

  json make_event_json(const GuaranteeBundle& bundle, const ServiceConfig& config, const ProgressiveEvent& event,
                       double witness_distance, std::optional<std::size_t> tau_hat,
                       std::span<const std::int32_t> bsf_labels, SessionState state, bool terminal) {
    const double bsf = event.kth_distance();
    json j;
    j["leaves_visited"] = event.leaves_visited;
    j["bsf_distances"] = event.bsf_distances;
    j["bsf_ids"] = event.bsf_ids;
    j["point"] = nullptr;
    j["lower"] = nullptr;
    j["error_upper_bound"] = nullptr;
    try {
      const auto est = estimate_distance(bundle, {bsf, event.leaves_visited, witness_distance}, config.theta,
                                         config.estimator, Sidedness::lower_only);
      j["point"] = finite_or_null(est.point);
      j["lower"] = finite_or_null(est.lower);
      if (est.lower > 0) { j["error_upper_bound"] = finite_or_null(bsf / est.lower - 1.0); }
    } catch (const Error&) {
      // no model at this checkpoint: the estimate fields stay null
    }
    j["p_exact"] = optional_json(exact_probability(bundle, event.leaves_visited, bsf));
    j["tau_hat"] = optional_json(tau_hat);
    if (!bsf_labels.empty()) {
      j["class"] = majority_class(bsf_labels);
      j["p_class"] = optional_json(class_probability(bundle, event.leaves_visited, bsf, bsf_labels));
    } else {
      j["class"] = nullptr;
      j["p_class"] = nullptr;
    }
    j["state"] = to_string(state);
    j["terminal"] = terminal;
    return j;
  }

  void QueryService::Session::append(json event, std::optional<SessionState> next) {
    {
      std::lock_guard lock(mutex);
      if (done) { return; }
      event["seq"] = events.size();
      event["session"] = id;
      events.push_back(std::move(event));
      if (next) {
        state = *next;
        done = true;
      }
    }
    changed.notify_all();
  }

  QueryService::QueryService(std::shared_ptr<const IndexTree> tree, std::shared_ptr<const GuaranteeBundle> bundle,
                             ServiceConfig config)
      : tree_(std::move(tree)), bundle_(std::move(bundle)), config_(std::move(config)) {
    require(tree_ != nullptr && bundle_ != nullptr, "service: index and bundle are required");
    require(config_.workers >= 1, "service: need at least one worker");
    config_.policy.validate();
    bundle_->check_compatible(config_.k, config_.distance, tree_->config().kind, tree_->series_length());
    if (config_.policy.kind == StoppingPolicy::Kind::time_bound) { (void)bundle_->time_bound(config_.policy.phi); }
    for (std::size_t i = 0; i < config_.workers; ++i) {
      workers_.emplace_back([this] { worker_loop(); });
    }
  }

  QueryService::~QueryService() {
    shutdown();
    {
      std::lock_guard lock(queue_mutex_);
      stopping_ = true;
    }
    {
      std::lock_guard lock(sessions_mutex_);
      for (auto& [id, s] : sessions_) { s->stop_flag = true; }
    }
    queue_cv_.notify_all();
    workers_.clear();
  }

  QueryRequest QueryService::parse_request(const json& payload) const {
    if (!payload.is_object()) { throw InvalidArgument("payload must be a JSON object"); }
    QueryRequest r;
    r.policy = config_.policy;
    try {
      const bool inline_values = payload.contains("values");
      const bool by_index = payload.contains("series");
      if (inline_values == by_index) { throw InvalidArgument("payload needs exactly one of 'values' or 'series'"); }
      if (payload.contains("dataset") && payload["dataset"].get<std::string>() != config_.dataset_name) {
        throw InvalidArgument("unknown dataset '" + payload["dataset"].get<std::string>() + "'");
      }
      if (inline_values) {
        r.values = payload["values"].get<std::vector<double>>();
        if (r.values.size() != tree_->series_length()) {
          throw InvalidArgument("query has length " + std::to_string(r.values.size()) + ", index expects " +
                                std::to_string(tree_->series_length()));
        }
        for (double v : r.values) {
          if (!std::isfinite(v)) { throw InvalidArgument("query values must be finite"); }
        }
      } else {
        const auto idx = payload["series"].get<std::int64_t>();
        if (idx < 0 || static_cast<std::size_t>(idx) >= tree_->dataset().size()) {
          throw InvalidArgument("series index " + std::to_string(idx) + " is out of range");
        }
        r.series_index = static_cast<std::size_t>(idx);
        r.values = tree_->dataset().series_as_double(*r.series_index);
      }
      if (payload.contains("k") && payload["k"].get<std::size_t>() != config_.k) {
        throw InvalidArgument("service runs k = " + std::to_string(config_.k));
      }
      if (payload.contains("distance") &&
          DistanceKind::parse(payload["distance"].get<std::string>()).to_string() != config_.distance.to_string()) {
        throw InvalidArgument("service runs distance " + config_.distance.to_string());
      }
      if (payload.contains("policy")) {
        const auto& p = payload["policy"];
        r.policy = p.is_string() ? StoppingPolicy::parse(p.get<std::string>()) : StoppingPolicy::from_json(p);
        r.policy.validate();
      }
    } catch (const json::exception& e) {
      throw InvalidArgument(std::string("malformed payload: ") + e.what());
    }
    if (r.policy.kind == StoppingPolicy::Kind::time_bound) { (void)bundle_->time_bound(r.policy.phi); }
    if (r.policy.kind == StoppingPolicy::Kind::class_probability && !tree_->dataset().has_labels()) {
      throw InvalidArgument("class policy needs a labeled dataset");
    }
    return r;
  }

  std::string QueryService::submit(const json& payload) {
    auto s = std::make_shared<Session>();
    s->request = parse_request(payload);
    {
      std::lock_guard lock(sessions_mutex_);
      s->id = "q" + std::to_string(next_id_++);
      sessions_.emplace(s->id, s);
    }
    {
      std::lock_guard lock(queue_mutex_);
      queue_.push_back(s);
    }
    queue_cv_.notify_one();
    return s->id;
  }

  std::shared_ptr<QueryService::Session> QueryService::find(const std::string& id) const {
    std::lock_guard lock(sessions_mutex_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
  }

  bool QueryService::has_session(const std::string& session) const { return find(session) != nullptr; }

  std::optional<SessionState> QueryService::stop(const std::string& session) {
    auto s = find(session);
    if (!s) { return std::nullopt; }
    s->stop_flag = true;
    std::lock_guard lock(s->mutex);
    return s->state;
  }

  std::optional<SessionState> QueryService::state(const std::string& session) const {
    auto s = find(session);
    if (!s) { return std::nullopt; }
    std::lock_guard lock(s->mutex);
    return s->state;
  }

  QueryService::Batch QueryService::wait_events(const std::string& session, std::size_t from,
                                                std::chrono::milliseconds timeout) const {
    auto s = find(session);
    if (!s) { throw InvalidArgument("unknown session '" + session + "'"); }
    std::unique_lock lock(s->mutex);
    s->changed.wait_for(lock, timeout, [&] { return s->events.size() > from || s->done; });
    Batch b;
    for (std::size_t i = from; i < s->events.size(); ++i) { b.events.push_back(s->events[i]); }
    b.done = s->done;
    return b;
  }

  void QueryService::worker_loop() {
    for (;;) {
      std::shared_ptr<Session> s;
      {
        std::unique_lock lock(queue_mutex_);
        queue_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
        if (queue_.empty()) { return; }
        s = std::move(queue_.front());
        queue_.pop_front();
      }
      run_session(*s);
    }
  }

  void QueryService::run_session(Session& s) {
    const GuaranteeBundle& bundle = *bundle_;
    const Dataset& ds = tree_->dataset();
    const bool labeled = ds.has_labels();
    try {
      const double wd = bundle.witnesses.ids.empty()
                            ? std::numeric_limits<double>::quiet_NaN()
                            : witness_weighted_distance(s.request.values, bundle.witnesses, config_.distance,
                                                        bundle.witness_exponent);
      const auto phi = reported_phi(bundle, s.request.policy);
      std::optional<std::size_t> tau_hat;

      RunConfig rc;
      rc.k = config_.k;
      rc.distance = config_.distance;
      rc.audit = false;
      rc.stop_flag = &s.stop_flag;

      auto on_event = [&](const ProgressiveEvent& e, const Decision& d) {
        if (e.has(ProgressiveEvent::initial) && phi) { tau_hat = bundle.time_bound(*phi).bound(e.kth_distance()); }
        const bool ends = e.has(ProgressiveEvent::final) || e.has(ProgressiveEvent::stopped) || d.stop;
        if (!e.has(ProgressiveEvent::checkpoint) || ends) { return; }
        std::vector<std::int32_t> labels;
        if (labeled) { labels = labels_of(ds, e.bsf_ids); }
        s.append(make_event_json(bundle, config_, e, wd, tau_hat, labels, SessionState::running, false));
      };
      const auto out = run_with_policy(*tree_, bundle, s.request.values, s.request.policy, rc, on_event);

      ProgressiveEvent last;
      last.leaves_visited = out.stopped_at;
      for (const auto& n : out.answer) {
        last.bsf_distances.push_back(n.distance);
        last.bsf_ids.push_back(n.id);
      }
      SessionState final_state = SessionState::finished;
      if (out.stopped) {
        final_state = out.stop_reason == "stopped by user" ? SessionState::stopped_by_user
                                                           : SessionState::stopped_by_policy;
      }
      std::vector<std::int32_t> labels;
      if (labeled) { labels = labels_of(ds, last.bsf_ids); }
      auto ev = make_event_json(bundle, config_, last, wd, tau_hat, labels, final_state, true);
      if (out.stopped) { ev["stop_reason"] = out.stop_reason; }
      s.append(std::move(ev), final_state);
    } catch (const std::exception& e) {
      s.append(json{{"state", to_string(SessionState::failed)}, {"terminal", true}, {"error", e.what()}},
               SessionState::failed);
    }
  }

  void QueryService::install_routes() {
    server_ = std::make_unique<httplib::Server>();
    auto& svr = *server_;
    svr.new_task_queue = [] { return new httplib::ThreadPool(32); };

    auto send_error = [](httplib::Response& res, int status, const std::string& message) {
      res.status = status;
      res.set_content(json{{"error", message}}.dump(), "application/json");
    };

    svr.Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
      json j{{"status", "ok"},
             {"k", config_.k},
             {"distance", config_.distance.to_string()},
             {"policy", config_.policy.to_string()},
             {"dataset", config_.dataset_name},
             {"series_length", tree_->series_length()},
             {"indexed", tree_->indexed_count()}};
      res.set_content(j.dump(), "application/json");
    });

    svr.Post("/v1/queries", [this, send_error](const httplib::Request& req, httplib::Response& res) {
      json payload;
      try {
        payload = json::parse(req.body);
      } catch (const json::exception& e) {
        send_error(res, 400, std::string("body is not JSON: ") + e.what());
        return;
      }
      try {
        const auto id = submit(payload);
        res.status = 201;
        res.set_content(json{{"session", id}}.dump(), "application/json");
      } catch (const Error& e) {
        send_error(res, 400, e.what());
      }
    });

    svr.Post(R"(/v1/queries/([^/]+)/stop)", [this, send_error](const httplib::Request& req, httplib::Response& res) {
      const auto st = stop(req.matches[1]);
      if (!st) {
        send_error(res, 404, "unknown session");
        return;
      }
      res.set_content(json{{"state", to_string(*st)}}.dump(), "application/json");
    });

    svr.Get(R"(/v1/queries/([^/]+)/events)", [this, send_error](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      if (!has_session(id)) {
        send_error(res, 404, "unknown session");
        return;
      }
      std::size_t from = 0;
      if (req.has_param("from")) {
        try {
          from = std::stoul(req.get_param_value("from"));
        } catch (const std::exception&) {
          send_error(res, 400, "bad 'from' parameter");
          return;
        }
      }
      res.set_header("Cache-Control", "no-cache");
      auto cursor = std::make_shared<std::size_t>(from);
      res.set_chunked_content_provider("text/event-stream", [this, id, cursor](std::size_t, httplib::DataSink& sink) {
        const auto batch = wait_events(id, *cursor);
        for (const auto& e : batch.events) {
          const std::string line = "data: " + e.dump() + "\n\n";
          if (!sink.write(line.data(), line.size())) { return false; }
          ++*cursor;
        }
        if (batch.done && batch.events.empty()) {
          sink.done();
        } else if (batch.events.empty() && !sink.is_writable()) {
          return false;
        }
        return true;
      });
    });

    if (config_.console_dir) {
      if (!svr.set_mount_point("/", config_.console_dir->string())) {
        throw IoError("console directory not found: " + config_.console_dir->string());
      }
    }
  }

  int QueryService::start(const std::string& host, int port) {
    install_routes();
    const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (bound < 0) { throw IoError("cannot bind " + host + ":" + std::to_string(port)); }
    server_thread_ = std::jthread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return bound;
  }

  void QueryService::listen(const std::string& host, int port) {
    install_routes();
    if (!server_->bind_to_port(host, port)) { throw IoError("cannot bind " + host + ":" + std::to_string(port)); }
    server_->listen_after_bind();
  }

  void QueryService::shutdown() {
    if (server_) { server_->stop(); }
    if (server_thread_.joinable()) { server_thread_.join(); }
  }

} // namespace pros
