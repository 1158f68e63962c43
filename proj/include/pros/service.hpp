#pragma once

#include "pros/policy.hpp"

#include "json.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace httplib {
  class Server;
}

namespace pros {

  enum class SessionState { running, stopped_by_user, stopped_by_policy, finished, failed };

  [[nodiscard]] std::string to_string(SessionState state);

  struct ServiceConfig {
    std::size_t k = 1;
    DistanceKind distance = DistanceKind::euclidean();
    StoppingPolicy policy;
    EstimatorMethod estimator = EstimatorMethod::kde2;
    double theta = 0.05;
    std::size_t workers = 2;
    /// Name a payload may use to reference the served dataset.
    std::string dataset_name = "default";
    std::optional<std::filesystem::path> console_dir;
  };

  /// Parsed POST /v1/queries body.
  struct QueryRequest {
    std::vector<double> values;
    std::optional<std::size_t> series_index;
    StoppingPolicy policy;
  };

  /// One streamed event; `terminal` marks the last one of a session.
  [[nodiscard]] nlohmann::json make_event_json(const GuaranteeBundle& bundle, const ServiceConfig& config,
                                               const ProgressiveEvent& event, double witness_distance,
                                               std::optional<std::size_t> tau_hat,
                                               std::span<const std::int32_t> bsf_labels, SessionState state,
                                               bool terminal);

  class QueryService {
  public:
    QueryService(std::shared_ptr<const IndexTree> tree, std::shared_ptr<const GuaranteeBundle> bundle,
                 ServiceConfig config);
    ~QueryService();
    QueryService(const QueryService&) = delete;
    QueryService& operator=(const QueryService&) = delete;

    /// Throws InvalidArgument (or ModelMismatch) for payloads the service cannot run.
    [[nodiscard]] QueryRequest parse_request(const nlohmann::json& payload) const;
    [[nodiscard]] std::string submit(const nlohmann::json& payload);
    /// nullopt for an unknown session.
    [[nodiscard]] std::optional<SessionState> stop(const std::string& session);
    [[nodiscard]] std::optional<SessionState> state(const std::string& session) const;
    [[nodiscard]] bool has_session(const std::string& session) const;

    /// Blocks until events beyond `from` exist or the session is terminal. Returns the new
    /// events and whether the last event has been delivered.
    struct Batch {
      std::vector<nlohmann::json> events;
      bool done = false;
    };
    [[nodiscard]] Batch wait_events(const std::string& session, std::size_t from,
                                    std::chrono::milliseconds timeout = std::chrono::milliseconds(1000)) const;

    /// Binds and serves on a background thread; returns the bound port (0 picks a free one).
    int start(const std::string& host, int port);
    /// Serves on the calling thread until shutdown().
    void listen(const std::string& host, int port);
    void shutdown();

  private:
    struct Session {
      std::string id;
      QueryRequest request;
      std::atomic<bool> stop_flag{false};
      mutable std::mutex mutex;
      mutable std::condition_variable changed;
      SessionState state = SessionState::running;
      std::vector<nlohmann::json> events;
      bool done = false;

      void append(nlohmann::json event, std::optional<SessionState> next = std::nullopt);
    };

    void run_session(Session& session);
    void worker_loop();
    void install_routes();
    [[nodiscard]] std::shared_ptr<Session> find(const std::string& id) const;

    std::shared_ptr<const IndexTree> tree_;
    std::shared_ptr<const GuaranteeBundle> bundle_;
    ServiceConfig config_;

    mutable std::mutex sessions_mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::size_t next_id_ = 1;

    std::mutex queue_mutex_;
    std::condition_variable queue_cv_;
    std::deque<std::shared_ptr<Session>> queue_;
    bool stopping_ = false;
    std::vector<std::jthread> workers_;

    std::unique_ptr<httplib::Server> server_;
    std::jthread server_thread_;
  };

} // namespace pros
