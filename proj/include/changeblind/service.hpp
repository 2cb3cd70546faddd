#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "changeblind/dataset.hpp"
#include "changeblind/record_store.hpp"
#include "changeblind/sequence.hpp"

namespace changeblind::service {

inline constexpr int kDisplayMs = 800;
inline constexpr int kBlankMs = 80;
/// Client-measured times may exceed the server's elapsed time by this much.
inline constexpr double kTimeToleranceS = 0.5;
inline constexpr const char* kRecordStoreEnv = "CB_RECORD_STORE";

struct ServiceOptions {
  std::uint64_t seed = 1;
  std::filesystem::path record_store;  // empty: <root>/<manifest.records>
  std::function<double()> clock;       // seconds; empty: steady clock
};

struct Response {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

/// HTTP-independent core of the experiment server.
///
///   POST /api/sessions                {"observer_id"}          -> 201 session
///   GET  /api/sessions/{id}                                    -> session state
///   GET  /api/sessions/{id}/next                               -> trial or done
///   POST /api/sessions/{id}/result    {"pair_id","time_s","click":{x,y}|null}
///   GET  /api/pairs/{id}/{original|changed|mask}.png
class ExperimentService {
 public:
  ExperimentService(data::BenchmarkDataset dataset, data::SequencePlan plan,
                    ServiceOptions options = {});
  ~ExperimentService();

  Response handle(std::string_view method, std::string_view path, const std::string& body);

  std::size_t slots_total() const { return plan_.sequences.size(); }
  std::size_t slots_assigned() const;
  const data::RecordStore& store() const { return *store_; }

 private:
  struct Session;

  Response create_session(const std::string& body);
  Response session_state(Session& s);
  Response next_trial(Session& s);
  Response post_result(Session& s, const std::string& body);
  Response pair_image(const std::string& pair_id, std::string_view which);
  std::shared_ptr<Session> find_session(const std::string& id);

  data::BenchmarkDataset dataset_;
  data::SequencePlan plan_;
  ServiceOptions options_;
  std::unique_ptr<data::RecordStore> store_;
  std::map<std::string, const features::ImagePair*> pairs_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::size_t next_slot_ = 0;
};

/// "host:port" -> (host, port).
std::pair<std::string, int> parse_bind(const std::string& bind);

/// HTTP front end routing every request to ExperimentService::handle.
class HttpFrontend {
 public:
  explicit HttpFrontend(ExperimentService& service);
  ~HttpFrontend();
  /// Binds; port 0 picks a free port. Returns the bound port. Throws IoError.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Binds and serves until the process is stopped.
void serve(ExperimentService& service, const std::string& host, int port);

}  // namespace changeblind::service
