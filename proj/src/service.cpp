#include "changeblind/service.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include "changeblind/error.hpp"
#include "changeblind/png_io.hpp"
#include "changeblind/rng.hpp"
#include "httplib.h"
#include "json.hpp"

namespace changeblind::service {

using nlohmann::ordered_json;

struct ExperimentService::Session {
  std::mutex mutex;
  std::string id;
  std::string observer_id;
  std::size_t slot = 0;
  std::size_t cursor = 0;
  double started_at = 0.0;
  struct Trial {
    std::size_t index = 0;  // 1-based
    std::string pair_id;
    std::string first_image;
    double served_at = 0.0;
  };
  std::optional<Trial> pending;
};

namespace {

Response json_response(int status, const ordered_json& j) { return {status, j.dump(), "application/json"}; }

Response error(int status, const std::string& message) {
  return json_response(status, ordered_json{{"error", message}});
}

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> parts;
  std::size_t i = 0;
  while (i < path.size()) {
    while (i < path.size() && path[i] == '/') ++i;
    const std::size_t j = path.find('/', i);
    const std::size_t end = j == std::string_view::npos ? path.size() : j;
    if (end > i) parts.emplace_back(path.substr(i, end - i));
    i = end;
  }
  return parts;
}

std::string image_url(const std::string& pair_id, const char* which) {
  return "/api/pairs/" + pair_id + "/" + which + ".png";
}

}  // namespace

ExperimentService::ExperimentService(data::BenchmarkDataset dataset, data::SequencePlan plan,
                                     ServiceOptions options)
    : dataset_(std::move(dataset)), plan_(std::move(plan)), options_(std::move(options)) {
  if (!options_.clock) {
    options_.clock = [] {
      return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
          .count();
    };
  }
  for (const auto& p : dataset_.pairs) pairs_[p.pair_id] = &p;
  for (const auto& seq : plan_.sequences) {
    for (const auto& id : seq) {
      if (!pairs_.contains(id)) throw ValidationError("plan uses pair " + id + " which is not loaded");
    }
  }
  data::RecordStore::Options so;
  so.known_pairs.emplace();
  for (const auto& p : dataset_.manifest.pairs) so.known_pairs->insert(p.id);
  so.known_observers.emplace();
  for (const auto& o : dataset_.manifest.observers) so.known_observers->insert(o.id);
  std::filesystem::path path = options_.record_store;
  if (path.empty()) path = dataset_.root / dataset_.manifest.records;
  store_ = std::make_unique<data::RecordStore>(path, std::move(so));
}

ExperimentService::~ExperimentService() = default;

std::size_t ExperimentService::slots_assigned() const {
  std::lock_guard lock(mutex_);
  return next_slot_;
}

std::shared_ptr<ExperimentService::Session> ExperimentService::find_session(const std::string& id) {
  std::lock_guard lock(mutex_);
  const auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

Response ExperimentService::handle(std::string_view method, std::string_view path,
                                   const std::string& body) {
  try {
    const auto parts = split_path(path);
    if (parts.size() < 2 || parts[0] != "api") return error(404, "not found");
    if (parts[1] == "health" && parts.size() == 2 && method == "GET") {
      return json_response(200, {{"ok", true}});
    }
    if (parts[1] == "sessions") {
      if (parts.size() == 2) {
        if (method != "POST") return error(405, "method not allowed");
        return create_session(body);
      }
      const auto session = find_session(parts[2]);
      if (!session) return error(404, "unknown session " + parts[2]);
      std::lock_guard lock(session->mutex);
      if (parts.size() == 3 && method == "GET") return session_state(*session);
      if (parts.size() == 4 && parts[3] == "next" && method == "GET") return next_trial(*session);
      if (parts.size() == 4 && parts[3] == "result" && method == "POST") {
        return post_result(*session, body);
      }
      return error(404, "not found");
    }
    if (parts[1] == "pairs" && parts.size() == 4 && method == "GET") {
      return pair_image(parts[2], parts[3]);
    }
    return error(404, "not found");
  } catch (const ConflictError& e) {
    return error(409, e.what());
  } catch (const Error& e) {
    return error(400, e.what());
  } catch (const std::exception& e) {
    return error(500, e.what());
  }
}

Response ExperimentService::create_session(const std::string& body) {
  const auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("observer_id") ||
      !j["observer_id"].is_string()) {
    return error(400, "body must be {\"observer_id\": string}");
  }
  const std::string observer = j["observer_id"].get<std::string>();
  bool known = false;
  for (const auto& o : dataset_.manifest.observers) known = known || o.id == observer;
  if (!known) return error(400, "unknown observer id " + observer);

  auto s = std::make_shared<Session>();
  {
    std::lock_guard lock(mutex_);
    if (next_slot_ >= plan_.sequences.size()) return error(409, "all plan slots are assigned");
    s->slot = next_slot_++;
    char buf[24];
    std::snprintf(buf, sizeof buf, "s%016llx",
                  static_cast<unsigned long long>(derive_seed(options_.seed, {5, s->slot})));
    s->id = buf;
    s->observer_id = observer;
    s->started_at = options_.clock();
    sessions_[s->id] = s;
  }
  std::lock_guard lock(s->mutex);
  Response r = session_state(*s);
  r.status = 201;
  return r;
}

Response ExperimentService::session_state(Session& s) {
  const std::size_t length = plan_.sequences[s.slot].size();
  return json_response(200, {{"session_id", s.id},
                             {"observer_id", s.observer_id},
                             {"slot", s.slot},
                             {"length", length},
                             {"cursor", s.cursor},
                             {"break_every", plan_.break_every},
                             {"done", s.cursor >= length}});
}

Response ExperimentService::next_trial(Session& s) {
  const auto& seq = plan_.sequences[s.slot];
  if (s.cursor >= seq.size()) {
    return json_response(200, {{"done", true}, {"session_id", s.id}, {"completed", seq.size()}});
  }
  if (!s.pending) {
    Rng rng(derive_seed(options_.seed, {6, s.slot, s.cursor}));
    s.pending = Session::Trial{s.cursor + 1, seq[s.cursor],
                               uniform_index(rng, 2) == 0 ? "original" : "changed",
                               options_.clock()};
  }
  const auto& t = *s.pending;
  const auto* pair = pairs_.at(t.pair_id);
  ordered_json trial;
  trial["sequence_index"] = t.index;
  trial["pair_id"] = t.pair_id;
  trial["first_image"] = t.first_image;
  trial["display_ms"] = kDisplayMs;
  trial["blank_ms"] = kBlankMs;
  trial["timeout_s"] = stats::kTimeoutSeconds;
  trial["width"] = pair->original.width();
  trial["height"] = pair->original.height();
  trial["break_after"] = plan_.break_every > 0 && t.index % plan_.break_every == 0;
  trial["images"] = {{"original", image_url(t.pair_id, "original")},
                     {"changed", image_url(t.pair_id, "changed")}};
  return json_response(200, {{"done", false}, {"session_id", s.id}, {"trial", std::move(trial)}});
}

Response ExperimentService::post_result(Session& s, const std::string& body) {
  if (!s.pending) return error(409, "no trial is pending; fetch /next first");
  const Session::Trial& t = *s.pending;
  const auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return error(400, "body must be a JSON object");
  if (!j.contains("pair_id") || !j["pair_id"].is_string() || j["pair_id"] != t.pair_id) {
    return error(400, "pair_id does not match the pending trial " + t.pair_id);
  }
  if (!j.contains("time_s") || !j["time_s"].is_number()) return error(400, "time_s must be a number");
  const double time_s = j["time_s"].get<double>();
  if (!std::isfinite(time_s) || time_s <= 0.0 || time_s > stats::kTimeoutSeconds) {
    return error(400, "time_s must lie in (0, 60]");
  }
  std::optional<stats::Click> click;
  if (j.contains("click") && !j["click"].is_null()) {
    const auto& c = j["click"];
    if (!c.is_object() || !c.contains("x") || !c.contains("y") || !c["x"].is_number_integer() ||
        !c["y"].is_number_integer()) {
      return error(400, "click must be {\"x\": int, \"y\": int} or null");
    }
    click = stats::Click{c["x"].get<int>(), c["y"].get<int>()};
  }
  const auto* pair = pairs_.at(t.pair_id);
  if (click && (click->x < 0 || click->y < 0 ||
                static_cast<std::size_t>(click->x) >= pair->original.width() ||
                static_cast<std::size_t>(click->y) >= pair->original.height())) {
    return error(400, "click lies outside the image");
  }
  const double elapsed = options_.clock() - t.served_at;
  if (time_s > elapsed + kTimeToleranceS) {
    return error(400, "reported time exceeds the server-side elapsed time");
  }

  stats::DetectionRecord rec;
  rec.observer_id = s.observer_id;
  rec.pair_id = t.pair_id;
  rec.sequence_index = static_cast<int>(t.index);
  rec.outcome = stats::classify_click(pair->mask, click);
  rec.time_s = time_s;
  rec.click = click;
  try {
    store_->append(rec, pair->original.width(), pair->original.height());
  } catch (const ConflictError& e) {
    // Already recorded: the trial is complete either way.
    ++s.cursor;
    s.pending.reset();
    return error(409, e.what());
  }
  ++s.cursor;
  s.pending.reset();
  return json_response(200, {{"outcome", to_string(rec.outcome)},
                             {"pair_id", rec.pair_id},
                             {"sequence_index", rec.sequence_index},
                             {"time_s", rec.time_s},
                             {"server_elapsed_s", elapsed},
                             {"mask", image_url(rec.pair_id, "mask")}});
}

Response ExperimentService::pair_image(const std::string& pair_id, std::string_view which) {
  const auto it = pairs_.find(pair_id);
  if (it == pairs_.end()) return error(404, "unknown pair " + pair_id);
  const features::ImagePair& p = *it->second;
  std::vector<std::uint8_t> png;
  if (which == "original.png") {
    png = encode_png(p.original);
  } else if (which == "changed.png") {
    png = encode_png(p.changed);
  } else if (which == "mask.png") {
    png = encode_png_gray(p.mask.width(), p.mask.height(), p.mask.bitmap());
  } else {
    return error(404, "not found");
  }
  return {200, std::string(png.begin(), png.end()), "image/png"};
}

std::pair<std::string, int> parse_bind(const std::string& bind) {
  const auto colon = bind.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == bind.size()) {
    throw ValidationError("bind address must look like host:port");
  }
  int port = 0;
  try {
    std::size_t used = 0;
    port = std::stoi(bind.substr(colon + 1), &used);
    if (used != bind.size() - colon - 1) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw ValidationError("invalid port in bind address " + bind);
  }
  if (port < 0 || port > 65535) throw ValidationError("port out of range in " + bind);
  return {bind.substr(0, colon), port};
}

struct HttpFrontend::Impl {
  httplib::Server server;
};

HttpFrontend::HttpFrontend(ExperimentService& service) : impl_(std::make_unique<Impl>()) {
  auto route = [&service](const httplib::Request& req, httplib::Response& res) {
    const Response r = service.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  impl_->server.Get(".*", route);
  impl_->server.Post(".*", route);
}

HttpFrontend::~HttpFrontend() { stop(); }

int HttpFrontend::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host)
                              : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void HttpFrontend::run() { impl_->server.listen_after_bind(); }

void HttpFrontend::stop() {
  if (impl_) impl_->server.stop();
}

void serve(ExperimentService& service, const std::string& host, int port) {
  HttpFrontend http(service);
  http.bind(host, port);
  http.run();
}

}  // namespace changeblind::service
