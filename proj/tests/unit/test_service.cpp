#include <gtest/gtest.h>

#include <thread>

#include "changeblind/png_io.hpp"
#include "changeblind/service.hpp"
#include "fixtures.hpp"
#include "httplib.h"
#include "json.hpp"

using namespace changeblind;
using namespace changeblind::service;
using nlohmann::json;

namespace {

struct Rig {
  std::filesystem::path root;
  std::filesystem::path store;
  double now = 100.0;
  std::unique_ptr<ExperimentService> svc;

  data::BenchmarkDataset ds;

  explicit Rig(std::vector<std::size_t> lengths, std::size_t pairs = 6) {
    root = fixture::synthetic_dir("svc", pairs, 3, 11);
    store = root / "session_records.jsonl";
    ds = data::load_dataset(root);
    std::vector<std::string> ids;
    for (const auto& p : ds.pairs) ids.push_back(p.pair_id);
    ServiceOptions o;
    o.seed = 9;
    o.record_store = store;
    o.clock = [this] { return now; };
    svc = std::make_unique<ExperimentService>(ds, data::generate_sequences(ids, lengths, 5), o);
  }

  json call(std::string_view method, const std::string& path, const std::string& body, int expect) {
    const Response r = svc->handle(method, path, body);
    EXPECT_EQ(r.status, expect) << method << " " << path << " -> " << r.body;
    return json::parse(r.body);
  }

  std::string start(const std::string& observer = "obs001") {
    return call("POST", "/api/sessions", json{{"observer_id", observer}}.dump(), 201)["session_id"];
  }

  const features::ImagePair& pair(const std::string& id) { return *ds.find_pair(id); }
};

json hit_click(const features::ImagePair& p) {
  const auto c = p.mask.coords()[p.mask.size() / 2];
  return {{"x", c.x}, {"y", c.y}};
}

json far_click(const features::ImagePair& p) {
  for (std::size_t y = 0; y < p.mask.height(); ++y) {
    for (std::size_t x = 0; x < p.mask.width(); ++x) {
      if (p.mask.chebyshev_distance(static_cast<long>(x), static_cast<long>(y)) > 45) {
        return {{"x", x}, {"y", y}};
      }
    }
  }
  ADD_FAILURE() << "no far pixel";
  return nullptr;
}

}  // namespace

TEST(Service, Health) {
  Rig rig({2});
  EXPECT_EQ(rig.call("GET", "/api/health", "", 200)["ok"], true);
  rig.call("GET", "/api/nothing", "", 404);
  rig.call("GET", "/other", "", 404);
}

TEST(Service, SessionRunsThroughItsSequence) {
  Rig rig({2});
  const std::string sid = rig.start();
  auto st = rig.call("GET", "/api/sessions/" + sid, "", 200);
  EXPECT_EQ(st["length"], 2);
  EXPECT_EQ(st["cursor"], 0);
  for (int i = 1; i <= 2; ++i) {
    const auto next = rig.call("GET", "/api/sessions/" + sid + "/next", "", 200);
    ASSERT_FALSE(next["done"]);
    const auto& t = next["trial"];
    EXPECT_EQ(t["sequence_index"], i);
    EXPECT_EQ(t["display_ms"], 800);
    EXPECT_EQ(t["blank_ms"], 80);
    EXPECT_EQ(t["timeout_s"], 60.0);
    EXPECT_TRUE(t["first_image"] == "original" || t["first_image"] == "changed");
    // fetching again returns the same pending trial
    EXPECT_EQ(rig.call("GET", "/api/sessions/" + sid + "/next", "", 200)["trial"], t);
    const std::string pid = t["pair_id"];
    rig.now += 3.0;
    const auto res = rig.call("POST", "/api/sessions/" + sid + "/result",
                              json{{"pair_id", pid}, {"time_s", 2.9}, {"click", hit_click(rig.pair(pid))}}.dump(),
                              200);
    EXPECT_EQ(res["outcome"], "hit");
    EXPECT_EQ(res["mask"], "/api/pairs/" + pid + "/mask.png");
  }
  const auto done = rig.call("GET", "/api/sessions/" + sid + "/next", "", 200);
  EXPECT_TRUE(done["done"]);
  EXPECT_EQ(done["completed"], 2);
  EXPECT_EQ(rig.svc->store().size(), 2u);
}

TEST(Service, ClickClassificationAndTimeout) {
  Rig rig({3});
  const std::string sid = rig.start();
  auto post = [&](const json& click, double t, int status) {
    const std::string pid = rig.call("GET", "/api/sessions/" + sid + "/next", "", 200)["trial"]["pair_id"];
    rig.now += t;
    json body{{"pair_id", pid}, {"time_s", t}, {"click", click}};
    if (click == "far") body["click"] = far_click(rig.pair(pid));
    return rig.call("POST", "/api/sessions/" + sid + "/result", body.dump(), status);
  };
  EXPECT_EQ(post("far", 4.0, 200)["outcome"], "false_positive");
  EXPECT_EQ(post(nullptr, 60.0, 200)["outcome"], "timeout");
  const auto recs = rig.svc->store().read_all();
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[1].outcome, stats::Outcome::timeout);
  EXPECT_EQ(recs[1].sequence_index, 2);
}

TEST(Service, RejectsImplausibleTimesAndBadInput) {
  Rig rig({2});
  const std::string sid = rig.start();
  const std::string base = "/api/sessions/" + sid;
  rig.call("POST", base + "/result", R"({"pair_id":"pair001","time_s":1})", 409);  // nothing pending
  const std::string pid = rig.call("GET", base + "/next", "", 200)["trial"]["pair_id"];
  rig.now += 2.0;
  const auto click = hit_click(rig.pair(pid));
  rig.call("POST", base + "/result", json{{"pair_id", pid}, {"time_s", 5.0}, {"click", click}}.dump(), 400);
  rig.call("POST", base + "/result", "not json", 400);
  rig.call("POST", base + "/result", json{{"pair_id", "other"}, {"time_s", 1.0}}.dump(), 400);
  rig.call("POST", base + "/result", json{{"pair_id", pid}, {"time_s", -1.0}}.dump(), 400);
  rig.call("POST", base + "/result", json{{"pair_id", pid}, {"time_s", 1.0}, {"click", {{"x", 9999}, {"y", 0}}}}.dump(), 400);
  rig.call("POST", base + "/result", json{{"pair_id", pid}, {"time_s", 1.0}, {"click", "here"}}.dump(), 400);
  EXPECT_EQ(rig.svc->store().size(), 0u);
  // within tolerance is fine
  rig.call("POST", base + "/result", json{{"pair_id", pid}, {"time_s", 2.4}, {"click", click}}.dump(), 200);
}

TEST(Service, SessionErrors) {
  Rig rig({1});
  rig.call("POST", "/api/sessions", "{}", 400);
  rig.call("POST", "/api/sessions", R"({"observer_id":"stranger"})", 400);
  rig.call("GET", "/api/sessions/nope", "", 404);
  rig.start();
  rig.call("POST", "/api/sessions", R"({"observer_id":"obs002"})", 409);  // plan exhausted
}

TEST(Service, DuplicateResultIsConflict) {
  Rig rig({1, 1}, 1);
  const std::string a = rig.start("obs001");
  const std::string b = rig.start("obs001");
  for (const auto& [sid, status] : {std::pair{a, 200}, std::pair{b, 409}}) {
    const std::string pid = rig.call("GET", "/api/sessions/" + sid + "/next", "", 200)["trial"]["pair_id"];
    rig.now += 1.0;
    rig.call("POST", "/api/sessions/" + sid + "/result",
             json{{"pair_id", pid}, {"time_s", 1.0}, {"click", hit_click(rig.pair(pid))}}.dump(), status);
  }
  EXPECT_TRUE(rig.call("GET", "/api/sessions/" + b + "/next", "", 200)["done"]);
  EXPECT_EQ(rig.svc->store().size(), 1u);
}

TEST(Service, SlotsAssignedExactlyOnceUnderConcurrency) {
  Rig rig(std::vector<std::size_t>(20, 2));
  std::vector<std::thread> threads;
  std::mutex m;
  std::set<std::size_t> slots;
  std::atomic<int> conflicts{0};
  for (int t = 0; t < 30; ++t) {
    threads.emplace_back([&] {
      const Response r = rig.svc->handle("POST", "/api/sessions", R"({"observer_id":"obs002"})");
      if (r.status == 409) {
        ++conflicts;
        return;
      }
      std::lock_guard lock(m);
      EXPECT_TRUE(slots.insert(json::parse(r.body)["slot"].get<std::size_t>()).second);
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(slots.size(), 20u);
  EXPECT_EQ(conflicts.load(), 10);
  EXPECT_EQ(rig.svc->slots_assigned(), 20u);
}

TEST(Service, ImagesArePng) {
  Rig rig({1});
  const Response r = rig.svc->handle("GET", "/api/pairs/pair001/original.png", "");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.content_type, "image/png");
  const auto img = decode_png(std::vector<std::uint8_t>(r.body.begin(), r.body.end()));
  EXPECT_EQ(img.width(), 128u);
  EXPECT_EQ(img.height(), 96u);
  const Response m = rig.svc->handle("GET", "/api/pairs/pair001/mask.png", "");
  ASSERT_EQ(m.status, 200);
  EXPECT_EQ(m.body.substr(1, 3), "PNG");
  EXPECT_EQ(rig.svc->handle("GET", "/api/pairs/pair001/other.png", "").status, 404);
  EXPECT_EQ(rig.svc->handle("GET", "/api/pairs/zzz/original.png", "").status, 404);
}

TEST(Service, SameSeedSameSessionIds) {
  Rig a({1, 1}), b({1, 1});
  EXPECT_EQ(a.start(), b.start());
}

TEST(Service, ParseBind) {
  EXPECT_EQ(parse_bind("127.0.0.1:8080"), (std::pair<std::string, int>{"127.0.0.1", 8080}));
  EXPECT_THROW(parse_bind("localhost"), ValidationError);
  EXPECT_THROW(parse_bind("h:70000"), ValidationError);
  EXPECT_THROW(parse_bind("h:12x"), ValidationError);
}

TEST(Service, OverRealHttp) {
  Rig rig({2});
  HttpFrontend http(*rig.svc);
  const int port = http.bind("127.0.0.1", 0);
  std::thread server([&] { http.run(); });
  httplib::Client cli("127.0.0.1", port);
  cli.set_connection_timeout(5);
  auto res = cli.Post("/api/sessions", R"({"observer_id":"obs003"})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 201);
  const std::string sid = json::parse(res->body)["session_id"];
  res = cli.Get("/api/sessions/" + sid + "/next");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  const std::string pid = json::parse(res->body)["trial"]["pair_id"];
  res = cli.Get("/api/pairs/" + pid + "/original.png");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->get_header_value("Content-Type"), "image/png");
  rig.now += 1.0;
  res = cli.Post("/api/sessions/" + sid + "/result",
                 json{{"pair_id", pid}, {"time_s", 1.0}, {"click", hit_click(rig.pair(pid))}}.dump(),
                 "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  http.stop();
  server.join();
}
