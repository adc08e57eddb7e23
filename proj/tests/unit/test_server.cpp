#include "fluidctl/io/frames.hpp"
#include "fluidctl/io/scene_io.hpp"
#include "fluidctl/server/edit_server.hpp"

#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cstring>
#include <filesystem>
#include <sstream>
#include <thread>

using namespace fluidctl;
using namespace fluidctl::server;
using namespace std::chrono_literals;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path fresh_workspace(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fluidctl_test_server_" + name);
  fs::remove_all(p);
  return p;
}

std::string data(const std::string& file) { return io::read_text(std::string(FLUIDCTL_TEST_DATA) + "/" + file); }

std::string job_with(const std::function<void(json&)>& edit) {
  json j = json::parse(data("small_job.json"));
  edit(j);
  return j.dump();
}

// Splits a concatenated frame payload into frames.
std::vector<io::Frame> split_frames(const std::vector<std::uint8_t>& bytes) {
  std::vector<io::Frame> out;
  std::size_t at = 0;
  while (at < bytes.size()) {
    REQUIRE(bytes.size() - at >= io::kFrameHeaderBytes);
    std::uint32_t dim = 0;
    std::uint64_t count = 0;
    std::memcpy(&dim, bytes.data() + at + 8, 4);
    std::memcpy(&count, bytes.data() + at + 16, 8);
    const std::size_t size = io::kFrameHeaderBytes + count * dim * 2 * 8;
    out.push_back(io::decode_frame(std::vector<std::uint8_t>(bytes.begin() + at, bytes.begin() + at + size)));
    at += size;
  }
  return out;
}

std::string ready_scene(EditServer& srv) {
  const std::string scene = srv.create_scene(data("small_scene.json"));
  const auto h = srv.run_baseline(scene);
  REQUIRE(srv.wait(h.id, 60s));
  REQUIRE(srv.job(h.id).state == JobState::done);
  return scene;
}

}  // namespace

TEST_CASE("scenes and baseline frames") {
  EditServer srv({fresh_workspace("frames"), 1});
  const std::string scene = ready_scene(srv);
  CHECK_THROWS_AS(srv.run_baseline(scene), Conflict);

  const auto frames = split_frames(srv.frames(scene, 0, 10, 1));
  REQUIRE(frames.size() == 10);
  const auto baseline = srv.workspace().baseline(scene);
  for (int k = 0; k < 10; ++k) {
    CHECK(frames[k].step == static_cast<std::uint64_t>(k));
    CHECK(frames[k].state.size() == 36);
    CHECK(frames[k].state == (*baseline)[k]);
  }
  const auto thin = split_frames(srv.frames(scene, 5, 6, 4));
  REQUIRE(thin.size() == 1);
  CHECK(thin[0].state.size() == 9);
  CHECK(thin[0].state.x[1] == (*baseline)[5].x[4]);

  CHECK_THROWS_AS(srv.frames(scene, 5, 100, 1), ValidationError);
  CHECK_THROWS_AS(srv.frames(scene, 0, 1, 0), ValidationError);
  CHECK_THROWS_AS(srv.frames("s999999", 0, 1, 1), NotFound);
  CHECK_THROWS_AS(srv.create_scene("{}"), ValidationError);
}

TEST_CASE("edit jobs") {
  EditServer srv({fresh_workspace("edits"), 1});
  const std::string scene = ready_scene(srv);

  SUBCASE("keyframe outside the simulated range") {
    const auto text = job_with([](json& j) { j["edit"]["targets"][0]["frame"] = 100; });
    try {
      srv.submit_edit(scene, text);
      FAIL("accepted a keyframe past the simulation");
    } catch (const ValidationError& e) {
      REQUIRE(!e.issues().empty());
      CHECK(e.issues()[0].find("edit.targets[0].frame") != std::string::npos);
    }
  }

  SUBCASE("unknown ids") {
    CHECK_THROWS_AS(srv.job("j424242"), NotFound);
    CHECK_THROWS_AS(srv.submit_edit("s424242", data("small_job.json")), NotFound);
    CHECK_THROWS_AS(srv.solution("j424242"), NotFound);
  }

  SUBCASE("one optimization per scene") {
    const auto slow = job_with([](json& j) { j["optimize"]["max_lbfgs_iters"] = 300; });
    const auto first = srv.submit_edit(scene, slow);
    CHECK_THROWS_AS(srv.submit_edit(scene, data("small_job.json")), Conflict);
    CHECK_THROWS_AS(srv.solution(first.id), Conflict);
    srv.cancel(first.id);
    REQUIRE(srv.wait(first.id, 60s));
    CHECK(srv.job(first.id).state == JobState::failed);
    const auto second = srv.submit_edit(scene, data("small_job.json"));
    CHECK(srv.wait(second.id, 60s));
  }

  SUBCASE("progress, solution and resim") {
    const auto h = srv.submit_edit(scene, data("small_job.json"));
    CHECK(h.kind == JobKind::optimize);
    REQUIRE(srv.wait(h.id, 120s));
    const auto done = srv.job(h.id);
    REQUIRE(done.state == JobState::done);
    CHECK(done.fraction == 1.0);

    const auto events = srv.events(h.id);
    REQUIRE(events.size() >= 2);
    for (std::size_t i = 1; i < events.size(); ++i) {
      CHECK(events[i].iteration > events[i - 1].iteration);
      CHECK(events[i].terms.total() <= events[i - 1].terms.total());
    }
    CHECK(events.back().terms.editing < events.front().terms.editing);
    CHECK(srv.events(h.id, events[0].iteration).size() == events.size() - 1);

    const auto sol = io::parse_solution(srv.solution(h.id));
    CHECK(sol.window.t_start == 20);
    CHECK(sol.window.t_end == 30);
    CHECK(sol.field.matches(sol.window));

    const auto r = srv.submit_resim(scene, {h.id});
    REQUIRE(srv.wait(r.id, 60s));
    REQUIRE(srv.job(r.id).state == JobState::done);
    const auto frames = split_frames(srv.frames(r.id, 0, -1, 1));
    const auto baseline = srv.workspace().baseline(scene);
    CHECK(frames.size() == baseline->size());
    CHECK(frames[20].state == (*baseline)[20]);
    CHECK(!(frames[30].state == (*baseline)[30]));

    CHECK_THROWS_AS(srv.submit_resim(scene, {r.id}), ValidationError);
    CHECK_THROWS_AS(srv.submit_resim(scene, {h.id, h.id}), ValidationError);
  }
}

TEST_CASE("restart recovers the workspace") {
  const fs::path ws = fresh_workspace("restart");
  std::string scene, job;
  std::string solution;
  {
    EditServer srv({ws, 1});
    scene = ready_scene(srv);
    job = srv.submit_edit(scene, data("small_job.json")).id;
    REQUIRE(srv.wait(job, 120s));
    solution = srv.solution(job);
  }
  EditServer again({ws, 1});
  CHECK(again.workspace().has_scene(scene));
  CHECK(again.workspace().has_baseline(scene));
  CHECK(again.job(job).state == JobState::done);
  CHECK(again.solution(job) == solution);
  CHECK(!again.events(job).empty());
  CHECK(split_frames(again.frames(scene, 0, 3, 1)).size() == 3);
  const std::string next = again.create_scene(data("small_scene.json"));
  CHECK(next != scene);
}

TEST_CASE("http interface") {
  EditServer srv({fresh_workspace("http"), 1});
  const int port = srv.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  std::thread serving([&] { srv.listen(); });

  httplib::Client cli("127.0.0.1", port);
  cli.set_read_timeout(120, 0);

  auto created = cli.Post("/scenes", data("small_scene.json"), "application/json");
  REQUIRE(created);
  CHECK(created->status == 201);
  const std::string scene = json::parse(created->body)["id"];

  auto base = cli.Post("/scenes/" + scene + "/baseline", "", "application/json");
  REQUIRE(base);
  CHECK(base->status == 202);
  const std::string base_job = json::parse(base->body)["id"];
  REQUIRE(srv.wait(base_job, 60s));

  auto frames = cli.Get("/scenes/" + scene + "/frames?begin=0&end=10");
  REQUIRE(frames);
  CHECK(frames->status == 200);
  const auto parsed = split_frames(std::vector<std::uint8_t>(frames->body.begin(), frames->body.end()));
  CHECK(parsed.size() == 10);

  CHECK(cli.Get("/jobs/nope")->status == 404);
  CHECK(cli.Get("/scenes/s000099")->status == 404);
  CHECK(cli.Get("/scenes/" + scene + "/frames?begin=x")->status == 422);

  auto bad = cli.Post("/scenes/" + scene + "/edits",
                      job_with([](json& j) { j["edit"]["targets"][0]["frame"] = 100; }), "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 422);
  CHECK(json::parse(bad->body)["issues"][0].get<std::string>().find("edit.targets[0].frame") != std::string::npos);

  auto edit = cli.Post("/scenes/" + scene + "/edits", data("small_job.json"), "application/json");
  REQUIRE(edit);
  CHECK(edit->status == 202);
  const std::string job = json::parse(edit->body)["id"];
  CHECK(cli.Post("/scenes/" + scene + "/edits", data("small_job.json"), "application/json")->status == 409);

  // Follow the stream to the end.
  std::string streamed;
  auto follow = cli.Get("/jobs/" + job + "/events?follow=1", [&](const char* d, std::size_t n) {
    streamed.append(d, n);
    return true;
  });
  REQUIRE(follow);
  std::istringstream lines(streamed);
  std::string line;
  std::vector<json> events;
  while (std::getline(lines, line)) events.push_back(json::parse(line));
  REQUIRE(events.size() >= 2);
  CHECK(events.back()["state"] == "done");
  for (std::size_t i = 1; i + 1 < events.size(); ++i) {
    CHECK(events[i]["iteration"].get<int>() > events[i - 1]["iteration"].get<int>());
    CHECK(events[i]["total"].get<double>() <= events[i - 1]["total"].get<double>());
  }

  auto sol = cli.Get("/jobs/" + job + "/solution");
  REQUIRE(sol);
  CHECK(sol->status == 200);
  CHECK(json::parse(sol->body).contains("forces"));

  CHECK(cli.Post("/scenes/" + scene + "/resim", R"({"solutions": ["j000999"]})", "application/json")->status == 422);
  CHECK(cli.Post("/scenes/" + scene + "/resim", R"({"solutionz": []})", "application/json")->status == 422);
  auto resim = cli.Post("/scenes/" + scene + "/resim", json{{"solutions", {job}}}.dump(), "application/json");
  REQUIRE(resim);
  CHECK(resim->status == 202);

  auto listed = cli.Get("/jobs");
  REQUIRE(listed);
  CHECK(json::parse(listed->body)["jobs"].size() == 3);

  srv.stop();
  serving.join();
}
