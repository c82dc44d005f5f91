#include <catch_amalgamated.hpp>

#include <fstream>
#include <sstream>
#include <thread>

#include "motioncode/cli.hpp"
#include "motioncode/data.hpp"
#include "motioncode/http.hpp"
#include "motioncode/service.hpp"

using namespace motioncode;
namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

Manifest demo_manifest() {
  return Manifest::from_json(Json::parse(R"({"clips": [
    {"id": "c1", "uri": "clips/c1.mp4", "noun": "carrot", "verb": "chop"},
    {"id": "c2", "uri": "clips/c2.mp4", "noun": "water"},
    {"id": "c3", "uri": "clips/c3.mp4"}
  ]})"));
}

fs::path fresh_store(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("motioncode_test_service_" + name + ".jsonl");
  fs::remove(p);
  return p;
}

Json body_of(const HttpResponse& r) { return Json::parse(r.body); }

const std::map<std::string, std::string> kNoQuery;

}  // namespace

TEST_CASE("manifest parsing") {
  const auto m = demo_manifest();
  CHECK(m.clips().size() == 3);
  REQUIRE(m.find("c2"));
  CHECK(m.find("c2")->noun == "water");
  CHECK(!m.find("c2")->verb);
  CHECK(!m.find("zz"));
  CHECK_THROWS_AS(Manifest::from_json(Json::parse(R"({"clips": [{"id": "a"}, {"id": "a"}]})")), Error);
  CHECK_THROWS_AS(Manifest::from_json(Json::parse(R"({"items": []})")), Error);
}

TEST_CASE("read-only endpoints") {
  AnnotationService svc(demo_manifest(), fresh_store("readonly"));
  const auto tax = svc.handle("GET", "/api/taxonomy", kNoQuery, "");
  CHECK(tax.status == 200);
  CHECK(body_of(tax) == taxonomy_tree());

  const auto man = body_of(svc.handle("GET", "/api/manifest", kNoQuery, ""));
  REQUIRE(man.at("clips").size() == 3);
  CHECK(man["clips"][0].at("annotated") == false);
  CHECK(!man["clips"][2].contains("noun"));

  const auto verbs = svc.handle("GET", "/api/verbs", {{"code", "111001001"}}, "");
  CHECK(verbs.status == 200);
  CHECK(body_of(verbs).at("code") == "111-0-01-00-1");
  CHECK(body_of(verbs).at("verbs") == Json(verbs_for_code(parse_code("111-0-01-00-1"))));

  const auto bad = svc.handle("GET", "/api/verbs", {{"code", "010-0-00-00-0"}}, "");
  CHECK(bad.status == 400);
  CHECK(body_of(bad).at("error") == "InvalidCode");
  CHECK(svc.handle("GET", "/api/verbs", kNoQuery, "").status == 400);

  CHECK(svc.handle("GET", "/api/nothing", kNoQuery, "").status == 404);
  CHECK(svc.handle("DELETE", "/api/annotations", kNoQuery, "").status == 404);
  CHECK(svc.handle("GET", "/api/annotations", {{"format", "csv"}}, "").status == 400);
}

TEST_CASE("posting annotations") {
  const auto store = fresh_store("post");
  AnnotationService svc(demo_manifest(), store);
  auto post = [&](const std::string& body, bool overwrite = false) {
    return svc.handle("POST", "/api/annotations", overwrite ? std::map<std::string, std::string>{{"overwrite", "true"}}
                                                            : kNoQuery,
                      body);
  };
  const auto created = post(R"({"clip_id": "c1", "code": "111-0-01-00-1", "annotator": "ann"})");
  CHECK(created.status == 201);
  CHECK(body_of(created).at("code") == "111-0-01-00-1");

  CHECK(post(R"({"clip_id": "c1", "code": "000-0-00-00-0"})").status == 409);
  CHECK(body_of(post(R"({"clip_id": "c1", "code": "000-0-00-00-0"})")).at("error") == "DuplicateAnnotation");
  CHECK(post(R"({"clip_id": "c1", "code": "000-0-00-00-0"})", true).status == 201);
  CHECK(post(R"({"clip_id": "zz", "code": "000-0-00-00-0"})").status == 404);
  CHECK(post(R"({"clip_id": "c2", "code": "000-0-00-00-2"})").status == 400);
  CHECK(post(R"({"clip_id": "c2"})").status == 400);
  CHECK(post("not json").status == 400);
  CHECK(body_of(post("not json")).at("error") == "ParseError");
  CHECK(post(R"({"clip_id": "c3", "code": "100-1-11-01-0"})").status == 201);

  const auto man = body_of(svc.manifest());
  CHECK(man["clips"][0]["annotated"] == true);
  CHECK(man["clips"][1]["annotated"] == false);

  const auto exported = svc.handle("GET", "/api/annotations", {{"format", "jsonl"}}, "");
  CHECK(exported.status == 200);
  CHECK(exported.content_type == "application/x-ndjson");
  std::istringstream in(exported.body);
  const auto ds = read_dataset(in);
  REQUIRE(ds.size() == 2);
  CHECK(ds[0].id == "c1");
  CHECK(format_code(*ds[0].code) == "000-0-00-00-0");
  CHECK(ds[0].verb == "chop");
  CHECK(ds[1].id == "c3");

  // a fresh service replays the store with last-wins semantics
  AnnotationService again(demo_manifest(), store);
  CHECK(again.export_jsonl().body == exported.body);
  fs::remove(store);
}

TEST_CASE("store recovers from a torn final line") {
  const auto store = fresh_store("torn");
  {
    std::ofstream out(store, std::ios::binary);
    out << R"({"clip_id":"c1","code":"111-0-01-00-1","annotator":""})" << '\n' << R"({"clip_id":"c2","co)";
  }
  AnnotationStore s(store);
  CHECK(s.snapshot()->size() == 1);
  CHECK(s.submit({"c2", parse_code("000-0-00-00-0"), ""}, false) == SubmitResult::Created);
  AnnotationStore replay(store);
  CHECK(replay.snapshot()->size() == 2);

  {
    std::ofstream out(store, std::ios::binary);
    out << "garbage\n" << R"({"clip_id":"c1","code":"111-0-01-00-1"})" << '\n';
  }
  try {
    AnnotationStore broken(store);
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ParseError);
    CHECK(e.line() == 1u);
  }
  fs::remove(store);
}

TEST_CASE("concurrent submissions are all recorded") {
  const auto store = fresh_store("concurrent");
  std::vector<Clip> clips;
  for (int i = 0; i < 40; ++i) clips.push_back({"k" + std::to_string(i), "", std::nullopt, std::nullopt});
  AnnotationService svc(Manifest(clips), store);
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      for (int i = t; i < 40; i += 4) {
        const Json body{{"clip_id", "k" + std::to_string(i)}, {"code", "000-0-00-00-0"}};
        (void)svc.post_annotation(body.dump(), false);
      }
    });
  }
  for (auto& th : threads) th.join();
  CHECK(svc.store().snapshot()->size() == 40);
  CHECK(AnnotationStore(store).snapshot()->size() == 40);
  fs::remove(store);
}

TEST_CASE("http round trip") {
  const auto store = fresh_store("http");
  AnnotationService svc(demo_manifest(), store);
  httplib::Server server;
  bind_routes(server, svc);
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  const auto tax = client.Get("/api/taxonomy");
  REQUIRE(tax);
  CHECK(tax->status == 200);
  CHECK(Json::parse(tax->body).contains("question"));

  const auto verbs = client.Get("/api/verbs?code=111-0-01-00-1");
  REQUIRE(verbs);
  CHECK(Json::parse(verbs->body).at("code") == "111-0-01-00-1");

  const auto posted =
      client.Post("/api/annotations", R"({"clip_id": "c2", "code": "100-1-11-01-0"})", "application/json");
  REQUIRE(posted);
  CHECK(posted->status == 201);
  const auto dup = client.Post("/api/annotations", R"({"clip_id": "c2", "code": "100-1-11-01-0"})", "application/json");
  REQUIRE(dup);
  CHECK(dup->status == 409);

  const auto exported = client.Get("/api/annotations?format=jsonl");
  REQUIRE(exported);
  CHECK(exported->get_header_value("Content-Type") == "application/x-ndjson");
  CHECK(Json::parse(exported->body).at("id") == "c2");

  server.stop();
  worker.join();
  fs::remove(store);
}

TEST_CASE("scripted wizard records a code that exports") {
  const auto dir = fs::temp_directory_path() / "motioncode_test_service_wizard";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream(dir / "manifest.json") << R"({"clips": [{"id": "c1", "uri": "c1.mp4", "noun": "carrot", "verb": "chop"}]})";
  std::istringstream in("2\n2\n2\n1\n2\n1\n2\n");
  std::ostringstream out, err;
  const int code = cli::run({"annotate", "--interactive", "--manifest", (dir / "manifest.json").string(), "--store",
                             (dir / "store.jsonl").string(), "--clip", "c1", "--annotator", "ann"},
                            out, err, in);
  INFO(err.str());
  REQUIRE(code == 0);
  CHECK(out.str().find("code: 111-0-01-00-1") != std::string::npos);
  CHECK(out.str().find("chop") != std::string::npos);

  AnnotationService svc(Manifest::load(dir / "manifest.json"), dir / "store.jsonl");
  const auto record = Json::parse(svc.export_jsonl().body);
  CHECK(record.at("code") == "111-0-01-00-1");
  CHECK(record.at("verb") == "chop");
  fs::remove_all(dir);
}
