#include <doctest.h>

#include <chrono>
#include <thread>

#include "fixtures.hpp"
#include "quadforge/msh_io.hpp"
#include "quadforge/service.hpp"

using namespace quadforge;
using nlohmann::json;

namespace {

// Service on an ephemeral loopback port for the lifetime of the fixture.
struct Harness {
    Service service;
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::unique_ptr<httplib::Client> client;

    Harness() {
        service.install(server);
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
        client = std::make_unique<httplib::Client>("127.0.0.1", port);
        client->set_read_timeout(120, 0);
    }
    ~Harness() {
        service.wait_idle();
        server.stop();
        thread.join();
    }

    httplib::Result post(const std::string& path, const json& body = json::object()) {
        return client->Post(path, body.dump(), "application/json");
    }
    httplib::Result patch(const std::string& path, const json& body) {
        return client->Patch(path, body.dump(), "application/json");
    }
    httplib::Result get(const std::string& path) { return client->Get(path); }

    std::string create(const TriMesh& m, json extra = json::object()) {
        extra["mesh"] = format_msh(msh_from_mesh(m));
        auto r = post("/projects", extra);
        REQUIRE(r);
        REQUIRE(r->status == 201);
        return json::parse(r->body)["id"];
    }
    int run(const std::string& id, int stage, bool wait = true) {
        auto r = post("/projects/" + id + "/stages/" + std::to_string(stage) + "/run" + (wait ? "?wait=1" : ""));
        REQUIRE(r);
        return r->status;
    }
};

json body_of(const httplib::Result& r) {
    return json::parse(r->body);
}

}  // namespace

TEST_CASE("create project reports the mesh and rejects bad bodies") {
    Harness h;
    const TriMesh m = make_annulus(48, 6);
    auto r = h.post("/projects", {{"mesh", format_msh(msh_from_mesh(m))}});
    REQUIRE(r);
    CHECK(r->status == 201);
    const auto b = body_of(r);
    CHECK(b["id"] == "p1");
    CHECK(b["vertices"] == m.num_vertices());
    CHECK(b["triangles"] == m.num_triangles());
    CHECK(b["euler_characteristic"] == 0);

    auto bad = h.client->Post("/projects", "{not json", "application/json");
    CHECK(bad->status == 400);
    CHECK(body_of(bad)["error"].get<std::string>().find("malformed") != std::string::npos);
    CHECK(h.post("/projects", {{"msh", "x"}})->status == 400);
    CHECK(h.post("/projects", {{"mesh", "$MeshFormat\n"}})->status == 400);
    CHECK(h.post("/projects", {{"mesh", format_msh(msh_from_mesh(m))}, {"extra", 1}})->status == 400);
    CHECK(h.post("/projects", {{"mesh", format_msh(msh_from_mesh(m))}, {"config", {{"target_size", -1}}}})->status ==
          400);
    CHECK(h.get("/projects/p9/status")->status == 404);
    CHECK(h.post("/projects/p1/stages/5/run")->status == 404);
    CHECK(h.get("/projects/p1/artifacts/nothing")->status == 404);
}

TEST_CASE("stages in order produce the same bytes as the command line") {
    Harness h;
    const TriMesh m = make_square_minus_disk(24, 6);
    const auto id = h.create(m);
    CHECK(h.run(id, 3) == 409);
    CHECK(body_of(h.post("/projects/" + id + "/stages/3/run?wait=1"))["missing"] == 1);
    for (int s = 1; s <= 4; ++s) CHECK(h.run(id, s) == 200);

    const auto st = body_of(h.get("/projects/" + id + "/status"));
    CHECK(st["running"].is_null());
    for (const auto& rec : st["stages"]) CHECK(rec["status"] == "done");
    CHECK(st["artifacts"].size() == 9);

    Pipeline ref(m, PipelineConfig{});
    ref.run_all();
    auto q = h.get("/projects/" + id + "/artifacts/quality");
    REQUIRE(q->status == 200);
    CHECK(q->body == dump_artifact(ref.quality_json()));
    CHECK(q->get_header_value("ETag") == "\"" + st["artifacts"]["quality"].get<std::string>() + "\"");
    CHECK(h.get("/projects/" + id + "/artifacts/mesh")->body == ref.mesh_msh());
    CHECK(h.get("/projects/" + id + "/artifacts/layout")->body == dump_artifact(ref.layout_json()));
    auto svg = h.get("/projects/" + id + "/artifacts/svg/mesh");
    CHECK(svg->get_header_value("Content-Type") == "image/svg+xml");
    CHECK(svg->body.rfind("<svg", 0) == 0);

    // rerunning stage 3 drops stage 4 until it is recomputed
    CHECK(h.run(id, 3) == 200);
    auto stale = h.get("/projects/" + id + "/artifacts/mesh");
    CHECK(stale->status == 409);
    CHECK(body_of(stale)["error"] == "stale, recompute required");
    CHECK(h.run(id, 4) == 200);
    CHECK(h.get("/projects/" + id + "/artifacts/quality")->body == q->body);
}

TEST_CASE("pattern edits are validated and invalidate downstream artifacts") {
    Harness h;
    const TriMesh m = make_square(24);
    const auto id = h.create(m);
    for (int s = 1; s <= 4; ++s) REQUIRE(h.run(id, s) == 200);
    const auto before = h.get("/projects/" + id + "/artifacts/pattern")->body;

    const int centre = qtest::nearest_vertex(m, {0.5, 0.5});
    auto lone = h.patch("/projects/" + id + "/pattern", {{"edits", {{{"op", "add"}, {"vertex", centre}, {"valence", 5}}}}});
    CHECK(lone->status == 422);
    const auto lb = body_of(lone);
    CHECK(lb["deficit"] == "-1/4");
    CHECK(lb["balance"] == "3/4");
    CHECK(lb["expected"] == "1");
    // rejected edit leaves everything in place
    CHECK(h.get("/projects/" + id + "/artifacts/pattern")->body == before);
    CHECK(h.get("/projects/" + id + "/artifacts/mesh")->status == 200);

    const int a = qtest::nearest_vertex(m, {0.4, 0.5});
    const int b = qtest::nearest_vertex(m, {0.6, 0.5});
    auto pair = h.patch("/projects/" + id + "/pattern",
                        {{"edits",
                          {{{"op", "add"}, {"vertex", a}, {"valence", 3}}, {{"op", "add"}, {"vertex", b}, {"valence", 5}}}}});
    REQUIRE(pair->status == 200);
    const auto pb = body_of(pair);
    CHECK(pb["pattern"]["singularities"].size() == 2);
    CHECK(pb["invalidated"].size() == 7);  // field, layout, mesh, quality and three svgs
    auto stale = h.get("/projects/" + id + "/artifacts/layout");
    CHECK(stale->status == 409);
    CHECK(body_of(stale)["status"] == "stale");
    CHECK(body_of(stale)["error"] == "stale, recompute required");
    CHECK(h.get("/projects/" + id + "/artifacts/pattern")->body != before);

    const auto st = body_of(h.get("/projects/" + id + "/status"));
    CHECK(st["stages"][0]["status"] == "skipped");
    CHECK(st["stages"][1]["status"] == "pending");
    CHECK(st["edits"] == 2);
    for (int s = 2; s <= 4; ++s) CHECK(h.run(id, s) == 200);
    const auto q = body_of(h.get("/projects/" + id + "/artifacts/quality"));
    CHECK(q["irregular_vertices"] == 2);

    CHECK(h.patch("/projects/" + id + "/pattern", {{"edits", json::array()}, {"pattern", json::object()}})->status ==
          400);
    CHECK(h.client->Patch("/projects/" + id + "/pattern", "[", "application/json")->status == 400);
}

TEST_CASE("non-meshable pattern returns the tangency report") {
    Harness h;
    const TriMesh m = make_annulus(96, 12);
    const auto id = h.create(m, {{"pattern", to_json(qtest::annulus_pattern(m, 20.0))}});
    CHECK(h.run(id, 1) == 200);
    auto r = h.post("/projects/" + id + "/stages/2/run?wait=1");
    CHECK(r->status == 500);
    const auto b = body_of(r);
    CHECK(b["status"] == "failed");
    CHECK(b["error"]["non_meshable"] == true);
    CHECK(!b["error"]["detail"]["violations"].empty());
    CHECK(h.run(id, 3) == 409);
}

TEST_CASE("a second trigger while a stage runs is refused") {
    Harness h;
    // finest MBO schedule keeps stage 1 busy well past the next few requests
    const auto id = h.create(make_square_minus_disk(96, 24), {{"config", {{"mbo", {{"levels", 10}}}}}});
    CHECK(h.run(id, 1, false) == 202);
    auto again = h.post("/projects/" + id + "/stages/1/run");
    CHECK(again->status == 409);
    CHECK(body_of(again)["running"] == 1);
    CHECK(h.patch("/projects/" + id + "/pattern", {{"edits", json::array()}})->status == 409);
    CHECK(body_of(h.get("/projects/" + id + "/status"))["running"] == 1);
    h.service.wait_idle();
    const auto st = body_of(h.get("/projects/" + id + "/status"));
    CHECK(st["running"].is_null());
    CHECK(st["stages"][0]["status"] == "done");
    CHECK(h.get("/projects/" + id + "/artifacts/pattern")->status == 200);
}
