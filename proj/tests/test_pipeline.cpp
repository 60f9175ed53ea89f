#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "quadforge/error.hpp"
#include "quadforge/msh_io.hpp"
#include "quadforge/pipeline.hpp"

using namespace quadforge;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

PipelineConfig config_for(const fs::path& dir, const TriMesh& m, const std::string& name) {
    const auto mesh = dir / (name + ".msh");
    save_mesh(mesh.string(), m);
    PipelineConfig c;
    c.mesh = mesh.string();
    c.out = (dir / (name + "_out")).string();
    return c;
}

std::string write_pattern(const fs::path& dir, const SingularityPattern& p, const std::string& name) {
    const auto path = dir / (name + ".json");
    std::ofstream(path) << to_json(p).dump(2);
    return path.string();
}

const json& stage_of(const json& report, int s) {
    return report["stages"][s - 1];
}

}  // namespace

TEST_CASE("config: defaults round trip, unknown keys and bad values are rejected") {
    const PipelineConfig d;
    CHECK(to_json(config_from_json(to_json(d))) == to_json(d));
    const auto c = config_from_json(json::parse(R"({"target_size": 0.1, "mbo": {"levels": 7}, "smooth": "winslow"})"));
    CHECK(c.target_size == 0.1);
    CHECK(c.mbo_levels == 7);
    CHECK(c.smooth == "winslow");
    CHECK(c.spokes.rings == d.spokes.rings);
    for (const char* bad : {R"({"target": 0.1})", R"({"mbo": {"level": 5}})", R"({"trace": {"step": 0.4}})",
                            R"({"mbo": {"levels": 3}})", R"({"target_size": 0})", R"({"smooth": "laplace"})",
                            R"({"tol_tan_deg": -1})", R"({"target_size": "small"})", R"({"spokes": 3})"}) {
        CAPTURE(bad);
        CHECK_THROWS_AS(config_from_json(json::parse(bad)), Error);
    }
}

TEST_CASE("square with defaults: one patch, perfect grid, every check passes") {
    const auto dir = qtest::scratch_dir("pipe_square");
    auto cfg = config_for(dir, make_square(20), "square");
    cfg.svg = true;
    const auto r = run_pipeline(cfg);
    REQUIRE(r.exit_code == kExitOk);
    const auto& rep = r.report;
    for (int s = 1; s <= 4; ++s) CHECK(stage_of(rep, s)["status"] == "done");
    CHECK(stage_of(rep, 1)["checks"]["singularities"] == 0);
    CHECK(stage_of(rep, 2)["checks"]["meshable"] == true);
    CHECK(stage_of(rep, 2)["checks"]["redetect_matches"] == true);
    CHECK(stage_of(rep, 3)["checks"]["patches"] == 1);
    CHECK(stage_of(rep, 4)["checks"]["conforming"] == true);
    CHECK(stage_of(rep, 4)["checks"]["irregular_matches_pattern"] == true);
    CHECK(stage_of(rep, 1)["seconds"].get<double>() >= 0.0);
    CHECK(rep["config"] == to_json(cfg));
    for (const char* f : {"pattern.json", "field.msh", "layout.json", "mesh.msh", "quality.json", "report.json",
                          "pattern.svg", "field.svg", "layout.svg", "mesh.svg"})
        CHECK(fs::exists(fs::path(cfg.out) / f));
    const auto q = json::parse(qtest::slurp(fs::path(cfg.out) / "quality.json"));
    CHECK(q["eta_mean"].get<double>() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(q["elements"] == 400);
    // H and theta dumps read back as node and element data
    const auto field = read_msh((fs::path(cfg.out) / "field.msh").string());
    CHECK(field.nodes.size() == 441);
    const auto mesh = quads_from_msh(read_msh((fs::path(cfg.out) / "mesh.msh").string()));
    CHECK(mesh.quads.size() == 400);
}

TEST_CASE("user pattern skips the cross-field step") {
    const auto dir = qtest::scratch_dir("pipe_v8");
    const TriMesh m = make_square(24);
    auto cfg = config_for(dir, m, "square");
    cfg.pattern = write_pattern(dir, qtest::valence8_pattern(m), "valence8");
    const auto r = run_pipeline(cfg);
    REQUIRE(r.exit_code == kExitOk);
    CHECK(stage_of(r.report, 1)["status"] == "skipped");
    CHECK(stage_of(r.report, 1)["checks"]["source"] == "user");
    CHECK(stage_of(r.report, 3)["checks"]["patches"] == 8);
    const auto pattern = json::parse(qtest::slurp(fs::path(cfg.out) / "pattern.json"));
    CHECK(pattern == to_json(qtest::valence8_pattern(m)));
}

TEST_CASE("misplaced annulus pattern halts before the layout with a tangency report") {
    const auto dir = qtest::scratch_dir("pipe_annulus");
    const TriMesh m = make_annulus(96, 12);
    auto cfg = config_for(dir, m, "annulus");
    cfg.pattern = write_pattern(dir, qtest::annulus_pattern(m, 20.0), "bad");
    const auto r = run_pipeline(cfg);
    CHECK(r.exit_code == kExitNonMeshable);
    const auto& s2 = stage_of(r.report, 2);
    CHECK(s2["status"] == "failed");
    CHECK(s2["checks"]["meshable"] == false);
    const auto& v = s2["checks"]["detail"]["violations"];
    REQUIRE(!v.empty());
    for (const auto& x : v) {
        CHECK(x.contains("x"));
        CHECK(x["deviation_deg"].get<double>() > 2.0);
    }
    CHECK(stage_of(r.report, 3)["status"] == "pending");
    CHECK(!fs::exists(fs::path(cfg.out) / "layout.json"));
    CHECK(fs::exists(fs::path(cfg.out) / "report.json"));

    cfg.pattern = write_pattern(dir, qtest::annulus_pattern(m, 0.0), "good");
    cfg.out = (dir / "good_out").string();
    CHECK(run_pipeline(cfg).exit_code == kExitOk);
}

TEST_CASE("input and pattern errors map to exit codes") {
    const auto dir = qtest::scratch_dir("pipe_errors");
    const TriMesh m = make_square(12);
    auto cfg = config_for(dir, m, "square");
    auto missing = cfg;
    missing.mesh = (dir / "nope.msh").string();
    CHECK(run_pipeline(missing).exit_code == kExitInput);
    auto bad = cfg;
    bad.target_size = -1.0;
    CHECK(run_pipeline(bad).exit_code == kExitUsage);
    cfg.pattern = write_pattern(dir, qtest::make_pattern(m, {{{0.5, 0.5}, 5}}), "lone5");
    const auto r = run_pipeline(cfg);
    CHECK(r.exit_code == kExitStage);
    CHECK(stage_of(r.report, 1)["checks"]["detail"]["deficit"] == "-1/4");
}

TEST_CASE("identical inputs give byte-identical artifacts") {
    const auto dir = qtest::scratch_dir("pipe_determinism");
    const TriMesh m = make_square_minus_disk(24, 6);
    auto a = config_for(dir, m, "smd");
    auto b = a;
    b.out = (dir / "second").string();
    REQUIRE(run_pipeline(a).exit_code == kExitOk);
    REQUIRE(run_pipeline(b).exit_code == kExitOk);
    for (const char* f : {"mesh.msh", "quality.json", "layout.json", "pattern.json", "field.msh"})
        CHECK(qtest::slurp(fs::path(a.out) / f) == qtest::slurp(fs::path(b.out) / f));
}

TEST_CASE("stages re-run from upstream artifacts reproduce the result") {
    const TriMesh m = make_square(24);
    PipelineConfig cfg;
    Pipeline p(m, cfg);
    p.set_user_pattern(qtest::make_pattern(m, {{{0.4, 0.5}, 3}, {{0.6, 0.5}, 5}}));
    CHECK_THROWS_AS(p.run_stage(3), StageError);
    CHECK_THROWS_AS(p.layout(), StageError);
    p.run_all();
    const std::string mesh = p.mesh_msh();
    const std::string layout = p.layout_json().dump();
    p.invalidate_from(3);
    CHECK(!p.done(3));
    CHECK_THROWS_AS(p.quality_json(), StageError);
    p.run_stage(3);
    p.run_stage(4);
    CHECK(p.layout_json().dump() == layout);
    CHECK(p.mesh_msh() == mesh);
    // new pattern drops everything downstream
    p.set_user_pattern(qtest::valence8_pattern(m));
    CHECK(!p.done(1));
    CHECK_THROWS_AS(p.field(), StageError);
    CHECK_THROWS(p.svg("mesh"));
}

TEST_CASE("winslow flag smooths without breaking the mesh") {
    const TriMesh m = make_square(24);
    PipelineConfig cfg;
    cfg.smooth = "winslow";
    Pipeline p(m, cfg);
    p.set_user_pattern(qtest::make_pattern(m, {{{0.4, 0.5}, 3}, {{0.6, 0.5}, 5}}));
    p.run_all();
    CHECK(p.quads().conforming());
    CHECK(p.quality_report().worst > 0.5);
}

TEST_CASE("command line") {
    const auto dir = qtest::scratch_dir("pipe_cli");
    const std::string cli = QUADFORGE_CLI;
    auto sh = [](const std::string& cmd) {
        const int s = std::system((cmd + " >/dev/null 2>&1").c_str());
        return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
    };
    const auto mesh = (dir / "sq.msh").string();
    CHECK(sh(cli + " fixture square " + mesh + " -n 12") == 0);
    CHECK(sh(cli + " run --mesh " + mesh + " --out " + (dir / "out").string() + " --target-size 0.25") == 0);
    const auto q = json::parse(qtest::slurp(dir / "out" / "quality.json"));
    CHECK(q["elements"] == 16);
    CHECK(sh(cli + " run --mesh " + mesh + " --smooth laplace") == kExitUsage);
    CHECK(sh(cli + " bogus") == kExitUsage);
    const TriMesh m = make_square(12);
    const auto lone = write_pattern(dir, qtest::make_pattern(m, {{{0.5, 0.5}, 5}}), "lone5");
    CHECK(sh(cli + " validate-pattern --mesh " + mesh + " --pattern " + lone) == kExitStage);
    const auto pair = write_pattern(dir, qtest::make_pattern(m, {{{0.4, 0.5}, 3}, {{0.6, 0.5}, 5}}), "pair");
    CHECK(sh(cli + " validate-pattern --mesh " + mesh + " --pattern " + pair) == kExitOk);
    std::ofstream(dir / "cfg.json") << R"({"mesh": ")" << mesh << R"(", "unknown": 1})";
    CHECK(sh(cli + " run --config " + (dir / "cfg.json").string()) == kExitUsage);
}
