#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "quadforge/domains.hpp"
#include "quadforge/error.hpp"
#include "quadforge/msh_io.hpp"
#include "quadforge/pipeline.hpp"
#include "quadforge/service.hpp"

using namespace quadforge;
using nlohmann::json;

namespace {

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot read " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Parse, path + ": " + e.what());
    }
}

TriMesh make_fixture(const std::string& name, int n) {
    if (name == "square") return make_square(n);
    if (name == "disk") return make_disk(n);
    if (name == "annulus") return make_annulus(4 * n, n / 2 > 0 ? n / 2 : 1);
    if (name == "square-minus-disk") return make_square_minus_disk(n, n / 4 > 0 ? n / 4 : 1);
    throw Error(ErrorKind::InvalidArgument, "unknown fixture '" + name + "'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"quadforge: block-structured quad meshing of planar domains"};
    app.require_subcommand(1);

    PipelineConfig flags;
    std::string config_path;
    double target = 0.0;
    std::string smooth;
    auto* run = app.add_subcommand("run", "run the whole pipeline and write its artifacts");
    run->add_option("--config", config_path, "JSON config; flags below override it");
    run->add_option("--mesh", flags.mesh, "input triangle mesh (.msh v2.2)");
    run->add_option("--pattern", flags.pattern, "singularity pattern JSON (skips the cross-field step)");
    run->add_option("--target-size", target, "target edge length")->check(CLI::PositiveNumber);
    run->add_option("--out", flags.out, "output directory");
    auto* svg_flag = run->add_flag("--svg", flags.svg, "also write SVG renders");
    run->add_option("--smooth", smooth, "post-smoothing: none or winslow")->check(CLI::IsMember({"none", "winslow"}));

    std::string vmesh, vpattern;
    auto* vp = app.add_subcommand("validate-pattern", "check a pattern against a mesh (index balance)");
    vp->add_option("--mesh", vmesh, "triangle mesh (.msh)")->required();
    vp->add_option("--pattern", vpattern, "pattern JSON")->required();

    std::string host = "127.0.0.1";
    int port = 8080;
    auto* serve_cmd = app.add_subcommand("serve", "start the HTTP service");
    serve_cmd->add_option("--host", host, "bind address");
    serve_cmd->add_option("--port", port, "port")->check(CLI::Range(1, 65535));
    serve_cmd->add_option("--config", config_path, "JSON config used as the project default");

    std::string fixture, fixture_out;
    int fixture_n = 24;
    auto* fx = app.add_subcommand("fixture", "write one of the built-in test domains as .msh");
    fx->add_option("name", fixture, "square | disk | annulus | square-minus-disk")->required();
    fx->add_option("out", fixture_out, "output .msh path")->required();
    fx->add_option("-n", fixture_n, "resolution")->check(CLI::Range(2, 2000));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*run) {
            PipelineConfig cfg;
            if (!config_path.empty()) cfg = config_from_json(read_json_file(config_path));
            if (!flags.mesh.empty()) cfg.mesh = flags.mesh;
            if (!flags.pattern.empty()) cfg.pattern = flags.pattern;
            if (run->count("--out")) cfg.out = flags.out;
            if (target > 0.0) cfg.target_size = target;
            if (!smooth.empty()) cfg.smooth = smooth;
            if (svg_flag->count()) cfg.svg = true;
            const auto r = run_pipeline(cfg);
            if (r.report.contains("stages")) {
                for (const auto& s : r.report["stages"]) {
                    std::fprintf(stderr, "stage %d %-24s %-8s %8.3fs %s\n", s["stage"].get<int>(),
                                 s["name"].get<std::string>().c_str(), s["status"].get<std::string>().c_str(),
                                 s["seconds"].get<double>(), s["error"].get<std::string>().c_str());
                    if (s["checks"].contains("detail"))
                        std::fprintf(stderr, "%s\n", s["checks"]["detail"].dump(2).c_str());
                }
            }
            if (r.report.contains("error")) std::fprintf(stderr, "error: %s\n", r.report["error"].get<std::string>().c_str());
            for (const auto& w : r.written) std::printf("%s\n", w.c_str());
            return r.exit_code;
        }
        if (*vp) {
            const TriMesh mesh = load_mesh(vmesh);
            auto p = pattern_from_json(read_json_file(vpattern));
            bind_to_mesh(p, mesh);
            const auto v = validate(p, mesh);
            std::cout << dump_artifact({{"ok", v.ok},
                                        {"balance", quarter_string(v.balance)},
                                        {"expected", quarter_string(v.expected)},
                                        {"deficit", v.deficit_string()},
                                        {"problems", v.problems}});
            return v.ok ? kExitOk : kExitStage;
        }
        if (*serve_cmd) {
            PipelineConfig defaults;
            if (!config_path.empty()) defaults = config_from_json(read_json_file(config_path));
            return serve(host, port, defaults);
        }
        if (*fx) {
            save_mesh(fixture_out, make_fixture(fixture, fixture_n));
            std::printf("%s\n", fixture_out.c_str());
            return kExitOk;
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.kind() == ErrorKind::InvalidArgument ? kExitUsage : kExitInput;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInput;
    }
    return kExitUsage;
}
