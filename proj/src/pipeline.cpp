#include "quadforge/pipeline.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "quadforge/detect.hpp"
#include "quadforge/error.hpp"
#include "quadforge/msh_io.hpp"
#include "quadforge/svg.hpp"

namespace quadforge {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    if (!j.is_object()) throw Error(ErrorKind::InvalidArgument, where + " must be an object");
    for (const auto& [k, v] : j.items())
        if (!known.count(k)) throw Error(ErrorKind::InvalidArgument, "unknown config key '" + where + k + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorKind::InvalidArgument, "config key '" + where + key + "' has the wrong type");
    }
}

void in_range(double v, double lo, double hi, const char* name, bool open_lo = false) {
    if (!(open_lo ? v > lo : v >= lo) || !(v <= hi)) {
        std::ostringstream msg;
        msg << name << " = " << v << " outside " << (open_lo ? "(" : "[") << lo << ", " << hi << "]";
        throw Error(ErrorKind::InvalidArgument, msg.str());
    }
}

StageRecord fresh_record(int stage) {
    StageRecord r;
    r.stage = stage;
    r.name = stage_name(stage);
    return r;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

PipelineConfig config_from_json(const json& j, PipelineConfig c) {
    reject_unknown(j, {"mesh", "pattern", "out", "mbo", "spokes", "trace", "layout", "target_size", "tol_tan_deg",
                       "smooth", "smooth_iterations", "svg"},
                   "");
    read(j, "mesh", c.mesh, "");
    read(j, "pattern", c.pattern, "");
    read(j, "out", c.out, "");
    read(j, "target_size", c.target_size, "");
    read(j, "tol_tan_deg", c.tol_tan_deg, "");
    read(j, "smooth", c.smooth, "");
    read(j, "smooth_iterations", c.smooth_iterations, "");
    read(j, "svg", c.svg, "");
    if (j.contains("mbo")) {
        const auto& m = j["mbo"];
        reject_unknown(m, {"levels", "level_tol", "final_tol", "max_iterations"}, "mbo.");
        read(m, "levels", c.mbo_levels, "mbo.");
        read(m, "level_tol", c.mbo_level_tol, "mbo.");
        read(m, "final_tol", c.mbo_final_tol, "mbo.");
        read(m, "max_iterations", c.mbo_max_iterations, "mbo.");
    }
    if (j.contains("spokes")) {
        const auto& s = j["spokes"];
        reject_unknown(s, {"rings", "sectors_per_quadrant", "radius_factor"}, "spokes.");
        read(s, "rings", c.spokes.rings, "spokes.");
        read(s, "sectors_per_quadrant", c.spokes.sectors_per_quadrant, "spokes.");
        read(s, "radius_factor", c.spokes.radius_factor, "spokes.");
    }
    if (j.contains("trace")) {
        const auto& t = j["trace"];
        reject_unknown(t, {"step_factor", "max_steps_factor", "launch_samples", "orthogonal_tol"}, "trace.");
        read(t, "step_factor", c.trace.step_factor, "trace.");
        read(t, "max_steps_factor", c.trace.max_steps_factor, "trace.");
        read(t, "launch_samples", c.trace.launch_samples, "trace.");
        read(t, "orthogonal_tol", c.trace.orthogonal_tol, "trace.");
    }
    if (j.contains("layout")) {
        const auto& l = j["layout"];
        reject_unknown(l, {"corner_angle", "cluster_factor"}, "layout.");
        read(l, "corner_angle", c.layout.corner_angle, "layout.");
        read(l, "cluster_factor", c.layout.cluster_factor, "layout.");
    }
    check_config(c);
    return c;
}

void check_config(const PipelineConfig& c) {
    in_range(c.mbo_levels, 5, 10, "mbo.levels");
    in_range(c.mbo_level_tol, 0.0, 1.0, "mbo.level_tol", true);
    in_range(c.mbo_final_tol, 0.0, 1.0, "mbo.final_tol", true);
    in_range(c.mbo_max_iterations, 1, 100000, "mbo.max_iterations");
    in_range(c.spokes.rings, 1, 8, "spokes.rings");
    in_range(c.spokes.sectors_per_quadrant, 1, 8, "spokes.sectors_per_quadrant");
    in_range(c.spokes.radius_factor, 0.0, 10.0, "spokes.radius_factor", true);
    in_range(c.trace.step_factor, 0.0, 1.0, "trace.step_factor", true);
    in_range(c.trace.max_steps_factor, 0.0, 1000.0, "trace.max_steps_factor", true);
    in_range(c.trace.launch_samples, 36, 100000, "trace.launch_samples");
    in_range(c.trace.orthogonal_tol, 0.0, 90.0, "trace.orthogonal_tol", true);
    in_range(c.layout.corner_angle, 90.0, 180.0, "layout.corner_angle", true);
    in_range(c.layout.cluster_factor, 0.0, 1.0, "layout.cluster_factor", true);
    in_range(c.target_size, 0.0, 1e300, "target_size", true);
    in_range(c.tol_tan_deg, 0.0, 45.0, "tol_tan_deg", true);
    in_range(c.smooth_iterations, 0, 10000, "smooth_iterations");
    if (c.smooth != "none" && c.smooth != "winslow")
        throw Error(ErrorKind::InvalidArgument, "smooth must be 'none' or 'winslow', got '" + c.smooth + "'");
}

json to_json(const PipelineConfig& c) {
    return {{"mesh", c.mesh},
            {"pattern", c.pattern},
            {"out", c.out},
            {"mbo",
             {{"levels", c.mbo_levels},
              {"level_tol", c.mbo_level_tol},
              {"final_tol", c.mbo_final_tol},
              {"max_iterations", c.mbo_max_iterations}}},
            {"spokes",
             {{"rings", c.spokes.rings},
              {"sectors_per_quadrant", c.spokes.sectors_per_quadrant},
              {"radius_factor", c.spokes.radius_factor}}},
            {"trace",
             {{"step_factor", c.trace.step_factor},
              {"max_steps_factor", c.trace.max_steps_factor},
              {"launch_samples", c.trace.launch_samples},
              {"orthogonal_tol", c.trace.orthogonal_tol}}},
            {"layout", {{"corner_angle", c.layout.corner_angle}, {"cluster_factor", c.layout.cluster_factor}}},
            {"target_size", c.target_size},
            {"tol_tan_deg", c.tol_tan_deg},
            {"smooth", c.smooth},
            {"smooth_iterations", c.smooth_iterations},
            {"svg", c.svg}};
}

StageError::StageError(int stage, const std::string& name, const std::string& what, bool non_meshable, json detail)
    : std::runtime_error("stage " + std::to_string(stage) + " (" + name + "): " + what),
      stage_(stage),
      non_meshable_(non_meshable),
      detail_(std::move(detail)) {}

const char* stage_name(int stage) {
    switch (stage) {
        case 1: return "cross field and pattern";
        case 2: return "conformal fields";
        case 3: return "layout";
        case 4: return "quad mesh";
    }
    return "unknown";
}

Pipeline::Pipeline(TriMesh mesh, PipelineConfig config) : mesh_(std::move(mesh)), config_(std::move(config)) {
    check_config(config_);
    for (int s = 1; s <= 4; ++s) records_.push_back(fresh_record(s));
}

void Pipeline::set_config(PipelineConfig c) {
    check_config(c);
    config_ = std::move(c);
    invalidate_from(1);
}

void Pipeline::set_user_pattern(SingularityPattern p) {
    bind_to_mesh(p, mesh_);
    user_pattern_ = std::move(p);
    invalidate_from(1);
}

void Pipeline::clear_user_pattern() {
    user_pattern_.reset();
    invalidate_from(1);
}

bool Pipeline::done(int stage) const {
    const auto& s = records_.at(stage - 1).status;
    return s == "done" || s == "skipped";
}

void Pipeline::invalidate_from(int stage) {
    for (int s = stage; s <= 4; ++s) records_[s - 1] = fresh_record(s);
    if (stage <= 1) {
        mbo_.reset();
        pattern_.reset();
    }
    if (stage <= 2) {
        field_.reset();
        spokes_.reset();
        tangency_.reset();
    }
    if (stage <= 3) {
        layout_.reset();
        final_pattern_.reset();
    }
    quads_.reset();
    quality_.reset();
}

void Pipeline::require(int stage) const {
    if (!done(stage))
        throw StageError(stage, stage_name(stage), "artifact is stale or missing; run stage " + std::to_string(stage));
}

void Pipeline::run_stage(int stage) {
    if (stage < 1 || stage > 4) throw Error(ErrorKind::InvalidArgument, "no stage " + std::to_string(stage));
    for (int s = 1; s < stage; ++s) require(s);
    invalidate_from(stage);
    auto& rec = records_[stage - 1];
    const auto t0 = std::chrono::steady_clock::now();
    try {
        switch (stage) {
            case 1: stage1(); break;
            case 2: stage2(); break;
            case 3: stage3(); break;
            case 4: stage4(); break;
        }
        rec.seconds = seconds_since(t0);
        if (rec.status == "pending") rec.status = "done";
    } catch (const StageError& e) {
        rec.seconds = seconds_since(t0);
        rec.status = "failed";
        rec.error = e.what();
        if (!e.detail().is_null()) rec.checks["detail"] = e.detail();
        throw;
    } catch (const std::exception& e) {
        rec.seconds = seconds_since(t0);
        rec.status = "failed";
        rec.error = e.what();
        throw StageError(stage, stage_name(stage), e.what());
    }
}

void Pipeline::run_all() {
    for (int s = 1; s <= 4; ++s) run_stage(s);
}

void Pipeline::stage1() {
    auto& checks = records_[0].checks;
    SingularityPattern p;
    if (user_pattern_) {
        p = *user_pattern_;
        checks["source"] = "user";
        records_[0].status = "skipped";
    } else {
        std::vector<std::string> warnings;
        auto schedule = make_schedule(mesh_, config_.mbo_levels, &warnings, config_.mbo_level_tol, config_.mbo_final_tol);
        schedule.max_iterations = config_.mbo_max_iterations;
        mbo_ = mbo_solve(mesh_, schedule);
        p = detect(mesh_, mbo_->field);
        checks["source"] = "mbo";
        checks["mbo_converged"] = mbo_->converged;
        checks["mbo_iterations"] = mbo_->iterations;
        checks["warnings"] = warnings;
    }
    const auto v = validate(p, mesh_);
    checks["balance"] = quarter_string(v.balance);
    checks["expected"] = quarter_string(v.expected);
    checks["valid"] = v.ok;
    checks["singularities"] = p.singularities.size();
    if (!v.ok)
        throw StageError(1, stage_name(1), "pattern fails the index balance, deficit " + v.deficit_string(), false,
                         json{{"deficit", v.deficit_string()}, {"problems", v.problems}});
    pattern_ = std::move(p);
}

void Pipeline::stage2() {
    auto& checks = records_[1].checks;
    spokes_ = std::make_unique<SpokeResult>(refine_spokes(mesh_, *pattern_, config_.spokes));
    const auto& rm = spokes_->mesh;
    auto cut = build_branch_cut(rm, spokes_->pattern);
    auto h = solve_H(rm, spokes_->pattern);
    auto th = solve_theta(rm, h, cut);
    checks["refined_triangles"] = rm.num_triangles();
    checks["compatibility"] = h.rhs_sum;
    checks["H_residual"] = h.residual;
    checks["theta_residual"] = th.residual;
    field_ = std::make_unique<CrossField>(rm, std::move(h), std::move(cut), std::move(th));
    // conjugacy away from the spoke disks
    std::vector<char> keep(rm.num_triangles(), 1);
    for (int t = 0; t < rm.num_triangles(); ++t)
        for (const auto& d : spokes_->disks)
            if (distance(rm.triangle_centroid(t), rm.vertex(d.vertex)) < d.radius) keep[t] = 0;
    checks["conjugacy_residual"] = field_->conjugacy_residual(keep);
    const auto re = redetect(*field_);
    bool same = re.singularities.size() == spokes_->pattern.singularities.size();
    for (size_t i = 0; same && i < re.singularities.size(); ++i)
        same = re.singularities[i].vertex == spokes_->pattern.singularities[i].vertex &&
               re.singularities[i].t == spokes_->pattern.singularities[i].t;
    checks["redetect_matches"] = same;
    tangency_ = check_tangency(*field_, deg(config_.tol_tan_deg));
    checks["meshable"] = tangency_->meshable;
    checks["max_tangency_deviation_deg"] = tangency_->max_deviation * 180.0 / kPi;
    if (!tangency_->meshable) {
        json v = json::array();
        for (const auto& x : tangency_->violations)
            v.push_back({{"edge", x.edge},
                         {"x", x.where.x},
                         {"y", x.where.y},
                         {"deviation_deg", x.deviation * 180.0 / kPi},
                         {"loop", x.loop}});
        throw StageError(2, stage_name(2),
                         "pattern is not meshable: cross field not tangent to the boundary at " +
                             std::to_string(tangency_->violations.size()) + " edges",
                         true, json{{"violations", v}, {"tolerance_deg", config_.tol_tan_deg}});
    }
}

void Pipeline::stage3() {
    auto& checks = records_[2].checks;
    const auto& rm = spokes_->mesh;
    const auto& rp = spokes_->pattern;
    const auto raw = trace_separatrices(*field_, rp, spokes_->disks, config_.trace);
    const auto sites = launch_sites(rm, rp);
    auto curves = dedup(raw, sites, captures_from(sites, spokes_->disks, rm));
    const auto cycles = detect_and_cut_limit_cycles(curves, rm, config_.trace);
    checks["separatrices"] = raw.size();
    checks["after_dedup"] = curves.size();
    checks["limit_cycles_possible"] = cycles.possible.size();
    checks["limit_cycles_cut"] = cycles.authentic.size();
    auto layout = build_partitions(rm, rp, curves, config_.layout);
    checks["tjunctions_before"] = layout.tjunctions().size();
    TFixReport tfix;
    if (!layout.tjunctions().empty()) layout = fix_tjunctions(layout, rm, rp, field_.get(), &tfix, config_.layout);
    checks["tjunction_rounds"] = tfix.rounds;
    SingularityPattern final_pattern = rp;
    int split = 0;
    if (!layout.all_quads()) {
        SplitReport sr;
        layout = split_valence2(layout, rm, rp, &sr, config_.layout);
        split = sr.split;
        final_pattern = sr.pattern;
    }
    checks["valence2_splits"] = split;
    checks["patches"] = layout.patches.size();
    checks["all_quads"] = layout.all_quads();
    checks["tjunctions"] = layout.tjunctions().size();
    if (!layout.tjunctions().empty())
        throw Error(ErrorKind::Layout, std::to_string(layout.tjunctions().size()) + " T-junctions left unresolved");
    if (!layout.all_quads()) throw Error(ErrorKind::Layout, "layout has patches that are not four-sided");
    layout_ = std::move(layout);
    final_pattern_ = std::move(final_pattern);
}

void Pipeline::stage4() {
    auto& checks = records_[3].checks;
    const auto& rm = spokes_->mesh;
    std::vector<PartitionParam> params;
    double min_j = 1e300, max_c = 0.0;
    for (int i = 0; i < static_cast<int>(layout_->patches.size()); ++i) {
        params.push_back(solve_UV(extract_partition(*layout_, i, rm), *field_, *layout_, i));
        min_j = std::min(min_j, params.back().min_jacobian);
        max_c = std::max(max_c, params.back().max_circulation);
    }
    checks["min_jacobian"] = min_j;
    checks["max_circulation"] = max_c;
    const auto div = discretize_edges(*layout_, *field_, config_.target_size);
    auto q = tfi_and_map(*layout_, params, div, *field_);
    if (config_.smooth == "winslow") smooth_winslow(q, config_.smooth_iterations);
    checks["conforming"] = q.conforming();
    checks["min_signed_area"] = q.min_signed_area();
    checks["min_corner_area"] = q.min_corner_area();
    int interior = 0;
    for (const auto& s : final_pattern_->singularities) interior += !s.boundary;
    checks["irregular_vertices"] = q.irregular().size();
    checks["irregular_matches_pattern"] = static_cast<int>(q.irregular().size()) == interior;
    if (!q.conforming()) throw Error(ErrorKind::Parameterization, "quad mesh is not conforming");
    if (!(q.min_signed_area() > 0.0)) throw Error(ErrorKind::Parameterization, "quad mesh has a degenerate quad");
    // flat corners are legitimate where a valence-1 boundary vertex sits on a straight side
    if (q.min_corner_area() < -1e-14) throw Error(ErrorKind::Parameterization, "quad mesh has an inverted corner");
    quality_ = quality(q);
    quads_ = std::move(q);
}

const SingularityPattern& Pipeline::pattern() const {
    require(1);
    return *pattern_;
}
const SpokeResult& Pipeline::spokes() const {
    if (!spokes_) require(2);
    return *spokes_;
}
const CrossField& Pipeline::field() const {
    if (!field_) require(2);
    return *field_;
}
const TangencyReport& Pipeline::tangency() const {
    if (!tangency_) require(2);
    return *tangency_;
}
const QuadLayout& Pipeline::layout() const {
    require(3);
    return *layout_;
}
const SingularityPattern& Pipeline::final_pattern() const {
    require(3);
    return *final_pattern_;
}
const QuadMesh& Pipeline::quads() const {
    require(4);
    return *quads_;
}
const QualityReport& Pipeline::quality_report() const {
    require(4);
    return *quality_;
}

json Pipeline::pattern_json() const {
    return to_json(pattern());
}

json Pipeline::field_json() const {
    const auto& f = field();
    const auto& m = f.mesh();
    json theta = json::array();
    for (int t = 0; t < m.num_triangles(); ++t) theta.push_back(f.theta_centroid(t));
    const auto& tan = tangency();
    return {{"vertices", m.num_vertices()},
            {"triangles", m.num_triangles()},
            {"H", f.h().values},
            {"theta", theta},
            {"pattern", to_json(spokes().pattern)},
            {"meshable", tan.meshable},
            {"max_tangency_deviation_deg", tan.max_deviation * 180.0 / kPi}};
}

MshData Pipeline::field_msh() const {
    const auto& f = field();
    const auto& m = f.mesh();
    MshData d;
    d.nodes = m.vertices();
    for (const auto& t : m.triangles()) d.elements.push_back({kMshTriangle, 1, 1, {t[0], t[1], t[2]}});
    MshDataBlock h{"H", false, 1, {}};
    for (double v : f.h().values) h.values.push_back({v});
    MshDataBlock th{"theta", true, 1, {}};
    for (int t = 0; t < m.num_triangles(); ++t) th.values.push_back({f.theta_centroid(t)});
    d.data = {std::move(h), std::move(th)};
    return d;
}

json Pipeline::layout_json() const {
    json j = to_json(layout());
    j["pattern"] = to_json(final_pattern());
    return j;
}

std::string Pipeline::mesh_msh() const {
    return format_msh(msh_from_quads(quads()));
}

json Pipeline::quality_json() const {
    json j = to_json(quality_report());
    j["target_size"] = config_.target_size;
    j["patches"] = layout().patches.size();
    j["irregular_vertices"] = quads().irregular().size();
    return j;
}

std::string Pipeline::svg(const std::string& what) const {
    SvgCanvas canvas(mesh_.bbox(), 800.0);
    auto dots = [&](const TriMesh& m, const SingularityPattern& p) {
        for (const auto& s : p.singularities) canvas.circle(m.vertex(s.vertex), 5.0, valence_color(s.valence));
    };
    if (what == "pattern") {
        draw_wireframe(canvas, mesh_);
        dots(mesh_, pattern());
    } else if (what == "field") {
        const auto& f = field();
        draw_wireframe(canvas, f.mesh(), "#e4e4e4");
        draw_isolines(canvas, f.mesh(), f.h().values, 16, "#3366cc");
        const double len = 0.3 * f.mesh().mean_edge_length();
        for (int t = 0; t < f.mesh().num_triangles(); t += 3) {
            const Vec2 c = f.mesh().triangle_centroid(t);
            const double a = f.theta_centroid(t);
            canvas.line(c - from_angle(a) * len, c + from_angle(a) * len, "#444444", 0.6);
            canvas.line(c - perp(from_angle(a)) * len, c + perp(from_angle(a)) * len, "#444444", 0.6);
        }
        dots(f.mesh(), spokes().pattern);
    } else if (what == "layout") {
        draw_wireframe(canvas, spokes().mesh, "#eeeeee");
        draw_layout(canvas, layout());
    } else if (what == "mesh") {
        draw_quads(canvas, quads());
    } else {
        throw Error(ErrorKind::InvalidArgument, "no SVG render named '" + what + "'");
    }
    return canvas.str();
}

json Pipeline::report() const {
    json stages = json::array();
    for (const auto& r : records_)
        stages.push_back({{"stage", r.stage},
                          {"name", r.name},
                          {"status", r.status},
                          {"seconds", r.seconds},
                          {"error", r.error},
                          {"checks", r.checks}});
    return {{"config", to_json(config_)},
            {"input",
             {{"vertices", mesh_.num_vertices()},
              {"triangles", mesh_.num_triangles()},
              {"euler_characteristic", mesh_.euler_characteristic()}}},
            {"user_pattern", user_pattern_.has_value()},
            {"stages", stages}};
}

std::string dump_artifact(const json& j) {
    return j.dump(2) + "\n";
}

namespace {

void write_text(const std::filesystem::path& p, const std::string& text, std::vector<std::string>& written) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + p.string());
    out << text;
    if (!out) throw Error(ErrorKind::Io, "write failed for " + p.string());
    written.push_back(p.string());
}

}  // namespace

RunResult run_pipeline(const PipelineConfig& config) {
    RunResult r;
    namespace fs = std::filesystem;
    std::unique_ptr<Pipeline> pipe;
    try {
        check_config(config);
        if (config.mesh.empty()) throw Error(ErrorKind::InvalidArgument, "no input mesh given");
    } catch (const Error& e) {
        r.exit_code = kExitUsage;
        r.report = {{"error", e.what()}};
        return r;
    }
    try {
        pipe = std::make_unique<Pipeline>(load_mesh(config.mesh), config);
        if (!config.pattern.empty()) {
            std::ifstream in(config.pattern);
            if (!in) throw Error(ErrorKind::Io, "cannot read pattern " + config.pattern);
            json j;
            try {
                j = json::parse(in);
            } catch (const json::exception& e) {
                throw Error(ErrorKind::Parse, config.pattern + ": " + e.what());
            }
            pipe->set_user_pattern(pattern_from_json(j));
        }
        fs::create_directories(config.out);
    } catch (const std::exception& e) {
        r.exit_code = kExitInput;
        r.report = {{"error", e.what()}};
        return r;
    }
    const fs::path out(config.out);
    try {
        for (int s = 1; s <= 4; ++s) {
            try {
                pipe->run_stage(s);
            } catch (const StageError& e) {
                r.exit_code = e.non_meshable() ? kExitNonMeshable : kExitStage;
                break;
            }
            switch (s) {
                case 1: write_text(out / "pattern.json", dump_artifact(pipe->pattern_json()), r.written); break;
                case 2:
                    write_msh((out / "field.msh").string(), pipe->field_msh());
                    r.written.push_back((out / "field.msh").string());
                    break;
                case 3: write_text(out / "layout.json", dump_artifact(pipe->layout_json()), r.written); break;
                case 4:
                    write_text(out / "mesh.msh", pipe->mesh_msh(), r.written);
                    write_text(out / "quality.json", dump_artifact(pipe->quality_json()), r.written);
                    break;
            }
            if (config.svg) {
                static const char* names[] = {"pattern", "field", "layout", "mesh"};
                write_text(out / (std::string(names[s - 1]) + ".svg"), pipe->svg(names[s - 1]), r.written);
            }
        }
        r.report = pipe->report();
        r.report["exit_code"] = r.exit_code;
        r.report["artifacts"] = r.written;
        write_text(out / "report.json", dump_artifact(r.report), r.written);
    } catch (const Error& e) {
        r.exit_code = kExitInput;
        r.report = pipe->report();
        r.report["error"] = e.what();
    }
    return r;
}

}  // namespace quadforge
