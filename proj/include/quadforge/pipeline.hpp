#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "quadforge/conformal.hpp"
#include "quadforge/crossfield_mbo.hpp"
#include "quadforge/layout.hpp"
#include "quadforge/pattern.hpp"
#include "quadforge/quadmesh.hpp"
#include "quadforge/spokes.hpp"
#include "quadforge/trace.hpp"

namespace quadforge {

struct PipelineConfig {
    std::string mesh;                  // input .msh
    std::string pattern;               // optional pattern JSON, skips stage 1
    std::string out = "quadforge_out";
    int mbo_levels = 5;
    double mbo_level_tol = 1e-3;
    double mbo_final_tol = 1e-5;
    int mbo_max_iterations = 200;
    SpokeParams spokes;
    TraceParams trace;
    LayoutParams layout;
    double target_size = 0.05;
    double tol_tan_deg = 2.0;
    std::string smooth = "none";       // none | winslow
    int smooth_iterations = 20;
    bool svg = false;
};

// Unknown keys and out-of-range values throw InvalidArgument.
PipelineConfig config_from_json(const nlohmann::json& j, PipelineConfig base = {});
nlohmann::json to_json(const PipelineConfig& c);
void check_config(const PipelineConfig& c);

struct StageRecord {
    int stage = 0;
    std::string name;
    std::string status = "pending";  // pending | done | skipped | failed
    double seconds = 0.0;
    std::string error;
    nlohmann::json checks = nlohmann::json::object();
};

// Thrown by Pipeline::run_stage; carries the stage and, for a non-meshable
// pattern, the tangency report.
class StageError : public std::runtime_error {
public:
    StageError(int stage, const std::string& name, const std::string& what, bool non_meshable = false,
               nlohmann::json detail = nullptr);
    int stage() const { return stage_; }
    bool non_meshable() const { return non_meshable_; }
    const nlohmann::json& detail() const { return detail_; }

private:
    int stage_;
    bool non_meshable_;
    nlohmann::json detail_;
};

const char* stage_name(int stage);

// Artifacts of one run, computed stage by stage. Changing an upstream input
// drops everything downstream of it.
class Pipeline {
public:
    Pipeline(TriMesh mesh, PipelineConfig config);

    const PipelineConfig& config() const { return config_; }
    void set_config(PipelineConfig c);
    const TriMesh& mesh() const { return mesh_; }

    // User pattern on the input mesh; stage 1 becomes a validation step.
    void set_user_pattern(SingularityPattern p);
    void clear_user_pattern();
    bool has_user_pattern() const { return user_pattern_.has_value(); }

    void run_stage(int stage);
    void run_all();
    bool done(int stage) const;
    void invalidate_from(int stage);
    const std::vector<StageRecord>& stages() const { return records_; }

    const SingularityPattern& pattern() const;   // stage 1, input mesh ids
    const SpokeResult& spokes() const;            // stage 2
    const CrossField& field() const;              // stage 2
    const TangencyReport& tangency() const;       // stage 2
    const QuadLayout& layout() const;             // stage 3
    const SingularityPattern& final_pattern() const;  // stage 3, after corrections
    const QuadMesh& quads() const;                // stage 4
    const QualityReport& quality_report() const;  // stage 4

    nlohmann::json pattern_json() const;
    nlohmann::json field_json() const;
    MshData field_msh() const;
    nlohmann::json layout_json() const;
    std::string mesh_msh() const;
    nlohmann::json quality_json() const;
    std::string svg(const std::string& what) const;  // pattern | field | layout | mesh
    nlohmann::json report() const;

private:
    void stage1();
    void stage2();
    void stage3();
    void stage4();
    void require(int stage) const;

    TriMesh mesh_;
    PipelineConfig config_;
    std::optional<SingularityPattern> user_pattern_;
    std::vector<StageRecord> records_;

    std::optional<MboResult> mbo_;
    std::optional<SingularityPattern> pattern_;
    std::unique_ptr<SpokeResult> spokes_;
    std::unique_ptr<CrossField> field_;
    std::optional<TangencyReport> tangency_;
    std::optional<QuadLayout> layout_;
    std::optional<SingularityPattern> final_pattern_;
    std::optional<QuadMesh> quads_;
    std::optional<QualityReport> quality_;
};

// Exit codes of `quadforge run`.
enum ExitCode { kExitOk = 0, kExitUsage = 1, kExitInput = 2, kExitStage = 3, kExitNonMeshable = 4 };

struct RunResult {
    int exit_code = kExitOk;
    nlohmann::json report;
    std::vector<std::string> written;
};

// Runs every stage and writes the artifacts to config.out.
RunResult run_pipeline(const PipelineConfig& config);

// Canonical text of a JSON artifact, shared by the CLI and the service.
std::string dump_artifact(const nlohmann::json& j);

}  // namespace quadforge
