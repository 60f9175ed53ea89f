#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

// Eigen before httplib: <resolv.h>, pulled in by httplib, defines a _res macro.
#include "quadforge/pipeline.hpp"

#include <httplib.h>

namespace quadforge {

// Immutable rendered artifact; readers share it without touching the pipeline.
struct Artifact {
    int stage = 0;
    std::string content;
    std::string content_type;
    std::string hash;
};

struct Project {
    std::string id;
    std::unique_ptr<Pipeline> pipeline;   // guarded by run_mutex
    std::mutex run_mutex;
    std::mutex state_mutex;               // guards everything below
    int running = 0;                      // stage being computed, 0 when idle
    std::vector<StageRecord> stages;      // copy published after each change
    std::map<std::string, std::shared_ptr<const Artifact>> artifacts;
    std::vector<nlohmann::json> history;  // accepted pattern edits
    nlohmann::json last_error;
    std::vector<std::thread> workers;
};

// HTTP facade over Pipeline; see README for the endpoint list.
class Service {
public:
    explicit Service(PipelineConfig defaults = {});
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    void install(httplib::Server& server);
    // Blocks until every running stage has finished.
    void wait_idle();

private:
    std::shared_ptr<Project> find(const std::string& id);
    void publish(Project& p, int stage);
    void run(const std::shared_ptr<Project>& p, int stage);

    void create(const httplib::Request& req, httplib::Response& res);
    void trigger(const httplib::Request& req, httplib::Response& res);
    void status(const httplib::Request& req, httplib::Response& res);
    void artifact(const httplib::Request& req, httplib::Response& res);
    void patch_pattern(const httplib::Request& req, httplib::Response& res);

    PipelineConfig defaults_;
    std::mutex projects_mutex_;
    std::map<std::string, std::shared_ptr<Project>> projects_;
    int next_id_ = 1;
};

// Serves until the process is stopped.
int serve(const std::string& host, int port, const PipelineConfig& defaults = {});

}  // namespace quadforge
