#include "quadforge/service.hpp"

#include <cstdio>
#include <functional>

#include "quadforge/error.hpp"
#include "quadforge/msh_io.hpp"

namespace quadforge {

using nlohmann::json;

namespace {

const std::map<std::string, int>& artifact_stages() {
    static const std::map<std::string, int> m{{"pattern", 1},     {"field", 2},     {"layout", 3},
                                              {"mesh", 4},        {"quality", 4},   {"svg/pattern", 1},
                                              {"svg/field", 2},   {"svg/layout", 3}, {"svg/mesh", 4}};
    return m;
}

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(dump_artifact(body), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message, json extra = json::object()) {
    extra["error"] = message;
    send_json(res, status, extra);
}

json stages_json(const std::vector<StageRecord>& stages) {
    json out = json::array();
    for (const auto& r : stages)
        out.push_back({{"stage", r.stage},
                       {"name", r.name},
                       {"status", r.status},
                       {"seconds", r.seconds},
                       {"error", r.error},
                       {"checks", r.checks}});
    return out;
}

bool stage_ready(const std::vector<StageRecord>& stages, int s) {
    const auto& st = stages.at(s - 1).status;
    return st == "done" || st == "skipped";
}

std::shared_ptr<const Artifact> make_artifact(int stage, std::string content, const char* type) {
    auto a = std::make_shared<Artifact>();
    a->stage = stage;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016zx", std::hash<std::string>{}(content));
    a->hash = buf;
    a->content = std::move(content);
    a->content_type = type;
    return a;
}

}  // namespace

Service::Service(PipelineConfig defaults) : defaults_(std::move(defaults)) {
    check_config(defaults_);
}

Service::~Service() {
    wait_idle();
}

void Service::wait_idle() {
    std::vector<std::shared_ptr<Project>> all;
    {
        std::lock_guard lock(projects_mutex_);
        for (auto& [id, p] : projects_) all.push_back(p);
    }
    for (auto& p : all) {
        std::vector<std::thread> workers;
        {
            std::lock_guard lock(p->state_mutex);
            workers.swap(p->workers);
        }
        for (auto& w : workers)
            if (w.joinable()) w.join();
    }
}

std::shared_ptr<Project> Service::find(const std::string& id) {
    std::lock_guard lock(projects_mutex_);
    const auto it = projects_.find(id);
    return it == projects_.end() ? nullptr : it->second;
}

// Renders the artifacts of a finished stage. Caller holds run_mutex.
void Service::publish(Project& p, int stage) {
    const Pipeline& pipe = *p.pipeline;
    std::map<std::string, std::shared_ptr<const Artifact>> fresh;
    switch (stage) {
        case 1: fresh["pattern"] = make_artifact(1, dump_artifact(pipe.pattern_json()), "application/json"); break;
        case 2: fresh["field"] = make_artifact(2, dump_artifact(pipe.field_json()), "application/json"); break;
        case 3: fresh["layout"] = make_artifact(3, dump_artifact(pipe.layout_json()), "application/json"); break;
        case 4:
            fresh["mesh"] = make_artifact(4, pipe.mesh_msh(), "text/plain");
            fresh["quality"] = make_artifact(4, dump_artifact(pipe.quality_json()), "application/json");
            break;
    }
    static const char* names[] = {"pattern", "field", "layout", "mesh"};
    fresh[std::string("svg/") + names[stage - 1]] = make_artifact(stage, pipe.svg(names[stage - 1]), "image/svg+xml");
    std::lock_guard lock(p.state_mutex);
    for (auto& [k, v] : fresh) p.artifacts[k] = std::move(v);
}

void Service::run(const std::shared_ptr<Project>& p, int stage) {
    std::lock_guard run_lock(p->run_mutex);
    json error;
    bool ok = true;
    try {
        p->pipeline->run_stage(stage);
        publish(*p, stage);
    } catch (const StageError& e) {
        ok = false;
        error = {{"stage", e.stage()}, {"message", e.what()}, {"non_meshable", e.non_meshable()}};
        if (!e.detail().is_null()) error["detail"] = e.detail();
    } catch (const std::exception& e) {
        ok = false;
        error = {{"stage", stage}, {"message", e.what()}, {"non_meshable", false}};
    }
    std::lock_guard lock(p->state_mutex);
    p->stages = p->pipeline->stages();
    p->last_error = ok ? json(nullptr) : error;
    p->running = 0;
}

void Service::create(const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
        body = json::parse(req.body);
    } catch (const json::exception& e) {
        return send_error(res, 400, std::string("malformed JSON: ") + e.what());
    }
    if (!body.is_object() || !body.contains("mesh") || !body["mesh"].is_string())
        return send_error(res, 400, "body needs a 'mesh' string holding .msh text");
    auto p = std::make_shared<Project>();
    try {
        PipelineConfig cfg = defaults_;
        if (body.contains("config")) cfg = config_from_json(body["config"], defaults_);
        p->pipeline = std::make_unique<Pipeline>(mesh_from_msh(parse_msh(body["mesh"].get<std::string>())), cfg);
        if (body.contains("pattern")) p->pipeline->set_user_pattern(pattern_from_json(body["pattern"]));
    } catch (const std::exception& e) {
        return send_error(res, 400, e.what());
    }
    for (const auto& k : body.items())
        if (k.key() != "mesh" && k.key() != "config" && k.key() != "pattern")
            return send_error(res, 400, "unknown key '" + k.key() + "'");
    p->stages = p->pipeline->stages();
    {
        std::lock_guard lock(projects_mutex_);
        p->id = "p" + std::to_string(next_id_++);
        projects_[p->id] = p;
    }
    const auto& m = p->pipeline->mesh();
    send_json(res, 201,
              {{"id", p->id},
               {"vertices", m.num_vertices()},
               {"triangles", m.num_triangles()},
               {"euler_characteristic", m.euler_characteristic()}});
}

void Service::trigger(const httplib::Request& req, httplib::Response& res) {
    auto p = find(req.matches[1]);
    if (!p) return send_error(res, 404, "no such project");
    const int stage = std::stoi(req.matches[2]);
    if (stage < 1 || stage > 4) return send_error(res, 404, "stages are numbered 1 to 4");
    const bool wait = req.has_param("wait") && req.get_param_value("wait") != "0";
    {
        std::lock_guard lock(p->state_mutex);
        if (p->running)
            return send_error(res, 409, "stage " + std::to_string(p->running) + " is already running",
                              {{"running", p->running}});
        for (int s = 1; s < stage; ++s)
            if (!stage_ready(p->stages, s))
                return send_error(res, 409, "stage " + std::to_string(s) + " must run first", {{"missing", s}});
        p->running = stage;
        for (auto it = p->artifacts.begin(); it != p->artifacts.end();)
            it = it->second->stage >= stage ? p->artifacts.erase(it) : std::next(it);
        for (int s = stage; s <= 4; ++s) {
            p->stages[s - 1].status = s == stage ? "running" : "pending";
            p->stages[s - 1].error.clear();
            p->stages[s - 1].checks = json::object();
        }
        if (!wait) p->workers.emplace_back([this, p, stage] { run(p, stage); });
    }
    if (!wait) return send_json(res, 202, {{"stage", stage}, {"status", "running"}});
    run(p, stage);
    std::lock_guard lock(p->state_mutex);
    const auto& rec = p->stages[stage - 1];
    json body = {{"stage", stage}, {"status", rec.status}, {"seconds", rec.seconds}, {"checks", rec.checks}};
    if (!p->last_error.is_null()) {
        body["error"] = p->last_error;
        return send_json(res, 500, body);
    }
    send_json(res, 200, body);
}

void Service::status(const httplib::Request& req, httplib::Response& res) {
    auto p = find(req.matches[1]);
    if (!p) return send_error(res, 404, "no such project");
    std::lock_guard lock(p->state_mutex);
    json arts = json::object();
    for (const auto& [k, a] : p->artifacts) arts[k] = a->hash;
    send_json(res, 200,
              {{"id", p->id},
               {"running", p->running ? json(p->running) : json(nullptr)},
               {"stages", stages_json(p->stages)},
               {"artifacts", arts},
               {"edits", p->history.size()},
               {"last_error", p->last_error}});
}

void Service::artifact(const httplib::Request& req, httplib::Response& res) {
    auto p = find(req.matches[1]);
    if (!p) return send_error(res, 404, "no such project");
    const std::string name = req.matches[2];
    const auto known = artifact_stages().find(name);
    if (known == artifact_stages().end()) return send_error(res, 404, "no artifact named '" + name + "'");
    std::shared_ptr<const Artifact> a;
    {
        std::lock_guard lock(p->state_mutex);
        const auto it = p->artifacts.find(name);
        if (it != p->artifacts.end()) a = it->second;
    }
    if (!a)
        return send_error(res, 409, "stale, recompute required",
                          {{"status", "stale"}, {"stage", known->second}});
    res.status = 200;
    res.set_header("ETag", "\"" + a->hash + "\"");
    res.set_content(a->content, a->content_type);
}

void Service::patch_pattern(const httplib::Request& req, httplib::Response& res) {
    auto p = find(req.matches[1]);
    if (!p) return send_error(res, 404, "no such project");
    json body;
    try {
        body = json::parse(req.body);
    } catch (const json::exception& e) {
        return send_error(res, 400, std::string("malformed JSON: ") + e.what());
    }
    {
        std::lock_guard lock(p->state_mutex);
        if (p->running)
            return send_error(res, 409, "stage " + std::to_string(p->running) + " is running",
                              {{"running", p->running}});
        p->running = 1;
    }
    auto release = [&] {
        std::lock_guard lock(p->state_mutex);
        p->running = 0;
    };
    std::unique_lock run_lock(p->run_mutex);
    Pipeline& pipe = *p->pipeline;
    SingularityPattern next;
    std::vector<PatternEdit> edits;
    try {
        if (!body.is_object() || (body.contains("edits") == body.contains("pattern")))
            throw Error(ErrorKind::InvalidArgument, "body needs exactly one of 'edits' or 'pattern'");
        if (body.contains("pattern")) {
            next = pattern_from_json(body["pattern"]);
            bind_to_mesh(next, pipe.mesh());
        } else {
            SingularityPattern base;
            base.chi = pipe.mesh().euler_characteristic();
            if (pipe.done(1)) base = pipe.pattern();
            if (!body["edits"].is_array()) throw Error(ErrorKind::InvalidArgument, "'edits' must be an array");
            for (const auto& e : body["edits"]) {
                edits.push_back(edit_from_json(e));
                edits.back().staged = true;  // validated once, below
            }
            next = apply_edits(base, edits, pipe.mesh());
        }
    } catch (const std::exception& e) {
        run_lock.unlock();
        release();
        return send_error(res, 400, e.what());
    }
    const auto v = validate(next, pipe.mesh());
    if (!v.ok) {
        run_lock.unlock();
        release();
        return send_error(res, 422, "pattern rejected: index balance off by " + v.deficit_string(),
                          {{"deficit", v.deficit_string()},
                           {"balance", quarter_string(v.balance)},
                           {"expected", quarter_string(v.expected)},
                           {"problems", v.problems}});
    }
    json error;
    try {
        pipe.set_user_pattern(next);
        pipe.run_stage(1);
    } catch (const std::exception& e) {
        error = e.what();
    }
    if (error.is_null()) publish(*p, 1);
    run_lock.unlock();
    json invalidated = json::array();
    {
        std::lock_guard lock(p->state_mutex);
        for (auto it = p->artifacts.begin(); it != p->artifacts.end();) {
            if (it->second->stage >= 2) {
                invalidated.push_back(it->first);
                it = p->artifacts.erase(it);
            } else {
                ++it;
            }
        }
        p->stages = pipe.stages();
        for (const auto& e : edits) p->history.push_back(to_json(e));
        if (body.contains("pattern")) p->history.push_back({{"op", "replace"}});
        p->running = 0;
    }
    if (!error.is_null()) return send_error(res, 500, error.get<std::string>());
    send_json(res, 200, {{"pattern", to_json(next)}, {"invalidated", invalidated}});
}

void Service::install(httplib::Server& server) {
    server.Post("/projects", [this](const auto& req, auto& res) { create(req, res); });
    server.Post(R"(/projects/([^/]+)/stages/(\d+)/run)", [this](const auto& req, auto& res) { trigger(req, res); });
    server.Get(R"(/projects/([^/]+)/status)", [this](const auto& req, auto& res) { status(req, res); });
    server.Get(R"(/projects/([^/]+)/artifacts/(.+))", [this](const auto& req, auto& res) { artifact(req, res); });
    server.Patch(R"(/projects/([^/]+)/pattern)", [this](const auto& req, auto& res) { patch_pattern(req, res); });
    server.set_exception_handler([](const auto&, auto& res, std::exception_ptr ep) {
        std::string msg = "internal error";
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            msg = e.what();
        } catch (...) {
        }
        send_error(res, 500, msg);
    });
}

int serve(const std::string& host, int port, const PipelineConfig& defaults) {
    httplib::Server server;
    Service service(defaults);
    service.install(server);
    std::fprintf(stderr, "quadforge service on http://%s:%d\n", host.c_str(), port);
    if (!server.listen(host, port)) {
        std::fprintf(stderr, "cannot listen on %s:%d\n", host.c_str(), port);
        return kExitInput;
    }
    return kExitOk;
}

}  // namespace quadforge
