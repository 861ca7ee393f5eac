#include "uicrawl/pipeline.hpp"

#include <fstream>
#include <map>
#include <mutex>

#include "uicrawl/util.hpp"

namespace uicrawl::pipeline {

using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open file: " + path.string());
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

std::unique_ptr<llm::ChatEndpoint> make_endpoint(const LlmSettings& settings) {
    if (settings.endpoint.rfind("scripted:", 0) == 0) {
        std::filesystem::path path = settings.endpoint.substr(9);
        json rules = json::parse(read_file(path));
        return std::make_unique<llm::ScriptedChatEndpoint>(
            llm::ScriptedChatEndpoint::rules_from_json(rules));
    }
    if (settings.endpoint.rfind("http://", 0) == 0 || settings.endpoint.rfind("https://", 0) == 0) {
        llm::HttpEndpointConfig cfg;
        cfg.base_url = settings.endpoint;
        cfg.model = settings.model;
        cfg.api_key_env = settings.api_key_env;
        cfg.timeout_seconds = settings.timeout_seconds;
        cfg.max_retries = settings.max_retries;
        cfg.multimodal = settings.multimodal;
        return std::make_unique<llm::HttpChatEndpoint>(cfg);
    }
    throw Error("unrecognized llm endpoint: " + settings.endpoint);
}

// Session runner shared by crawl and resume; owns the per-run immutables.
struct Crawler {
    std::map<std::string, sim::AppModel> models;
    traversal::SessionConfig session_config;
    std::vector<std::string> policy_names;
    std::unique_ptr<llm::ChatEndpoint> endpoint;
    uint64_t seed = 0;

    uint64_t session_seed(const std::string& app_id, int attempt) const {
        return util::mix_seed(seed, "session:" + app_id, static_cast<uint64_t>(attempt));
    }

    struct PolicySet {
        std::vector<std::unique_ptr<traversal::TraversalPolicy>> owned;
        std::vector<traversal::TraversalPolicy*> view;
    };

    PolicySet make_policies() const {
        PolicySet set;
        for (const auto& name : policy_names) {
            if (name == "rules") {
                set.owned.push_back(std::make_unique<traversal::RulePolicy>());
            } else if (name == "llm") {
                if (!endpoint) throw Error("llm policy requested but no endpoint configured");
                set.owned.push_back(std::make_unique<llm::LlmTraversalPolicy>(endpoint.get()));
            } else {
                throw Error("unknown policy tier: " + name);
            }
        }
        for (auto& p : set.owned) set.view.push_back(p.get());
        return set;
    }

    const sim::AppModel& model_of(const std::string& app_id) const {
        auto it = models.find(app_id);
        if (it == models.end()) throw Error("no app model for " + app_id);
        return it->second;
    }

    fleet::JobOutcome run_job(const fleet::CrawlJob& job, const std::string& instance_id,
                              int attempt) const {
        fleet::JobOutcome outcome;
        outcome.session_id = "s" + std::to_string(attempt);
        outcome.session_seed = session_seed(job.app_id, attempt);

        sim::SimDevice device(instance_id);
        device.install(model_of(job.app_id));
        device.launch(outcome.session_seed);

        traversal::RecordBuffer buffer(job.app_id, outcome.session_id);
        auto sink = buffer.sink();
        auto policies = make_policies();
        auto events = [&outcome](const json& e) { outcome.session_events.push_back(e); };

        outcome.result = traversal::run_session(device, policies.view, session_config, sink, events);
        outcome.captured = std::move(buffer.captured());
        outcome.device_action_log = device.action_log();
        return outcome;
    }

    fleet::JobOutcome resume_job(const fleet::CrawlJob& job, const std::string& instance_id,
                                 const fleet::SessionSnapshot& snapshot,
                                 const std::vector<sim::DeviceAction>& human_actions) const {
        fleet::JobOutcome outcome;
        outcome.session_id = snapshot.session_id;
        outcome.session_seed = snapshot.session_seed;

        sim::SimDevice device(instance_id);
        device.install(model_of(job.app_id));
        device.launch(snapshot.session_seed);
        for (const auto& aj : snapshot.device_action_log) {
            device.perform(traversal::device_action_from_json(aj));
        }

        traversal::ResumeState resume;
        resume.utg = traversal::utg_from_json(snapshot.utg);
        for (size_t i = 0; i < snapshot.history.size(); ++i) {
            resume.history.push_back(
                {static_cast<int>(i), dedup::signature_from_string(snapshot.history[i])});
        }
        resume.steps_taken = snapshot.steps_taken;
        resume.records = snapshot.records;
        for (const auto& e : snapshot.escalations) resume.escalations.push_back(e);
        for (const auto& a : human_actions) resume.queued_actions.push_back(a);

        traversal::RecordBuffer buffer(job.app_id, outcome.session_id);
        auto sink = buffer.sink();
        auto policies = make_policies();
        auto events = [&outcome](const json& e) { outcome.session_events.push_back(e); };

        outcome.result =
            traversal::run_session(device, policies.view, session_config, sink, events, &resume);
        outcome.captured = std::move(buffer.captured());
        outcome.device_action_log = device.action_log();
        return outcome;
    }
};

// Flushes one session's buffered captures into the store; runs only in the
// coordinator thread.
void flush_outcome(store::DatasetStore& store, std::vector<json>& session_events,
                   const fleet::CrawlJob& job, const fleet::JobOutcome& outcome) {
    for (const auto& cap : outcome.captured) {
        store::ScreenRecord rec;
        rec.record_id = cap.record_id;
        rec.app_id = job.app_id;
        rec.session_id = outcome.session_id;
        rec.step = cap.step;
        rec.screenshot_ref =
            store.store_screenshot(job.app_id, outcome.session_id, cap.step, cap.image);
        rec.raw_vh = cap.raw;
        rec.simplified_vh = cap.simplified;
        rec.signature = cap.signature;
        store.write_record(std::move(rec));
    }
    // Trajectories are terminal-state only; a resumed session replaces its
    // earlier paused entry.
    store::TrajectoryRecord traj;
    traj.session_id = outcome.session_id;
    traj.app_id = job.app_id;
    traj.final_status = std::string(traversal::to_string(outcome.result.status));
    for (const auto& e : outcome.result.utg.edges) {
        traj.steps.push_back({e.from, e.action, e.to});
    }
    store.write_trajectory(std::move(traj));

    for (const auto& e : outcome.session_events) {
        json line = e;
        line["app_id"] = job.app_id;
        line["session_id"] = outcome.session_id;
        session_events.push_back(std::move(line));
    }
}

void write_lines(const std::filesystem::path& path, const std::vector<json>& lines, bool append) {
    std::ofstream f(path, append ? std::ios::app : std::ios::trunc);
    if (!f) throw Error("cannot open for writing: " + path.string());
    for (const auto& j : lines) f << j.dump() << '\n';
}

void write_json_file(const std::filesystem::path& path, const json& j) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw Error("cannot open for writing: " + path.string());
    f << j.dump(2) << '\n';
}

struct FleetFiles {
    std::filesystem::path state;
    std::filesystem::path report;
    std::filesystem::path dispatch_log;
    std::filesystem::path session_events;

    explicit FleetFiles(const std::filesystem::path& root)
        : state(root / "fleet_state.json"),
          report(root / "report.json"),
          dispatch_log(root / "dispatch_log.jsonl"),
          session_events(root / "session_events.jsonl") {}
};

json crawler_config_json(const CrawlOptions& options) {
    json j;
    j["metadata_file"] = std::filesystem::absolute(options.metadata_file).string();
    j["models_dir"] = std::filesystem::absolute(options.models_dir).string();
    j["instances"] = options.instances;
    j["concurrency"] = options.concurrency;
    j["policies"] = options.policies;
    j["seed"] = options.seed;
    j["session"] = {{"max_steps", options.session.max_steps},
                    {"idle_window", options.session.idle_window},
                    {"trigger_keywords", options.session.trigger_keywords},
                    {"input_default_text", options.session.input_default_text},
                    {"llm_failure_budget", options.session.llm_failure_budget}};
    j["llm"] = {{"endpoint", options.llm.endpoint},
                {"model", options.llm.model},
                {"api_key_env", options.llm.api_key_env},
                {"timeout_seconds", options.llm.timeout_seconds},
                {"max_retries", options.llm.max_retries},
                {"multimodal", options.llm.multimodal}};
    return j;
}

CrawlOptions options_from_config(const json& j) {
    CrawlOptions o;
    o.metadata_file = j.at("metadata_file").get<std::string>();
    o.models_dir = j.at("models_dir").get<std::string>();
    o.instances = j.at("instances").get<int>();
    o.concurrency = j.at("concurrency").get<int>();
    o.policies = j.at("policies").get<std::vector<std::string>>();
    o.seed = j.at("seed").get<uint64_t>();
    o.session.max_steps = j.at("session").at("max_steps").get<int>();
    o.session.idle_window = j.at("session").at("idle_window").get<int>();
    o.session.trigger_keywords =
        j.at("session").at("trigger_keywords").get<std::vector<std::string>>();
    o.session.input_default_text = j.at("session").at("input_default_text").get<std::string>();
    o.session.llm_failure_budget = j.at("session").at("llm_failure_budget").get<int>();
    o.llm.endpoint = j.at("llm").at("endpoint").get<std::string>();
    o.llm.model = j.at("llm").at("model").get<std::string>();
    o.llm.api_key_env = j.at("llm").at("api_key_env").get<std::string>();
    o.llm.timeout_seconds = j.at("llm").at("timeout_seconds").get<int>();
    o.llm.max_retries = j.at("llm").at("max_retries").get<int>();
    o.llm.multimodal = j.at("llm").at("multimodal").get<bool>();
    return o;
}

Crawler make_crawler(const CrawlOptions& options, const std::vector<fleet::AppMetadata>& metadata) {
    Crawler crawler;
    crawler.session_config = options.session;
    crawler.policy_names = options.policies;
    crawler.seed = options.seed;
    if (!options.llm.endpoint.empty()) crawler.endpoint = make_endpoint(options.llm);
    for (const auto& m : metadata) {
        auto path = options.models_dir / (m.app_id + ".json");
        crawler.models.emplace(m.app_id, sim::load_app_model(read_file(path)));
    }
    return crawler;
}

} // namespace

std::vector<sim::DeviceAction> load_actions_file(const std::filesystem::path& path) {
    json j = json::parse(read_file(path));
    std::vector<sim::DeviceAction> actions;
    for (const auto& aj : j) actions.push_back(traversal::device_action_from_json(aj));
    return actions;
}

CrawlSummary crawl(const CrawlOptions& options) {
    auto metadata = fleet::load_metadata_jsonl(options.metadata_file);
    Crawler crawler = make_crawler(options, metadata);

    store::DatasetStore store(options.out_root);
    for (const auto& m : metadata) store.register_app({m.app_id, m.name, m.package, m.category});

    fleet::FleetCoordinator coordinator;
    coordinator.submit_jobs(metadata);

    fleet::InstancePool pool(options.instances);
    std::vector<json> session_events;
    auto on_outcome = [&](const fleet::CrawlJob& job, const fleet::JobOutcome& outcome) {
        flush_outcome(store, session_events, job, outcome);
    };
    auto runner = [&crawler](const fleet::CrawlJob& job, const std::string& instance, int attempt) {
        return crawler.run_job(job, instance, attempt);
    };
    coordinator.run(pool, runner, options.concurrency, on_outcome);

    store.save();
    FleetFiles files(options.out_root);
    json state = coordinator.state_to_json();
    state["config"] = crawler_config_json(options);
    write_json_file(files.state, state);
    write_json_file(files.report, coordinator.report());
    std::vector<json> log_lines;
    for (const auto& e : coordinator.events()) log_lines.push_back(fleet::event_to_json(e));
    write_lines(files.dispatch_log, log_lines, false);
    write_lines(files.session_events, session_events, false);

    auto counts = coordinator.state_counts();
    return {static_cast<int>(coordinator.jobs().size()), counts["completed"],
            counts["awaiting_intervention"], counts["failed"]};
}

std::vector<TicketInfo> list_tickets(const std::filesystem::path& out_root) {
    FleetFiles files(out_root);
    json state = json::parse(read_file(files.state));
    auto coordinator = fleet::FleetCoordinator::state_from_json(state);
    std::vector<TicketInfo> out;
    for (const auto* t : coordinator.list_paused()) {
        out.push_back({t->ticket_id, t->app_id, t->reason, t->frozen_signature, t->created_at_ms});
    }
    return out;
}

namespace {

int resume_tickets(const std::filesystem::path& out_root,
                   const std::vector<std::pair<std::string, std::filesystem::path>>& work) {
    FleetFiles files(out_root);
    json state = json::parse(read_file(files.state));
    auto coordinator = fleet::FleetCoordinator::state_from_json(state);
    CrawlOptions options = options_from_config(state.at("config"));

    auto metadata = fleet::load_metadata_jsonl(options.metadata_file);
    Crawler crawler = make_crawler(options, metadata);
    auto store = store::DatasetStore::open(out_root);

    fleet::InstancePool pool(options.instances);
    std::vector<json> session_events;
    auto on_outcome = [&](const fleet::CrawlJob& job, const fleet::JobOutcome& outcome) {
        flush_outcome(store, session_events, job, outcome);
    };
    auto runner = [&crawler](const fleet::CrawlJob& job, const std::string& instance,
                             const fleet::SessionSnapshot& snapshot,
                             const std::vector<sim::DeviceAction>& actions) {
        return crawler.resume_job(job, instance, snapshot, actions);
    };

    int completed = 0;
    for (const auto& [ticket_id, actions_path] : work) {
        auto actions = load_actions_file(actions_path);
        auto status = coordinator.resume(ticket_id, actions, pool, runner, on_outcome);
        if (status == traversal::SessionStatus::Completed) ++completed;
    }

    store.save();
    json new_state = coordinator.state_to_json();
    new_state["config"] = state.at("config");
    write_json_file(files.state, new_state);
    write_json_file(files.report, coordinator.report());
    std::vector<json> log_lines;
    for (const auto& e : coordinator.events()) log_lines.push_back(fleet::event_to_json(e));
    // the restored coordinator only holds the resume events; the crawl-phase
    // log lines are already on disk
    write_lines(files.dispatch_log, log_lines, true);
    write_lines(files.session_events, session_events, true);
    return completed;
}

} // namespace

int resume_ticket(const std::filesystem::path& out_root, const std::string& ticket_id,
                  const std::filesystem::path& actions_file) {
    return resume_tickets(out_root, {{ticket_id, actions_file}});
}

int resume_all(const std::filesystem::path& out_root, const std::filesystem::path& actions_dir) {
    auto tickets = list_tickets(out_root);
    std::vector<std::pair<std::string, std::filesystem::path>> work;
    for (const auto& t : tickets) {
        work.push_back({t.ticket_id, actions_dir / (t.app_id + ".json")});
    }
    return resume_tickets(out_root, work);
}

} // namespace uicrawl::pipeline
