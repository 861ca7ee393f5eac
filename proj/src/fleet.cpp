#include "uicrawl/fleet.hpp"

#include <fstream>
#include <future>

#include "uicrawl/util.hpp"

namespace uicrawl::fleet {

using nlohmann::json;

std::vector<AppMetadata> load_metadata_jsonl(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open metadata file: " + path.string());
    std::vector<AppMetadata> out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) throw Error("corrupt metadata line in " + path.string());
        out.push_back({j.at("app_id").get<std::string>(), j.value("name", std::string()),
                       j.at("package").get<std::string>(), j.value("category", std::string())});
    }
    return out;
}

std::string_view to_string(JobState s) {
    switch (s) {
        case JobState::Queued: return "queued";
        case JobState::Running: return "running";
        case JobState::Completed: return "completed";
        case JobState::AwaitingIntervention: return "awaiting_intervention";
        case JobState::Failed: return "failed";
    }
    return "queued";
}

InstancePool::InstancePool(int count, const std::string& prefix) {
    for (int i = 0; i < count; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%s%03d", prefix.c_str(), i);
        all_.push_back(buf);
        idle_.insert(buf);
    }
}

std::optional<std::string> InstancePool::acquire() {
    if (idle_.empty()) return std::nullopt;
    std::string id = *idle_.begin();
    idle_.erase(idle_.begin());
    return id;
}

void InstancePool::release(const std::string& id) { idle_.insert(id); }

json event_to_json(const FleetEvent& e) {
    json j;
    j["seq"] = e.seq;
    j["event"] = e.event;
    if (!e.app_id.empty()) j["app_id"] = e.app_id;
    if (!e.instance.empty()) j["instance"] = e.instance;
    j["counts"] = e.counts;
    j["wall_ms"] = e.wall_ms;
    return j;
}

std::vector<std::string> FleetCoordinator::submit_jobs(const std::vector<AppMetadata>& metadata) {
    // Reject duplicates within the submission and against live jobs.
    std::set<std::string> incoming;
    for (const auto& m : metadata) {
        if (!incoming.insert(m.package).second) {
            throw DuplicateJob("duplicate package in submission: " + m.package);
        }
    }
    for (const auto& j : jobs_) {
        if (incoming.count(j.package) &&
            (j.state == JobState::Queued || j.state == JobState::Running)) {
            throw DuplicateJob("package already queued: " + j.package);
        }
    }
    std::vector<std::string> ids;
    for (const auto& m : metadata) {
        CrawlJob job;
        job.app_id = m.app_id;
        job.package = m.package;
        job.category = m.category;
        jobs_.push_back(std::move(job));
        queue_.push_back(jobs_.size() - 1);
        ids.push_back(m.app_id);
        log_event("submit", m.app_id, {});
    }
    return ids;
}

std::map<std::string, int> FleetCoordinator::state_counts() const {
    std::map<std::string, int> counts{{"queued", 0},
                                      {"running", 0},
                                      {"completed", 0},
                                      {"awaiting_intervention", 0},
                                      {"failed", 0}};
    for (const auto& j : jobs_) counts[std::string(to_string(j.state))]++;
    return counts;
}

void FleetCoordinator::log_event(const std::string& event, const std::string& app_id,
                                 const std::string& instance) {
    FleetEvent e;
    e.seq = next_seq_++;
    e.event = event;
    e.app_id = app_id;
    e.instance = instance;
    e.counts = state_counts();
    e.wall_ms = util::wall_clock_ms();
    events_.push_back(std::move(e));
}

void FleetCoordinator::process_outcome(CrawlJob& job, JobOutcome& outcome,
                                       const std::string& instance, bool resumed,
                                       const OutcomeSink& on_outcome) {
    job.steps_taken = outcome.result.steps_taken;
    job.records_captured = outcome.result.records.size();
    job.escalations = outcome.result.escalations;
    job.assigned_instance.reset();
    job.session_id = outcome.session_id;

    switch (outcome.result.status) {
        case traversal::SessionStatus::Completed:
            job.state = JobState::Completed;
            log_event(resumed ? "resume_complete" : "complete", job.app_id, instance);
            break;
        case traversal::SessionStatus::PausedForHuman: {
            job.state = JobState::AwaitingIntervention;
            InterventionTicket t;
            char buf[16];
            std::snprintf(buf, sizeof(buf), "T%04d", next_ticket_++);
            t.ticket_id = buf;
            t.app_id = job.app_id;
            t.reason = outcome.result.escalations.empty()
                           ? "unspecified"
                           : outcome.result.escalations.back().reason;
            t.frozen_signature = outcome.result.history.empty()
                                     ? ""
                                     : dedup::to_string(outcome.result.history.back().signature);
            t.record_offset = static_cast<int>(outcome.result.records.size());
            t.created_at_ms = util::wall_clock_ms();

            SessionSnapshot snap;
            snap.app_id = job.app_id;
            snap.session_id = outcome.session_id;
            snap.attempt = job.attempts - 1;
            snap.session_seed = outcome.session_seed;
            snap.steps_taken = outcome.result.steps_taken;
            snap.records = outcome.result.records;
            snap.escalations = outcome.result.escalations;
            snap.utg = traversal::utg_to_json(outcome.result.utg);
            for (const auto& h : outcome.result.history) {
                snap.history.push_back(dedup::to_string(h.signature));
            }
            for (const auto& a : outcome.device_action_log) {
                snap.device_action_log.push_back(traversal::device_action_to_json(a));
            }
            t.snapshot = std::move(snap);
            tickets_.push_back(std::move(t));
            log_event("pause", job.app_id, instance);
            break;
        }
        case traversal::SessionStatus::Crashed:
            log_event("crash", job.app_id, instance);
            if (!resumed && job.attempts <= retry_limit_) {
                job.state = JobState::Queued;
                for (size_t i = 0; i < jobs_.size(); ++i) {
                    if (&jobs_[i] == &job) {
                        queue_.push_back(i);
                        break;
                    }
                }
            } else {
                job.state = JobState::Failed;
                log_event("fail", job.app_id, instance);
            }
            break;
    }
    if (on_outcome) on_outcome(job, outcome);
}

void FleetCoordinator::run(InstancePool& pool, const JobRunner& runner, int concurrency,
                           const OutcomeSink& on_outcome) {
    if (concurrency <= 0) concurrency = static_cast<int>(pool.size());

    struct Active {
        size_t job_index;
        std::string instance;
        std::future<JobOutcome> future;
    };
    std::deque<Active> active;

    while (!queue_.empty() || !active.empty()) {
        while (!queue_.empty() && static_cast<int>(active.size()) < concurrency) {
            auto instance = pool.acquire();
            if (!instance) break;
            size_t idx = queue_.front();
            queue_.pop_front();
            CrawlJob& job = jobs_[idx];
            job.state = JobState::Running;
            job.assigned_instance = *instance;
            job.attempts += 1;
            log_event("assign", job.app_id, *instance);
            int attempt = job.attempts - 1;
            CrawlJob job_copy = job;
            std::string inst = *instance;
            active.push_back({idx, inst,
                              std::async(std::launch::async, [&runner, job_copy, inst, attempt] {
                                  return runner(job_copy, inst, attempt);
                              })});
        }
        if (active.empty()) {
            if (!queue_.empty()) {
                throw Error("no instances available for queued jobs");
            }
            break;
        }
        // Completions are processed in assignment order so every run of the
        // same inputs yields the same dispatch log.
        Active front = std::move(active.front());
        active.pop_front();
        JobOutcome outcome = front.future.get();
        pool.release(front.instance);
        process_outcome(jobs_[front.job_index], outcome, front.instance, false, on_outcome);
    }
}

std::vector<const InterventionTicket*> FleetCoordinator::list_paused() const {
    std::vector<const InterventionTicket*> out;
    for (const auto& t : tickets_) {
        if (!t.resumed) out.push_back(&t);
    }
    return out;
}

const InterventionTicket& FleetCoordinator::ticket(const std::string& ticket_id) const {
    for (const auto& t : tickets_) {
        if (t.ticket_id == ticket_id) return t;
    }
    throw UnknownTicket("unknown ticket: " + ticket_id);
}

traversal::SessionStatus FleetCoordinator::resume(const std::string& ticket_id,
                                                  const std::vector<sim::DeviceAction>& human_actions,
                                                  InstancePool& pool, const ResumeRunner& runner,
                                                  const OutcomeSink& on_outcome) {
    InterventionTicket* ticket = nullptr;
    for (auto& t : tickets_) {
        if (t.ticket_id == ticket_id) {
            ticket = &t;
            break;
        }
    }
    if (!ticket) throw UnknownTicket("unknown ticket: " + ticket_id);
    if (ticket->resumed) throw AlreadyResumed("ticket already resumed: " + ticket_id);

    CrawlJob& job = job_by_app(ticket->app_id);
    auto instance = pool.acquire();
    if (!instance) throw Error("no idle instance available for resume");
    job.state = JobState::Running;
    job.assigned_instance = *instance;
    log_event("resume_assign", job.app_id, *instance);

    JobOutcome outcome = runner(job, *instance, ticket->snapshot, human_actions);
    pool.release(*instance);
    ticket->resumed = true;
    process_outcome(job, outcome, *instance, true, on_outcome);
    return outcome.result.status;
}

CrawlJob& FleetCoordinator::job_by_app(const std::string& app_id) {
    for (auto& j : jobs_) {
        if (j.app_id == app_id) return j;
    }
    throw Error("no job for app " + app_id);
}

json FleetCoordinator::report() const {
    std::vector<const CrawlJob*> sorted;
    for (const auto& j : jobs_) sorted.push_back(&j);
    std::sort(sorted.begin(), sorted.end(),
              [](const CrawlJob* a, const CrawlJob* b) { return a->app_id < b->app_id; });
    json jobs = json::array();
    for (const auto* j : sorted) {
        json esc = json::array();
        for (const auto& e : j->escalations) {
            esc.push_back({{"step", e.step}, {"to_level", e.to_level}, {"reason", e.reason}});
        }
        jobs.push_back({{"app_id", j->app_id},
                        {"package", j->package},
                        {"category", j->category},
                        {"status", std::string(to_string(j->state))},
                        {"attempts", j->attempts},
                        {"steps", j->steps_taken},
                        {"records", j->records_captured},
                        {"session_id", j->session_id},
                        {"escalations", std::move(esc)}});
    }
    json out;
    out["jobs"] = std::move(jobs);
    out["summary"] = state_counts();
    return out;
}

namespace {

json snapshot_to_json(const SessionSnapshot& s) {
    json j;
    j["app_id"] = s.app_id;
    j["session_id"] = s.session_id;
    j["attempt"] = s.attempt;
    j["session_seed"] = s.session_seed;
    j["steps_taken"] = s.steps_taken;
    j["records"] = s.records;
    json esc = json::array();
    for (const auto& e : s.escalations) {
        esc.push_back({{"step", e.step}, {"to_level", e.to_level}, {"reason", e.reason}});
    }
    j["escalations"] = std::move(esc);
    j["utg"] = s.utg;
    j["history"] = s.history;
    j["device_action_log"] = s.device_action_log;
    return j;
}

SessionSnapshot snapshot_from_json(const json& j) {
    SessionSnapshot s;
    s.app_id = j.at("app_id").get<std::string>();
    s.session_id = j.at("session_id").get<std::string>();
    s.attempt = j.at("attempt").get<int>();
    s.session_seed = j.at("session_seed").get<uint64_t>();
    s.steps_taken = j.at("steps_taken").get<int>();
    s.records = j.at("records").get<std::vector<std::string>>();
    for (const auto& e : j.at("escalations")) {
        s.escalations.push_back({e.at("step").get<int>(), e.at("to_level").get<int>(),
                                 e.at("reason").get<std::string>()});
    }
    s.utg = j.at("utg");
    s.history = j.at("history").get<std::vector<std::string>>();
    for (const auto& a : j.at("device_action_log")) s.device_action_log.push_back(a);
    return s;
}

} // namespace

json FleetCoordinator::state_to_json() const {
    json j;
    j["retry_limit"] = retry_limit_;
    j["next_ticket"] = next_ticket_;
    j["next_seq"] = next_seq_;
    json jobs = json::array();
    for (const auto& job : jobs_) {
        json esc = json::array();
        for (const auto& e : job.escalations) {
            esc.push_back({{"step", e.step}, {"to_level", e.to_level}, {"reason", e.reason}});
        }
        jobs.push_back({{"app_id", job.app_id},
                        {"package", job.package},
                        {"category", job.category},
                        {"state", std::string(to_string(job.state))},
                        {"attempts", job.attempts},
                        {"session_id", job.session_id},
                        {"steps_taken", job.steps_taken},
                        {"records_captured", job.records_captured},
                        {"escalations", std::move(esc)}});
    }
    j["jobs"] = std::move(jobs);
    json tickets = json::array();
    for (const auto& t : tickets_) {
        tickets.push_back({{"ticket_id", t.ticket_id},
                           {"app_id", t.app_id},
                           {"reason", t.reason},
                           {"frozen_signature", t.frozen_signature},
                           {"record_offset", t.record_offset},
                           {"created_at_ms", t.created_at_ms},
                           {"resumed", t.resumed},
                           {"snapshot", snapshot_to_json(t.snapshot)}});
    }
    j["tickets"] = std::move(tickets);
    json queue = json::array();
    for (size_t idx : queue_) queue.push_back(idx);
    j["queue"] = std::move(queue);
    return j;
}

FleetCoordinator FleetCoordinator::state_from_json(const json& j) {
    FleetCoordinator c(j.at("retry_limit").get<int>());
    c.next_ticket_ = j.at("next_ticket").get<int>();
    c.next_seq_ = j.at("next_seq").get<int>();
    for (const auto& jj : j.at("jobs")) {
        CrawlJob job;
        job.app_id = jj.at("app_id").get<std::string>();
        job.package = jj.at("package").get<std::string>();
        job.category = jj.at("category").get<std::string>();
        std::string state = jj.at("state").get<std::string>();
        if (state == "queued") job.state = JobState::Queued;
        else if (state == "running") job.state = JobState::Running;
        else if (state == "completed") job.state = JobState::Completed;
        else if (state == "awaiting_intervention") job.state = JobState::AwaitingIntervention;
        else job.state = JobState::Failed;
        job.attempts = jj.at("attempts").get<int>();
        job.session_id = jj.at("session_id").get<std::string>();
        job.steps_taken = jj.at("steps_taken").get<int>();
        job.records_captured = jj.at("records_captured").get<size_t>();
        for (const auto& e : jj.at("escalations")) {
            job.escalations.push_back({e.at("step").get<int>(), e.at("to_level").get<int>(),
                                       e.at("reason").get<std::string>()});
        }
        c.jobs_.push_back(std::move(job));
    }
    for (const auto& tj : j.at("tickets")) {
        InterventionTicket t;
        t.ticket_id = tj.at("ticket_id").get<std::string>();
        t.app_id = tj.at("app_id").get<std::string>();
        t.reason = tj.at("reason").get<std::string>();
        t.frozen_signature = tj.at("frozen_signature").get<std::string>();
        t.record_offset = tj.at("record_offset").get<int>();
        t.created_at_ms = tj.at("created_at_ms").get<int64_t>();
        t.resumed = tj.at("resumed").get<bool>();
        t.snapshot = snapshot_from_json(tj.at("snapshot"));
        c.tickets_.push_back(std::move(t));
    }
    for (const auto& q : j.at("queue")) c.queue_.push_back(q.get<size_t>());
    return c;
}

} // namespace uicrawl::fleet
