#pragma once

#include <deque>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "uicrawl/errors.hpp"
#include "uicrawl/traversal.hpp"

namespace uicrawl::fleet {

UICRAWL_DEFINE_ERROR(DuplicateJob);
UICRAWL_DEFINE_ERROR(UnknownTicket);
UICRAWL_DEFINE_ERROR(AlreadyResumed);

struct AppMetadata {
    std::string app_id;
    std::string name;
    std::string package;
    std::string category;
};

std::vector<AppMetadata> load_metadata_jsonl(const std::filesystem::path& path);

enum class JobState { Queued, Running, Completed, AwaitingIntervention, Failed };

std::string_view to_string(JobState s);

struct CrawlJob {
    std::string app_id;
    std::string package;
    std::string category;
    JobState state = JobState::Queued;
    int attempts = 0; // sessions started (first run + retries)
    std::optional<std::string> assigned_instance;
    std::string session_id;
    int steps_taken = 0;
    size_t records_captured = 0;
    std::vector<traversal::Escalation> escalations;
};

// Pool of simulated Android instances; acquisition is lowest-id-first so
// dispatch order is reproducible.
class InstancePool {
public:
    explicit InstancePool(int count, const std::string& prefix = "inst");

    std::optional<std::string> acquire();
    void release(const std::string& id);
    size_t idle_count() const { return idle_.size(); }
    size_t size() const { return all_.size(); }
    const std::vector<std::string>& instance_ids() const { return all_; }

private:
    std::vector<std::string> all_;
    std::set<std::string> idle_;
};

// Everything a finished (or paused/crashed) session hands back to the
// coordinator. Captured records are buffered here and flushed by the single
// writer when the completion is processed.
struct JobOutcome {
    traversal::SessionResult result;
    std::vector<traversal::CapturedRecord> captured;
    std::vector<nlohmann::json> session_events;
    std::vector<sim::DeviceAction> device_action_log;
    uint64_t session_seed = 0;
    std::string session_id;
};

using JobRunner =
    std::function<JobOutcome(const CrawlJob& job, const std::string& instance_id, int attempt)>;

struct SessionSnapshot {
    std::string app_id;
    std::string session_id;
    int attempt = 0;
    uint64_t session_seed = 0;
    int steps_taken = 0;
    std::vector<std::string> records;
    std::vector<traversal::Escalation> escalations;
    nlohmann::json utg;
    std::vector<std::string> history; // signature strings
    std::vector<nlohmann::json> device_action_log;
};

struct InterventionTicket {
    std::string ticket_id;
    std::string app_id;
    std::string reason;
    std::string frozen_signature; // last captured screen
    int record_offset = 0;        // records persisted before the pause
    int64_t created_at_ms = 0;    // designated timestamp field
    bool resumed = false;
    SessionSnapshot snapshot;
};

using ResumeRunner = std::function<JobOutcome(const CrawlJob& job, const std::string& instance_id,
                                              const SessionSnapshot& snapshot,
                                              const std::vector<sim::DeviceAction>& human_actions)>;

// Invoked in the coordinator thread after each processed outcome; the dataset
// writes happen here so ingestion stays single-writer and deterministic.
using OutcomeSink = std::function<void(const CrawlJob& job, const JobOutcome& outcome)>;

struct FleetEvent {
    int seq = 0;
    std::string event; // submit|assign|complete|pause|crash|fail|resume_assign|resume_complete
    std::string app_id;
    std::string instance;
    std::map<std::string, int> counts; // job state counts after this event
    int64_t wall_ms = 0;               // designated timestamp field
};

nlohmann::json event_to_json(const FleetEvent& e);

// Monitors the instance pool, pairs idle instances with queued jobs, retries
// crashes, and parks unprocessable sessions in the intervention queue.
// Sessions execute on worker threads; their completions are processed in
// assignment order, which makes the dispatch log a deterministic total order.
class FleetCoordinator {
public:
    explicit FleetCoordinator(int retry_limit = 2) : retry_limit_(retry_limit) {}

    std::vector<std::string> submit_jobs(const std::vector<AppMetadata>& metadata);

    void run(InstancePool& pool, const JobRunner& runner, int concurrency,
             const OutcomeSink& on_outcome = {});

    std::vector<const InterventionTicket*> list_paused() const;
    const InterventionTicket& ticket(const std::string& ticket_id) const;

    traversal::SessionStatus resume(const std::string& ticket_id,
                                    const std::vector<sim::DeviceAction>& human_actions,
                                    InstancePool& pool, const ResumeRunner& runner,
                                    const OutcomeSink& on_outcome = {});

    const std::vector<CrawlJob>& jobs() const { return jobs_; }
    const std::vector<FleetEvent>& events() const { return events_; }
    const std::vector<InterventionTicket>& tickets() const { return tickets_; }
    int retry_limit() const { return retry_limit_; }

    std::map<std::string, int> state_counts() const;
    nlohmann::json report() const;

    nlohmann::json state_to_json() const;
    static FleetCoordinator state_from_json(const nlohmann::json& j);

private:
    CrawlJob& job_by_app(const std::string& app_id);
    void log_event(const std::string& event, const std::string& app_id,
                   const std::string& instance);
    void process_outcome(CrawlJob& job, JobOutcome& outcome, const std::string& instance,
                         bool resumed, const OutcomeSink& on_outcome);

    int retry_limit_;
    std::vector<CrawlJob> jobs_;
    std::deque<size_t> queue_;
    std::vector<InterventionTicket> tickets_;
    std::vector<FleetEvent> events_;
    int next_ticket_ = 1;
    int next_seq_ = 0;
};

} // namespace uicrawl::fleet
