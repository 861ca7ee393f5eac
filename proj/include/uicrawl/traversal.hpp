#pragma once

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "uicrawl/appsim.hpp"
#include "uicrawl/dedup.hpp"
#include "uicrawl/errors.hpp"
#include "uicrawl/vh.hpp"

namespace uicrawl::traversal {

UICRAWL_DEFINE_ERROR(DeviceFault);

struct SessionConfig {
    int max_steps = 1000;
    int idle_window = 10;
    std::vector<std::string> trigger_keywords = {"login", "sign in"};
    std::string input_default_text = "hello world";
    int llm_failure_budget = 3;
};

struct UtgState {
    dedup::ScreenSignature signature;
    int first_seen_step = 0;
    std::vector<vh::ActionTarget> pending_targets; // shrinks front-first as tried
    bool back_tried = false;
};

struct UtgEdge {
    dedup::ScreenSignature from;
    sim::DeviceAction action;
    dedup::ScreenSignature to;
    int step = 0;
};

struct Utg {
    std::map<dedup::ScreenSignature, UtgState> states;
    std::vector<UtgEdge> edges;
    dedup::ScreenSignature root_signature;
    bool has_root = false;
};

struct HistoryEntry {
    int step = 0;
    dedup::ScreenSignature signature;
};
using History = std::vector<HistoryEntry>;

enum class SessionStatus { Completed, PausedForHuman, Crashed };

std::string_view to_string(SessionStatus s);

struct Escalation {
    int step = 0;
    int to_level = 0;
    std::string reason;
};

struct SessionResult {
    SessionStatus status = SessionStatus::Completed;
    int steps_taken = 0;
    Utg utg;
    std::vector<std::string> records; // record ids, capture order
    std::vector<Escalation> escalations;
    History history;
};

// Everything a policy may look at for one decision. The Utg reference is
// mutable because the rule policy consumes pending targets.
struct StepContext {
    const vh::VhTree& vh;
    const vh::SimplifiedVh& svh;
    const img::Image& screenshot;
    dedup::ScreenSignature signature;
    Utg& utg;
    const History& history;
    const SessionConfig& config;
};

struct PolicyDecision {
    enum class Kind { Act, Done, Escalate, Yield };
    Kind kind = Kind::Act;
    sim::DeviceAction action;
    std::string reason;

    static PolicyDecision act(sim::DeviceAction a) { return {Kind::Act, std::move(a), {}}; }
    static PolicyDecision done() { return {Kind::Done, {}, {}}; }
    static PolicyDecision escalate(std::string why) { return {Kind::Escalate, {}, std::move(why)}; }
    static PolicyDecision yield() { return {Kind::Yield, {}, {}}; }
};

class TraversalPolicy {
public:
    virtual ~TraversalPolicy() = default;
    virtual std::string_view name() const = 0;
    virtual PolicyDecision next_action(StepContext& ctx) = 0;
};

// Fixed interaction rules: try each pending target of the current state once,
// back out of exhausted states, finish at an exhausted root. Escalates instead
// of repeating (state, back) on screens that swallow back.
class RulePolicy : public TraversalPolicy {
public:
    std::string_view name() const override { return "rules"; }
    PolicyDecision next_action(StepContext& ctx) override;
};

// Case-insensitive substring search over all node text and labels; returns the
// first matching keyword in keyword-list order.
std::optional<std::string> detect_trigger(const vh::VhTree& vh,
                                          const std::vector<std::string>& keywords);

// True iff the last `window` recorded signatures are all equal.
bool detect_idle(const History& history, int window);

// Persists one captured screen; returns a record id (empty to skip tracking).
using RecordSink = std::function<std::string(int step, const img::Image& screenshot,
                                             const vh::VhTree& raw, const vh::SimplifiedVh& svh,
                                             const dedup::ScreenSignature& signature)>;

using EventSink = std::function<void(const nlohmann::json& event)>;

// State needed to continue a paused session: the as-paused bookkeeping plus
// the batch of human actions to apply before automatic traversal resumes.
struct ResumeState {
    Utg utg;
    History history;
    int steps_taken = 0;
    std::vector<std::string> records;
    std::vector<Escalation> escalations;
    std::deque<sim::DeviceAction> queued_actions;
};

// The capture -> record -> decide -> act loop. `device` must be launched.
// Policies are consulted in ladder order; escalating past the last one pauses
// the session for human intervention.
SessionResult run_session(sim::SimDevice& device, const std::vector<TraversalPolicy*>& policies,
                          const SessionConfig& config, const RecordSink& sink,
                          const EventSink& events = {}, ResumeState* resume = nullptr);

// In-memory capture buffer handed to run_session as its sink; the single
// writer (the coordinator) flushes buffers to the dataset store afterwards.
struct CapturedRecord {
    std::string record_id;
    int step = 0;
    img::Image image;
    vh::VhTree raw;
    vh::SimplifiedVh simplified;
    dedup::ScreenSignature signature;
};

class RecordBuffer {
public:
    RecordBuffer(std::string app_id, std::string session_id)
        : app_id_(std::move(app_id)), session_id_(std::move(session_id)) {}

    RecordSink sink();
    std::vector<CapturedRecord>& captured() { return captured_; }
    const std::string& app_id() const { return app_id_; }
    const std::string& session_id() const { return session_id_; }

private:
    std::string app_id_;
    std::string session_id_;
    std::vector<CapturedRecord> captured_;
};

nlohmann::json utg_to_json(const Utg& utg);
Utg utg_from_json(const nlohmann::json& j);
nlohmann::json device_action_to_json(const sim::DeviceAction& a);
sim::DeviceAction device_action_from_json(const nlohmann::json& j);

} // namespace uicrawl::traversal
