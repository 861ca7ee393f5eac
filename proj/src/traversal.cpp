#include "uicrawl/traversal.hpp"

#include <algorithm>
#include <cctype>

namespace uicrawl::traversal {

using nlohmann::json;

std::string_view to_string(SessionStatus s) {
    switch (s) {
        case SessionStatus::Completed: return "completed";
        case SessionStatus::PausedForHuman: return "paused_for_human";
        case SessionStatus::Crashed: return "crashed";
    }
    return "completed";
}

PolicyDecision RulePolicy::next_action(StepContext& ctx) {
    auto it = ctx.utg.states.find(ctx.signature);
    if (it == ctx.utg.states.end()) {
        return PolicyDecision::escalate("unregistered state");
    }
    UtgState& state = it->second;
    if (!state.pending_targets.empty()) {
        vh::ActionTarget t = state.pending_targets.front();
        state.pending_targets.erase(state.pending_targets.begin());
        return PolicyDecision::act(sim::DeviceAction::from_target(t));
    }
    const bool at_root = ctx.utg.has_root && ctx.signature == ctx.utg.root_signature;
    if (at_root) return PolicyDecision::done();
    if (!state.back_tried) {
        state.back_tried = true;
        return PolicyDecision::act(sim::DeviceAction{sim::DeviceActionKind::Back, {}, {}});
    }
    // Back already spent on this state; repeating it would re-explore a
    // (state, action) pair, so hand the screen up the ladder.
    return PolicyDecision::escalate("stuck");
}

namespace {

std::string lowercase(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

void collect_strings(const vh::VhNode& n, std::string& haystack) {
    if (n.text) {
        haystack += lowercase(*n.text);
        haystack.push_back('\n');
    }
    if (n.content_description) {
        haystack += lowercase(*n.content_description);
        haystack.push_back('\n');
    }
    for (const auto& c : n.children) collect_strings(c, haystack);
}

} // namespace

std::optional<std::string> detect_trigger(const vh::VhTree& vh,
                                          const std::vector<std::string>& keywords) {
    std::string haystack;
    collect_strings(vh.root, haystack);
    for (const auto& kw : keywords) {
        if (haystack.find(lowercase(kw)) != std::string::npos) return kw;
    }
    return std::nullopt;
}

bool detect_idle(const History& history, int window) {
    if (window < 2 || static_cast<int>(history.size()) < window) return false;
    const auto& last = history.back().signature;
    for (size_t i = history.size() - window; i < history.size(); ++i) {
        if (!(history[i].signature == last)) return false;
    }
    return true;
}

RecordSink RecordBuffer::sink() {
    return [this](int step, const img::Image& shot, const vh::VhTree& raw,
                  const vh::SimplifiedVh& svh, const dedup::ScreenSignature& sig) {
        CapturedRecord rec;
        rec.record_id = app_id_ + ":" + session_id_ + ":" + std::to_string(step);
        rec.step = step;
        rec.image = shot;
        rec.raw = raw;
        rec.simplified = svh;
        rec.signature = sig;
        captured_.push_back(std::move(rec));
        return captured_.back().record_id;
    };
}

namespace {

struct PendingEdge {
    dedup::ScreenSignature from;
    sim::DeviceAction action;
    int step = 0;
};

dedup::ScreenSignature signature_of(const img::Image& shot, const vh::SimplifiedVh& svh) {
    return dedup::ScreenSignature{dedup::phash(shot), vh::vh_structural_hash(svh)};
}

} // namespace

SessionResult run_session(sim::SimDevice& device, const std::vector<TraversalPolicy*>& policies,
                          const SessionConfig& config, const RecordSink& sink,
                          const EventSink& events, ResumeState* resume) {
    SessionResult out;
    std::deque<sim::DeviceAction> queued;
    int level = 0;
    if (resume) {
        out.utg = std::move(resume->utg);
        out.history = std::move(resume->history);
        out.steps_taken = resume->steps_taken;
        out.records = std::move(resume->records);
        out.escalations = std::move(resume->escalations);
        queued = std::move(resume->queued_actions);
    }

    vh::VhTree cur_vh;
    vh::SimplifiedVh cur_svh;
    img::Image cur_img;
    dedup::ScreenSignature cur_sig;
    bool need_capture = true;
    std::optional<PendingEdge> pending_edge;

    if (resume) {
        // The paused screen was already captured and recorded when the session
        // paused; restore the view of it without re-recording.
        cur_vh = device.dump_vh();
        cur_img = device.screenshot();
        cur_svh = vh::simplify_vh(cur_vh);
        cur_sig = signature_of(cur_img, cur_svh);
        if (out.history.empty() || !(out.history.back().signature == cur_sig)) {
            throw DeviceFault("restored device state does not match the paused session");
        }
        need_capture = false;
    }

    auto emit = [&](const json& j) {
        if (events) events(j);
    };

    for (;;) {
        if (need_capture) {
            try {
                cur_vh = device.dump_vh();
                cur_img = device.screenshot();
            } catch (const Error&) {
                out.status = SessionStatus::Crashed;
                return out;
            }
            cur_svh = vh::simplify_vh(cur_vh);
            cur_sig = signature_of(cur_img, cur_svh);
            if (sink) {
                std::string rec_id = sink(out.steps_taken, cur_img, cur_vh, cur_svh, cur_sig);
                if (!rec_id.empty()) out.records.push_back(rec_id);
            }
            if (pending_edge) {
                out.utg.edges.push_back(
                    {pending_edge->from, pending_edge->action, cur_sig, pending_edge->step});
                pending_edge.reset();
            }
            if (!out.utg.states.count(cur_sig)) {
                UtgState st;
                st.signature = cur_sig;
                st.first_seen_step = out.steps_taken;
                st.pending_targets = vh::extract_interactables(cur_vh, config.input_default_text);
                out.utg.states.emplace(cur_sig, std::move(st));
                if (!out.utg.has_root) {
                    out.utg.root_signature = cur_sig;
                    out.utg.has_root = true;
                }
            }
            out.history.push_back({out.steps_taken, cur_sig});
            need_capture = false;
        }

        if (out.steps_taken >= config.max_steps) {
            out.status = SessionStatus::Completed; // budget reached counts as success
            return out;
        }

        sim::DeviceAction action;
        std::string acting_policy;
        if (!queued.empty()) {
            action = queued.front();
            queued.pop_front();
            acting_policy = "human";
            level = 0; // automatic traversal resumes at the rule tier afterwards
        } else {
            auto trig = detect_trigger(cur_vh, config.trigger_keywords);
            bool idle = detect_idle(out.history, config.idle_window);
            if (level > 0 && !trig && !idle) level = 0;
            if (level == 0) {
                bool stalled = out.history.size() >= 2 &&
                               out.history[out.history.size() - 2].signature == cur_sig;
                if (trig && stalled) {
                    level = 1;
                    out.escalations.push_back({out.steps_taken, level, "trigger:" + *trig});
                    emit({{"step", out.steps_taken},
                          {"signature", dedup::to_string(cur_sig)},
                          {"escalation", {{"to_level", level}, {"reason", "trigger:" + *trig}}}});
                } else if (idle) {
                    level = 1;
                    out.escalations.push_back({out.steps_taken, level, "idle"});
                    emit({{"step", out.steps_taken},
                          {"signature", dedup::to_string(cur_sig)},
                          {"escalation", {{"to_level", level}, {"reason", "idle"}}}});
                }
            }

            bool decided = false;
            int consults = 0;
            while (!decided) {
                if (level >= static_cast<int>(policies.size())) {
                    out.status = SessionStatus::PausedForHuman;
                    return out;
                }
                if (++consults > static_cast<int>(policies.size()) + 1) {
                    out.status = SessionStatus::PausedForHuman;
                    return out;
                }
                StepContext ctx{cur_vh, cur_svh, cur_img, cur_sig, out.utg, out.history, config};
                PolicyDecision d = policies[level]->next_action(ctx);
                switch (d.kind) {
                    case PolicyDecision::Kind::Done:
                        out.status = SessionStatus::Completed;
                        return out;
                    case PolicyDecision::Kind::Escalate:
                        out.escalations.push_back({out.steps_taken, level + 1, d.reason});
                        emit({{"step", out.steps_taken},
                              {"signature", dedup::to_string(cur_sig)},
                              {"escalation", {{"to_level", level + 1}, {"reason", d.reason}}}});
                        ++level;
                        break;
                    case PolicyDecision::Kind::Yield:
                        level = 0;
                        break;
                    case PolicyDecision::Kind::Act:
                        action = d.action;
                        acting_policy = std::string(policies[level]->name());
                        decided = true;
                        break;
                }
            }
        }

        sim::PerformResult res;
        try {
            res = device.perform(action);
        } catch (const Error&) {
            out.status = SessionStatus::Crashed;
            return out;
        }
        emit({{"step", out.steps_taken},
              {"signature", dedup::to_string(cur_sig)},
              {"action", action.describe()},
              {"policy_level", acting_policy}});
        pending_edge = PendingEdge{cur_sig, action, out.steps_taken};
        ++out.steps_taken;
        if (res.status == sim::PerformStatus::AppCrashed) {
            out.status = SessionStatus::Crashed;
            return out;
        }
        need_capture = true;
    }
}

json utg_to_json(const Utg& utg) {
    json states = json::array();
    for (const auto& [sig, st] : utg.states) {
        json pend = json::array();
        for (const auto& t : st.pending_targets) {
            json tj;
            tj["kind"] = std::string(vh::to_string(t.kind));
            tj["path"] = t.node_path;
            if (t.input_payload) tj["text"] = *t.input_payload;
            pend.push_back(std::move(tj));
        }
        states.push_back({{"signature", dedup::to_string(sig)},
                          {"first_seen_step", st.first_seen_step},
                          {"pending", std::move(pend)},
                          {"back_tried", st.back_tried}});
    }
    json edges = json::array();
    for (const auto& e : utg.edges) {
        edges.push_back({{"from", dedup::to_string(e.from)},
                         {"action", device_action_to_json(e.action)},
                         {"to", dedup::to_string(e.to)},
                         {"step", e.step}});
    }
    json j;
    j["states"] = std::move(states);
    j["edges"] = std::move(edges);
    j["has_root"] = utg.has_root;
    if (utg.has_root) j["root"] = dedup::to_string(utg.root_signature);
    return j;
}

Utg utg_from_json(const json& j) {
    Utg utg;
    for (const auto& sj : j.at("states")) {
        UtgState st;
        st.signature = dedup::signature_from_string(sj.at("signature").get<std::string>());
        st.first_seen_step = sj.at("first_seen_step").get<int>();
        st.back_tried = sj.at("back_tried").get<bool>();
        for (const auto& tj : sj.at("pending")) {
            vh::ActionTarget t;
            t.kind = *vh::action_kind_from_string(tj.at("kind").get<std::string>());
            t.node_path = tj.at("path").get<std::vector<int>>();
            if (tj.contains("text")) t.input_payload = tj["text"].get<std::string>();
            st.pending_targets.push_back(std::move(t));
        }
        utg.states.emplace(st.signature, std::move(st));
    }
    for (const auto& ej : j.at("edges")) {
        UtgEdge e;
        e.from = dedup::signature_from_string(ej.at("from").get<std::string>());
        e.action = device_action_from_json(ej.at("action"));
        e.to = dedup::signature_from_string(ej.at("to").get<std::string>());
        e.step = ej.at("step").get<int>();
        utg.edges.push_back(std::move(e));
    }
    utg.has_root = j.at("has_root").get<bool>();
    if (utg.has_root) utg.root_signature = dedup::signature_from_string(j.at("root").get<std::string>());
    return utg;
}

json device_action_to_json(const sim::DeviceAction& a) {
    json j;
    j["kind"] = std::string(sim::to_string(a.kind));
    j["path"] = a.path;
    if (a.kind == sim::DeviceActionKind::InputText) j["text"] = a.text;
    return j;
}

sim::DeviceAction device_action_from_json(const json& j) {
    sim::DeviceAction a;
    auto kind = sim::device_action_kind_from_string(j.at("kind").get<std::string>());
    if (!kind) throw Error("unknown device action kind in JSON");
    a.kind = *kind;
    if (j.contains("path")) a.path = j["path"].get<std::vector<int>>();
    if (j.contains("text")) a.text = j["text"].get<std::string>();
    return a;
}

} // namespace uicrawl::traversal
