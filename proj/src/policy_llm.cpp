#include "uicrawl/policy_llm.hpp"

#include <cstdio>
#include <cstdlib>
#include <sstream>

#include <httplib.h>

#include "uicrawl/util.hpp"

namespace uicrawl::llm {

using nlohmann::json;

std::string ChatRequest::joined_text() const {
    std::string out = system_prompt;
    for (const auto& m : messages) {
        out.push_back('\n');
        out += m.text;
    }
    return out;
}

std::vector<TargetView> make_target_views(const vh::VhTree& tree,
                                          const std::vector<vh::ActionTarget>& targets) {
    std::vector<TargetView> views;
    views.reserve(targets.size());
    const double w = tree.screen_width_px;
    const double h = tree.screen_height_px;
    for (const auto& t : targets) {
        const vh::VhNode* node = vh::resolve_path(tree, t.node_path);
        TargetView v;
        v.kind = t.kind;
        if (node) {
            v.class_name = node->class_name;
            v.label = vh::label_of(*node);
            v.bounds = vh::RectF{node->bounds_px.left / w, node->bounds_px.top / h,
                                 node->bounds_px.right / w, node->bounds_px.bottom / h};
        }
        views.push_back(std::move(v));
    }
    return views;
}

namespace {

std::string fmt_bounds(const vh::RectF& b) {
    char buf[80];
    std::snprintf(buf, sizeof(buf), "[%.3f,%.3f,%.3f,%.3f]", b.left, b.top, b.right, b.bottom);
    return buf;
}

} // namespace

ChatRequest build_prompt(PromptGoal goal, const vh::SimplifiedVh& svh,
                         const std::vector<TargetView>& targets,
                         const std::vector<std::string>& recent_actions) {
    ChatRequest req;
    req.system_prompt =
        "You are a UI traversal agent operating an Android device. "
        "Decide exactly one next action from the numbered options.";

    std::ostringstream os;
    os << (goal == PromptGoal::PassLogin ? kGoalLinePassLogin : kGoalLineExplore) << "\n";
    os << "Screen layout (simplified view hierarchy, bounds normalized to [0,1]):\n";
    os << vh::serialize_simplified(svh) << "\n";
    os << "Interactable elements:\n";
    if (targets.empty()) {
        os << "(none)\n";
    } else {
        for (size_t i = 0; i < targets.size(); ++i) {
            const auto& t = targets[i];
            os << (i + 1) << ". action=" << vh::to_string(t.kind) << " class=" << t.class_name;
            if (t.label) os << " label=\"" << *t.label << "\"";
            os << " bounds=" << fmt_bounds(t.bounds) << "\n";
        }
    }
    os << "Recent actions:\n";
    if (recent_actions.empty()) {
        os << "(none)\n";
    } else {
        for (const auto& a : recent_actions) os << "- " << a << "\n";
    }
    os << "Reply with exactly one line in this grammar:\n"
          "ACTION tap <index>\n"
          "ACTION input_text <index> \"<text>\"\n"
          "ACTION scroll <index>\n"
          "ACTION back\n"
          "ACTION declare_done\n"
          "ACTION give_up";
    req.messages.push_back({"user", os.str(), std::nullopt});
    return req;
}

namespace {

std::string_view trim(std::string_view s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

} // namespace

LlmAction parse_action(const ChatResponse& response, int n_targets) {
    std::string_view body = trim(response.content);
    if (body.empty()) throw UnparseableResponse("empty response");
    if (body.find('\n') != std::string_view::npos) {
        throw UnparseableResponse("expected a single line");
    }
    constexpr std::string_view prefix = "ACTION ";
    if (body.substr(0, prefix.size()) != prefix) {
        throw UnparseableResponse("response does not start with ACTION");
    }
    std::string rest(trim(body.substr(prefix.size())));

    auto take_word = [&rest]() {
        size_t sp = rest.find(' ');
        std::string w = sp == std::string::npos ? rest : rest.substr(0, sp);
        rest = sp == std::string::npos ? std::string() : std::string(trim(rest.substr(sp + 1)));
        return w;
    };
    std::string kind_word = take_word();

    LlmAction a;
    if (kind_word == "back" || kind_word == "declare_done" || kind_word == "give_up") {
        if (!rest.empty()) throw UnparseableResponse("unexpected trailing content");
        a.kind = kind_word == "back"           ? LlmActionKind::Back
                 : kind_word == "declare_done" ? LlmActionKind::DeclareDone
                                               : LlmActionKind::GiveUp;
        return a;
    }
    if (kind_word != "tap" && kind_word != "scroll" && kind_word != "input_text") {
        throw UnparseableResponse("unknown action kind: " + kind_word);
    }
    std::string idx_word = take_word();
    if (idx_word.empty() || idx_word.find_first_not_of("0123456789") != std::string::npos) {
        throw UnparseableResponse("missing or non-numeric index");
    }
    a.target_index = std::atoi(idx_word.c_str());
    if (a.target_index < 1 || a.target_index > n_targets) {
        throw IndexOutOfRange("index " + idx_word + " outside [1," + std::to_string(n_targets) + "]");
    }
    if (kind_word == "tap") {
        a.kind = LlmActionKind::Tap;
        if (!rest.empty()) throw UnparseableResponse("unexpected trailing content");
        return a;
    }
    if (kind_word == "scroll") {
        a.kind = LlmActionKind::Scroll;
        if (!rest.empty()) throw UnparseableResponse("unexpected trailing content");
        return a;
    }
    // input_text <index> "<text>"
    if (rest.size() < 2 || rest.front() != '"' || rest.back() != '"') {
        throw UnparseableResponse("input_text requires a quoted payload");
    }
    a.kind = LlmActionKind::InputText;
    a.text = rest.substr(1, rest.size() - 2);
    return a;
}

ScriptedChatEndpoint::ScriptedChatEndpoint(std::vector<ScriptRule> rules)
    : rules_(std::move(rules)) {}

std::vector<ScriptRule> ScriptedChatEndpoint::rules_from_json(const json& j) {
    std::vector<ScriptRule> rules;
    for (const auto& rj : j) {
        ScriptRule r;
        if (rj.contains("contains")) r.contains = rj["contains"].get<std::vector<std::string>>();
        if (rj.contains("not_contains")) {
            r.not_contains = rj["not_contains"].get<std::vector<std::string>>();
        }
        r.response = rj.at("response").get<std::string>();
        rules.push_back(std::move(r));
    }
    return rules;
}

ChatResponse ScriptedChatEndpoint::complete(const ChatRequest& request) {
    std::string text = request.joined_text();
    {
        std::lock_guard<std::mutex> lock(mu_);
        log_.push_back(text);
    }
    for (const auto& r : rules_) {
        bool ok = true;
        for (const auto& c : r.contains) {
            if (text.find(c) == std::string::npos) {
                ok = false;
                break;
            }
        }
        if (!ok) continue;
        for (const auto& nc : r.not_contains) {
            if (text.find(nc) != std::string::npos) {
                ok = false;
                break;
            }
        }
        if (ok) return ChatResponse{r.response};
    }
    throw NoMatchingRule("no scripted rule matches the request");
}

size_t ScriptedChatEndpoint::request_count() const {
    std::lock_guard<std::mutex> lock(mu_);
    return log_.size();
}

std::vector<std::string> ScriptedChatEndpoint::request_texts() const {
    std::lock_guard<std::mutex> lock(mu_);
    return log_;
}

HttpChatEndpoint::HttpChatEndpoint(HttpEndpointConfig config) : config_(std::move(config)) {}

ChatResponse HttpChatEndpoint::complete(const ChatRequest& request) {
    json body;
    body["model"] = config_.model;
    json messages = json::array();
    if (!request.system_prompt.empty()) {
        messages.push_back({{"role", "system"}, {"content", request.system_prompt}});
    }
    for (const auto& m : request.messages) {
        if (m.image_png_base64) {
            json content = json::array();
            content.push_back({{"type", "text"}, {"text", m.text}});
            content.push_back(
                {{"type", "image_url"},
                 {"image_url", {{"url", "data:image/png;base64," + *m.image_png_base64}}}});
            messages.push_back({{"role", m.role}, {"content", std::move(content)}});
        } else {
            messages.push_back({{"role", m.role}, {"content", m.text}});
        }
    }
    body["messages"] = std::move(messages);
    std::string payload = body.dump();

    const char* key = nullptr;
    if (!config_.api_key_env.empty()) key = std::getenv(config_.api_key_env.c_str());

    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        httplib::Client client(config_.base_url);
        client.set_connection_timeout(config_.timeout_seconds, 0);
        client.set_read_timeout(config_.timeout_seconds, 0);
        httplib::Headers headers;
        if (key) headers.emplace("Authorization", std::string("Bearer ") + key);
        auto res = client.Post(config_.path, headers, payload, "application/json");
        if (!res) {
            last_error = "transport failure (" + httplib::to_string(res.error()) + ")";
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        json rj = json::parse(res->body, nullptr, false);
        if (rj.is_discarded() || !rj.contains("choices") || rj["choices"].empty()) {
            last_error = "malformed completion body";
            continue;
        }
        const auto& msg = rj["choices"][0];
        if (msg.contains("message") && msg["message"].contains("content") &&
            msg["message"]["content"].is_string()) {
            return ChatResponse{msg["message"]["content"].get<std::string>()};
        }
        last_error = "completion body lacks message content";
    }
    throw TransportError("chat endpoint failed: " + last_error);
}

traversal::PolicyDecision LlmTraversalPolicy::next_action(traversal::StepContext& ctx) {
    auto targets = vh::extract_interactables(ctx.vh, ctx.config.input_default_text);
    auto views = make_target_views(ctx.vh, targets);
    PromptGoal goal = traversal::detect_trigger(ctx.vh, ctx.config.trigger_keywords)
                          ? PromptGoal::PassLogin
                          : PromptGoal::Explore;
    std::vector<std::string> recent;
    size_t start = recent_actions_.size() > static_cast<size_t>(history_tail_)
                       ? recent_actions_.size() - history_tail_
                       : 0;
    for (size_t i = start; i < recent_actions_.size(); ++i) recent.push_back(recent_actions_[i]);

    ChatRequest req = build_prompt(goal, ctx.svh, views, recent);
    if (endpoint_->multimodal()) {
        auto png = img::encode_png(ctx.screenshot);
        req.messages.front().image_png_base64 = util::base64_encode(png);
    }

    while (true) {
        ChatResponse resp;
        try {
            resp = endpoint_->complete(req);
        } catch (const NoMatchingRule&) {
            consecutive_failures_ = 0;
            return traversal::PolicyDecision::escalate("llm:give_up");
        } catch (const TransportError&) {
            if (++consecutive_failures_ >= ctx.config.llm_failure_budget) {
                consecutive_failures_ = 0;
                return traversal::PolicyDecision::escalate("llm:budget");
            }
            continue;
        }

        LlmAction act;
        try {
            act = parse_action(resp, static_cast<int>(views.size()));
        } catch (const Error&) { // UnparseableResponse / IndexOutOfRange
            if (++consecutive_failures_ >= ctx.config.llm_failure_budget) {
                consecutive_failures_ = 0;
                return traversal::PolicyDecision::escalate("llm:budget");
            }
            continue;
        }

        if (act.kind == LlmActionKind::GiveUp) {
            consecutive_failures_ = 0;
            return traversal::PolicyDecision::escalate("llm:give_up");
        }
        if (act.kind == LlmActionKind::DeclareDone) {
            consecutive_failures_ = 0;
            return traversal::PolicyDecision::yield();
        }

        sim::DeviceAction action;
        if (act.kind == LlmActionKind::Back) {
            action = sim::DeviceAction{sim::DeviceActionKind::Back, {}, {}};
        } else {
            const auto& view = views[act.target_index - 1];
            const auto& target = targets[act.target_index - 1];
            vh::ActionKind want = act.kind == LlmActionKind::Tap        ? vh::ActionKind::Tap
                                  : act.kind == LlmActionKind::Scroll   ? vh::ActionKind::Scroll
                                                                        : vh::ActionKind::InputText;
            if (view.kind != want) {
                // Valid grammar but the indexed entry offers a different
                // action; budget it like a malformed reply.
                if (++consecutive_failures_ >= ctx.config.llm_failure_budget) {
                    consecutive_failures_ = 0;
                    return traversal::PolicyDecision::escalate("llm:budget");
                }
                continue;
            }
            action.path = target.node_path;
            switch (act.kind) {
                case LlmActionKind::Tap: action.kind = sim::DeviceActionKind::Tap; break;
                case LlmActionKind::Scroll: action.kind = sim::DeviceActionKind::Scroll; break;
                default:
                    action.kind = sim::DeviceActionKind::InputText;
                    action.text = act.text;
                    break;
            }
        }
        consecutive_failures_ = 0;
        recent_actions_.push_back(action.describe());
        return traversal::PolicyDecision::act(action);
    }
}

} // namespace uicrawl::llm
