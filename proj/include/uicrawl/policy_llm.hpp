#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "uicrawl/errors.hpp"
#include "uicrawl/traversal.hpp"
#include "uicrawl/vh.hpp"

namespace uicrawl::llm {

UICRAWL_DEFINE_ERROR(UnparseableResponse);
UICRAWL_DEFINE_ERROR(IndexOutOfRange);
UICRAWL_DEFINE_ERROR(NoMatchingRule);
UICRAWL_DEFINE_ERROR(TransportError);

struct ChatMessage {
    std::string role;
    std::string text;
    std::optional<std::string> image_png_base64;
};

struct ChatRequest {
    std::string system_prompt;
    std::vector<ChatMessage> messages;

    std::string joined_text() const; // system + message texts, newline separated
};

struct ChatResponse {
    std::string content;
};

class ChatEndpoint {
public:
    virtual ~ChatEndpoint() = default;
    virtual ChatResponse complete(const ChatRequest& request) = 0;
    virtual bool multimodal() const { return false; }
};

enum class PromptGoal { PassLogin, Explore };

// Goal statements; the scripted transcripts key on these lines.
inline constexpr std::string_view kGoalLinePassLogin =
    "Goal: complete the sign-in or registration flow on this screen so traversal can continue.";
inline constexpr std::string_view kGoalLineExplore =
    "Goal: traverse the entire app to capture as many distinct UI states as possible.";

// One row of the numbered element list shown to the model.
struct TargetView {
    vh::ActionKind kind = vh::ActionKind::Tap;
    std::string class_name;
    std::optional<std::string> label;
    vh::RectF bounds;
};

std::vector<TargetView> make_target_views(const vh::VhTree& tree,
                                          const std::vector<vh::ActionTarget>& targets);

// Deterministic prompt: goal line, simplified VH, numbered interactables,
// recent actions, output grammar.
ChatRequest build_prompt(PromptGoal goal, const vh::SimplifiedVh& svh,
                         const std::vector<TargetView>& targets,
                         const std::vector<std::string>& recent_actions);

enum class LlmActionKind { Tap, InputText, Scroll, Back, DeclareDone, GiveUp };

struct LlmAction {
    LlmActionKind kind = LlmActionKind::GiveUp;
    int target_index = 0; // 1-based into the numbered list
    std::string text;
};

// Strict line grammar: ACTION <kind> [<index>] ["<text>"]. No repair
// heuristics; anything else raises UnparseableResponse, indexes outside
// [1, n_targets] raise IndexOutOfRange.
LlmAction parse_action(const ChatResponse& response, int n_targets);

// Test double: canned responses selected by the first rule whose `contains`
// strings all appear in the request text and whose `not_contains` strings do
// not. Records every request; safe to share across concurrent sessions.
struct ScriptRule {
    std::vector<std::string> contains;
    std::vector<std::string> not_contains;
    std::string response;
};

class ScriptedChatEndpoint : public ChatEndpoint {
public:
    explicit ScriptedChatEndpoint(std::vector<ScriptRule> rules);
    static std::vector<ScriptRule> rules_from_json(const nlohmann::json& j);

    ChatResponse complete(const ChatRequest& request) override;
    size_t request_count() const;
    std::vector<std::string> request_texts() const;

private:
    std::vector<ScriptRule> rules_;
    mutable std::mutex mu_;
    std::vector<std::string> log_;
};

struct HttpEndpointConfig {
    std::string base_url;                           // e.g. http://localhost:8000
    std::string path = "/v1/chat/completions";
    std::string model = "gpt-4o";
    std::string api_key_env = "UICRAWL_API_KEY";    // key read from env, never flags
    int timeout_seconds = 30;
    int max_retries = 2;
    bool multimodal = false;
};

// Plain chat-completions client over HTTP.
class HttpChatEndpoint : public ChatEndpoint {
public:
    explicit HttpChatEndpoint(HttpEndpointConfig config);
    ChatResponse complete(const ChatRequest& request) override;
    bool multimodal() const override { return config_.multimodal; }

private:
    HttpEndpointConfig config_;
};

// TraversalPolicy adapter: prompts the endpoint, parses the constrained
// action grammar, budgets failures, and de-escalates on declare_done.
class LlmTraversalPolicy : public traversal::TraversalPolicy {
public:
    explicit LlmTraversalPolicy(ChatEndpoint* endpoint, int history_tail = 8)
        : endpoint_(endpoint), history_tail_(history_tail) {}

    std::string_view name() const override { return "llm"; }
    traversal::PolicyDecision next_action(traversal::StepContext& ctx) override;

private:
    ChatEndpoint* endpoint_;
    int history_tail_;
    int consecutive_failures_ = 0;
    std::vector<std::string> recent_actions_;
};

} // namespace uicrawl::llm
