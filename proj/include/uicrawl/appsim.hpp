#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "uicrawl/errors.hpp"
#include "uicrawl/image.hpp"
#include "uicrawl/vh.hpp"

namespace uicrawl::sim {

UICRAWL_DEFINE_ERROR(MalformedSpec);
UICRAWL_DEFINE_ERROR(DanglingTransition);
UICRAWL_DEFINE_ERROR(NotInstalled);
UICRAWL_DEFINE_ERROR(NotLaunched);
UICRAWL_DEFINE_ERROR(UnknownAction);

// Device-level action: a vh::ActionTarget plus the human_solve escape hatch
// used when annotators resolve captcha-style gates.
enum class DeviceActionKind { Tap, LongTap, InputText, Scroll, Back, HumanSolve };

std::string_view to_string(DeviceActionKind k);
std::optional<DeviceActionKind> device_action_kind_from_string(std::string_view s);

struct DeviceAction {
    DeviceActionKind kind = DeviceActionKind::Tap;
    std::vector<int> path;
    std::string text; // input_text payload
    bool operator==(const DeviceAction&) const = default;

    static DeviceAction from_target(const vh::ActionTarget& t);
    std::string describe() const; // stable one-line form used in logs/prompts
};

struct ScreenSpec {
    std::string screen_id;
    uint64_t render_seed = 0;
    std::optional<std::string> back_to;
    vh::VhTree tree;
};

struct TransitionSpec {
    std::string from;
    DeviceActionKind kind = DeviceActionKind::Tap;
    std::vector<int> path;
    std::optional<std::string> text_equals;
    std::string to;
    double crash_probability = 0.0;
};

enum class GateKind { Login, Captcha, IdleLoop };

std::string_view to_string(GateKind k);

struct CredentialField {
    std::vector<int> path;
    std::string text;
};

struct GateSpec {
    GateKind kind = GateKind::Login;
    std::string guard_screen;
    std::string to;
    std::vector<CredentialField> credentials; // login only
    std::vector<int> submit_path;             // login only
};

struct AppModel {
    std::string app_id;
    std::string package_name;
    std::string category;
    int screen_width = 0;
    int screen_height = 0;
    std::string initial_screen;
    std::map<std::string, ScreenSpec> screens;
    std::vector<TransitionSpec> transitions;
    std::vector<GateSpec> gates;

    const ScreenSpec& screen(const std::string& id) const;
    const GateSpec* gate_for(const std::string& screen_id) const;
};

AppModel load_app_model(std::string_view document);
std::string serialize_app_model(const AppModel& model);

// Deterministic raster: background colored from render_seed, one filled
// rectangle per visible node, color from a hash of (class, label).
img::Image render(const ScreenSpec& screen);

enum class PerformStatus { Transitioned, NoEffect, AppCrashed };

struct PerformResult {
    PerformStatus status = PerformStatus::NoEffect;
    std::string to_screen;
};

enum class DeviceStatus { Idle, Busy, Faulted };

class SimDevice {
public:
    explicit SimDevice(std::string instance_id) : instance_id_(std::move(instance_id)) {}

    const std::string& instance_id() const { return instance_id_; }
    DeviceStatus status() const { return status_; }
    const std::string& current_screen() const { return current_screen_; }
    const std::vector<DeviceAction>& action_log() const { return action_log_; }
    const AppModel& app() const;

    void install(AppModel app);
    void launch(uint64_t session_seed);
    img::Image screenshot() const;
    vh::VhTree dump_vh() const;
    PerformResult perform(const DeviceAction& action);
    void reset();

private:
    PerformResult apply_gate(const GateSpec& gate, const DeviceAction& action);
    PerformResult apply_transitions(const DeviceAction& action);
    PerformResult go_back();
    PerformResult move_to(const std::string& screen_id, double crash_probability);
    void require_launched() const;

    std::string instance_id_;
    DeviceStatus status_ = DeviceStatus::Idle;
    std::optional<AppModel> installed_;
    bool launched_ = false;
    std::string current_screen_;
    std::vector<DeviceAction> action_log_;
    std::mt19937_64 rng_;
    std::map<std::pair<std::string, std::vector<int>>, std::string> entered_text_;
    mutable std::map<std::string, img::Image> screenshot_cache_;
};

} // namespace uicrawl::sim
