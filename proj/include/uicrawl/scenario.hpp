#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "uicrawl/appsim.hpp"

namespace uicrawl::scenario {

// Shared demo credentials used by every login-gated scenario app; the scripted
// chat transcript and the intervention action files key on these.
inline constexpr std::string_view kLoginUser = "tester@example.com";
inline constexpr std::string_view kLoginPass = "hunter2-secret";

enum class GateClass { None, Login, Captcha };

std::string_view to_string(GateClass g);

struct ScenarioApp {
    std::string app_id;
    GateClass gate = GateClass::None;
    sim::AppModel model;
};

const std::vector<std::string>& store_categories(); // the 33 store categories

// Deterministic app model for scenario slot `index` (1-based).
sim::AppModel make_scenario_app(int index, GateClass gate);

// The 86-app escalation-ladder scenario: 16 gate-free, 22 login-gated,
// 48 captcha-gated.
std::vector<ScenarioApp> make_scenario86();

// Canned chat rules that solve login gates with the shared credentials and
// give up on everything else.
nlohmann::json scripted_llm_transcript();

// Batch actions a human annotator would apply to unblock an app of the given
// gate class.
std::vector<sim::DeviceAction> intervention_actions(GateClass gate);

// Writes the version-controlled fixture tree:
//   manifest.json metadata.jsonl llm_transcript.json
//   models/{app_id}.json interventions/{app_id}.json
void write_scenario86(const std::filesystem::path& dir);

} // namespace uicrawl::scenario
