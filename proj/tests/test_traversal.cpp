#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <set>

#include "support/modelgen.hpp"
#include "uicrawl/policy_llm.hpp"
#include "uicrawl/scenario.hpp"
#include "uicrawl/traversal.hpp"
#include "uicrawl/util.hpp"

using namespace uicrawl;

namespace {

const char* kThreeScreenSpec = R"({
  "app_id": "tri", "package": "com.tri", "category": "Tools",
  "width": 120, "height": 240, "initial_screen": "home",
  "screens": [
    {"screen_id": "home", "render_seed": 1, "root": {
       "class": "android.widget.FrameLayout", "bounds": [0,0,120,240],
       "flags": ["enabled","visible"],
       "children": [
         {"class": "android.widget.TextView", "text": "Home", "bounds": [4,4,116,30],
          "flags": ["enabled","visible"]},
         {"class": "android.widget.Button", "text": "Alpha", "bounds": [4,40,116,80],
          "flags": ["clickable","enabled","visible"]},
         {"class": "android.widget.Button", "text": "Beta", "bounds": [4,90,116,130],
          "flags": ["clickable","enabled","visible"]}]}},
    {"screen_id": "alpha", "render_seed": 2, "back_to": "home", "root": {
       "class": "android.widget.FrameLayout", "bounds": [0,0,120,240],
       "flags": ["enabled","visible"],
       "children": [
         {"class": "android.widget.TextView", "text": "Alpha page", "bounds": [4,4,116,30],
          "flags": ["enabled","visible"]}]}},
    {"screen_id": "beta", "render_seed": 3, "back_to": "home", "root": {
       "class": "android.widget.FrameLayout", "bounds": [0,0,120,240],
       "flags": ["enabled","visible"],
       "children": [
         {"class": "android.widget.TextView", "text": "Beta page", "bounds": [4,4,116,30],
          "flags": ["enabled","visible"]}]}}
  ],
  "transitions": [
    {"from": "home", "kind": "tap", "path": [1], "to": "alpha"},
    {"from": "home", "kind": "tap", "path": [2], "to": "beta"}
  ],
  "gates": []
})";

struct SessionRun {
    traversal::SessionResult result;
    std::vector<sim::DeviceAction> device_log;
    std::vector<nlohmann::json> events;
    size_t record_count = 0;
};

SessionRun run_app(const sim::AppModel& model, std::vector<traversal::TraversalPolicy*> policies,
                   traversal::SessionConfig config = {}, uint64_t seed = 42) {
    sim::SimDevice dev("t0");
    dev.install(model);
    dev.launch(seed);
    SessionRun run;
    auto sink = [&run](int, const img::Image&, const vh::VhTree&, const vh::SimplifiedVh&,
                       const dedup::ScreenSignature&) {
        ++run.record_count;
        return "rec" + std::to_string(run.record_count);
    };
    auto events = [&run](const nlohmann::json& e) { run.events.push_back(e); };
    run.result = traversal::run_session(dev, policies, config, sink, events);
    run.device_log = dev.action_log();
    return run;
}

} // namespace

TEST_CASE("detect_trigger: keyword priority and case folding") {
    auto tree = vh::parse_vh(R"({"width":100,"height":100,"root":
        {"class":"android.view.View","bounds":[0,0,100,100],
         "children":[{"class":"android.widget.Button","text":"Sign In to continue",
                      "bounds":[0,0,100,40],"flags":["clickable","enabled","visible"]}]}})",
                             vh::VhFormat::Json);
    auto hit = traversal::detect_trigger(tree, {"login", "sign in"});
    REQUIRE(hit.has_value());
    CHECK(*hit == "sign in");

    auto upper = vh::parse_vh(R"({"width":100,"height":100,"root":
        {"class":"android.view.View","text":"LOGIN","bounds":[0,0,100,100]}})",
                              vh::VhFormat::Json);
    CHECK(traversal::detect_trigger(upper, {"login", "sign in"}) == "login");

    auto none = vh::parse_vh(R"({"width":100,"height":100,"root":
        {"class":"android.view.View","text":"Welcome","bounds":[0,0,100,100]}})",
                             vh::VhFormat::Json);
    CHECK(!traversal::detect_trigger(none, {"login", "sign in"}).has_value());
}

TEST_CASE("detect_idle: exact window semantics") {
    dedup::ScreenSignature a{dedup::PerceptualHash{1}, 1};
    dedup::ScreenSignature b{dedup::PerceptualHash{2}, 2};
    traversal::History h;
    for (int i = 0; i < 5; ++i) h.push_back({i, a});
    CHECK(traversal::detect_idle(h, 5));

    traversal::History short_h(h.begin(), h.begin() + 4);
    CHECK(!traversal::detect_idle(short_h, 5));

    traversal::History mixed = h;
    mixed[2].signature = b;
    CHECK(!traversal::detect_idle(mixed, 5));
}

TEST_CASE("rule policy: pops targets in order, backs out, finishes at root") {
    auto model = sim::load_app_model(kThreeScreenSpec);
    sim::SimDevice dev("t0");
    dev.install(model);
    dev.launch(1);

    traversal::SessionConfig config;
    traversal::Utg utg;
    traversal::History history;
    auto capture = [&](bool as_root) {
        auto tree = dev.dump_vh();
        auto shot = dev.screenshot();
        auto sig = dedup::ScreenSignature{dedup::phash(shot),
                                          vh::vh_structural_hash(vh::simplify_vh(tree))};
        if (!utg.states.count(sig)) {
            traversal::UtgState st;
            st.signature = sig;
            st.pending_targets = vh::extract_interactables(tree, config.input_default_text);
            utg.states.emplace(sig, st);
            if (as_root) {
                utg.root_signature = sig;
                utg.has_root = true;
            }
        }
        history.push_back({static_cast<int>(history.size()), sig});
        return std::make_tuple(tree, vh::simplify_vh(tree), shot, sig);
    };

    traversal::RulePolicy rules;
    auto [tree, svh, shot, sig] = capture(true);

    // fresh home state: first target is the first button in document order
    traversal::StepContext ctx{tree, svh, shot, sig, utg, history, config};
    auto d1 = rules.next_action(ctx);
    REQUIRE(d1.kind == traversal::PolicyDecision::Kind::Act);
    CHECK(d1.action.kind == sim::DeviceActionKind::Tap);
    CHECK(d1.action.path == std::vector<int>{1});

    // exhausted non-root state emits back once, then escalates if stuck
    dev.perform(d1.action); // -> alpha, which has no targets
    auto [tree2, svh2, shot2, sig2] = capture(false);
    traversal::StepContext ctx2{tree2, svh2, shot2, sig2, utg, history, config};
    auto d2 = rules.next_action(ctx2);
    REQUIRE(d2.kind == traversal::PolicyDecision::Kind::Act);
    CHECK(d2.action.kind == sim::DeviceActionKind::Back);
    auto d2b = rules.next_action(ctx2);
    CHECK(d2b.kind == traversal::PolicyDecision::Kind::Escalate);
    CHECK(d2b.reason == "stuck");

    // exhausted root emits done
    utg.states.at(utg.root_signature).pending_targets.clear();
    dev.perform(d2.action); // back home
    auto [tree3, svh3, shot3, sig3] = capture(false);
    traversal::StepContext ctx3{tree3, svh3, shot3, sig3, utg, history, config};
    auto d3 = rules.next_action(ctx3);
    CHECK(d3.kind == traversal::PolicyDecision::Kind::Done);
}

TEST_CASE("session: gate-free three-screen app completes with three UTG states") {
    auto model = sim::load_app_model(kThreeScreenSpec);
    traversal::RulePolicy rules;
    auto run = run_app(model, {&rules});
    CHECK(run.result.status == traversal::SessionStatus::Completed);
    CHECK(run.result.utg.states.size() == 3);
    CHECK(run.result.escalations.empty());
    // hand trace: tap alpha, back, tap beta, back, done at exhausted root
    CHECK(run.result.steps_taken == 4);
    CHECK(run.record_count == run.result.steps_taken + 1u);
    CHECK(run.result.records.size() == run.record_count);
}

TEST_CASE("session: login-gated app pauses for human under rules only") {
    auto model = scenario::make_scenario_app(20, scenario::GateClass::Login);
    traversal::RulePolicy rules;
    auto run = run_app(model, {&rules});
    CHECK(run.result.status == traversal::SessionStatus::PausedForHuman);
    REQUIRE(!run.result.escalations.empty());
    CHECK(run.result.escalations.back().reason == "trigger:login");
}

TEST_CASE("session: scripted LLM passes the login gate; post-login states explored") {
    auto model = scenario::make_scenario_app(20, scenario::GateClass::Login);
    auto rules_json = scenario::scripted_llm_transcript();
    llm::ScriptedChatEndpoint endpoint(llm::ScriptedChatEndpoint::rules_from_json(rules_json));
    traversal::RulePolicy rules;
    llm::LlmTraversalPolicy llm_policy(&endpoint);
    auto run = run_app(model, {&rules, &llm_policy});
    CHECK(run.result.status == traversal::SessionStatus::Completed);

    // escalation happened and control came back (post-login exploration ran)
    REQUIRE(!run.result.escalations.empty());
    CHECK(run.result.escalations.front().reason == "trigger:login");
    CHECK(endpoint.request_count() >= 3);

    // the post-login screen appears in the UTG: more states than rules-only
    traversal::RulePolicy rules2;
    auto rules_only = run_app(model, {&rules2});
    CHECK(run.result.utg.states.size() > rules_only.result.utg.states.size());

    // escalation ladder is monotone: rules(0) -> llm(1) -> human(2)
    int last_level = 0;
    int prev_step = -1;
    for (const auto& e : run.result.escalations) {
        if (e.step == prev_step) CHECK(e.to_level == last_level + 1);
        CHECK(e.to_level <= 2);
        last_level = e.to_level;
        prev_step = e.step;
    }
}

TEST_CASE("session: captcha app pauses even with the scripted LLM") {
    auto model = scenario::make_scenario_app(50, scenario::GateClass::Captcha);
    auto rules_json = scenario::scripted_llm_transcript();
    llm::ScriptedChatEndpoint endpoint(llm::ScriptedChatEndpoint::rules_from_json(rules_json));
    traversal::RulePolicy rules;
    llm::LlmTraversalPolicy llm_policy(&endpoint);
    auto run = run_app(model, {&rules, &llm_policy});
    CHECK(run.result.status == traversal::SessionStatus::PausedForHuman);
    REQUIRE(!run.result.escalations.empty());
    CHECK(run.result.escalations.back().reason == "llm:give_up");
}

TEST_CASE("session: max_steps budget terminates as completed") {
    // an app with a self-loop transition never exhausts; budget must stop it
    const char* spec = R"({
      "app_id": "loop", "package": "com.loop2", "category": "Tools",
      "width": 100, "height": 100, "initial_screen": "a",
      "screens": [
        {"screen_id": "a", "render_seed": 1, "root": {
           "class": "android.widget.FrameLayout", "bounds": [0,0,100,100],
           "flags": ["enabled","visible"],
           "children": [{"class": "android.widget.Button", "text": "Go", "bounds": [0,0,100,40],
                         "flags": ["clickable","enabled","visible"]}]}},
        {"screen_id": "b", "render_seed": 2, "back_to": "a", "root": {
           "class": "android.widget.FrameLayout", "bounds": [0,0,100,100],
           "flags": ["enabled","visible"],
           "children": [{"class": "android.widget.Button", "text": "Back again", "bounds": [0,0,100,40],
                         "flags": ["clickable","enabled","visible"]}]}}
      ],
      "transitions": [
        {"from": "a", "kind": "tap", "path": [0], "to": "b"},
        {"from": "b", "kind": "tap", "path": [0], "to": "a"}
      ],
      "gates": []
    })";
    auto model = sim::load_app_model(spec);
    traversal::SessionConfig config;
    config.max_steps = 3;
    traversal::RulePolicy rules;
    auto run = run_app(model, {&rules}, config);
    CHECK(run.result.status == traversal::SessionStatus::Completed);
    CHECK(run.result.steps_taken == 3);
}

TEST_CASE("session fuzz: budget held, no repeated rule actions, UTG replays") {
    std::mt19937_64 rng(util::mix_seed(2024, "traversal-fuzz"));
    for (int i = 0; i < 60; ++i) {
        auto model = modelgen::random_app_model(rng, i);
        traversal::SessionConfig config;
        config.max_steps = i % 4 == 0 ? 25 : 1000;
        traversal::RulePolicy rules;
        uint64_t seed = rng();

        sim::SimDevice dev("fz");
        dev.install(model);
        dev.launch(seed);
        std::vector<nlohmann::json> events;
        auto result = traversal::run_session(
            dev, {&rules}, config, {}, [&events](const nlohmann::json& e) { events.push_back(e); });

        CHECK(result.steps_taken <= config.max_steps);

        std::multiset<std::pair<std::string, std::string>> rule_actions;
        for (const auto& e : events) {
            if (e.contains("action") && e["policy_level"] == "rules") {
                auto key = std::make_pair(e["signature"].get<std::string>(),
                                          e["action"].get<std::string>());
                CHECK(rule_actions.count(key) == 0);
                rule_actions.insert(key);
            }
        }

        CHECK(modelgen::utg_replay_matches(model, seed, dev.action_log(), result.utg));
    }
}

TEST_CASE("session events: performed actions logged with policy level") {
    auto model = sim::load_app_model(kThreeScreenSpec);
    traversal::RulePolicy rules;
    auto run = run_app(model, {&rules});
    size_t action_events = 0;
    for (const auto& e : run.events) {
        if (e.contains("action")) {
            ++action_events;
            CHECK(e["policy_level"] == "rules");
            CHECK(e.contains("signature"));
            CHECK(e.contains("step"));
        }
    }
    CHECK(action_events == static_cast<size_t>(run.result.steps_taken));
}
