#include "uicrawl/scenario.hpp"

#include <cstdio>
#include <fstream>

#include "uicrawl/policy_llm.hpp"
#include "uicrawl/util.hpp"

namespace uicrawl::scenario {

using nlohmann::json;
using sim::AppModel;
using sim::DeviceAction;
using sim::DeviceActionKind;
using sim::GateKind;
using sim::GateSpec;
using sim::ScreenSpec;
using sim::TransitionSpec;
using vh::NodeFlags;
using vh::RectPx;
using vh::VhNode;

std::string_view to_string(GateClass g) {
    switch (g) {
        case GateClass::None: return "none";
        case GateClass::Login: return "login";
        case GateClass::Captcha: return "captcha";
    }
    return "none";
}

const std::vector<std::string>& store_categories() {
    static const std::vector<std::string> cats = {
        "Art & Design",    "Auto & Vehicles",  "Beauty",        "Books & Reference",
        "Business",        "Comics",           "Communication", "Dating",
        "Education",       "Entertainment",    "Events",        "Finance",
        "Food & Drink",    "Health & Fitness", "House & Home",  "Libraries & Demo",
        "Lifestyle",       "Maps & Navigation", "Medical",      "Music & Audio",
        "News & Magazines", "Parenting",       "Personalization", "Photography",
        "Productivity",    "Shopping",         "Social",        "Sports",
        "Tools",           "Travel & Local",   "Video Players", "Weather",
        "Games"};
    return cats;
}

namespace {

constexpr int kScreenW = 256;
constexpr int kScreenH = 512;

const std::vector<std::string>& button_words() {
    static const std::vector<std::string> words = {
        "Browse", "Search", "Library",  "Offers",  "News",  "Stats",
        "Map",    "Radio",  "Playlists", "Catalog", "Deals", "Trends"};
    return words;
}

const std::vector<std::string>& decor_labels() {
    static const std::vector<std::string> labels = {
        "Featured banner",  "Profile photo",        "Weather widget showing the local forecast",
        "Shopping cart",    "Promotional artwork for the seasonal campaign now running",
        "Notification bell", "",                    "",
        "Back arrow",       ""};
    return labels;
}

VhNode text_node(const std::string& text, RectPx bounds) {
    VhNode n;
    n.class_name = "android.widget.TextView";
    n.text = text;
    n.bounds_px = bounds;
    n.flags = NodeFlags{false, false, false, false, false, true, true};
    return n;
}

VhNode button_node(const std::string& text, RectPx bounds) {
    VhNode n;
    n.class_name = "android.widget.Button";
    n.text = text;
    n.bounds_px = bounds;
    n.flags = NodeFlags{true, false, false, false, true, true, true};
    return n;
}

VhNode image_node(const std::string& label, RectPx bounds, bool button, bool focusable) {
    VhNode n;
    n.class_name = button ? "android.widget.ImageButton" : "android.widget.ImageView";
    if (!label.empty()) n.content_description = label;
    n.bounds_px = bounds;
    n.flags = NodeFlags{button, false, false, false, focusable, true, true};
    return n;
}

VhNode edit_node(const std::string& hint, RectPx bounds) {
    VhNode n;
    n.class_name = "android.widget.EditText";
    n.content_description = hint;
    n.bounds_px = bounds;
    n.flags = NodeFlags{false, false, true, false, true, true, true};
    return n;
}

VhNode root_node() {
    VhNode n;
    n.class_name = "android.widget.FrameLayout";
    n.bounds_px = RectPx{0, 0, kScreenW, kScreenH};
    n.flags = NodeFlags{false, false, false, false, false, true, true};
    return n;
}

RectPx row_bounds(int row) {
    const int top = 64 + row * 56;
    return RectPx{8, top, kScreenW - 8, top + 48};
}

RectPx title_bounds() { return RectPx{8, 8, kScreenW - 8, 56}; }

struct ModelBuilder {
    AppModel model;
    std::mt19937_64 rng;

    explicit ModelBuilder(int index, uint64_t seed) : rng(seed) {
        char id[16];
        std::snprintf(id, sizeof(id), "app%03d", index);
        model.app_id = id;
        model.package_name = "com.scenario." + std::string(id);
        model.category = store_categories()[(index - 1) % store_categories().size()];
        model.screen_width = kScreenW;
        model.screen_height = kScreenH;
    }

    std::string pick_word() {
        return button_words()[util::rng_below(rng, button_words().size())];
    }

    ScreenSpec& add_screen(const std::string& id, const std::string& title,
                           std::optional<std::string> back_to) {
        ScreenSpec s;
        s.screen_id = id;
        s.render_seed = util::mix_seed(rng(), id);
        s.back_to = std::move(back_to);
        s.tree.screen_width_px = kScreenW;
        s.tree.screen_height_px = kScreenH;
        s.tree.package_name = model.package_name;
        s.tree.activity_name = id;
        s.tree.root = root_node();
        s.tree.root.children.push_back(text_node(title, title_bounds()));
        return model.screens.emplace(id, std::move(s)).first->second;
    }

    // Appends a node to a screen's root; returns its child index.
    int append(ScreenSpec& s, VhNode n) {
        s.tree.root.children.push_back(std::move(n));
        return static_cast<int>(s.tree.root.children.size()) - 1;
    }

    void tap_transition(const std::string& from, int child_index, const std::string& to) {
        TransitionSpec t;
        t.from = from;
        t.kind = DeviceActionKind::Tap;
        t.path = {child_index};
        t.to = to;
        model.transitions.push_back(std::move(t));
    }
};

// A leaf screen: title, one decor image, maybe a checkbox; no outgoing taps.
void build_leaf(ModelBuilder& b, const std::string& id, const std::string& title,
                const std::string& back_to) {
    ScreenSpec& s = b.add_screen(id, title, back_to);
    const auto& labels = decor_labels();
    b.append(s, image_node(labels[util::rng_below(b.rng, labels.size())], row_bounds(0), false,
                           util::rng_below(b.rng, 2) == 0));
    if (util::rng_below(b.rng, 2) == 0) {
        VhNode cb;
        cb.class_name = "android.widget.CheckBox";
        cb.text = "Enable alerts";
        cb.bounds_px = row_bounds(1);
        cb.flags = NodeFlags{true, false, false, false, true, true, true};
        b.append(s, cb);
    }
    if (util::rng_below(b.rng, 3) == 0) {
        VhNode list;
        list.class_name = "androidx.recyclerview.widget.RecyclerView";
        list.bounds_px = RectPx{8, 180, kScreenW - 8, kScreenH - 16};
        list.flags = NodeFlags{false, false, false, true, true, true, true};
        int rows = 2 + static_cast<int>(util::rng_below(b.rng, 2));
        for (int i = 0; i < rows; ++i) {
            int top = 188 + i * 44;
            list.children.push_back(
                text_node("Item " + std::to_string(i + 1), RectPx{16, top, kScreenW - 16, top + 36}));
        }
        b.append(s, list);
    }
}

// A mid-level screen with `leaf_count` leaf children.
void build_section(ModelBuilder& b, const std::string& id, const std::string& title,
                   const std::string& back_to, int leaf_count) {
    ScreenSpec& s = b.add_screen(id, title, back_to);
    for (int i = 0; i < leaf_count; ++i) {
        std::string leaf_id = id + "_l" + std::to_string(i);
        std::string word = b.pick_word();
        int idx = b.append(s, button_node(word, row_bounds(i)));
        build_leaf(b, leaf_id, title + " " + word, id);
        b.tap_transition(id, idx, leaf_id);
    }
    // an unlabeled image for coverage texture
    b.append(s, image_node("", row_bounds(leaf_count), false, util::rng_below(b.rng, 2) == 0));
}

void build_login_wing(ModelBuilder& b, ScreenSpec& home, int home_row) {
    int account_idx = b.append(home, button_node("Account", row_bounds(home_row)));
    b.tap_transition("home", account_idx, "login");

    ScreenSpec& login = b.add_screen("login", "Login to continue", std::nullopt);
    int user_idx = b.append(login, edit_node("Email address", row_bounds(0)));
    int pass_idx = b.append(login, edit_node("Password", row_bounds(1)));
    int submit_idx = b.append(login, button_node("Sign In", row_bounds(2)));

    build_section(b, "account_home", b.model.app_id + " member area", "home", 2);
    GateSpec g;
    g.kind = GateKind::Login;
    g.guard_screen = "login";
    g.to = "account_home";
    g.credentials = {{{user_idx}, std::string(kLoginUser)}, {{pass_idx}, std::string(kLoginPass)}};
    g.submit_path = {submit_idx};
    b.model.gates.push_back(std::move(g));
}

void build_captcha_wing(ModelBuilder& b, ScreenSpec& home, int home_row) {
    int rewards_idx = b.append(home, button_node("Rewards", row_bounds(home_row)));
    b.tap_transition("home", rewards_idx, "verify");

    // The verification wall swallows taps and back; only a human solve exits.
    ScreenSpec& verify = b.add_screen("verify", "Verification required", std::nullopt);
    b.append(verify, button_node("Try again", row_bounds(0)));
    b.append(verify, button_node("Help", row_bounds(1)));
    b.append(verify, image_node("Puzzle image", RectPx{48, 240, kScreenW - 48, 360}, false, true));

    build_section(b, "rewards_home", b.model.app_id + " rewards", "home", 2);
    GateSpec g;
    g.kind = GateKind::Captcha;
    g.guard_screen = "verify";
    g.to = "rewards_home";
    b.model.gates.push_back(std::move(g));
}

} // namespace

AppModel make_scenario_app(int index, GateClass gate) {
    ModelBuilder b(index, util::mix_seed(0x5eedULL, "scenario-app", static_cast<uint64_t>(index)));
    char title[32];
    std::snprintf(title, sizeof(title), "Scenario App %03d", index);
    ScreenSpec& home = b.add_screen("home", title, std::nullopt);
    b.model.initial_screen = "home";

    int sections = 2 + static_cast<int>(util::rng_below(b.rng, 2)); // 2-3 sections
    int row = 0;
    for (int i = 0; i < sections; ++i) {
        std::string word = b.pick_word();
        std::string sid = "s" + std::to_string(i);
        int idx = b.append(home, button_node(word, row_bounds(row++)));
        build_section(b, sid, std::string(title) + " " + word, "home",
                      1 + static_cast<int>(util::rng_below(b.rng, 2)));
        b.tap_transition("home", idx, sid);
    }
    if (gate == GateClass::Login) build_login_wing(b, home, row++);
    if (gate == GateClass::Captcha) build_captcha_wing(b, home, row++);
    // one unlabeled decorative image on every home screen
    b.append(home, image_node("", RectPx{96, 400, 160, 464}, false, false));

    // round-trip through the document form so fixtures and in-memory models
    // are guaranteed identical
    return sim::load_app_model(serialize_app_model(b.model));
}

std::vector<ScenarioApp> make_scenario86() {
    std::vector<ScenarioApp> apps;
    for (int i = 1; i <= 86; ++i) {
        GateClass gate = i <= 16 ? GateClass::None : i <= 38 ? GateClass::Login : GateClass::Captcha;
        ScenarioApp a;
        a.gate = gate;
        a.model = make_scenario_app(i, gate);
        a.app_id = a.model.app_id;
        apps.push_back(std::move(a));
    }
    return apps;
}

json scripted_llm_transcript() {
    const std::string login_goal(llm::kGoalLinePassLogin);
    const std::string explore_goal(llm::kGoalLineExplore);
    json rules = json::array();
    rules.push_back({{"contains", {login_goal}},
                     {"not_contains", {std::string(kLoginUser)}},
                     {"response", "ACTION input_text 1 \"" + std::string(kLoginUser) + "\""}});
    rules.push_back({{"contains", {login_goal, std::string(kLoginUser)}},
                     {"not_contains", {std::string(kLoginPass)}},
                     {"response", "ACTION input_text 2 \"" + std::string(kLoginPass) + "\""}});
    rules.push_back({{"contains", {login_goal, std::string(kLoginPass)}},
                     {"response", "ACTION tap 3"}});
    rules.push_back({{"contains", {explore_goal}}, {"response", "ACTION give_up"}});
    return rules;
}

std::vector<DeviceAction> intervention_actions(GateClass gate) {
    switch (gate) {
        case GateClass::Login:
            return {
                DeviceAction{DeviceActionKind::InputText, {1}, std::string(kLoginUser)},
                DeviceAction{DeviceActionKind::InputText, {2}, std::string(kLoginPass)},
                DeviceAction{DeviceActionKind::Tap, {3}, {}},
            };
        case GateClass::Captcha:
            return {DeviceAction{DeviceActionKind::HumanSolve, {}, {}}};
        case GateClass::None:
            return {};
    }
    return {};
}

void write_scenario86(const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / "models");
    std::filesystem::create_directories(dir / "interventions");

    auto apps = make_scenario86();
    std::ofstream metadata(dir / "metadata.jsonl", std::ios::trunc);
    json manifest_apps = json::array();
    for (const auto& a : apps) {
        std::ofstream mf(dir / "models" / (a.app_id + ".json"), std::ios::trunc);
        mf << sim::serialize_app_model(a.model) << '\n';

        json meta = {{"app_id", a.app_id},
                     {"name", "Scenario App " + a.app_id.substr(3)},
                     {"package", a.model.package_name},
                     {"category", a.model.category}};
        metadata << meta.dump() << '\n';

        manifest_apps.push_back({{"app_id", a.app_id},
                                 {"model", "models/" + a.app_id + ".json"},
                                 {"gate", std::string(to_string(a.gate))},
                                 {"category", a.model.category}});

        json actions = json::array();
        for (const auto& act : intervention_actions(a.gate)) {
            json aj;
            aj["kind"] = std::string(sim::to_string(act.kind));
            aj["path"] = act.path;
            if (act.kind == DeviceActionKind::InputText) aj["text"] = act.text;
            actions.push_back(std::move(aj));
        }
        std::ofstream af(dir / "interventions" / (a.app_id + ".json"), std::ios::trunc);
        af << actions.dump(2) << '\n';
    }

    json manifest;
    manifest["scenario"] = "escalation-ladder-86";
    manifest["apps"] = std::move(manifest_apps);
    manifest["expected"] = {{"total", 86},
                            {"gate_free", 16},
                            {"login_gated", 22},
                            {"captcha_gated", 48},
                            {"completed_rules_only", 16},
                            {"completed_rules_llm", 38},
                            {"completed_after_resume_all", 86}};
    std::ofstream mf(dir / "manifest.json", std::ios::trunc);
    mf << manifest.dump(2) << '\n';

    std::ofstream tf(dir / "llm_transcript.json", std::ios::trunc);
    tf << scripted_llm_transcript().dump(2) << '\n';
}

} // namespace uicrawl::scenario
