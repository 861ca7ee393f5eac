#include "uicrawl/appsim.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include <json.hpp>

#include "uicrawl/util.hpp"

namespace uicrawl::sim {

using nlohmann::json;

std::string_view to_string(DeviceActionKind k) {
    switch (k) {
        case DeviceActionKind::Tap: return "tap";
        case DeviceActionKind::LongTap: return "long_tap";
        case DeviceActionKind::InputText: return "input_text";
        case DeviceActionKind::Scroll: return "scroll";
        case DeviceActionKind::Back: return "back";
        case DeviceActionKind::HumanSolve: return "human_solve";
    }
    return "tap";
}

std::optional<DeviceActionKind> device_action_kind_from_string(std::string_view s) {
    if (s == "tap") return DeviceActionKind::Tap;
    if (s == "long_tap") return DeviceActionKind::LongTap;
    if (s == "input_text") return DeviceActionKind::InputText;
    if (s == "scroll") return DeviceActionKind::Scroll;
    if (s == "back") return DeviceActionKind::Back;
    if (s == "human_solve") return DeviceActionKind::HumanSolve;
    return std::nullopt;
}

DeviceAction DeviceAction::from_target(const vh::ActionTarget& t) {
    DeviceAction a;
    switch (t.kind) {
        case vh::ActionKind::Tap: a.kind = DeviceActionKind::Tap; break;
        case vh::ActionKind::LongTap: a.kind = DeviceActionKind::LongTap; break;
        case vh::ActionKind::InputText: a.kind = DeviceActionKind::InputText; break;
        case vh::ActionKind::Scroll: a.kind = DeviceActionKind::Scroll; break;
        case vh::ActionKind::Back: a.kind = DeviceActionKind::Back; break;
    }
    a.path = t.node_path;
    if (t.input_payload) a.text = *t.input_payload;
    return a;
}

std::string DeviceAction::describe() const {
    std::ostringstream os;
    os << to_string(kind);
    if (!path.empty()) {
        os << " path=";
        for (size_t i = 0; i < path.size(); ++i) {
            if (i) os << '/';
            os << path[i];
        }
    }
    if (kind == DeviceActionKind::InputText) os << " text=\"" << text << "\"";
    return os.str();
}

std::string_view to_string(GateKind k) {
    switch (k) {
        case GateKind::Login: return "login";
        case GateKind::Captcha: return "captcha";
        case GateKind::IdleLoop: return "idle_loop";
    }
    return "login";
}

const ScreenSpec& AppModel::screen(const std::string& id) const {
    auto it = screens.find(id);
    if (it == screens.end()) throw DanglingTransition("unknown screen: " + id);
    return it->second;
}

const GateSpec* AppModel::gate_for(const std::string& screen_id) const {
    for (const auto& g : gates) {
        if (g.guard_screen == screen_id) return &g;
    }
    return nullptr;
}

namespace {

std::string lowercase(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool subtree_mentions_login(const vh::VhNode& n) {
    auto has_kw = [](const std::optional<std::string>& v) {
        if (!v) return false;
        std::string low = lowercase(*v);
        return low.find("login") != std::string::npos || low.find("sign in") != std::string::npos;
    };
    if (has_kw(n.text) || has_kw(n.content_description)) return true;
    for (const auto& c : n.children) {
        if (subtree_mentions_login(c)) return true;
    }
    return false;
}

std::vector<int> path_from_json(const json& j) {
    std::vector<int> p;
    for (const auto& v : j) p.push_back(v.get<int>());
    return p;
}

json path_to_json(const std::vector<int>& p) {
    json j = json::array();
    for (int v : p) j.push_back(v);
    return j;
}

void require_path(const vh::VhTree& tree, const std::vector<int>& path, const std::string& what) {
    if (!vh::resolve_path(tree, path)) {
        throw MalformedSpec("unresolvable node path in " + what);
    }
}

} // namespace

AppModel load_app_model(std::string_view document) {
    json j = json::parse(document, nullptr, false);
    if (j.is_discarded()) throw MalformedSpec("app model is not valid JSON");
    AppModel m;
    try {
        m.app_id = j.at("app_id").get<std::string>();
        m.package_name = j.at("package").get<std::string>();
        m.category = j.value("category", std::string());
        m.screen_width = j.at("width").get<int>();
        m.screen_height = j.at("height").get<int>();
        m.initial_screen = j.at("initial_screen").get<std::string>();
        if (m.screen_width <= 0 || m.screen_height <= 0) {
            throw MalformedSpec("screen dimensions must be positive");
        }
        for (const auto& sj : j.at("screens")) {
            ScreenSpec s;
            s.screen_id = sj.at("screen_id").get<std::string>();
            s.render_seed = sj.value("render_seed", 0ULL);
            if (sj.contains("back_to") && sj["back_to"].is_string()) {
                s.back_to = sj["back_to"].get<std::string>();
            }
            json tree_doc;
            tree_doc["width"] = m.screen_width;
            tree_doc["height"] = m.screen_height;
            tree_doc["package"] = m.package_name;
            tree_doc["activity"] = s.screen_id;
            tree_doc["root"] = sj.at("root");
            try {
                s.tree = vh::parse_vh(tree_doc.dump(), vh::VhFormat::Json);
            } catch (const Error& e) {
                throw MalformedSpec("screen '" + s.screen_id + "': " + e.what());
            }
            if (m.screens.count(s.screen_id)) {
                throw MalformedSpec("duplicate screen_id: " + s.screen_id);
            }
            m.screens.emplace(s.screen_id, std::move(s));
        }
        if (j.contains("transitions")) {
            for (const auto& tj : j["transitions"]) {
                TransitionSpec t;
                t.from = tj.at("from").get<std::string>();
                auto kind = device_action_kind_from_string(tj.at("kind").get<std::string>());
                if (!kind) throw MalformedSpec("unknown transition action kind");
                if (*kind == DeviceActionKind::Back || *kind == DeviceActionKind::HumanSolve) {
                    throw MalformedSpec("back/human_solve transitions are declared via back_to/gates");
                }
                t.kind = *kind;
                t.path = path_from_json(tj.at("path"));
                if (tj.contains("text_equals") && tj["text_equals"].is_string()) {
                    t.text_equals = tj["text_equals"].get<std::string>();
                }
                t.to = tj.at("to").get<std::string>();
                t.crash_probability = tj.value("crash_probability", 0.0);
                m.transitions.push_back(std::move(t));
            }
        }
        if (j.contains("gates")) {
            for (const auto& gj : j["gates"]) {
                GateSpec g;
                std::string kind = gj.at("kind").get<std::string>();
                if (kind == "login") g.kind = GateKind::Login;
                else if (kind == "captcha") g.kind = GateKind::Captcha;
                else if (kind == "idle_loop") g.kind = GateKind::IdleLoop;
                else throw MalformedSpec("unknown gate kind: " + kind);
                g.guard_screen = gj.at("guard_screen").get<std::string>();
                g.to = gj.at("to").get<std::string>();
                if (g.kind == GateKind::Login) {
                    for (const auto& cj : gj.at("credentials")) {
                        g.credentials.push_back(
                            {path_from_json(cj.at("path")), cj.at("text").get<std::string>()});
                    }
                    g.submit_path = path_from_json(gj.at("submit_path"));
                }
                m.gates.push_back(std::move(g));
            }
        }
    } catch (const json::exception& e) {
        throw MalformedSpec(std::string("app model schema error: ") + e.what());
    }

    // Referential integrity.
    if (!m.screens.count(m.initial_screen)) throw DanglingTransition(m.initial_screen);
    for (const auto& [id, s] : m.screens) {
        if (s.back_to && !m.screens.count(*s.back_to)) throw DanglingTransition(*s.back_to);
    }
    for (const auto& t : m.transitions) {
        if (!m.screens.count(t.from)) throw DanglingTransition(t.from);
        if (!m.screens.count(t.to)) throw DanglingTransition(t.to);
        require_path(m.screens.at(t.from).tree, t.path, "transition from " + t.from);
    }

    // Transition determinism: for one (from, kind, path) either a single
    // unconditional rule or distinct text_equals values.
    std::set<std::tuple<std::string, int, std::vector<int>, std::string>> keyed;
    std::set<std::tuple<std::string, int, std::vector<int>>> unconditional;
    for (const auto& t : m.transitions) {
        auto base = std::make_tuple(t.from, static_cast<int>(t.kind), t.path);
        if (t.text_equals) {
            if (unconditional.count(base) ||
                !keyed.insert(std::tuple_cat(base, std::make_tuple(*t.text_equals))).second) {
                throw MalformedSpec("ambiguous transition from " + t.from);
            }
        } else {
            if (unconditional.count(base)) throw MalformedSpec("ambiguous transition from " + t.from);
            bool conditioned_twin = false;
            for (const auto& k : keyed) {
                if (std::get<0>(k) == t.from && std::get<1>(k) == static_cast<int>(t.kind) &&
                    std::get<2>(k) == t.path) {
                    conditioned_twin = true;
                    break;
                }
            }
            if (conditioned_twin) throw MalformedSpec("ambiguous transition from " + t.from);
            unconditional.insert(base);
        }
    }

    std::set<std::string> gated;
    for (const auto& g : m.gates) {
        if (!m.screens.count(g.guard_screen)) throw DanglingTransition(g.guard_screen);
        if (!m.screens.count(g.to)) throw DanglingTransition(g.to);
        if (!gated.insert(g.guard_screen).second) {
            throw MalformedSpec("multiple gates guard screen " + g.guard_screen);
        }
        const auto& guard_tree = m.screens.at(g.guard_screen).tree;
        if (g.kind == GateKind::Login) {
            if (!subtree_mentions_login(guard_tree.root)) {
                throw MalformedSpec("login gate screen '" + g.guard_screen +
                                    "' has no login/sign in wording");
            }
            for (const auto& c : g.credentials) {
                require_path(guard_tree, c.path, "login credentials of " + g.guard_screen);
            }
            require_path(guard_tree, g.submit_path, "login submit of " + g.guard_screen);
        }
    }
    return m;
}

std::string serialize_app_model(const AppModel& model) {
    json j;
    j["app_id"] = model.app_id;
    j["package"] = model.package_name;
    j["category"] = model.category;
    j["width"] = model.screen_width;
    j["height"] = model.screen_height;
    j["initial_screen"] = model.initial_screen;
    json screens = json::array();
    for (const auto& [id, s] : model.screens) {
        json sj;
        sj["screen_id"] = s.screen_id;
        sj["render_seed"] = s.render_seed;
        if (s.back_to) sj["back_to"] = *s.back_to;
        sj["root"] = json::parse(vh::serialize_vh(s.tree))["root"];
        screens.push_back(std::move(sj));
    }
    j["screens"] = std::move(screens);
    json transitions = json::array();
    for (const auto& t : model.transitions) {
        json tj;
        tj["from"] = t.from;
        tj["kind"] = std::string(to_string(t.kind));
        tj["path"] = path_to_json(t.path);
        if (t.text_equals) tj["text_equals"] = *t.text_equals;
        tj["to"] = t.to;
        if (t.crash_probability > 0) tj["crash_probability"] = t.crash_probability;
        transitions.push_back(std::move(tj));
    }
    j["transitions"] = std::move(transitions);
    json gates = json::array();
    for (const auto& g : model.gates) {
        json gj;
        gj["kind"] = std::string(to_string(g.kind));
        gj["guard_screen"] = g.guard_screen;
        gj["to"] = g.to;
        if (g.kind == GateKind::Login) {
            json creds = json::array();
            for (const auto& c : g.credentials) {
                creds.push_back({{"path", path_to_json(c.path)}, {"text", c.text}});
            }
            gj["credentials"] = std::move(creds);
            gj["submit_path"] = path_to_json(g.submit_path);
        }
        gates.push_back(std::move(gj));
    }
    j["gates"] = std::move(gates);
    return j.dump(2);
}

namespace {

void rgb_from_hash(uint64_t h, uint8_t& r, uint8_t& g, uint8_t& b) {
    r = static_cast<uint8_t>((h >> 16) & 0xff);
    g = static_cast<uint8_t>((h >> 32) & 0xff);
    b = static_cast<uint8_t>((h >> 48) & 0xff);
}

void paint_node(img::Image& im, const vh::VhNode& n) {
    if (!n.flags.visible) return;
    std::string key = n.class_name;
    key.push_back('\x1f');
    if (auto label = vh::label_of(n)) key += *label;
    uint8_t r, g, b;
    rgb_from_hash(util::fnv1a64(key), r, g, b);
    im.fill_rect(n.bounds_px.left, n.bounds_px.top, n.bounds_px.right, n.bounds_px.bottom, r, g, b);
    for (const auto& c : n.children) paint_node(im, c);
}

} // namespace

img::Image render(const ScreenSpec& screen) {
    uint8_t r, g, b;
    rgb_from_hash(util::splitmix64(screen.render_seed), r, g, b);
    img::Image im = img::Image::solid(screen.tree.screen_width_px, screen.tree.screen_height_px,
                                      r, g, b);
    if (screen.tree.root.flags.visible) paint_node(im, screen.tree.root);
    return im;
}

const AppModel& SimDevice::app() const {
    if (!installed_) throw NotInstalled("no app installed on " + instance_id_);
    return *installed_;
}

void SimDevice::install(AppModel app) {
    installed_ = std::move(app);
    launched_ = false;
    status_ = DeviceStatus::Busy;
    action_log_.clear();
    entered_text_.clear();
    screenshot_cache_.clear();
}

void SimDevice::launch(uint64_t session_seed) {
    if (!installed_) throw NotInstalled("launch before install on " + instance_id_);
    launched_ = true;
    status_ = DeviceStatus::Busy;
    current_screen_ = installed_->initial_screen;
    rng_.seed(session_seed);
    entered_text_.clear();
}

void SimDevice::require_launched() const {
    if (!installed_) throw NotInstalled("no app installed on " + instance_id_);
    if (!launched_) throw NotLaunched("app not launched on " + instance_id_);
    if (status_ == DeviceStatus::Faulted) throw NotLaunched("device faulted: " + instance_id_);
}

img::Image SimDevice::screenshot() const {
    require_launched();
    auto it = screenshot_cache_.find(current_screen_);
    if (it != screenshot_cache_.end()) return it->second;
    img::Image im = render(installed_->screen(current_screen_));
    screenshot_cache_.emplace(current_screen_, im);
    return im;
}

vh::VhTree SimDevice::dump_vh() const {
    require_launched();
    return installed_->screen(current_screen_).tree;
}

PerformResult SimDevice::move_to(const std::string& screen_id, double crash_probability) {
    if (crash_probability > 0.0) {
        if (util::rng_unit(rng_) < crash_probability) {
            status_ = DeviceStatus::Faulted;
            launched_ = false;
            return {PerformStatus::AppCrashed, {}};
        }
    }
    current_screen_ = screen_id;
    return {PerformStatus::Transitioned, screen_id};
}

PerformResult SimDevice::go_back() {
    const auto& s = installed_->screen(current_screen_);
    if (s.back_to) return move_to(*s.back_to, 0.0);
    return {PerformStatus::NoEffect, {}};
}

PerformResult SimDevice::apply_transitions(const DeviceAction& action) {
    for (const auto& t : installed_->transitions) {
        if (t.from != current_screen_ || t.kind != action.kind || t.path != action.path) continue;
        if (t.text_equals && *t.text_equals != action.text) continue;
        return move_to(t.to, t.crash_probability);
    }
    return {PerformStatus::NoEffect, {}};
}

PerformResult SimDevice::apply_gate(const GateSpec& gate, const DeviceAction& action) {
    switch (gate.kind) {
        case GateKind::Login: {
            if (action.kind == DeviceActionKind::InputText) {
                // perform() already recorded the entered text
                return {PerformStatus::NoEffect, {}};
            }
            if (action.kind == DeviceActionKind::Tap && action.path == gate.submit_path) {
                bool ok = true;
                for (const auto& c : gate.credentials) {
                    auto it = entered_text_.find({current_screen_, c.path});
                    if (it == entered_text_.end() || it->second != c.text) {
                        ok = false;
                        break;
                    }
                }
                if (ok) return move_to(gate.to, 0.0);
                return {PerformStatus::NoEffect, {}};
            }
            if (action.kind == DeviceActionKind::Back) return go_back();
            if (action.kind == DeviceActionKind::HumanSolve) return {PerformStatus::NoEffect, {}};
            return apply_transitions(action);
        }
        case GateKind::Captcha: {
            if (action.kind == DeviceActionKind::HumanSolve) return move_to(gate.to, 0.0);
            if (action.kind == DeviceActionKind::Back) return go_back();
            return {PerformStatus::NoEffect, {}};
        }
        case GateKind::IdleLoop: {
            if (action.kind == DeviceActionKind::Tap) return move_to(current_screen_, 0.0);
            if (action.kind == DeviceActionKind::Scroll) return move_to(gate.to, 0.0);
            if (action.kind == DeviceActionKind::Back) return go_back();
            return {PerformStatus::NoEffect, {}};
        }
    }
    return {PerformStatus::NoEffect, {}};
}

PerformResult SimDevice::perform(const DeviceAction& action) {
    require_launched();
    if (action.kind != DeviceActionKind::Back && action.kind != DeviceActionKind::HumanSolve) {
        const auto& tree = installed_->screen(current_screen_).tree;
        if (!vh::resolve_path(tree, action.path)) {
            throw UnknownAction("action path does not resolve on screen " + current_screen_);
        }
    }
    action_log_.push_back(action);

    if (action.kind == DeviceActionKind::InputText) {
        entered_text_[{current_screen_, action.path}] = action.text;
    }
    if (const GateSpec* gate = installed_->gate_for(current_screen_)) {
        return apply_gate(*gate, action);
    }
    if (action.kind == DeviceActionKind::Back) return go_back();
    if (action.kind == DeviceActionKind::HumanSolve) return {PerformStatus::NoEffect, {}};
    return apply_transitions(action);
}

void SimDevice::reset() {
    installed_.reset();
    launched_ = false;
    status_ = DeviceStatus::Idle;
    current_screen_.clear();
    action_log_.clear();
    entered_text_.clear();
    screenshot_cache_.clear();
}

} // namespace uicrawl::sim
