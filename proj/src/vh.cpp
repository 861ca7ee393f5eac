#include "uicrawl/vh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <json.hpp>

#include "uicrawl/util.hpp"

namespace uicrawl::vh {

using nlohmann::json;

std::string_view to_string(ComponentType t) {
    switch (t) {
        case ComponentType::Button: return "BUTTON";
        case ComponentType::Checkbox: return "CHECKBOX";
        case ComponentType::Text: return "TEXT";
        case ComponentType::InputField: return "INPUT_FIELD";
        case ComponentType::ScrollItem: return "SCROLL_ITEM";
        case ComponentType::Other: return "OTHER";
    }
    return "OTHER";
}

std::optional<ComponentType> component_type_from_string(std::string_view s) {
    if (s == "BUTTON") return ComponentType::Button;
    if (s == "CHECKBOX") return ComponentType::Checkbox;
    if (s == "TEXT") return ComponentType::Text;
    if (s == "INPUT_FIELD") return ComponentType::InputField;
    if (s == "SCROLL_ITEM") return ComponentType::ScrollItem;
    if (s == "OTHER") return ComponentType::Other;
    return std::nullopt;
}

std::string_view to_string(ActionKind k) {
    switch (k) {
        case ActionKind::Tap: return "tap";
        case ActionKind::LongTap: return "long_tap";
        case ActionKind::InputText: return "input_text";
        case ActionKind::Scroll: return "scroll";
        case ActionKind::Back: return "back";
    }
    return "tap";
}

std::optional<ActionKind> action_kind_from_string(std::string_view s) {
    if (s == "tap") return ActionKind::Tap;
    if (s == "long_tap") return ActionKind::LongTap;
    if (s == "input_text") return ActionKind::InputText;
    if (s == "scroll") return ActionKind::Scroll;
    if (s == "back") return ActionKind::Back;
    return std::nullopt;
}

namespace {

constexpr const char* kFlagNames[] = {"clickable",  "long_clickable", "editable", "scrollable",
                                      "focusable",  "enabled",        "visible"};

bool* flag_slot(NodeFlags& f, std::string_view name) {
    if (name == "clickable") return &f.clickable;
    if (name == "long_clickable") return &f.long_clickable;
    if (name == "editable") return &f.editable;
    if (name == "scrollable") return &f.scrollable;
    if (name == "focusable") return &f.focusable;
    if (name == "enabled") return &f.enabled;
    if (name == "visible") return &f.visible;
    return nullptr;
}

bool flag_value(const NodeFlags& f, std::string_view name) {
    if (name == "clickable") return f.clickable;
    if (name == "long_clickable") return f.long_clickable;
    if (name == "editable") return f.editable;
    if (name == "scrollable") return f.scrollable;
    if (name == "focusable") return f.focusable;
    if (name == "enabled") return f.enabled;
    if (name == "visible") return f.visible;
    return false;
}

void clamp_bounds(RectPx& b, int width, int height) {
    b.left = std::clamp(b.left, 0, width);
    b.right = std::clamp(b.right, 0, width);
    b.top = std::clamp(b.top, 0, height);
    b.bottom = std::clamp(b.bottom, 0, height);
}

VhNode node_from_json(const json& j, const std::string& path, int width, int height) {
    if (!j.is_object()) throw SchemaViolation("node is not an object at " + path);
    VhNode n;
    if (!j.contains("class") || !j["class"].is_string()) {
        throw SchemaViolation("missing mandatory field 'class' at " + path);
    }
    n.class_name = j["class"].get<std::string>();
    if (!j.contains("bounds") || !j["bounds"].is_array() || j["bounds"].size() != 4) {
        throw SchemaViolation("missing mandatory field 'bounds' at " + path);
    }
    const auto& b = j["bounds"];
    for (const auto& v : b) {
        if (!v.is_number_integer()) {
            throw SchemaViolation("bounds must be four integers at " + path);
        }
    }
    n.bounds_px = RectPx{b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()};
    if (n.bounds_px.left > n.bounds_px.right || n.bounds_px.top > n.bounds_px.bottom) {
        throw SchemaViolation("inverted bounds at " + path);
    }
    clamp_bounds(n.bounds_px, width, height);

    if (j.contains("resource_id") && j["resource_id"].is_string()) {
        n.resource_id = j["resource_id"].get<std::string>();
    }
    if (j.contains("text") && j["text"].is_string()) n.text = j["text"].get<std::string>();
    if (j.contains("content_desc") && j["content_desc"].is_string()) {
        n.content_description = j["content_desc"].get<std::string>();
    }
    if (j.contains("flags")) {
        if (!j["flags"].is_array()) throw SchemaViolation("flags must be an array at " + path);
        n.flags = NodeFlags{false, false, false, false, false, false, false};
        for (const auto& fv : j["flags"]) {
            if (!fv.is_string()) throw SchemaViolation("flag entries must be strings at " + path);
            if (bool* slot = flag_slot(n.flags, fv.get<std::string>())) *slot = true;
        }
    }
    if (j.contains("children")) {
        if (!j["children"].is_array()) {
            throw SchemaViolation("children must be an array at " + path);
        }
        int i = 0;
        for (const auto& c : j["children"]) {
            n.children.push_back(
                node_from_json(c, path + ".children[" + std::to_string(i) + "]", width, height));
            ++i;
        }
    }
    return n;
}

json node_to_json(const VhNode& n) {
    json j;
    j["class"] = n.class_name;
    if (n.resource_id) j["resource_id"] = *n.resource_id;
    if (n.text) j["text"] = *n.text;
    if (n.content_description) j["content_desc"] = *n.content_description;
    j["bounds"] = {n.bounds_px.left, n.bounds_px.top, n.bounds_px.right, n.bounds_px.bottom};
    json flags = json::array();
    for (const char* name : kFlagNames) {
        if (flag_value(n.flags, name)) flags.push_back(name);
    }
    j["flags"] = std::move(flags);
    json children = json::array();
    for (const auto& c : n.children) children.push_back(node_to_json(c));
    j["children"] = std::move(children);
    return j;
}

VhTree tree_from_json(const json& j) {
    if (!j.is_object()) throw SchemaViolation("document root is not an object at root");
    VhTree t;
    if (!j.contains("width") || !j.contains("height") || !j["width"].is_number_integer() ||
        !j["height"].is_number_integer()) {
        throw SchemaViolation("missing mandatory field 'width'/'height' at root");
    }
    t.screen_width_px = j["width"].get<int>();
    t.screen_height_px = j["height"].get<int>();
    if (t.screen_width_px <= 0 || t.screen_height_px <= 0) {
        throw SchemaViolation("screen dimensions must be positive at root");
    }
    t.package_name = j.value("package", std::string());
    t.activity_name = j.value("activity", std::string());
    if (!j.contains("root")) throw SchemaViolation("missing mandatory field 'root' at root");
    t.root = node_from_json(j["root"], "root", t.screen_width_px, t.screen_height_px);
    return t;
}

// --- UIAutomator dump import -------------------------------------------------

RectPx parse_uiautomator_bounds(const std::string& s, const std::string& path) {
    RectPx r;
    if (std::sscanf(s.c_str(), "[%d,%d][%d,%d]", &r.left, &r.top, &r.right, &r.bottom) != 4) {
        throw SchemaViolation("unparseable bounds attribute at " + path);
    }
    return r;
}

bool attr_true(const boost::property_tree::ptree& attrs, const char* name, bool fallback) {
    auto v = attrs.get_optional<std::string>(name);
    if (!v) return fallback;
    return *v == "true";
}

VhNode node_from_xml(const boost::property_tree::ptree& el, const std::string& path) {
    VhNode n;
    auto attrs_opt = el.get_child_optional("<xmlattr>");
    static const boost::property_tree::ptree kEmpty;
    const auto& attrs = attrs_opt ? *attrs_opt : kEmpty;

    auto cls = attrs.get_optional<std::string>("class");
    if (!cls || cls->empty()) throw SchemaViolation("missing mandatory field 'class' at " + path);
    n.class_name = *cls;

    auto bounds = attrs.get_optional<std::string>("bounds");
    if (!bounds) throw SchemaViolation("missing mandatory field 'bounds' at " + path);
    n.bounds_px = parse_uiautomator_bounds(*bounds, path);
    if (n.bounds_px.left > n.bounds_px.right || n.bounds_px.top > n.bounds_px.bottom) {
        throw SchemaViolation("inverted bounds at " + path);
    }

    if (auto v = attrs.get_optional<std::string>("resource-id"); v && !v->empty()) n.resource_id = *v;
    if (auto v = attrs.get_optional<std::string>("text"); v && !v->empty()) n.text = *v;
    if (auto v = attrs.get_optional<std::string>("content-desc"); v && !v->empty()) {
        n.content_description = *v;
    }
    n.flags.clickable = attr_true(attrs, "clickable", false);
    n.flags.long_clickable = attr_true(attrs, "long-clickable", false);
    n.flags.scrollable = attr_true(attrs, "scrollable", false);
    n.flags.focusable = attr_true(attrs, "focusable", false);
    n.flags.enabled = attr_true(attrs, "enabled", true);
    n.flags.visible = attr_true(attrs, "visible-to-user", true);
    // UIAutomator dumps carry no editable attribute; EditText is the editable class.
    n.flags.editable = n.class_name.find("EditText") != std::string::npos;

    int i = 0;
    for (const auto& [key, child] : el) {
        if (key != "node") continue;
        n.children.push_back(node_from_xml(child, path + ".children[" + std::to_string(i) + "]"));
        ++i;
    }
    return n;
}

void clamp_subtree(VhNode& n, int width, int height) {
    clamp_bounds(n.bounds_px, width, height);
    for (auto& c : n.children) clamp_subtree(c, width, height);
}

VhTree tree_from_xml(std::string_view raw) {
    namespace pt = boost::property_tree;
    pt::ptree doc;
    std::istringstream in{std::string(raw)};
    try {
        pt::read_xml(in, doc);
    } catch (const pt::xml_parser_error& e) {
        throw MalformedInput(std::string("XML parse failure: ") + e.what());
    }

    const pt::ptree* container = &doc;
    if (auto h = doc.get_child_optional("hierarchy")) container = &*h;
    const pt::ptree* root_el = nullptr;
    for (const auto& [key, child] : *container) {
        if (key == "node") {
            root_el = &child;
            break;
        }
    }
    if (!root_el) throw SchemaViolation("no <node> element found at root");

    VhTree t;
    t.root = node_from_xml(*root_el, "root");
    t.screen_width_px = t.root.bounds_px.right;
    t.screen_height_px = t.root.bounds_px.bottom;
    if (t.screen_width_px <= 0 || t.screen_height_px <= 0) {
        throw SchemaViolation("root bounds do not define a positive screen size at root");
    }
    if (auto pkg = root_el->get_optional<std::string>("<xmlattr>.package")) t.package_name = *pkg;
    clamp_subtree(t.root, t.screen_width_px, t.screen_height_px);
    return t;
}

} // namespace

VhTree parse_vh(std::string_view raw, VhFormat format) {
    if (raw.empty()) throw MalformedInput("empty input");
    if (format == VhFormat::Json) {
        json j = json::parse(raw, nullptr, false);
        if (j.is_discarded()) throw MalformedInput("invalid JSON");
        return tree_from_json(j);
    }
    return tree_from_xml(raw);
}

std::string serialize_vh(const VhTree& tree) {
    json j;
    j["width"] = tree.screen_width_px;
    j["height"] = tree.screen_height_px;
    j["package"] = tree.package_name;
    j["activity"] = tree.activity_name;
    j["root"] = node_to_json(tree.root);
    return j.dump();
}

namespace {

SimplifiedNode simplify_node(const VhNode& n, double width, double height) {
    SimplifiedNode s;
    s.class_name = n.class_name;
    if (n.content_description && !n.content_description->empty()) s.label = *n.content_description;
    if (n.text && !n.text->empty()) s.text = *n.text;
    s.bounds = RectF{n.bounds_px.left / width, n.bounds_px.top / height, n.bounds_px.right / width,
                     n.bounds_px.bottom / height};
    s.clickable = n.flags.clickable;
    s.editable = n.flags.editable;
    s.scrollable = n.flags.scrollable;
    s.focusable = n.flags.focusable;
    for (const auto& c : n.children) {
        if (!c.flags.visible) continue; // drop invisible subtrees
        s.children.push_back(simplify_node(c, width, height));
    }
    return s;
}

} // namespace

SimplifiedVh simplify_vh(const VhTree& tree) {
    if (tree.screen_width_px <= 0 || tree.screen_height_px <= 0) {
        throw DegenerateScreen("screen dimensions must be positive");
    }
    SimplifiedVh out;
    if (!tree.root.flags.visible) {
        out.root = SimplifiedNode{}; // placeholder root: nothing visible on screen
        return out;
    }
    out.root = simplify_node(tree.root, tree.screen_width_px, tree.screen_height_px);
    return out;
}

namespace {

json simplified_to_json(const SimplifiedNode& n) {
    json j;
    j["class"] = n.class_name;
    if (n.label) j["label"] = *n.label;
    if (n.text) j["text"] = *n.text;
    j["bounds"] = {n.bounds.left, n.bounds.top, n.bounds.right, n.bounds.bottom};
    json flags = json::array();
    if (n.clickable) flags.push_back("clickable");
    if (n.editable) flags.push_back("editable");
    if (n.scrollable) flags.push_back("scrollable");
    if (n.focusable) flags.push_back("focusable");
    j["flags"] = std::move(flags);
    json children = json::array();
    for (const auto& c : n.children) children.push_back(simplified_to_json(c));
    j["children"] = std::move(children);
    return j;
}

SimplifiedNode simplified_from_json(const json& j, const std::string& path) {
    if (!j.is_object()) throw SchemaViolation("node is not an object at " + path);
    SimplifiedNode n;
    if (!j.contains("class") || !j["class"].is_string()) {
        throw SchemaViolation("missing mandatory field 'class' at " + path);
    }
    n.class_name = j["class"].get<std::string>();
    if (j.contains("label") && j["label"].is_string()) n.label = j["label"].get<std::string>();
    if (j.contains("text") && j["text"].is_string()) n.text = j["text"].get<std::string>();
    if (!j.contains("bounds") || !j["bounds"].is_array() || j["bounds"].size() != 4) {
        throw SchemaViolation("missing mandatory field 'bounds' at " + path);
    }
    n.bounds = RectF{j["bounds"][0].get<double>(), j["bounds"][1].get<double>(),
                     j["bounds"][2].get<double>(), j["bounds"][3].get<double>()};
    if (j.contains("flags")) {
        for (const auto& f : j["flags"]) {
            std::string name = f.get<std::string>();
            if (name == "clickable") n.clickable = true;
            else if (name == "editable") n.editable = true;
            else if (name == "scrollable") n.scrollable = true;
            else if (name == "focusable") n.focusable = true;
        }
    }
    if (j.contains("children")) {
        int i = 0;
        for (const auto& c : j["children"]) {
            n.children.push_back(
                simplified_from_json(c, path + ".children[" + std::to_string(i) + "]"));
            ++i;
        }
    }
    return n;
}

} // namespace

std::string serialize_simplified(const SimplifiedVh& svh) {
    return simplified_to_json(svh.root).dump();
}

SimplifiedVh parse_simplified(std::string_view json_text) {
    json j = json::parse(json_text, nullptr, false);
    if (j.is_discarded()) throw MalformedInput("invalid JSON");
    return SimplifiedVh{simplified_from_json(j, "root")};
}

namespace {

void extract_from(const VhNode& n, std::vector<int>& path, const std::string& default_input_text,
                  std::vector<ActionTarget>& out) {
    if (!n.flags.visible) return;
    if (n.flags.enabled && !n.bounds_px.zero_area()) {
        if (n.flags.clickable) out.push_back({path, ActionKind::Tap, std::nullopt});
        if (n.flags.long_clickable) out.push_back({path, ActionKind::LongTap, std::nullopt});
        if (n.flags.editable) out.push_back({path, ActionKind::InputText, default_input_text});
        if (n.flags.scrollable) out.push_back({path, ActionKind::Scroll, std::nullopt});
    }
    for (int i = 0; i < static_cast<int>(n.children.size()); ++i) {
        path.push_back(i);
        extract_from(n.children[i], path, default_input_text, out);
        path.pop_back();
    }
}

} // namespace

std::vector<ActionTarget> extract_interactables(const VhTree& tree,
                                                const std::string& default_input_text) {
    std::vector<ActionTarget> out;
    std::vector<int> path;
    extract_from(tree.root, path, default_input_text, out);
    return out;
}

ComponentType classify_component(const VhNode& node) {
    const std::string& cls = node.class_name;
    auto cls_contains = [&cls](const char* what) { return cls.find(what) != std::string::npos; };
    if (cls_contains("CheckBox") || cls_contains("Switch") || cls_contains("Toggle")) {
        return ComponentType::Checkbox;
    }
    if (node.flags.editable) return ComponentType::InputField;
    if (node.flags.scrollable) return ComponentType::ScrollItem;
    if (node.flags.clickable || cls_contains("Button")) return ComponentType::Button;
    bool any_interaction_flag = node.flags.clickable || node.flags.long_clickable ||
                                node.flags.editable || node.flags.scrollable;
    if (node.text && !node.text->empty() && !any_interaction_flag) return ComponentType::Text;
    return ComponentType::Other;
}

std::optional<std::string> label_of(const VhNode& node) {
    if (node.content_description && !node.content_description->empty()) {
        return *node.content_description;
    }
    if (node.text && !node.text->empty()) return *node.text;
    return std::nullopt;
}

bool is_labeled(const VhNode& node) { return label_of(node).has_value(); }

namespace {

json quantized_for_hash(const SimplifiedNode& n) {
    json j = json::object();
    j["class"] = n.class_name;
    if (n.label) j["label"] = *n.label;
    if (n.text) j["text"] = *n.text;
    j["bounds"] = {std::llround(n.bounds.left * 1000.0), std::llround(n.bounds.top * 1000.0),
                   std::llround(n.bounds.right * 1000.0), std::llround(n.bounds.bottom * 1000.0)};
    json flags = json::array();
    if (n.clickable) flags.push_back("clickable");
    if (n.editable) flags.push_back("editable");
    if (n.scrollable) flags.push_back("scrollable");
    if (n.focusable) flags.push_back("focusable");
    j["flags"] = std::move(flags);
    json children = json::array();
    for (const auto& c : n.children) children.push_back(quantized_for_hash(c));
    j["children"] = std::move(children);
    return j;
}

} // namespace

uint64_t vh_structural_hash(const SimplifiedVh& svh) {
    return util::fnv1a64(quantized_for_hash(svh.root).dump());
}

const VhNode* resolve_path(const VhTree& tree, std::span<const int> path) {
    const VhNode* n = &tree.root;
    for (int idx : path) {
        if (idx < 0 || idx >= static_cast<int>(n->children.size())) return nullptr;
        n = &n->children[idx];
    }
    return n;
}

} // namespace uicrawl::vh
