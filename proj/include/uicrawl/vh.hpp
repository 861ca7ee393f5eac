#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uicrawl/errors.hpp"

namespace uicrawl::vh {

UICRAWL_DEFINE_ERROR(MalformedInput);
UICRAWL_DEFINE_ERROR(SchemaViolation);
UICRAWL_DEFINE_ERROR(DegenerateScreen);

struct RectPx {
    int left = 0;
    int top = 0;
    int right = 0;
    int bottom = 0;

    int width() const { return right - left; }
    int height() const { return bottom - top; }
    bool zero_area() const { return left >= right || top >= bottom; }
    bool operator==(const RectPx&) const = default;
};

struct RectF {
    double left = 0;
    double top = 0;
    double right = 0;
    double bottom = 0;
    bool operator==(const RectF&) const = default;
};

struct NodeFlags {
    bool clickable = false;
    bool long_clickable = false;
    bool editable = false;
    bool scrollable = false;
    bool focusable = false;
    bool enabled = true;
    bool visible = true;
    bool operator==(const NodeFlags&) const = default;
};

struct VhNode {
    std::string class_name;
    std::optional<std::string> resource_id;
    std::optional<std::string> text;
    std::optional<std::string> content_description;
    RectPx bounds_px;
    NodeFlags flags;
    std::vector<VhNode> children;
    bool operator==(const VhNode&) const = default;
};

struct VhTree {
    VhNode root;
    int screen_width_px = 0;
    int screen_height_px = 0;
    std::string package_name;
    std::string activity_name;
    bool operator==(const VhTree&) const = default;
};

// Screen representation fed to models: package/activity removed, bounds
// normalized to [0,1], invisible subtrees dropped, flag set reduced.
struct SimplifiedNode {
    std::string class_name;
    std::optional<std::string> label;
    std::optional<std::string> text;
    RectF bounds;
    bool clickable = false;
    bool editable = false;
    bool scrollable = false;
    bool focusable = false;
    std::vector<SimplifiedNode> children;
    bool operator==(const SimplifiedNode&) const = default;
};

struct SimplifiedVh {
    SimplifiedNode root;
    bool operator==(const SimplifiedVh&) const = default;
};

enum class ComponentType { Button, Checkbox, Text, InputField, ScrollItem, Other };

std::string_view to_string(ComponentType t);
std::optional<ComponentType> component_type_from_string(std::string_view s);

enum class ActionKind { Tap, LongTap, InputText, Scroll, Back };

std::string_view to_string(ActionKind k);
std::optional<ActionKind> action_kind_from_string(std::string_view s);

struct ActionTarget {
    std::vector<int> node_path; // child indices from the root; empty for back
    ActionKind kind = ActionKind::Tap;
    std::optional<std::string> input_payload; // input_text only
    bool operator==(const ActionTarget&) const = default;
};

enum class VhFormat { Json, Xml };

// Parsing and serialization. The JSON wire schema is
//   node = {class, resource_id?, text?, content_desc?, bounds:[l,t,r,b],
//           flags:[...], children:[...]}
//   tree = {width, height, package, activity, root}
// The XML importer accepts the UIAutomator dump shape. Bounds are clamped to
// the screen rectangle on ingestion.
VhTree parse_vh(std::string_view raw, VhFormat format);
std::string serialize_vh(const VhTree& tree);

SimplifiedVh simplify_vh(const VhTree& tree);

// Canonical form: serialize -> parse -> serialize is the identity.
std::string serialize_simplified(const SimplifiedVh& svh);
SimplifiedVh parse_simplified(std::string_view json_text);

// One target per permitted (node, action) pair among visible, enabled,
// non-zero-area nodes, in depth-first pre-order; per node the action order is
// tap < long_tap < input_text < scroll.
std::vector<ActionTarget> extract_interactables(const VhTree& tree,
                                                const std::string& default_input_text = "hello world");

// First match wins: CheckBox/Switch/Toggle class -> CHECKBOX; editable ->
// INPUT_FIELD; scrollable -> SCROLL_ITEM; clickable or Button class -> BUTTON;
// bare text -> TEXT; else OTHER.
ComponentType classify_component(const VhNode& node);

std::optional<std::string> label_of(const VhNode& node);
bool is_labeled(const VhNode& node);

// FNV-1a over the canonical serialization with bounds quantized to 3 decimal
// places (stored as integer thousandths).
uint64_t vh_structural_hash(const SimplifiedVh& svh);

const VhNode* resolve_path(const VhTree& tree, std::span<const int> path);

} // namespace uicrawl::vh
