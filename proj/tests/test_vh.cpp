#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "support/oracles.hpp"
#include "uicrawl/util.hpp"
#include "uicrawl/vh.hpp"

using namespace uicrawl;

namespace {

const char* kSingleNodeDoc = R"({
  "width": 1080, "height": 1920, "package": "com.demo", "activity": "main",
  "root": {"class": "android.widget.FrameLayout", "bounds": [0, 0, 1080, 1920]}
})";

vh::VhTree fixture_tree() {
    // root
    //   [0] text header
    //   [1] clickable button
    //   [2] container (invisible)
    //         [0] clickable child (hidden with its parent)
    //   [3] edit field
    vh::VhTree t;
    t.screen_width_px = 1080;
    t.screen_height_px = 1920;
    t.package_name = "com.demo";
    t.activity_name = "main";
    t.root.class_name = "android.widget.FrameLayout";
    t.root.bounds_px = {0, 0, 1080, 1920};

    vh::VhNode header;
    header.class_name = "android.widget.TextView";
    header.text = "Latest offers";
    header.bounds_px = {0, 0, 1080, 160};

    vh::VhNode button;
    button.class_name = "android.widget.Button";
    button.text = "Refresh";
    button.bounds_px = {40, 200, 1040, 320};
    button.flags.clickable = true;
    button.flags.focusable = true;

    vh::VhNode hidden;
    hidden.class_name = "android.widget.FrameLayout";
    hidden.bounds_px = {0, 400, 1080, 900};
    hidden.flags.visible = false;
    vh::VhNode hidden_child;
    hidden_child.class_name = "android.widget.Button";
    hidden_child.text = "Ghost";
    hidden_child.bounds_px = {0, 400, 540, 600};
    hidden_child.flags.clickable = true;
    hidden.children.push_back(hidden_child);

    vh::VhNode field;
    field.class_name = "android.widget.EditText";
    field.content_description = "Search query";
    field.bounds_px = {40, 1000, 1040, 1120};
    field.flags.editable = true;
    field.flags.focusable = true;

    t.root.children = {header, button, hidden, field};
    return t;
}

} // namespace

TEST_CASE("parse_vh: single-node JSON document") {
    auto t = vh::parse_vh(kSingleNodeDoc, vh::VhFormat::Json);
    CHECK(t.root.class_name == "android.widget.FrameLayout");
    CHECK(t.root.children.empty());
    CHECK(t.screen_width_px == 1080);
    CHECK(t.screen_height_px == 1920);
    CHECK(t.root.bounds_px == vh::RectPx{0, 0, 1080, 1920});
}

TEST_CASE("parse_vh: serialize then re-parse is structurally identical") {
    auto t = vh::parse_vh(kSingleNodeDoc, vh::VhFormat::Json);
    auto again = vh::parse_vh(vh::serialize_vh(t), vh::VhFormat::Json);
    CHECK(t == again);

    auto fixture = fixture_tree();
    auto round = vh::parse_vh(vh::serialize_vh(fixture), vh::VhFormat::Json);
    CHECK(fixture == round);
}

TEST_CASE("parse_vh: missing bounds raises SchemaViolation naming the path") {
    const char* doc = R"({"width":100,"height":100,"root":{"class":"android.view.View"}})";
    try {
        vh::parse_vh(doc, vh::VhFormat::Json);
        FAIL("expected SchemaViolation");
    } catch (const vh::SchemaViolation& e) {
        CHECK(std::string(e.what()).find("root") != std::string::npos);
        CHECK(std::string(e.what()).find("bounds") != std::string::npos);
    }
    const char* nested = R"({"width":100,"height":100,"root":{
        "class":"android.view.View","bounds":[0,0,100,100],
        "children":[{"class":"android.view.View","bounds":[0,0,10,10]},
                    {"class":"android.view.View"}]}})";
    try {
        vh::parse_vh(nested, vh::VhFormat::Json);
        FAIL("expected SchemaViolation");
    } catch (const vh::SchemaViolation& e) {
        CHECK(std::string(e.what()).find("root.children[1]") != std::string::npos);
    }
}

TEST_CASE("parse_vh: rejects empty and malformed input") {
    CHECK_THROWS_AS(vh::parse_vh("", vh::VhFormat::Json), vh::MalformedInput);
    CHECK_THROWS_AS(vh::parse_vh("{not json", vh::VhFormat::Json), vh::MalformedInput);
    CHECK_THROWS_AS(vh::parse_vh("<hierarchy", vh::VhFormat::Xml), vh::MalformedInput);
}

TEST_CASE("parse_vh: out-of-screen bounds are clamped") {
    const char* doc = R"({"width":100,"height":200,"root":
        {"class":"android.view.View","bounds":[-50,-10,150,300]}})";
    auto t = vh::parse_vh(doc, vh::VhFormat::Json);
    CHECK(t.root.bounds_px == vh::RectPx{0, 0, 100, 200});
}

TEST_CASE("parse_vh: UIAutomator XML dump import") {
    const char* dump = R"(<?xml version='1.0' encoding='UTF-8' standalone='yes' ?>
<hierarchy rotation="0">
  <node index="0" text="" resource-id="" class="android.widget.FrameLayout"
        package="com.demo.app" content-desc="" clickable="false" enabled="true"
        focusable="false" scrollable="false" long-clickable="false"
        visible-to-user="true" bounds="[0,0][1080,1920]">
    <node index="0" text="Sign in" resource-id="com.demo.app:id/cta"
          class="android.widget.Button" package="com.demo.app" content-desc="Sign in button"
          clickable="true" enabled="true" focusable="true" scrollable="false"
          long-clickable="false" visible-to-user="true" bounds="[40,1500][1040,1650]"/>
    <node index="1" text="" resource-id="com.demo.app:id/email"
          class="android.widget.EditText" package="com.demo.app" content-desc=""
          clickable="true" enabled="true" focusable="true" scrollable="false"
          long-clickable="false" visible-to-user="true" bounds="[40,1200][1040,1350]"/>
  </node>
</hierarchy>)";
    auto t = vh::parse_vh(dump, vh::VhFormat::Xml);
    CHECK(t.screen_width_px == 1080);
    CHECK(t.screen_height_px == 1920);
    CHECK(t.package_name == "com.demo.app");
    REQUIRE(t.root.children.size() == 2);
    CHECK(t.root.children[0].text == "Sign in");
    CHECK(t.root.children[0].flags.clickable);
    CHECK(t.root.children[1].flags.editable); // EditText implies editable
    CHECK(t.root.children[0].resource_id == "com.demo.app:id/cta");
}

TEST_CASE("simplify_vh: bounds normalized by screen size") {
    const char* doc = R"({"width":1080,"height":1920,"root":
        {"class":"android.view.View","bounds":[0,0,1080,1920],
         "children":[{"class":"android.widget.Button","bounds":[540,960,1080,1920],
                      "flags":["clickable","enabled","visible"]}]}})";
    auto svh = vh::simplify_vh(vh::parse_vh(doc, vh::VhFormat::Json));
    REQUIRE(svh.root.children.size() == 1);
    const auto& b = svh.root.children[0].bounds;
    CHECK(b.left == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(b.top == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(b.right == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(b.bottom == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(svh.root.children[0].clickable);
}

TEST_CASE("simplify_vh: invisible root yields placeholder") {
    auto t = fixture_tree();
    t.root.flags.visible = false;
    auto svh = vh::simplify_vh(t);
    CHECK(svh.root.class_name.empty());
    CHECK(svh.root.children.empty());
}

TEST_CASE("simplify_vh: invisible subtree dropped, count matches hand walk") {
    auto t = fixture_tree();
    auto svh = vh::simplify_vh(t);
    size_t expected = oracles::visible_node_count_oracle(t.root);
    CHECK(expected == 4); // root, header, button, field (hidden container + child dropped)
    CHECK(oracles::simplified_node_count(svh.root) == expected);
}

TEST_CASE("simplify_vh: degenerate screen dims rejected") {
    auto t = fixture_tree();
    t.screen_width_px = 0;
    CHECK_THROWS_AS(vh::simplify_vh(t), vh::DegenerateScreen);
}

TEST_CASE("simplified serialization is canonical") {
    auto svh = vh::simplify_vh(fixture_tree());
    std::string s1 = vh::serialize_simplified(svh);
    auto parsed = vh::parse_simplified(s1);
    CHECK(parsed == svh);
    CHECK(vh::serialize_simplified(parsed) == s1);
}

TEST_CASE("round-trip property on random trees") {
    std::mt19937_64 rng(util::mix_seed(7, "vh-roundtrip"));
    for (int i = 0; i < 200; ++i) {
        auto tree = oracles::random_tree(rng);
        auto svh = vh::simplify_vh(tree);
        auto reparsed = vh::parse_simplified(vh::serialize_simplified(svh));
        CHECK(reparsed == svh);
        // normalization invariant
        std::vector<const vh::SimplifiedNode*> stack{&svh.root};
        while (!stack.empty()) {
            const auto* n = stack.back();
            stack.pop_back();
            CHECK(n->bounds.left >= 0.0);
            CHECK(n->bounds.right <= 1.0);
            CHECK(n->bounds.top >= 0.0);
            CHECK(n->bounds.bottom <= 1.0);
            CHECK(n->bounds.left <= n->bounds.right);
            CHECK(n->bounds.top <= n->bounds.bottom);
            for (const auto& c : n->children) stack.push_back(&c);
        }
    }
}

TEST_CASE("extract_interactables: single clickable button") {
    const char* doc = R"({"width":100,"height":100,"root":
        {"class":"android.view.View","bounds":[0,0,100,100],
         "children":[{"class":"android.widget.Button","bounds":[0,0,50,50],
                      "flags":["clickable","enabled","visible"]}]}})";
    auto targets = vh::extract_interactables(vh::parse_vh(doc, vh::VhFormat::Json));
    REQUIRE(targets.size() == 1);
    CHECK(targets[0].kind == vh::ActionKind::Tap);
    CHECK(targets[0].node_path == std::vector<int>{0});
}

TEST_CASE("extract_interactables: tap ordered before scroll on one node") {
    const char* doc = R"({"width":100,"height":100,"root":
        {"class":"android.view.View","bounds":[0,0,100,100],
         "children":[{"class":"android.view.View","bounds":[0,0,100,100],
                      "flags":["clickable","scrollable","enabled","visible"]}]}})";
    auto targets = vh::extract_interactables(vh::parse_vh(doc, vh::VhFormat::Json));
    REQUIRE(targets.size() == 2);
    CHECK(targets[0].kind == vh::ActionKind::Tap);
    CHECK(targets[1].kind == vh::ActionKind::Scroll);
    CHECK(targets[0].node_path == targets[1].node_path);
}

TEST_CASE("extract_interactables: matches exhaustive enumeration on random fixtures") {
    std::mt19937_64 rng(util::mix_seed(11, "vh-extract"));
    for (int i = 0; i < 300; ++i) {
        auto tree = oracles::random_tree(rng);
        auto got = vh::extract_interactables(tree, "payload");
        auto want = oracles::interactables_oracle(tree, "payload");
        CHECK(got == want);
        // purity: a second call yields the identical list
        CHECK(vh::extract_interactables(tree, "payload") == got);
    }
}

TEST_CASE("extract_interactables: zero-area and disabled nodes excluded") {
    const char* doc = R"({"width":100,"height":100,"root":
        {"class":"android.view.View","bounds":[0,0,100,100],
         "children":[
           {"class":"android.widget.Button","bounds":[10,10,10,40],
            "flags":["clickable","enabled","visible"]},
           {"class":"android.widget.Button","bounds":[0,0,50,50],
            "flags":["clickable","visible"]}]}})";
    auto targets = vh::extract_interactables(vh::parse_vh(doc, vh::VhFormat::Json));
    CHECK(targets.empty());
}

TEST_CASE("classify_component: decision table spot checks") {
    vh::VhNode n;
    n.class_name = "android.widget.CheckBox";
    CHECK(vh::classify_component(n) == vh::ComponentType::Checkbox);

    vh::VhNode editable;
    editable.class_name = "android.view.View";
    editable.flags.editable = true;
    CHECK(vh::classify_component(editable) == vh::ComponentType::InputField);

    vh::VhNode image_button;
    image_button.class_name = "android.widget.ImageView";
    image_button.flags.clickable = true;
    CHECK(vh::classify_component(image_button) == vh::ComponentType::Button);

    vh::VhNode scroller;
    scroller.class_name = "android.widget.ScrollView";
    scroller.flags.scrollable = true;
    CHECK(vh::classify_component(scroller) == vh::ComponentType::ScrollItem);

    vh::VhNode text;
    text.class_name = "android.widget.TextView";
    text.text = "Hello";
    CHECK(vh::classify_component(text) == vh::ComponentType::Text);

    vh::VhNode other;
    other.class_name = "android.view.View";
    CHECK(vh::classify_component(other) == vh::ComponentType::Other);

    // editable wins over checkbox-less classes even when scrollable
    vh::VhNode both;
    both.class_name = "android.widget.EditText";
    both.flags.editable = true;
    both.flags.scrollable = true;
    CHECK(vh::classify_component(both) == vh::ComponentType::InputField);
}

TEST_CASE("classify_component: total and equal to the independent table on random nodes") {
    std::mt19937_64 rng(util::mix_seed(23, "vh-classify"));
    for (int i = 0; i < 5000; ++i) {
        auto node = oracles::random_node(rng, 0, 500, 500);
        CHECK(vh::classify_component(node) == oracles::classify_oracle(node));
    }
}

TEST_CASE("label_of: content_description over text") {
    vh::VhNode n;
    n.class_name = "android.widget.ImageView";
    n.content_description = "Open navigation drawer";
    n.text = "";
    CHECK(vh::label_of(n) == "Open navigation drawer");

    vh::VhNode none;
    none.class_name = "android.view.View";
    none.content_description = "";
    none.text = "";
    CHECK(!vh::label_of(none).has_value());
    CHECK(!vh::is_labeled(none));

    vh::VhNode text_only;
    text_only.class_name = "android.widget.Button";
    text_only.content_description = "";
    text_only.text = "Submit";
    CHECK(vh::label_of(text_only) == "Submit");
}

TEST_CASE("is_labeled iff label_of has a value (random nodes)") {
    std::mt19937_64 rng(util::mix_seed(31, "vh-label"));
    for (int i = 0; i < 2000; ++i) {
        auto node = oracles::random_node(rng, 0, 500, 500);
        CHECK(vh::is_labeled(node) == vh::label_of(node).has_value());
    }
}

TEST_CASE("vh_structural_hash: deterministic, label-sensitive, reparse-stable") {
    auto svh = vh::simplify_vh(fixture_tree());
    CHECK(vh::vh_structural_hash(svh) == vh::vh_structural_hash(svh));

    auto relabeled = fixture_tree();
    relabeled.root.children[3].content_description = "Different label";
    auto svh2 = vh::simplify_vh(relabeled);
    CHECK(vh::vh_structural_hash(svh) != vh::vh_structural_hash(svh2));

    auto reparsed = vh::parse_simplified(vh::serialize_simplified(svh));
    CHECK(vh::vh_structural_hash(reparsed) == vh::vh_structural_hash(svh));
}

TEST_CASE("resolve_path walks child indices") {
    auto t = fixture_tree();
    std::vector<int> path{2, 0};
    const auto* n = vh::resolve_path(t, path);
    REQUIRE(n != nullptr);
    CHECK(n->text == "Ghost");
    std::vector<int> bad{9};
    CHECK(vh::resolve_path(t, bad) == nullptr);
}
