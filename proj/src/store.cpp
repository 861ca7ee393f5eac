#include "uicrawl/store.hpp"

#include <algorithm>
#include <fstream>

namespace uicrawl::store {

using nlohmann::json;

DatasetStore::DatasetStore(std::filesystem::path root) : root_(std::move(root)) {
    std::error_code ec;
    std::filesystem::create_directories(*root_ / "images", ec);
    if (ec) throw StorageFailure("cannot create dataset root: " + root_->string());
}

const std::filesystem::path& DatasetStore::root() const {
    if (!root_) throw StorageFailure("store has no filesystem root");
    return *root_;
}

std::string DatasetStore::store_screenshot(const std::string& app_id,
                                           const std::string& session_id, int step,
                                           const img::Image& image) {
    std::string rel = "images/" + app_id + "/" + session_id + "/" + std::to_string(step) + ".png";
    if (root_) {
        std::filesystem::path full = *root_ / rel;
        std::error_code ec;
        std::filesystem::create_directories(full.parent_path(), ec);
        if (ec) throw StorageFailure("cannot create image directory for " + rel);
        try {
            img::write_png(full, image);
        } catch (const img::ImageIoError& e) {
            throw StorageFailure(e.what());
        }
    }
    return rel;
}

WriteStatus DatasetStore::write_record(ScreenRecord record) {
    bool inserted = seen_.insert(record.signature).second;
    record.is_unique = inserted;
    if (inserted) ++unique_count_;
    records_.push_back(std::move(record));
    return inserted ? WriteStatus::StoredUnique : WriteStatus::StoredDuplicate;
}

void DatasetStore::write_trajectory(TrajectoryRecord trajectory) {
    for (size_t i = 0; i + 1 < trajectory.steps.size(); ++i) {
        if (!(trajectory.steps[i].next_signature == trajectory.steps[i + 1].signature)) {
            throw StorageFailure("trajectory steps do not chain for session " +
                                 trajectory.session_id);
        }
    }
    trajectories_.push_back(std::move(trajectory));
}

void DatasetStore::register_app(AppEntry app) {
    for (const auto& a : apps_) {
        if (a.app_id == app.app_id) return; // idempotent
    }
    apps_.push_back(std::move(app));
}

std::optional<std::string> DatasetStore::category_of(const std::string& app_id) const {
    for (const auto& a : apps_) {
        if (a.app_id == app_id) return a.category;
    }
    return std::nullopt;
}

std::vector<const ScreenRecord*> DatasetStore::query(const QueryFilter& filter) const {
    std::vector<const ScreenRecord*> out;
    for (const auto& r : records_) {
        if (filter.app_id && r.app_id != *filter.app_id) continue;
        if (filter.unique && r.is_unique != *filter.unique) continue;
        if (filter.category) {
            auto cat = category_of(r.app_id);
            if (!cat || *cat != *filter.category) continue;
        }
        out.push_back(&r);
    }
    return out;
}

json record_to_json(const ScreenRecord& r) {
    json j;
    j["record_id"] = r.record_id;
    j["app_id"] = r.app_id;
    j["session_id"] = r.session_id;
    j["step"] = r.step;
    j["screenshot"] = r.screenshot_ref;
    j["signature"] = dedup::to_string(r.signature);
    j["is_unique"] = r.is_unique;
    j["raw_vh"] = json::parse(vh::serialize_vh(r.raw_vh));
    j["simplified_vh"] = json::parse(vh::serialize_simplified(r.simplified_vh));
    return j;
}

ScreenRecord record_from_json(const json& j) {
    ScreenRecord r;
    r.record_id = j.at("record_id").get<std::string>();
    r.app_id = j.at("app_id").get<std::string>();
    r.session_id = j.at("session_id").get<std::string>();
    r.step = j.at("step").get<int>();
    r.screenshot_ref = j.at("screenshot").get<std::string>();
    r.signature = dedup::signature_from_string(j.at("signature").get<std::string>());
    r.is_unique = j.at("is_unique").get<bool>();
    r.raw_vh = vh::parse_vh(j.at("raw_vh").dump(), vh::VhFormat::Json);
    r.simplified_vh = vh::parse_simplified(j.at("simplified_vh").dump());
    return r;
}

namespace {

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& lines) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw StorageFailure("cannot open for writing: " + path.string());
    for (const auto& j : lines) f << j.dump() << '\n';
    if (!f) throw StorageFailure("short write: " + path.string());
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
    std::vector<json> out;
    std::ifstream f(path);
    if (!f) return out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) throw StorageFailure("corrupt JSONL line in " + path.string());
        out.push_back(std::move(j));
    }
    return out;
}

} // namespace

void DatasetStore::save() const {
    if (!root_) throw StorageFailure("cannot save a store with no filesystem root");

    std::vector<const ScreenRecord*> sorted;
    sorted.reserve(records_.size());
    for (const auto& r : records_) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(), [](const ScreenRecord* a, const ScreenRecord* b) {
        return std::tie(a->app_id, a->session_id, a->step) <
               std::tie(b->app_id, b->session_id, b->step);
    });
    std::vector<json> manifest;
    manifest.reserve(sorted.size());
    for (const auto* r : sorted) manifest.push_back(record_to_json(*r));
    write_jsonl(*root_ / "manifest.jsonl", manifest);

    std::vector<const TrajectoryRecord*> traj_sorted;
    for (const auto& t : trajectories_) traj_sorted.push_back(&t);
    std::sort(traj_sorted.begin(), traj_sorted.end(),
              [](const TrajectoryRecord* a, const TrajectoryRecord* b) {
                  return std::tie(a->app_id, a->session_id) < std::tie(b->app_id, b->session_id);
              });
    std::vector<json> traj_lines;
    for (const auto* t : traj_sorted) {
        json steps = json::array();
        for (const auto& s : t->steps) {
            steps.push_back({{"signature", dedup::to_string(s.signature)},
                             {"action", traversal::device_action_to_json(s.action)},
                             {"next_signature", dedup::to_string(s.next_signature)}});
        }
        traj_lines.push_back({{"session_id", t->session_id},
                              {"app_id", t->app_id},
                              {"steps", std::move(steps)},
                              {"final_status", t->final_status}});
    }
    write_jsonl(*root_ / "trajectories.jsonl", traj_lines);

    std::vector<AppEntry> apps_sorted = apps_;
    std::sort(apps_sorted.begin(), apps_sorted.end(),
              [](const AppEntry& a, const AppEntry& b) { return a.app_id < b.app_id; });
    std::vector<json> app_lines;
    for (const auto& a : apps_sorted) {
        app_lines.push_back(
            {{"app_id", a.app_id}, {"name", a.name}, {"package", a.package}, {"category", a.category}});
    }
    write_jsonl(*root_ / "apps.jsonl", app_lines);
}

DatasetStore DatasetStore::open(const std::filesystem::path& root) {
    if (!std::filesystem::exists(root)) {
        throw StorageFailure("dataset root does not exist: " + root.string());
    }
    DatasetStore s(root);
    for (const auto& j : read_jsonl(root / "manifest.jsonl")) {
        ScreenRecord r = record_from_json(j);
        s.seen_.insert(r.signature);
        if (r.is_unique) ++s.unique_count_;
        s.records_.push_back(std::move(r));
    }
    for (const auto& j : read_jsonl(root / "trajectories.jsonl")) {
        TrajectoryRecord t;
        t.session_id = j.at("session_id").get<std::string>();
        t.app_id = j.at("app_id").get<std::string>();
        t.final_status = j.at("final_status").get<std::string>();
        for (const auto& sj : j.at("steps")) {
            TrajectoryStep st;
            st.signature = dedup::signature_from_string(sj.at("signature").get<std::string>());
            st.action = traversal::device_action_from_json(sj.at("action"));
            st.next_signature =
                dedup::signature_from_string(sj.at("next_signature").get<std::string>());
            t.steps.push_back(std::move(st));
        }
        s.trajectories_.push_back(std::move(t));
    }
    for (const auto& j : read_jsonl(root / "apps.jsonl")) {
        s.apps_.push_back({j.at("app_id").get<std::string>(), j.at("name").get<std::string>(),
                           j.at("package").get<std::string>(), j.at("category").get<std::string>()});
    }
    return s;
}

} // namespace uicrawl::store
