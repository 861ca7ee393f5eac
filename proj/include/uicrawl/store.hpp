#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "uicrawl/dedup.hpp"
#include "uicrawl/errors.hpp"
#include "uicrawl/image.hpp"
#include "uicrawl/traversal.hpp"
#include "uicrawl/vh.hpp"

namespace uicrawl::store {

UICRAWL_DEFINE_ERROR(StorageFailure);

struct ScreenRecord {
    std::string record_id;
    std::string app_id;
    std::string session_id;
    int step = 0;
    std::string screenshot_ref; // relative to the dataset root
    vh::VhTree raw_vh;
    vh::SimplifiedVh simplified_vh;
    dedup::ScreenSignature signature;
    bool is_unique = false;
};

struct TrajectoryStep {
    dedup::ScreenSignature signature;
    sim::DeviceAction action;
    dedup::ScreenSignature next_signature;
};

struct TrajectoryRecord {
    std::string session_id;
    std::string app_id;
    std::vector<TrajectoryStep> steps; // consecutive entries chain
    std::string final_status;
};

struct AppEntry {
    std::string app_id;
    std::string name;
    std::string package;
    std::string category;
};

enum class WriteStatus { StoredUnique, StoredDuplicate };

struct QueryFilter {
    std::optional<std::string> app_id;
    std::optional<std::string> category;
    std::optional<bool> unique;
};

// Screenshot-VH dataset with dedup-on-write. Layout under the root:
//   images/{app_id}/{session_id}/{step}.png
//   manifest.jsonl  trajectories.jsonl  apps.jsonl
// A default-constructed store keeps everything in memory (tests, fixtures).
// Ingestion is single-writer; readers may run concurrently once writes are
// flushed.
class DatasetStore {
public:
    DatasetStore() = default;
    explicit DatasetStore(std::filesystem::path root);
    static DatasetStore open(const std::filesystem::path& root);

    // Writes the PNG under images/ (no-op for in-memory stores) and returns
    // the relative screenshot ref.
    std::string store_screenshot(const std::string& app_id, const std::string& session_id,
                                 int step, const img::Image& image);

    // Appends the record; uniqueness is exact-signature set membership at
    // write time (the record's incoming is_unique is overwritten).
    WriteStatus write_record(ScreenRecord record);

    void write_trajectory(TrajectoryRecord trajectory);
    void register_app(AppEntry app);

    const std::vector<ScreenRecord>& records() const { return records_; }
    const std::vector<TrajectoryRecord>& trajectories() const { return trajectories_; }
    const std::vector<AppEntry>& apps() const { return apps_; }
    std::optional<std::string> category_of(const std::string& app_id) const;

    size_t total_count() const { return records_.size(); }
    size_t unique_count() const { return unique_count_; }
    size_t duplicate_count() const { return records_.size() - unique_count_; }

    std::vector<const ScreenRecord*> query(const QueryFilter& filter) const;

    // Rewrites manifest.jsonl (sorted by app_id, session_id, step),
    // trajectories.jsonl and apps.jsonl.
    void save() const;

    bool has_root() const { return root_.has_value(); }
    const std::filesystem::path& root() const;

private:
    std::optional<std::filesystem::path> root_;
    std::vector<ScreenRecord> records_;
    std::vector<TrajectoryRecord> trajectories_;
    std::vector<AppEntry> apps_;
    std::set<dedup::ScreenSignature> seen_;
    size_t unique_count_ = 0;
};

nlohmann::json record_to_json(const ScreenRecord& r);
ScreenRecord record_from_json(const nlohmann::json& j);

} // namespace uicrawl::store
