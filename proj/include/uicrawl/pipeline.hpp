#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "uicrawl/fleet.hpp"
#include "uicrawl/policy_llm.hpp"
#include "uicrawl/store.hpp"
#include "uicrawl/traversal.hpp"

namespace uicrawl::pipeline {

struct LlmSettings {
    // "scripted:<path>" selects the canned double, anything starting with
    // http(s):// selects the live chat client, empty disables the tier.
    std::string endpoint;
    std::string model = "gpt-4o";
    std::string api_key_env = "UICRAWL_API_KEY";
    int timeout_seconds = 30;
    int max_retries = 2;
    bool multimodal = false;
};

struct CrawlOptions {
    std::filesystem::path metadata_file;
    std::filesystem::path models_dir;
    std::filesystem::path out_root;
    int instances = 8;
    int concurrency = 0; // 0 -> instances
    std::vector<std::string> policies = {"rules"}; // rules[,llm]
    uint64_t seed = 0;
    traversal::SessionConfig session;
    LlmSettings llm;
};

struct CrawlSummary {
    int total = 0;
    int completed = 0;
    int awaiting_intervention = 0;
    int failed = 0;
};

// Runs the coordinator over the metadata + app models, writing under out_root:
//   dataset files (images/, manifest.jsonl, trajectories.jsonl, apps.jsonl)
//   report.json dispatch_log.jsonl session_events.jsonl fleet_state.json
CrawlSummary crawl(const CrawlOptions& options);

struct TicketInfo {
    std::string ticket_id;
    std::string app_id;
    std::string reason;
    std::string frozen_signature;
    int64_t created_at_ms = 0;
};

std::vector<TicketInfo> list_tickets(const std::filesystem::path& out_root);

// Applies the human action batch to one ticket (or, for resume_all, to every
// open ticket using {actions_dir}/{app_id}.json) and resumes traversal.
// Returns the number of tickets that reached completed state.
int resume_ticket(const std::filesystem::path& out_root, const std::string& ticket_id,
                  const std::filesystem::path& actions_file);
int resume_all(const std::filesystem::path& out_root, const std::filesystem::path& actions_dir);

std::vector<sim::DeviceAction> load_actions_file(const std::filesystem::path& path);

} // namespace uicrawl::pipeline
