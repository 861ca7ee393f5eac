#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "uicrawl/errors.hpp"

namespace uicrawl::config {

UICRAWL_DEFINE_ERROR(ConfigError);

// Tool-wide settings. Precedence: built-in defaults < config file <
// environment (UICRAWL_*) < command-line flags.
struct Config {
    uint64_t seed = 0;
    int instances = 8;
    int concurrency = 0; // 0 -> instances
    int max_steps = 1000;
    int idle_window = 10;
    int hamming_threshold = 5;
    int llm_failure_budget = 3;
    std::string input_default_text = "hello world";
    std::vector<std::string> trigger_keywords = {"login", "sign in"};

    std::string llm_endpoint;                      // scripted:<path> | http(s)://...
    std::string llm_model = "gpt-4o";
    std::string llm_api_key_env = "UICRAWL_API_KEY";
    int llm_timeout_seconds = 30;
    int llm_retries = 2;
    bool llm_multimodal = false;
};

// Defaults overlaid with the JSON config file (when given) and environment.
Config load(const std::optional<std::filesystem::path>& config_file);

} // namespace uicrawl::config
