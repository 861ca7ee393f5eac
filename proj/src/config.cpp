#include "uicrawl/config.hpp"

#include <cstdlib>
#include <fstream>

#include <json.hpp>

namespace uicrawl::config {

using nlohmann::json;

namespace {

void apply_file(Config& c, const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path.string());
    json j = json::parse(f, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config file is not valid JSON: " + path.string());

    c.seed = j.value("seed", c.seed);
    c.instances = j.value("instances", c.instances);
    c.concurrency = j.value("concurrency", c.concurrency);
    c.max_steps = j.value("max_steps", c.max_steps);
    c.idle_window = j.value("idle_window", c.idle_window);
    c.hamming_threshold = j.value("hamming_threshold", c.hamming_threshold);
    c.llm_failure_budget = j.value("llm_failure_budget", c.llm_failure_budget);
    c.input_default_text = j.value("input_default_text", c.input_default_text);
    if (j.contains("trigger_keywords")) {
        c.trigger_keywords = j["trigger_keywords"].get<std::vector<std::string>>();
    }
    if (j.contains("llm")) {
        const auto& l = j["llm"];
        c.llm_endpoint = l.value("endpoint", c.llm_endpoint);
        c.llm_model = l.value("model", c.llm_model);
        c.llm_api_key_env = l.value("api_key_env", c.llm_api_key_env);
        c.llm_timeout_seconds = l.value("timeout_seconds", c.llm_timeout_seconds);
        c.llm_retries = l.value("retries", c.llm_retries);
        c.llm_multimodal = l.value("multimodal", c.llm_multimodal);
    }
}

void apply_env(Config& c) {
    auto get = [](const char* name) -> std::optional<std::string> {
        const char* v = std::getenv(name);
        if (!v || !*v) return std::nullopt;
        return std::string(v);
    };
    if (auto v = get("UICRAWL_SEED")) c.seed = std::strtoull(v->c_str(), nullptr, 10);
    if (auto v = get("UICRAWL_INSTANCES")) c.instances = std::atoi(v->c_str());
    if (auto v = get("UICRAWL_CONCURRENCY")) c.concurrency = std::atoi(v->c_str());
    if (auto v = get("UICRAWL_MAX_STEPS")) c.max_steps = std::atoi(v->c_str());
    if (auto v = get("UICRAWL_IDLE_WINDOW")) c.idle_window = std::atoi(v->c_str());
    if (auto v = get("UICRAWL_HAMMING")) c.hamming_threshold = std::atoi(v->c_str());
    if (auto v = get("UICRAWL_LLM_ENDPOINT")) c.llm_endpoint = *v;
    if (auto v = get("UICRAWL_LLM_MODEL")) c.llm_model = *v;
    if (auto v = get("UICRAWL_LLM_API_KEY_ENV")) c.llm_api_key_env = *v;
}

} // namespace

Config load(const std::optional<std::filesystem::path>& config_file) {
    Config c;
    if (config_file) apply_file(c, *config_file);
    apply_env(c);
    return c;
}

} // namespace uicrawl::config
