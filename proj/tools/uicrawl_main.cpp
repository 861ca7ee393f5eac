// uicrawl: fleet crawling against simulated devices, intervention handling,
// dataset analysis, and training-task generation in one CLI.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "uicrawl/analyze.hpp"
#include "uicrawl/config.hpp"
#include "uicrawl/image.hpp"
#include "uicrawl/pipeline.hpp"
#include "uicrawl/policy_llm.hpp"
#include "uicrawl/store.hpp"
#include "uicrawl/taskgen.hpp"
#include "uicrawl/util.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(std::exchange(cur, {}));
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw uicrawl::Error("cannot write " + path.string());
    f << content;
}

std::string read_text(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw uicrawl::Error("cannot open " + path.string());
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

std::vector<json> read_jsonl(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw uicrawl::Error("cannot open " + path.string());
    std::vector<json> out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) throw uicrawl::Error("corrupt JSONL line in " + path.string());
        out.push_back(std::move(j));
    }
    return out;
}

void write_jsonl(const fs::path& path, const std::vector<json>& lines) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw uicrawl::Error("cannot write " + path.string());
    for (const auto& j : lines) f << j.dump() << '\n';
}

// Live judge over the chat client; CI paths use the scripted doubles instead.
class LlmMatchJudge : public uicrawl::analyze::MatchJudge {
public:
    LlmMatchJudge(uicrawl::llm::ChatEndpoint* endpoint, fs::path dataset_root)
        : endpoint_(endpoint), dataset_root_(std::move(dataset_root)) {}

    bool judge(const std::string& screenshot_ref, const std::string& label) override {
        uicrawl::llm::ChatRequest req;
        req.messages.push_back({"user", uicrawl::analyze::matching_prompt(label), std::nullopt});
        if (endpoint_->multimodal()) {
            try {
                auto image = uicrawl::img::read_png(dataset_root_ / screenshot_ref);
                auto png = uicrawl::img::encode_png(image);
                req.messages.front().image_png_base64 = uicrawl::util::base64_encode(png);
            } catch (const uicrawl::Error& e) {
                throw uicrawl::analyze::JudgeFailure(e.what());
            }
        }
        try {
            auto resp = endpoint_->complete(req);
            return resp.content.find("True") != std::string::npos;
        } catch (const uicrawl::Error& e) {
            throw uicrawl::analyze::JudgeFailure(e.what());
        }
    }

private:
    uicrawl::llm::ChatEndpoint* endpoint_;
    fs::path dataset_root_;
};

std::unique_ptr<uicrawl::analyze::MatchJudge> make_judge(
    const std::string& spec, const uicrawl::config::Config& cfg, const fs::path& dataset_root,
    std::unique_ptr<uicrawl::llm::ChatEndpoint>& endpoint_holder) {
    if (spec == "always:true") return std::make_unique<uicrawl::analyze::AlwaysJudge>(true);
    if (spec == "always:false") return std::make_unique<uicrawl::analyze::AlwaysJudge>(false);
    if (spec.rfind("scripted:", 0) == 0) {
        json plan = json::parse(read_text(spec.substr(9)));
        std::set<std::string> good;
        const json& labels = plan.is_array() ? plan : plan.at("good_labels");
        for (const auto& l : labels) good.insert(l.get<std::string>());
        return std::make_unique<uicrawl::analyze::PlantedSetJudge>(std::move(good));
    }
    if (spec == "llm") {
        uicrawl::llm::HttpEndpointConfig http;
        http.base_url = cfg.llm_endpoint;
        http.model = cfg.llm_model;
        http.api_key_env = cfg.llm_api_key_env;
        http.timeout_seconds = cfg.llm_timeout_seconds;
        http.max_retries = cfg.llm_retries;
        http.multimodal = cfg.llm_multimodal;
        endpoint_holder = std::make_unique<uicrawl::llm::HttpChatEndpoint>(http);
        return std::make_unique<LlmMatchJudge>(endpoint_holder.get(), dataset_root);
    }
    throw uicrawl::config::ConfigError("unknown judge spec: " + spec);
}

std::optional<fs::path> preparse_config_path(int argc, char** argv) {
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--config") return fs::path(argv[i + 1]);
    }
    return std::nullopt;
}

int run_crawl(const uicrawl::config::Config& cfg, const fs::path& metadata,
              const fs::path& models_dir, const fs::path& out_root, int instances,
              const std::string& policies_csv, uint64_t seed) {
    uicrawl::pipeline::CrawlOptions opts;
    opts.metadata_file = metadata;
    opts.models_dir = models_dir;
    opts.out_root = out_root;
    opts.instances = instances;
    opts.concurrency = cfg.concurrency;
    opts.policies = split_csv(policies_csv);
    opts.seed = seed;
    opts.session.max_steps = cfg.max_steps;
    opts.session.idle_window = cfg.idle_window;
    opts.session.trigger_keywords = cfg.trigger_keywords;
    opts.session.input_default_text = cfg.input_default_text;
    opts.session.llm_failure_budget = cfg.llm_failure_budget;
    opts.llm.endpoint = cfg.llm_endpoint;
    opts.llm.model = cfg.llm_model;
    opts.llm.api_key_env = cfg.llm_api_key_env;
    opts.llm.timeout_seconds = cfg.llm_timeout_seconds;
    opts.llm.max_retries = cfg.llm_retries;
    opts.llm.multimodal = cfg.llm_multimodal;

    auto summary = uicrawl::pipeline::crawl(opts);
    std::printf("crawl: %d jobs, %d completed, %d awaiting intervention, %d failed\n",
                summary.total, summary.completed, summary.awaiting_intervention, summary.failed);
    std::printf("report: %s\n", (out_root / "report.json").string().c_str());
    return summary.failed == 0 ? kExitOk : kExitFailure;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

int run_analyze(const uicrawl::config::Config& cfg, const std::string& what,
                const fs::path& dataset_root, fs::path out_dir, int threshold,
                const std::string& judge_spec, size_t per_bucket, uint64_t seed) {
    auto store = uicrawl::store::DatasetStore::open(dataset_root);
    if (out_dir.empty()) out_dir = dataset_root / "analysis";
    fs::create_directories(out_dir);

    if (what == "stats") {
        auto spa = uicrawl::analyze::screens_per_app(store);
        std::string csv = "app_id,unique_screens\n";
        for (const auto& [app, n] : spa.per_app) {
            csv += csv_escape(app) + "," + std::to_string(n) + "\n";
        }
        write_text(out_dir / "screens_per_app.csv", csv);
        std::string bcsv = "bucket,apps\n";
        for (const auto& [label, n] : spa.buckets) {
            bcsv += csv_escape(label) + "," + std::to_string(n) + "\n";
        }
        write_text(out_dir / "screen_buckets.csv", bcsv);
        json stats;
        stats["total_screens"] = store.total_count();
        stats["unique_screens"] = store.unique_count();
        stats["duplicate_screens"] = store.duplicate_count();
        stats["apps_with_screens"] = spa.per_app.size();
        stats["share_apps_over_100_screens"] = spa.share_over(100);
        write_text(out_dir / "stats.json", stats.dump(2) + "\n");
        std::printf("stats: %zu screens, %zu unique, %zu apps -> %s\n", store.total_count(),
                    store.unique_count(), spa.per_app.size(), out_dir.string().c_str());
        return kExitOk;
    }
    if (what == "similarity-cdf") {
        std::vector<uicrawl::dedup::PerceptualHash> hashes;
        for (const auto& r : store.records()) {
            if (r.is_unique) hashes.push_back(r.signature.phash);
        }
        auto cdf = uicrawl::analyze::similarity_cdf(hashes, threshold);
        std::string csv = "similar_count,cumulative_fraction\n";
        for (const auto& p : cdf) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%zu,%.10f\n", p.x, p.y);
            csv += buf;
        }
        write_text(out_dir / "similarity_cdf.csv", csv);
        std::printf("similarity-cdf: %zu screens at threshold %d -> %s\n", hashes.size(), threshold,
                    (out_dir / "similarity_cdf.csv").string().c_str());
        return kExitOk;
    }
    if (what == "label-coverage") {
        auto cov = uicrawl::analyze::label_coverage(store);
        std::string csv = "group,category,total,unlabeled,unlabeled_pct\n";
        auto row = [&csv](const std::string& group, const uicrawl::analyze::CoverageRow& r) {
            char buf[64];
            if (r.unlabeled_pct) std::snprintf(buf, sizeof(buf), "%.1f", *r.unlabeled_pct);
            else std::snprintf(buf, sizeof(buf), "n/a");
            csv += group + "," + csv_escape(r.category) + "," + std::to_string(r.total) + "," +
                   std::to_string(r.unlabeled) + "," + buf + "\n";
        };
        for (const auto& r : cov.by_component) row("component", r);
        for (const auto& r : cov.by_image_class) row("image_class", r);
        row("combined", cov.focusable_image_based);
        write_text(out_dir / "label_coverage.csv", csv);
        std::printf("label-coverage -> %s\n", (out_dir / "label_coverage.csv").string().c_str());
        return kExitOk;
    }
    if (what == "label-length") {
        auto dist = uicrawl::analyze::label_length_distribution(store);
        std::string csv = "scope,bucket,count\n";
        for (size_t b = 0; b < 5; ++b) {
            csv += "all," +
                   std::string(uicrawl::analyze::to_string(
                       static_cast<uicrawl::analyze::LabelLengthBucket>(b))) +
                   "," + std::to_string(dist.total[b]) + "\n";
        }
        for (const auto& [comp, counts] : dist.by_component) {
            for (size_t b = 0; b < 5; ++b) {
                csv += comp + "," +
                       std::string(uicrawl::analyze::to_string(
                           static_cast<uicrawl::analyze::LabelLengthBucket>(b))) +
                       "," + std::to_string(counts[b]) + "\n";
            }
        }
        write_text(out_dir / "label_length.csv", csv);
        std::printf("label-length -> %s\n", (out_dir / "label_length.csv").string().c_str());
        return kExitOk;
    }
    if (what == "match-harness") {
        std::unique_ptr<uicrawl::llm::ChatEndpoint> endpoint_holder;
        auto judge = make_judge(judge_spec, cfg, dataset_root, endpoint_holder);
        auto rows = uicrawl::analyze::run_matching_harness(store, *judge, per_bucket, seed);
        std::string csv = "bucket,candidates,sampled,correct,skipped,pct,shortfall\n";
        for (const auto& r : rows) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.2f", r.pct);
            csv += std::string(uicrawl::analyze::to_string(r.bucket)) + "," +
                   std::to_string(r.candidates) + "," + std::to_string(r.sampled) + "," +
                   std::to_string(r.correct) + "," + std::to_string(r.skipped) + "," + buf + "," +
                   (r.shortfall ? "yes" : "no") + "\n";
        }
        write_text(out_dir / "match_harness.csv", csv);
        std::printf("match-harness -> %s\n", (out_dir / "match_harness.csv").string().c_str());
        return kExitOk;
    }
    throw uicrawl::config::ConfigError("unknown analysis: " + what);
}

uicrawl::taskgen::Task task_from_name(const std::string& name) {
    if (name == "vh-generation") return uicrawl::taskgen::Task::VhGeneration;
    if (name == "tappability") return uicrawl::taskgen::Task::Tappability;
    if (name == "relationship") return uicrawl::taskgen::Task::Relationship;
    if (name == "component-id") return uicrawl::taskgen::Task::ComponentId;
    throw uicrawl::config::ConfigError("unknown task: " + name);
}

int run_taskgen(const std::string& task_name, const fs::path& dataset_root, fs::path out_dir,
                size_t n, uint64_t seed, double train_fraction) {
    auto store = uicrawl::store::DatasetStore::open(dataset_root);
    if (out_dir.empty()) out_dir = dataset_root / "tasks";
    fs::create_directories(out_dir);

    auto task = task_from_name(task_name);
    std::vector<uicrawl::taskgen::TaskSample> samples;
    switch (task) {
        case uicrawl::taskgen::Task::VhGeneration:
            samples = uicrawl::taskgen::gen_vh_generation(store, n, seed);
            break;
        case uicrawl::taskgen::Task::Tappability:
            samples = uicrawl::taskgen::gen_tappability(store, seed);
            break;
        case uicrawl::taskgen::Task::Relationship:
            samples = uicrawl::taskgen::gen_relationship(store, seed);
            break;
        case uicrawl::taskgen::Task::ComponentId:
            samples = uicrawl::taskgen::gen_component_id(store, seed);
            break;
    }

    std::vector<json> lines;
    for (const auto& s : samples) lines.push_back(uicrawl::taskgen::sample_to_json(s));
    std::string base = task_name;
    for (auto& c : base) {
        if (c == '-') c = '_';
    }
    write_jsonl(out_dir / (base + ".jsonl"), lines);

    auto [train, eval] = uicrawl::taskgen::split(samples, {train_fraction, seed});
    std::string train_ids, eval_ids;
    for (const auto& s : train) train_ids += s.id + "\n";
    for (const auto& s : eval) eval_ids += s.id + "\n";
    write_text(out_dir / (base + "_train_ids.txt"), train_ids);
    write_text(out_dir / (base + "_eval_ids.txt"), eval_ids);

    std::printf("taskgen %s: %zu samples (%zu train / %zu eval) -> %s\n", task_name.c_str(),
                samples.size(), train.size(), eval.size(), out_dir.string().c_str());
    return kExitOk;
}

int run_score(const std::string& task_name, const fs::path& pred_file, const fs::path& gold_file,
              const fs::path& out_file) {
    auto preds_lines = read_jsonl(pred_file);
    auto gold_lines = read_jsonl(gold_file);
    std::map<std::string, json> gold_by_id;
    for (const auto& g : gold_lines) gold_by_id[g.at("id").get<std::string>()] = g.at("gold");
    if (preds_lines.size() != gold_by_id.size()) {
        throw uicrawl::taskgen::LengthMismatch(
            "prediction count " + std::to_string(preds_lines.size()) + " != gold count " +
            std::to_string(gold_by_id.size()));
    }

    json scores;
    scores["task"] = task_name;
    scores["n"] = preds_lines.size();
    if (task_name == "tappability" || task_name == "relationship") {
        std::vector<bool> p, g;
        for (const auto& line : preds_lines) {
            auto it = gold_by_id.find(line.at("id").get<std::string>());
            if (it == gold_by_id.end()) {
                throw uicrawl::Error("prediction id not in gold: " +
                                     line.at("id").get<std::string>());
            }
            p.push_back(line.at("pred").get<bool>());
            g.push_back(it->second.get<bool>());
        }
        scores["f1"] = uicrawl::taskgen::binary_f1(p, g).value;
    } else if (task_name == "component-id") {
        std::vector<std::string> p, g;
        for (const auto& line : preds_lines) {
            auto it = gold_by_id.find(line.at("id").get<std::string>());
            if (it == gold_by_id.end()) {
                throw uicrawl::Error("prediction id not in gold: " +
                                     line.at("id").get<std::string>());
            }
            p.push_back(line.at("pred").get<std::string>());
            g.push_back(it->second.get<std::string>());
        }
        scores["f1"] = uicrawl::taskgen::multiclass_f1(
                           p, g, {"BUTTON", "CHECKBOX", "TEXT", "INPUT_FIELD", "SCROLL_ITEM"})
                           .value;
    } else if (task_name == "screenqa" || task_name == "vh-generation") {
        double sum = 0.0;
        size_t n = 0;
        for (const auto& line : preds_lines) {
            auto it = gold_by_id.find(line.at("id").get<std::string>());
            if (it == gold_by_id.end()) {
                throw uicrawl::Error("prediction id not in gold: " +
                                     line.at("id").get<std::string>());
            }
            sum += uicrawl::taskgen::squad_f1(line.at("pred").get<std::string>(),
                                              it->second.get<std::string>());
            ++n;
        }
        scores["f1"] = n == 0 ? 0.0 : sum / static_cast<double>(n);
    } else {
        throw uicrawl::config::ConfigError("unknown task: " + task_name);
    }

    std::string payload = scores.dump(2) + "\n";
    if (!out_file.empty()) write_text(out_file, payload);
    std::fputs(payload.c_str(), stdout);
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    uicrawl::config::Config cfg;
    try {
        cfg = uicrawl::config::load(preparse_config_path(argc, argv));
    } catch (const uicrawl::Error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitUsage;
    }

    CLI::App app{"GUI-crawl orchestration against simulated device fleets"};
    app.require_subcommand(1);
    std::string config_path_dummy;
    app.add_option("--config", config_path_dummy, "JSON config file");

    // crawl
    auto* crawl_cmd = app.add_subcommand("crawl", "run the fleet over an app metadata file");
    fs::path metadata_file, models_dir, out_root;
    int instances = cfg.instances;
    std::string policies = "rules";
    uint64_t seed = cfg.seed;
    crawl_cmd->add_option("metadata", metadata_file, "app metadata JSONL")->required();
    crawl_cmd->add_option("models", models_dir, "directory of app model documents")->required();
    crawl_cmd->add_option("out", out_root, "output/dataset root")->required();
    crawl_cmd->add_option("--instances", instances, "simulated device instances");
    crawl_cmd->add_option("--policies", policies, "comma-separated tiers: rules[,llm]");
    crawl_cmd->add_option("--seed", seed, "master seed");

    // intervene
    auto* intervene_cmd = app.add_subcommand("intervene", "handle paused sessions");
    auto* list_cmd = intervene_cmd->add_subcommand("list", "list open tickets");
    fs::path iv_root;
    list_cmd->add_option("out", iv_root, "crawl output root")->required();
    auto* resume_cmd = intervene_cmd->add_subcommand("resume", "resume one ticket");
    std::string ticket_id;
    fs::path actions_file, actions_dir;
    fs::path resume_root;
    resume_cmd->add_option("out", resume_root, "crawl output root")->required();
    resume_cmd->add_option("ticket", ticket_id, "ticket id")->required();
    resume_cmd->add_option("--actions", actions_file, "JSON action batch")->required();
    auto* resume_all_cmd = intervene_cmd->add_subcommand("resume-all", "resume every open ticket");
    fs::path resume_all_root;
    resume_all_cmd->add_option("out", resume_all_root, "crawl output root")->required();
    resume_all_cmd->add_option("--actions-dir", actions_dir, "directory of {app_id}.json batches")
        ->required();

    // analyze
    auto* analyze_cmd = app.add_subcommand("analyze", "dataset statistics and quality analysis");
    std::string analysis;
    fs::path dataset_root, analysis_out;
    int threshold = cfg.hamming_threshold;
    std::string judge_spec = "always:true";
    size_t per_bucket = 500;
    uint64_t analysis_seed = cfg.seed;
    analyze_cmd
        ->add_option("what", analysis,
                     "stats | similarity-cdf | label-coverage | label-length | match-harness")
        ->required();
    analyze_cmd->add_option("dataset", dataset_root, "dataset root")->required();
    analyze_cmd->add_option("--out", analysis_out, "output directory (default dataset/analysis)");
    analyze_cmd->add_option("--threshold", threshold, "hamming similarity threshold");
    analyze_cmd->add_option("--judge", judge_spec, "always:true|always:false|scripted:<path>|llm");
    analyze_cmd->add_option("--per-bucket", per_bucket, "samples per label-length bucket");
    analyze_cmd->add_option("--seed", analysis_seed, "sampling seed");

    // taskgen
    auto* taskgen_cmd = app.add_subcommand("taskgen", "generate training-task data");
    std::string task_name;
    fs::path task_root, task_out;
    size_t task_n = 0;
    uint64_t task_seed = cfg.seed;
    double train_fraction = 0.9;
    taskgen_cmd
        ->add_option("task", task_name, "vh-generation | tappability | relationship | component-id")
        ->required();
    taskgen_cmd->add_option("dataset", task_root, "dataset root")->required();
    taskgen_cmd->add_option("--out", task_out, "output directory (default dataset/tasks)");
    taskgen_cmd->add_option("--n", task_n, "sample count (vh-generation)");
    taskgen_cmd->add_option("--seed", task_seed, "sampling seed");
    taskgen_cmd->add_option("--split", train_fraction, "train fraction");

    // score
    auto* score_cmd = app.add_subcommand("score", "score predictions against task gold");
    std::string score_task;
    fs::path pred_file, gold_file, score_out;
    score_cmd
        ->add_option("task", score_task,
                     "tappability | relationship | component-id | vh-generation | screenqa")
        ->required();
    score_cmd->add_option("--pred", pred_file, "predictions JSONL ({id, pred})")->required();
    score_cmd->add_option("--gold", gold_file, "gold JSONL from taskgen ({id, gold})")->required();
    score_cmd->add_option("--out", score_out, "scores JSON output file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (crawl_cmd->parsed()) {
            return run_crawl(cfg, metadata_file, models_dir, out_root, instances, policies, seed);
        }
        if (intervene_cmd->parsed()) {
            if (list_cmd->parsed()) {
                auto tickets = uicrawl::pipeline::list_tickets(iv_root);
                for (const auto& t : tickets) {
                    std::printf("%s %s %s screen=%s\n", t.ticket_id.c_str(), t.app_id.c_str(),
                                t.reason.c_str(), t.frozen_signature.c_str());
                }
                std::printf("%zu open ticket(s)\n", tickets.size());
                return kExitOk;
            }
            if (resume_cmd->parsed()) {
                int done = uicrawl::pipeline::resume_ticket(resume_root, ticket_id, actions_file);
                std::printf("resumed %s: %d session(s) completed\n", ticket_id.c_str(), done);
                return kExitOk;
            }
            if (resume_all_cmd->parsed()) {
                int done = uicrawl::pipeline::resume_all(resume_all_root, actions_dir);
                auto remaining = uicrawl::pipeline::list_tickets(resume_all_root);
                std::printf("resume-all: %d session(s) completed, %zu ticket(s) remain\n", done,
                            remaining.size());
                return kExitOk;
            }
            std::fprintf(stderr, "intervene requires a subcommand (list|resume|resume-all)\n");
            return kExitUsage;
        }
        if (analyze_cmd->parsed()) {
            return run_analyze(cfg, analysis, dataset_root, analysis_out, threshold, judge_spec,
                               per_bucket, analysis_seed);
        }
        if (taskgen_cmd->parsed()) {
            return run_taskgen(task_name, task_root, task_out, task_n, task_seed, train_fraction);
        }
        if (score_cmd->parsed()) {
            return run_score(score_task, pred_file, gold_file, score_out);
        }
    } catch (const uicrawl::config::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const uicrawl::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitFailure;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitFailure;
    }
    return kExitUsage;
}
