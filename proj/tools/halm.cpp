// halm: answer-or-search pipeline driver.
//
//   halm --config cfg.json ingest
//   halm --config cfg.json infer --split dev
//   halm --config cfg.json label --predictions out/predictions.dev.jsonl
//   halm --config cfg.json calibrate --predictions out/predictions.dev.jsonl
//   halm --config cfg.json evaluate --base ... (--adapted ... | --threshold ...)
//   halm --config cfg.json tradeoff --report out/report.json
//   halm --config cfg.json histogram --predictions ...
//
// Exit status: 0 ok, 1 internal, 2 config/usage, 3 transport, 4 capability, 5 data, 6 domain.

#include <halm/pipeline.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

namespace fs = std::filesystem;

std::optional<fs::path> absolute_opt(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return fs::absolute(s);
}

halm::Split split_or_throw(const std::string& s) {
    const auto split = halm::parse_split(s);
    if (!split) throw halm::ConfigError("unknown split '" + s + "'");
    return *split;
}

/// "0:0.1:1" (start:step:stop) or a comma list "0,0.5,1".
std::vector<double> parse_number_list(const std::string& spec) {
    std::vector<double> out;
    if (spec.empty()) return out;
    try {
        if (spec.find(':') != std::string::npos) {
            std::vector<double> parts;
            std::stringstream ss(spec);
            std::string item;
            while (std::getline(ss, item, ':')) parts.push_back(std::stod(item));
            if (parts.size() != 3 || !(parts[1] > 0)) throw halm::ConfigError("range must be start:step:stop");
            const auto n = static_cast<long>(std::floor((parts[2] - parts[0]) / parts[1] + 1e-9));
            for (long i = 0; i <= n; ++i) out.push_back(parts[0] + static_cast<double>(i) * parts[1]);
            // Snap values that are a rounding error away from the step grid.
            for (auto& v : out) v = std::round(v * 1e9) / 1e9;
        } else {
            std::stringstream ss(spec);
            std::string item;
            while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
        }
    } catch (const std::logic_error&) {
        throw halm::ConfigError("cannot parse number list '" + spec + "'");
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Answer-or-search pipeline: label, evaluate and analyze search decisions"};
    app.require_subcommand(1);

    std::string config_path = "halm.json";
    std::string output_dir, cache_dir, endpoint, model_tag, prompt_style, search_token;
    std::optional<double> lambda;
    std::optional<int> max_in_flight;
    app.add_option("-c,--config", config_path, "Pipeline config file (JSON)");
    app.add_option("--output-dir", output_dir, "Override output_dir");
    app.add_option("--cache-dir", cache_dir, "Override cache_dir");
    app.add_option("--endpoint", endpoint, "Override endpoint.url");
    app.add_option("--model-tag", model_tag, "Override endpoint.model_tag");
    app.add_option("--prompt-style", prompt_style, "Override prompt.style");
    app.add_option("--search-token", search_token, "Override search_token");
    app.add_option("--lambda", lambda, "Override lambda (>= 1)");
    app.add_option("--max-in-flight", max_in_flight, "Override endpoint.max_in_flight");

    auto* ingest = app.add_subcommand("ingest", "Ingest configured corpora into canonical files");

    std::string split = "dev", output;
    auto* infer = app.add_subcommand("infer", "Collect greedy predictions with log-probabilities");
    infer->add_option("--split", split, "Split to run")->capture_default_str();
    infer->add_option("-o,--output", output, "Predictions file");

    std::string predictions;
    auto* label = app.add_subcommand("label", "Mask hallucinated predictions with the search token");
    label->add_option("--predictions", predictions, "Base-model predictions file")->required();
    label->add_option("--split", split, "Split of the predictions")->capture_default_str();
    label->add_option("-o,--output", output, "Masked dataset file");

    std::string strategy;
    std::optional<double> target_rate;
    auto* calib = app.add_subcommand("calibrate", "Fit the perplexity threshold");
    calib->add_option("--predictions", predictions, "Base-model predictions file")->required();
    calib->add_option("--split", split, "Split of the predictions")->capture_default_str();
    calib->add_option("--strategy", strategy, "max-f1 | target-search-rate");
    calib->add_option("--target-rate", target_rate, "Search rate for target-search-rate");
    calib->add_option("-o,--output", output, "Threshold manifest");

    std::string base, adapted, threshold, report_label = "adapted";
    auto* eval = app.add_subcommand("evaluate", "Compare base and adapted outputs");
    eval->add_option("--base", base, "Base-model predictions file")->required();
    auto* adapted_opt = eval->add_option("--adapted", adapted, "Adapted-model outputs (predictions format)");
    auto* threshold_opt = eval->add_option("--threshold", threshold, "Apply this PPL threshold to the base predictions");
    adapted_opt->excludes(threshold_opt);
    eval->add_option("--split", split, "Split of the predictions")->capture_default_str();
    eval->add_option("--label", report_label, "Row label in the report table")->capture_default_str();
    eval->add_option("-o,--output", output, "Report path prefix (writes .json and .txt)");

    std::string report, ratios = "0:0.1:1", lambdas;
    auto* tradeoff = app.add_subcommand("tradeoff", "Correct/hallucination rates versus search quality");
    tradeoff->add_option("--report", report, "Evaluation report (JSON)")->required();
    tradeoff->add_option("--ratios", ratios, "start:step:stop or comma list")->capture_default_str();
    tradeoff->add_option("--lambdas", lambdas, "Also sweep the budget cost over these lambdas");
    tradeoff->add_option("-o,--output", output, "Trade-off table");

    std::string edges = "0:0.25:4", transform = "log";
    auto* hist = app.add_subcommand("histogram", "Perplexity histograms per judgment class");
    hist->add_option("--predictions", predictions, "Predictions or adapted outputs")->required();
    hist->add_option("--split", split, "Split of the predictions")->capture_default_str();
    hist->add_option("--edges", edges, "Bin edges (after transform)")->capture_default_str();
    hist->add_option("--transform", transform, "log | identity")->capture_default_str();
    hist->add_option("-o,--output", output, "Histogram table");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(halm::ErrorKind::config);
    }

    try {
        halm::json overrides = halm::json::object();
        if (!output_dir.empty()) overrides["output_dir"] = fs::absolute(output_dir).string();
        if (!cache_dir.empty()) overrides["cache_dir"] = fs::absolute(cache_dir).string();
        if (!endpoint.empty()) overrides["endpoint"]["url"] = endpoint;
        if (!model_tag.empty()) overrides["endpoint"]["model_tag"] = model_tag;
        if (max_in_flight) overrides["endpoint"]["max_in_flight"] = *max_in_flight;
        if (!prompt_style.empty()) overrides["prompt"]["style"] = prompt_style;
        if (!search_token.empty()) overrides["search_token"] = search_token;
        if (lambda) overrides["lambda"] = *lambda;
        if (!strategy.empty()) overrides["ppl"]["strategy"] = strategy;
        if (target_rate) overrides["ppl"]["target_rate"] = *target_rate;
        const halm::PipelineConfig cfg = halm::load_config(config_path, overrides);

        auto& log = std::cout;
        if (ingest->parsed()) {
            halm::cmd_ingest(cfg, log);
        } else if (infer->parsed()) {
            halm::cmd_infer(cfg, split_or_throw(split), absolute_opt(output), log);
        } else if (label->parsed()) {
            halm::cmd_label(cfg, fs::absolute(predictions), split_or_throw(split), absolute_opt(output), log);
        } else if (calib->parsed()) {
            halm::cmd_calibrate(cfg, fs::absolute(predictions), split_or_throw(split), absolute_opt(output), log);
        } else if (eval->parsed()) {
            halm::EvaluateInputs in;
            in.base_predictions = fs::absolute(base);
            in.adapted_outputs = absolute_opt(adapted);
            in.threshold = absolute_opt(threshold);
            in.split = split_or_throw(split);
            in.output_prefix = absolute_opt(output);
            in.label = report_label;
            halm::cmd_evaluate(cfg, in, log);
        } else if (tradeoff->parsed()) {
            halm::cmd_tradeoff(cfg, fs::absolute(report), parse_number_list(ratios), parse_number_list(lambdas),
                               absolute_opt(output), log);
        } else if (hist->parsed()) {
            halm::HistogramInputs in;
            in.predictions = fs::absolute(predictions);
            in.split = split_or_throw(split);
            in.edges = parse_number_list(edges);
            if (transform == "log") in.transform = halm::ValueTransform::log;
            else if (transform == "identity") in.transform = halm::ValueTransform::identity;
            else throw halm::ConfigError("unknown transform '" + transform + "'");
            in.output = absolute_opt(output);
            halm::cmd_histogram(cfg, in, log);
        }
    } catch (const halm::Error& e) {
        std::cerr << "halm: " << e.what() << "\n";
        return static_cast<int>(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "halm: internal error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
