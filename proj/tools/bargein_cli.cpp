// bargein: run interruption scenarios, probe the classifier, or serve
// live sessions over WebSocket.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "bargein/config.hpp"
#include "bargein/scenario.hpp"
#include "bargein/ws_server.hpp"

namespace fs = std::filesystem;
using namespace bargein;

namespace {

SessionConfig base_config(const std::string& path) {
    if (path.empty()) {
        SessionConfig cfg;
        cfg.llm.apply_environment();
        return cfg;
    }
    return load_config_file(path);
}

int cmd_run(const std::string& config_path, const std::string& path, const std::string& trace_out,
            bool quiet) {
    const Scenario s = load_scenario(path, base_config(config_path));
    const SessionTrace trace = run_scenario(s);
    if (!trace_out.empty()) {
        std::ofstream out(trace_out, std::ios::trunc);
        if (!out) throw InvalidInput("cannot write " + trace_out);
        out << trace.to_ndjson();
    } else if (!quiet) {
        std::cout << trace.to_ndjson();
    }
    const Report r = check_expectations(trace, s);
    std::cerr << format_report(r);
    return r.passed() ? 0 : 1;
}

std::vector<fs::path> scenario_files(const std::string& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

int cmd_suite(const std::string& config_path, const std::string& dir,
              const std::string& trace_dir) {
    const SessionConfig base = base_config(config_path);
    const auto files = scenario_files(dir);
    if (files.empty()) throw InvalidInput("no scenario files under " + dir);

    std::size_t failed = 0;
    std::size_t decisions = 0;
    std::size_t decisions_ok = 0;
    const auto begin = std::chrono::steady_clock::now();
    for (const auto& f : files) {
        Report r;
        try {
            const Scenario s = load_scenario(f.string(), base);
            const SessionTrace trace = run_scenario(s);
            if (!trace_dir.empty()) {
                std::ofstream(fs::path(trace_dir) / (s.id + ".ndjson")) << trace.to_ndjson();
            }
            r = check_expectations(trace, s);
        } catch (const InvalidInput& e) {
            std::cout << "FAIL " << f.string() << ": " << e.what() << '\n';
            ++failed;
            continue;
        }
        std::cout << format_report(r);
        failed += r.passed() ? 0 : 1;
        decisions += r.decisions_total;
        decisions_ok += r.decisions_matched;
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - begin).count();
    std::cout << "suite: " << files.size() - failed << "/" << files.size()
              << " scenarios passed, decisions " << decisions_ok << "/" << decisions << ", "
              << format_seconds(secs) << " s\n";
    return failed == 0 ? 0 : 1;
}

// History lines look like "Robot: ..." or "User: ...".
DialogueHistory parse_history(const std::vector<std::string>& lines) {
    DialogueHistory h;
    double t = 0.0;
    for (const auto& line : lines) {
        const auto colon = line.find(':');
        const std::string who = colon == std::string::npos ? "" : to_lower(line.substr(0, colon));
        if (who != "robot" && who != "user") {
            throw InvalidInput("history line must start with 'Robot:' or 'User:': " + line);
        }
        h.push(who == "robot" ? Speaker::Robot : Speaker::User,
               normalize_whitespace(line.substr(colon + 1)), t);
        t += 1.0;
    }
    return h;
}

int cmd_classify(const std::string& config_path, const std::string& text,
                 const std::vector<std::string>& history, const std::string& robot_spoken,
                 const std::string& robot_remaining, double elapsed) {
    SessionConfig cfg = base_config(config_path);
    if (cfg.classifier == ClassifierChoice::Oracle) {
        throw InvalidInput("the oracle classifier needs a scenario");
    }
    cfg.validate();
    ClassifierRequest req;
    req.history_rendered = render_history(parse_history(history), cfg.history_window);
    req.overlap_text = text;
    req.elapsed_s = elapsed;
    req.robot_spoken_text = robot_spoken;
    req.robot_remaining_text = robot_remaining;

    auto classifier = make_classifier(cfg);
    const auto out = classify(req, *classifier);
    ordered_json j;
    j["text"] = text;
    if (!out) {
        j["error"] = out.failure().message;
        std::cout << j.dump() << '\n';
        return 1;
    }
    const auto decision = decide(out.value().label, count_words(text), elapsed, cfg.dispatch);
    j["label"] = to_string(out.value().label);
    j["source"] = to_string(out.value().source);
    j["latency_s"] = round_micro(out.value().latency_s);
    j["decision"] = to_string(decision);
    std::cout << j.dump() << '\n';
    return 0;
}

int cmd_serve(const std::string& config_path, const std::string& host, std::uint16_t port,
              const std::string& trace_dir) {
    gateway::GatewayOptions opt;
    opt.base.auto_respond = true;
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw InvalidInput("cannot open config " + config_path);
        apply_config_json(opt.base, nlohmann::json::parse(in));
    }
    opt.base.llm.apply_environment();
    opt.base.clock = ClockMode::Wall;
    opt.base.validate();
    opt.trace_dir = trace_dir;

    gateway::WebSocketServer server(opt, host, port);
    server.start();
    std::cerr << "bargein gateway listening on ws://" << host << ":" << server.port()
              << " (protocol " << gateway::kProtocolVersion << ")\n";
    server.wait();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Interruption handling engine for conversational agents"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("-c,--config", config_path, "JSON config file")->check(CLI::ExistingFile);

    std::string scenario_path, trace_out;
    bool quiet = false;
    auto* run = app.add_subcommand("run", "Replay one scenario and check its expectations");
    run->add_option("scenario", scenario_path, "Scenario JSON file")->required();
    run->add_option("--trace", trace_out, "Write the ND-JSON trace here instead of stdout");
    run->add_flag("-q,--quiet", quiet, "Do not print the trace");

    std::string suite_dir, suite_traces;
    auto* suite = app.add_subcommand("suite", "Replay every scenario under a directory");
    suite->add_option("dir", suite_dir, "Directory of scenario files")
        ->required()
        ->check(CLI::ExistingDirectory);
    suite->add_option("--trace-dir", suite_traces, "Write one trace per scenario here")
        ->check(CLI::ExistingDirectory);

    std::string text, robot_spoken, robot_remaining;
    std::vector<std::string> history;
    double elapsed = 0.0;
    auto* cls = app.add_subcommand("classify", "Classify one overlap transcript");
    cls->add_option("--text", text, "What the user said")->required();
    cls->add_option("--history", history, "Earlier turns, 'Robot: ...' or 'User: ...'");
    cls->add_option("--robot-spoken", robot_spoken, "Robot words already spoken");
    cls->add_option("--robot-remaining", robot_remaining, "Robot words not yet spoken");
    cls->add_option("--elapsed", elapsed, "Seconds since the robot turn began")
        ->check(CLI::NonNegativeNumber);

    std::string host = "127.0.0.1", serve_traces;
    std::uint16_t port = 8765;
    auto* serve = app.add_subcommand("serve", "Run the WebSocket session gateway");
    serve->add_option("--host", host, "Listen address");
    serve->add_option("--port", port, "Listen port (0 picks one)");
    serve->add_option("--trace-dir", serve_traces, "Write finished session traces here")
        ->check(CLI::ExistingDirectory);

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run) return cmd_run(config_path, scenario_path, trace_out, quiet);
        if (*suite) return cmd_suite(config_path, suite_dir, suite_traces);
        if (*cls) {
            return cmd_classify(config_path, text, history, robot_spoken, robot_remaining, elapsed);
        }
        if (*serve) return cmd_serve(config_path, host, port, serve_traces);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
