// droidgen command line: abstract -> infer -> check/explain -> eval, plus a
// seeded synthetic corpus generator.
//
// Exit codes: 0 success (check: compliant), 1 policy violation found
// (check only), 2 usage or input format error, 3 solver timeout.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "droidgen/droidgen.hpp"

namespace fs = std::filesystem;
using namespace droidgen;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitViolation = 1;
constexpr int kExitError = 2;
constexpr int kExitTimeout = 3;

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open '" + path.string() + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Temp file in the target directory, then rename, so readers never observe
// a half-written file.
void write_file_atomic(const fs::path& path, const std::string& content) {
    const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
    fs::create_directories(dir);
    const fs::path tmp = dir / (path.filename().string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot write '" + tmp.string() + "'");
        }
        out << content;
        if (!out.flush()) {
            throw std::runtime_error("short write to '" + tmp.string() + "'");
        }
    }
    fs::rename(tmp, path);
}

void emit(const std::string& content, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << content;
    } else {
        write_file_atomic(out_path, content);
    }
}

ResourceKind parse_mode_flag(const std::string& mode) {
    const auto kind = parse_resource_kind(mode);
    if (!kind) {
        throw std::runtime_error("unknown mode '" + mode + "'");
    }
    return *kind;
}

// Graph inputs may be single-app .json files, .jsonl corpus streams, or
// directories of either; directories are walked in sorted order.
std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs,
                                    bool& saw_empty_dir) {
    std::vector<fs::path> files;
    for (const auto& input : inputs) {
        const fs::path path(input);
        if (fs::is_directory(path)) {
            std::vector<fs::path> entries;
            for (const auto& entry : fs::directory_iterator(path)) {
                const auto ext = entry.path().extension();
                if (entry.is_regular_file() && (ext == ".json" || ext == ".jsonl")) {
                    entries.push_back(entry.path());
                }
            }
            std::sort(entries.begin(), entries.end());
            if (entries.empty()) {
                saw_empty_dir = true;
            }
            files.insert(files.end(), entries.begin(), entries.end());
        } else {
            files.push_back(path);
        }
    }
    return files;
}

struct LoadedGraphs {
    std::vector<AppGraph> graphs;
    std::size_t failures = 0;
};

// One bad app aborts that app only; the error is logged and counted.
LoadedGraphs load_graphs(const std::vector<fs::path>& files) {
    LoadedGraphs out;
    for (const auto& file : files) {
        const std::string text = read_file(file);
        if (file.extension() == ".jsonl") {
            std::size_t line_no = 0;
            std::istringstream in(text);
            std::string line;
            while (std::getline(in, line)) {
                ++line_no;
                if (line.empty() || line == "\r") {
                    continue;
                }
                try {
                    out.graphs.push_back(load_app_graph(line));
                } catch (const ParseError& e) {
                    std::cerr << "error: " << file.string() << ":" << line_no << ": "
                              << e.what() << "\n";
                    ++out.failures;
                }
            }
        } else {
            try {
                out.graphs.push_back(load_app_graph(text));
            } catch (const ParseError& e) {
                std::cerr << "error: " << file.string() << ": " << e.what() << "\n";
                ++out.failures;
            }
        }
    }
    std::sort(out.graphs.begin(), out.graphs.end(),
              [](const AppGraph& a, const AppGraph& b) { return a.app_id < b.app_id; });
    return out;
}

std::vector<AppSpec> load_specs_checked(const fs::path& path, Label expected) {
    auto specs = read_specs_jsonl(read_file(path));
    for (const auto& s : specs) {
        if (s.label != expected) {
            throw std::runtime_error("'" + path.string() + "': app '" + s.app_id +
                                     "' is labeled " + std::string(label_name(s.label)) +
                                     ", expected " + std::string(label_name(expected)));
        }
    }
    return specs;
}

// --- abstract ---------------------------------------------------------------

struct AbstractOptions {
    std::vector<std::string> inputs;
    std::string map_path;
    std::string mode = "permission";
    std::string out;
    bool strict = false;
};

int cmd_abstract(const AbstractOptions& opt) {
    const ResourceKind mode = parse_mode_flag(opt.mode);
    const PermissionMap pm = load_permission_map(read_file(opt.map_path));
    bool saw_empty_dir = false;
    const auto files = expand_inputs(opt.inputs, saw_empty_dir);
    if (saw_empty_dir) {
        std::cerr << "warning: input directory contains no app graphs\n";
    }
    const LoadedGraphs loaded = load_graphs(files);

    std::vector<AppSpec> specs;
    std::set<std::string> unmapped;
    specs.reserve(loaded.graphs.size());
    for (const auto& g : loaded.graphs) {
        specs.push_back(derive_spec(g, pm, mode));
        const auto missing = unmapped_apis(g, pm);
        unmapped.insert(missing.begin(), missing.end());
    }
    emit(write_specs_jsonl(specs), opt.out);
    std::cerr << "abstracted " << specs.size() << " apps (" << loaded.failures
              << " failed, " << unmapped.size()
              << " distinct unmapped apis skipped)\n";
    return (opt.strict && loaded.failures > 0) ? kExitError : kExitOk;
}

// --- infer ------------------------------------------------------------------

struct InferOptions {
    std::string benign_path;
    std::string malware_path;
    std::string solver = "exact";
    long long w_b = 1;
    long long w_m = 1;
    std::uint64_t seed = 0;
    double timeout_s = 0.0;
    std::string emit_wcnf;
    std::string out;
    std::string name = "inferred";
};

SolveResult run_solver_with_timeout(const MaxSatInstance& inst,
                                    const InferOptions& opt, bool& timed_out) {
    timed_out = false;
    if (opt.solver == "greedy") {
        return solve_greedy(inst, opt.seed);
    }
    if (opt.solver == "brute") {
        return solve_brute(inst);
    }
    if (opt.timeout_s <= 0.0) {
        return solve_exact(inst);
    }
    std::atomic<bool> cancel{false};
    ExactOptions exact_opts;
    exact_opts.cancel = &cancel;
    std::packaged_task<SolveResult()> task(
        [&] { return solve_exact(inst, exact_opts); });
    auto future = task.get_future();
    std::thread worker(std::move(task));
    if (future.wait_for(std::chrono::duration<double>(opt.timeout_s)) ==
        std::future_status::timeout) {
        cancel.store(true);
        worker.join();
        timed_out = true;
        // discard the partial search; the deterministic greedy result is
        // what gets written
        return solve_greedy(inst, opt.seed);
    }
    worker.join();
    return future.get();
}

int cmd_infer(const InferOptions& opt) {
    const auto benign = load_specs_checked(opt.benign_path, Label::benign);
    const auto malware = load_specs_checked(opt.malware_path, Label::malware);
    const auto inst =
        build_instance(benign, malware, Ratio(opt.w_b), Ratio(opt.w_m));
    for (const auto& app : inst.skipped_malware) {
        std::cerr << "warning: malware app '" << app
                  << "' has an empty spec and can never be filtered\n";
    }
    if (!opt.emit_wcnf.empty()) {
        write_file_atomic(opt.emit_wcnf, export_wcnf(inst));
    }

    bool timed_out = false;
    const SolveResult res = run_solver_with_timeout(inst, opt, timed_out);

    Policy policy = policy_from_solution(inst, res.assignment);
    policy.metadata = {
        {"name", opt.name},
        {"solver", timed_out ? "greedy (exact timed out)" : opt.solver},
        {"wb", std::to_string(opt.w_b)},
        {"wm", std::to_string(opt.w_m)},
        {"benign-apps", std::to_string(benign.size())},
        {"malware-apps", std::to_string(malware.size())},
        {"score", to_string(res.score) + " of " + to_string(inst.total_weight)},
        {"optimal", res.optimal ? "true" : "false"},
    };
    if (opt.solver == "greedy" || timed_out) {
        policy.metadata["seed"] = std::to_string(opt.seed);
    }
    emit(serialize_policy(policy), opt.out);
    std::cerr << "inferred " << policy.rules.size() << " rules, score "
              << to_string(res.score) << "/" << to_string(inst.total_weight) << "\n";
    return timed_out ? kExitTimeout : kExitOk;
}

// --- check ------------------------------------------------------------------

struct CheckOptions {
    std::string policy_path;
    std::vector<std::string> graph_inputs;
    std::string specs_path;
    std::string map_path;
    bool explain_flag = false;
    std::string out;
};

int cmd_check(const CheckOptions& opt) {
    std::vector<std::string> warnings;
    const Policy policy = parse_policy(read_file(opt.policy_path), &warnings);
    for (const auto& w : warnings) {
        std::cerr << "warning: " << opt.policy_path << ": " << w << "\n";
    }
    if (opt.explain_flag && opt.graph_inputs.empty()) {
        throw std::runtime_error(
            "--explain requires call-graph input (--graph); a spec alone "
            "carries no call chains");
    }
    if (!opt.graph_inputs.empty() && opt.map_path.empty()) {
        throw std::runtime_error("--graph input requires --map to derive specs");
    }

    std::string report;
    bool any_violation = false;
    if (!opt.graph_inputs.empty()) {
        const PermissionMap pm = load_permission_map(read_file(opt.map_path));
        bool saw_empty_dir = false;
        const auto files = expand_inputs(opt.graph_inputs, saw_empty_dir);
        const LoadedGraphs loaded = load_graphs(files);
        if (loaded.failures > 0) {
            throw std::runtime_error("failed to load " +
                                     std::to_string(loaded.failures) + " app graphs");
        }
        for (const auto& g : loaded.graphs) {
            std::vector<Violation> violations;
            if (opt.explain_flag) {
                violations = explain(policy, g, pm);
            } else {
                for (const auto& rule :
                     check(policy, derive_spec(g, pm, policy.resource_kind))) {
                    violations.push_back(Violation{rule, std::nullopt});
                }
            }
            any_violation = any_violation || !violations.empty();
            report += violation_report_json(g.app_id, violations).dump() + "\n";
        }
    } else {
        if (opt.specs_path.empty()) {
            throw std::runtime_error("check needs --graph or --specs input");
        }
        auto specs = read_specs_jsonl(read_file(opt.specs_path));
        std::sort(specs.begin(), specs.end(),
                  [](const AppSpec& a, const AppSpec& b) { return a.app_id < b.app_id; });
        for (const auto& s : specs) {
            std::vector<Violation> violations;
            for (const auto& rule : check(policy, s)) {
                violations.push_back(Violation{rule, std::nullopt});
            }
            any_violation = any_violation || !violations.empty();
            report += violation_report_json(s.app_id, violations).dump() + "\n";
        }
    }
    emit(report, opt.out);
    return any_violation ? kExitViolation : kExitOk;
}

// --- eval -------------------------------------------------------------------

struct EvalOptions {
    std::string policy_path;
    std::string benign_path;
    std::string malware_path;
    std::string json_out;
};

int cmd_eval(const EvalOptions& opt) {
    const Policy policy = parse_policy(read_file(opt.policy_path));
    const auto benign = load_specs_checked(opt.benign_path, Label::benign);
    const auto malware = load_specs_checked(opt.malware_path, Label::malware);
    if (benign.empty() && malware.empty()) {
        std::cerr << "warning: both test sets are empty\n";
    }
    const EvalReport report = evaluate(policy, benign, malware);
    const auto name_it = policy.metadata.find("name");
    std::cout << render_report_table(
        report, name_it == policy.metadata.end() ? "policy" : name_it->second);
    if (!opt.json_out.empty()) {
        write_file_atomic(opt.json_out, report_to_json(report).dump(2) + "\n");
    }
    return kExitOk;
}

// --- gen-corpus ---------------------------------------------------------------

struct GenOptions {
    std::string out_dir;
    std::string mode = "permission";
    std::size_t n_noise = 0;
    double noise_pb = 0.0;
    double noise_pm = 0.0;
    std::vector<std::string> planted;
    std::size_t n_benign = 0;
    std::size_t n_malware = 0;
    std::uint64_t seed = 0;
    bool graphs = false;
};

// --plant context:identifier:prob_benign:prob_malware
PlantedProperty parse_planted(const std::string& text, ResourceKind kind) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const std::size_t colon = text.find(':', start);
        parts.push_back(text.substr(
            start, colon == std::string::npos ? std::string::npos : colon - start));
        if (colon == std::string::npos) {
            break;
        }
        start = colon + 1;
    }
    if (parts.size() != 4) {
        throw std::runtime_error("--plant expects context:identifier:pb:pm, got '" +
                                 text + "'");
    }
    const auto ctx = parse_context(parts[0]);
    if (!ctx) {
        throw std::runtime_error("--plant: unknown context '" + parts[0] + "'");
    }
    if (!is_valid_identifier(parts[1])) {
        throw std::runtime_error("--plant: invalid identifier '" + parts[1] + "'");
    }
    PlantedProperty planted;
    planted.property = Property{*ctx, Resource{kind, parts[1]}};
    planted.prob_benign = std::stod(parts[2]);
    planted.prob_malware = std::stod(parts[3]);
    return planted;
}

int cmd_gen_corpus(const GenOptions& opt) {
    GenProfile profile;
    profile.resource_kind = parse_mode_flag(opt.mode);
    profile.n_noise_properties = opt.n_noise;
    profile.noise_prob_benign = opt.noise_pb;
    profile.noise_prob_malware = opt.noise_pm;
    for (const auto& text : opt.planted) {
        profile.planted.push_back(parse_planted(text, profile.resource_kind));
    }
    profile.n_benign = opt.n_benign;
    profile.n_malware = opt.n_malware;
    profile.seed = opt.seed;

    const fs::path dir(opt.out_dir);
    if (opt.graphs) {
        const auto corpus = gen_graph_corpus(profile);
        const auto write_graphs = [&](const std::vector<AppGraph>& graphs,
                                      const char* file) {
            std::string jsonl;
            for (const auto& g : graphs) {
                jsonl += app_graph_to_json(g).dump() + "\n";
            }
            write_file_atomic(dir / file, jsonl);
        };
        write_graphs(corpus.benign, "benign.graphs.jsonl");
        write_graphs(corpus.malware, "malware.graphs.jsonl");
        std::string tsv = "# synthetic api -> permission map\n";
        for (const auto& [api, perms] : corpus.permission_map.entries) {
            for (const auto& perm : perms) {
                tsv += api + "\t" + perm + "\n";
            }
        }
        write_file_atomic(dir / "permissions.tsv", tsv);
        std::cerr << "generated " << corpus.benign.size() << "+"
                  << corpus.malware.size() << " app graphs in " << dir.string()
                  << "\n";
    } else {
        const auto corpus = gen_corpus(profile);
        write_file_atomic(dir / "benign.specs.jsonl", write_specs_jsonl(corpus.benign));
        write_file_atomic(dir / "malware.specs.jsonl",
                          write_specs_jsonl(corpus.malware));
        std::cerr << "generated " << corpus.benign.size() << "+"
                  << corpus.malware.size() << " app specs in " << dir.string()
                  << "\n";
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"droidgen: data-driven anti-malware policy inference"};
    app.require_subcommand(1);

    AbstractOptions abstract_opt;
    auto* abstract = app.add_subcommand(
        "abstract", "Derive application specs from call-graph files");
    abstract->add_option("inputs", abstract_opt.inputs,
                         "App-graph .json/.jsonl files or directories")
        ->required();
    abstract->add_option("--map", abstract_opt.map_path,
                         "api -> permission TSV file")
        ->required();
    abstract->add_option("--mode", abstract_opt.mode, "Resource kind")
        ->check(CLI::IsMember({"permission", "api"}));
    abstract->add_option("--out", abstract_opt.out, "Output spec JSONL path");
    abstract->add_flag("--strict", abstract_opt.strict,
                       "Exit non-zero if any app fails to load");

    InferOptions infer_opt;
    auto* infer =
        app.add_subcommand("infer", "Infer a deny-rule policy from labeled specs");
    infer->add_option("--benign", infer_opt.benign_path, "Benign spec JSONL")
        ->required();
    infer->add_option("--malware", infer_opt.malware_path, "Malware spec JSONL")
        ->required();
    infer->add_option("--solver", infer_opt.solver, "Solver")
        ->check(CLI::IsMember({"exact", "greedy", "brute"}));
    infer->add_option("--wb", infer_opt.w_b, "Benign clause weight")
        ->check(CLI::PositiveNumber);
    infer->add_option("--wm", infer_opt.w_m, "Malware clause weight")
        ->check(CLI::PositiveNumber);
    infer->add_option("--seed", infer_opt.seed, "Greedy solver seed");
    infer->add_option("--timeout-s", infer_opt.timeout_s,
                      "Exact solver timeout in seconds (falls back to greedy)")
        ->check(CLI::PositiveNumber);
    infer->add_option("--emit-wcnf", infer_opt.emit_wcnf,
                      "Also export the instance as DIMACS WCNF");
    infer->add_option("--out", infer_opt.out, "Output policy path");
    infer->add_option("--name", infer_opt.name, "Policy name metadata");

    CheckOptions check_opt;
    auto* check_cmd = app.add_subcommand(
        "check", "Check applications against a policy (exit 1 on violation)");
    check_cmd->add_option("--policy", check_opt.policy_path, "Policy file")
        ->required();
    check_cmd->add_option("--graph", check_opt.graph_inputs,
                          "App-graph .json/.jsonl files or directories");
    check_cmd->add_option("--specs", check_opt.specs_path,
                          "Pre-abstracted spec JSONL");
    check_cmd->add_option("--map", check_opt.map_path,
                          "api -> permission TSV (required with --graph)");
    check_cmd->add_flag("--explain", check_opt.explain_flag,
                        "Attach call-chain witnesses (requires --graph)");
    check_cmd->add_option("--out", check_opt.out, "Violation report JSONL path");

    EvalOptions eval_opt;
    auto* eval_cmd = app.add_subcommand(
        "eval", "Evaluate a policy against labeled spec corpora");
    eval_cmd->add_option("--policy", eval_opt.policy_path, "Policy file")
        ->required();
    eval_cmd->add_option("--benign", eval_opt.benign_path, "Benign spec JSONL")
        ->required();
    eval_cmd->add_option("--malware", eval_opt.malware_path, "Malware spec JSONL")
        ->required();
    eval_cmd->add_option("--json", eval_opt.json_out, "Write the report as JSON");

    GenOptions gen_opt;
    auto* gen = app.add_subcommand("gen-corpus",
                                   "Generate a seeded synthetic labeled corpus");
    gen->add_option("--out-dir", gen_opt.out_dir, "Output directory")->required();
    gen->add_option("--mode", gen_opt.mode, "Resource kind")
        ->check(CLI::IsMember({"permission", "api"}));
    gen->add_option("--noise", gen_opt.n_noise, "Number of noise properties");
    gen->add_option("--noise-pb", gen_opt.noise_pb,
                    "Noise inclusion probability for benign apps");
    gen->add_option("--noise-pm", gen_opt.noise_pm,
                    "Noise inclusion probability for malware apps");
    gen->add_option("--plant", gen_opt.planted,
                    "Planted property context:identifier:pb:pm (repeatable)");
    gen->add_option("--n-benign", gen_opt.n_benign, "Benign app count");
    gen->add_option("--n-malware", gen_opt.n_malware, "Malware app count");
    gen->add_option("--seed", gen_opt.seed, "Corpus seed");
    gen->add_flag("--graphs", gen_opt.graphs,
                  "Emit call graphs plus a permission map instead of specs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitError;
    }

    try {
        if (abstract->parsed()) {
            return cmd_abstract(abstract_opt);
        }
        if (infer->parsed()) {
            return cmd_infer(infer_opt);
        }
        if (check_cmd->parsed()) {
            return cmd_check(check_opt);
        }
        if (eval_cmd->parsed()) {
            return cmd_eval(eval_opt);
        }
        if (gen->parsed()) {
            return cmd_gen_corpus(gen_opt);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
