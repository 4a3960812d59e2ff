// apac command line driver: transform | analyze | graph | check.
//
// Exit codes: 0 success, 1 errors (usage, parse, analysis, simulation
// faults), 2 check found a diverging schedule. Output files are written
// atomically (temp file + rename) and runs are deterministic for a fixed
// input, flag set and seed.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "apac/access_analysis.hpp"
#include "apac/frontend.hpp"
#include "apac/parser.hpp"
#include "apac/taskgraph_sim.hpp"
#include "apac/throttle.hpp"
#include "apac/transform.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Same-directory temp then rename, so readers never see partial content.
void atomic_write(const std::string& path, const std::string& content) {
    fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write '" + path + "'");
        out << content;
        if (!out) throw std::runtime_error("cannot write '" + path + "'");
    }
    fs::rename(tmp, target);
}

void emit(const std::string& path, const std::string& content) {
    if (path == "-")
        std::cout << content;
    else
        atomic_write(path, content);
}

std::string fmt_num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

struct Pipeline {
    std::unique_ptr<apac::TranslationUnit> unit;
    std::unique_ptr<apac::UnitIndex> index;
    std::unique_ptr<apac::UnitPlan> plan;
    std::string warnings;  // formatted non-error diagnostics
};

Pipeline build_pipeline(const std::string& file,
                        const apac::AnalysisOptions& aopts) {
    Pipeline p;
    p.unit = apac::parse_translation_unit(read_file(file), file);
    p.index = std::make_unique<apac::UnitIndex>(apac::build_index(*p.unit));
    p.plan = std::make_unique<apac::UnitPlan>(
        apac::analyze_unit(*p.index, aopts));
    std::ostringstream w;
    for (const auto* list : {&p.index->diagnostics, &p.plan->diagnostics})
        for (const auto& d : list->items())
            w << apac::format_diagnostic(d) << '\n';
    p.warnings = w.str();
    return p;
}

const char* reason_name(apac::SyncReason r) {
    switch (r) {
        case apac::SyncReason::Coherency: return "coherency";
        case apac::SyncReason::IndexDependency: return "index-dependency";
        case apac::SyncReason::ReturnBarrier: return "return-barrier";
    }
    return "?";
}

json analysis_json(const std::string& file, const apac::UnitPlan& plan) {
    json root;
    root["file"] = file;
    root["tainted"] = plan.tainted;
    json fns = json::array();
    for (const auto& fp : plan.functions) {
        if (!fp.fn) continue;
        json f;
        f["name"] = fp.fn->qualified_name.empty() ? fp.fn->name
                                                  : fp.fn->qualified_name;
        f["taskgroup"] = fp.needs_taskgroup;
        json tasks = json::array();
        for (const auto& tp : fp.tasks) {
            const auto& site = fp.sites[tp.site_index];
            json t;
            t["callee"] = site.callee_name;
            t["line"] = site.stmt_span.line;
            t["depend_in"] = tp.depend.in;
            t["depend_inout"] = tp.depend.inout;
            t["firstprivate"] = tp.firstprivate_vars;
            t["hoisted"] = tp.is_hoisted;
            if (tp.is_hoisted) t["temp"] = tp.hoist_temp;
            t["taskwait_before"] = tp.preceded_by_taskwait;
            tasks.push_back(std::move(t));
        }
        f["tasks"] = std::move(tasks);
        json syncs = json::array();
        for (const auto& s : fp.syncs) {
            json e;
            e["line"] = s.position.line;
            e["reason"] = reason_name(s.reason);
            e["at_body_end"] = s.at_body_end;
            syncs.push_back(std::move(e));
        }
        f["syncs"] = std::move(syncs);
        json promos = json::array();
        for (const auto& pc : fp.promotions) {
            json e;
            e["var"] = pc.var;
            e["pointer"] = pc.ptr_name;
            e["line"] = pc.decl_span.line;
            e["alias"] = pc.is_alias;
            if (pc.is_alias) e["alias_root"] = pc.alias_root;
            promos.push_back(std::move(e));
        }
        f["promotions"] = std::move(promos);
        fns.push_back(std::move(f));
    }
    root["functions"] = std::move(fns);
    return root;
}

// "name=1,2,3" sets one observable cell; scalars are single-element lists.
apac::MemoryState parse_inputs(const std::vector<std::string>& specs) {
    apac::MemoryState m;
    for (const auto& spec : specs) {
        auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0)
            throw std::runtime_error("bad --input '" + spec +
                                     "', expected name=v[,v...]");
        std::string name = spec.substr(0, eq);
        std::vector<long long> vals;
        std::stringstream ss(spec.substr(eq + 1));
        std::string item;
        while (std::getline(ss, item, ',')) {
            size_t used = 0;
            vals.push_back(std::stoll(item, &used));
            if (used != item.size())
                throw std::runtime_error("bad --input value '" + item + "'");
        }
        if (vals.empty())
            throw std::runtime_error("bad --input '" + spec + "': no values");
        m.set_array(name, vals);
    }
    return m;
}

std::string default_out(const std::string& input) {
    fs::path p(input);
    fs::path out = p.parent_path() /
                   (p.stem().string() + ".apac" + p.extension().string());
    return out.string();
}

// Flag groups shared by several subcommands.
struct AnalysisFlags {
    std::vector<std::string> exclude;
    bool no_coherency_sync = false;
    bool no_promotion = false;

    apac::AnalysisOptions options() const {
        apac::AnalysisOptions a;
        a.coherency_sync = !no_coherency_sync;
        a.promotion = !no_promotion;
        a.exclude_functions = exclude;
        return a;
    }
};

void add_analysis_flags(CLI::App* cmd, AnalysisFlags& f) {
    cmd->add_option("--exclude", f.exclude,
                    "Skip taskification of this function (repeatable)");
    cmd->add_flag("--no-coherency-sync", f.no_coherency_sync,
                  "Drop taskwait insertion before host reads (ablation)");
    cmd->add_flag("--no-promotion", f.no_promotion,
                  "Disable scope promotion of task results (ablation)");
}

struct SimFlags {
    std::string entry = "main";
    std::string strategy = "depth:5";
    std::string cost = "unit";
    std::vector<std::string> inputs;
    int recursion_limit = 200;

    apac::SimOptions options() const {
        apac::SimOptions s;
        s.strategy = apac::ThrottleStrategy::parse(strategy);
        s.cost = apac::CostModel::parse(cost);
        s.recursion_limit = recursion_limit;
        return s;
    }
};

void add_sim_flags(CLI::App* cmd, SimFlags& f) {
    cmd->add_option("--entry", f.entry, "Entry function (default main)");
    cmd->add_option("--strategy", f.strategy,
                    "Throttle: none | count:N | depth:D (default depth:5)");
    cmd->add_option("--cost", f.cost,
                    "Task cost model: unit | argspan:LO:HI (default unit)");
    cmd->add_option("--input", f.inputs,
                    "Entry input cell, name=v[,v...] (repeatable)");
    cmd->add_option("--recursion-limit", f.recursion_limit,
                    "Interpreter call depth limit (default 200)");
}

// --- transform -------------------------------------------------------------

struct TransformConfig {
    std::vector<std::string> files;
    std::string out;
    std::string strategy = "depth:5";
    std::string dump_analysis;
    AnalysisFlags analysis;
};

int transform_one(const std::string& file, const std::string& out_path,
                  const TransformConfig& cfg, std::string& messages) {
    Pipeline p = build_pipeline(file, cfg.analysis.options());
    messages += p.warnings;
    auto strategy = apac::ThrottleStrategy::parse(cfg.strategy);
    std::string text = apac::transform_unit(*p.plan, strategy);
    emit(out_path, text);
    if (!cfg.dump_analysis.empty())
        emit(cfg.dump_analysis,
             analysis_json(file, *p.plan).dump(2) + "\n");
    return 0;
}

int run_transform(const TransformConfig& cfg) {
    if (cfg.files.size() > 1 && !cfg.out.empty()) {
        std::cerr << "apac: -o requires a single input file\n";
        return 1;
    }
    if (cfg.files.size() > 1 && !cfg.dump_analysis.empty()) {
        std::cerr << "apac: --dump-analysis requires a single input file\n";
        return 1;
    }
    struct Result {
        int code = 0;
        std::string messages;
    };
    auto work = [&cfg](const std::string& file) {
        Result r;
        std::string out = cfg.out.empty() ? default_out(file) : cfg.out;
        if (out == file) {
            r.messages = "apac: refusing to overwrite input '" + file + "'\n";
            r.code = 1;
            return r;
        }
        try {
            r.code = transform_one(file, out, cfg, r.messages);
        } catch (const std::exception& e) {
            r.messages += std::string(e.what()) + "\n";
            r.code = 1;
        }
        return r;
    };
    std::vector<Result> results;
    if (cfg.files.size() == 1) {
        results.push_back(work(cfg.files[0]));
    } else {
        // Files are independent; run their pipelines concurrently and
        // report in input order.
        std::vector<std::future<Result>> futs;
        futs.reserve(cfg.files.size());
        for (const auto& f : cfg.files)
            futs.push_back(std::async(std::launch::async, work, f));
        for (auto& fu : futs) results.push_back(fu.get());
    }
    int code = 0;
    for (const auto& r : results) {
        std::cerr << r.messages;
        code = std::max(code, r.code);
    }
    return code;
}

// --- analyze ---------------------------------------------------------------

int run_analyze(const std::string& file, const std::string& out,
                const AnalysisFlags& af) {
    Pipeline p = build_pipeline(file, af.options());
    std::cerr << p.warnings;
    emit(out.empty() ? "-" : out, analysis_json(file, *p.plan).dump(2) + "\n");
    return 0;
}

// --- graph -----------------------------------------------------------------

struct GraphConfig {
    std::string file;
    std::string dot_out;
    bool as_json = false;
    int workers = 4;
    SimFlags sim;
    AnalysisFlags analysis;
};

int run_graph(const GraphConfig& cfg) {
    Pipeline p = build_pipeline(cfg.file, cfg.analysis.options());
    std::cerr << p.warnings;
    apac::MemoryState input = parse_inputs(cfg.sim.inputs);
    apac::TaskGraph g = apac::extract_task_graph(*p.plan, cfg.sim.entry,
                                                 input, cfg.sim.options());
    apac::MakespanResult m = apac::simulate_makespan(g, cfg.workers);
    size_t barriers = 0;
    for (const auto& n : g.nodes)
        if (n.kind == apac::SimNodeKind::Barrier) ++barriers;

    if (!cfg.dot_out.empty()) emit(cfg.dot_out, apac::graph_dot(g));

    if (cfg.as_json) {
        json r;
        r["file"] = cfg.file;
        r["entry"] = cfg.sim.entry;
        r["strategy"] = apac::ThrottleStrategy::parse(cfg.sim.strategy).format();
        r["cost"] = apac::CostModel::parse(cfg.sim.cost).format();
        r["tasks"] = g.tasks.size();
        r["nodes"] = g.nodes.size();
        r["edges"] = g.edges.size();
        r["barriers"] = barriers;
        r["counter"] = {{"increments", g.counter.increments},
                        {"decrements", g.counter.decrements},
                        {"max_live", g.counter.max_live},
                        {"final_live", g.counter.final_live}};
        r["workers"] = cfg.workers;
        r["total_cost"] = m.total_cost;
        r["critical_path"] = m.critical_path;
        r["makespan"] = m.makespan;
        r["speedup"] = m.speedup;
        std::cout << r.dump(2) << "\n";
    } else if (!cfg.dot_out.empty()) {
        std::cout << "tasks " << g.tasks.size() << "  nodes " << g.nodes.size()
                  << "  edges " << g.edges.size() << "  barriers " << barriers
                  << "\n"
                  << "workers " << cfg.workers << ": makespan "
                  << fmt_num(m.makespan) << "  total " << fmt_num(m.total_cost)
                  << "  critical-path " << fmt_num(m.critical_path)
                  << "  speedup " << fmt_num(m.speedup) << "\n";
    } else {
        std::cout << apac::graph_dot(g);
    }
    return 0;
}

// --- check -----------------------------------------------------------------

struct CheckConfig {
    std::string file;
    std::string schedules = "auto";
    unsigned seed = 20240817;
    bool as_json = false;
    SimFlags sim;
    AnalysisFlags analysis;
};

int run_check(const CheckConfig& cfg) {
    Pipeline p = build_pipeline(cfg.file, cfg.analysis.options());
    std::cerr << p.warnings;
    apac::MemoryState input = parse_inputs(cfg.sim.inputs);
    apac::ScheduleSpec spec = apac::ScheduleSpec::parse(cfg.schedules);
    apac::TaskGraph g = apac::extract_task_graph(*p.plan, cfg.sim.entry,
                                                 input, cfg.sim.options());
    apac::MemoryState seq = apac::sequential_execute(
        *p.index, cfg.sim.entry, input, cfg.sim.options().recursion_limit);
    apac::CheckOutcome out =
        apac::check_schedules(g, seq, input, spec, cfg.seed);

    int code = out.failed.empty() ? 0 : 2;
    if (cfg.as_json) {
        json r;
        r["file"] = cfg.file;
        r["entry"] = cfg.sim.entry;
        r["schedules"] = spec.format();
        r["seed"] = cfg.seed;
        r["tasks"] = g.tasks.size();
        r["total"] = out.total;
        r["passed"] = out.passed;
        r["failed"] = out.failed;
        r["exhaustive"] = out.exhaustive;
        r["lines"] = out.lines;
        std::cout << r.dump(2) << "\n";
    } else {
        for (const auto& line : out.lines) std::cout << line << "\n";
        std::cout << (out.exhaustive ? "exhaustive: " : "sampled: ")
                  << out.passed << " of " << out.total
                  << " schedules match the sequential result\n";
    }
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Task-based parallelizer: annotates a C++ subset with "
                 "OpenMP task pragmas and simulates the task graph"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "apac 0.1.0");
    app.set_config("--config", "", "Config file, key=value; flags win");

    TransformConfig tc;
    auto* t = app.add_subcommand(
        "transform", "Rewrite sources with task pragmas");
    t->add_option("files", tc.files, "Input source files")
        ->required()
        ->check(CLI::ExistingFile);
    t->add_option("-o,--output", tc.out,
                  "Output path, '-' for stdout (default <input>.apac.cpp)");
    t->add_option("--strategy", tc.strategy,
                  "Throttle: none | count:N | depth:D (default depth:5)");
    t->add_option("--dump-analysis", tc.dump_analysis,
                  "Also write the analysis report JSON to this path");
    add_analysis_flags(t, tc.analysis);

    std::string an_file, an_out;
    AnalysisFlags an_flags;
    auto* a = app.add_subcommand(
        "analyze", "Report taskification decisions as JSON");
    a->add_option("file", an_file, "Input source file")
        ->required()
        ->check(CLI::ExistingFile);
    a->add_option("-o,--output", an_out, "Output path (default stdout)");
    add_analysis_flags(a, an_flags);

    GraphConfig gc;
    auto* g = app.add_subcommand(
        "graph", "Extract the dynamic task graph; DOT and makespan");
    g->add_option("file", gc.file, "Input source file")
        ->required()
        ->check(CLI::ExistingFile);
    g->add_option("--dot", gc.dot_out, "Write DOT here (default stdout)");
    g->add_option("--workers", gc.workers,
                  "Worker count for the makespan estimate (default 4)");
    g->add_flag("--json", gc.as_json, "Machine-readable summary on stdout");
    add_sim_flags(g, gc.sim);
    add_analysis_flags(g, gc.analysis);

    CheckConfig cc;
    auto* c = app.add_subcommand(
        "check", "Replay task schedules against sequential execution");
    c->add_option("file", cc.file, "Input source file")
        ->required()
        ->check(CLI::ExistingFile);
    c->add_option("--schedules", cc.schedules,
                  "all | auto | random:K (default auto)");
    c->add_option("--seed", cc.seed, "Sampling seed (default 20240817)");
    c->add_flag("--json", cc.as_json, "Machine-readable summary on stdout");
    add_sim_flags(c, cc.sim);
    add_analysis_flags(c, cc.analysis);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*t) return run_transform(tc);
        if (*a) return run_analyze(an_file, an_out, an_flags);
        if (*g) return run_graph(gc);
        if (*c) return run_check(cc);
    } catch (const apac::ApacError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "apac: error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
