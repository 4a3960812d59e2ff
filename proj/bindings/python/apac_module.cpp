// Python bindings over the library pipeline: transform, analyze, graph
// inspection and schedule checking. Every entry point takes source text and
// rebuilds the pipeline; at binding scale that costs microseconds and keeps
// the module stateless.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <string>
#include <vector>

#include "apac/access_analysis.hpp"
#include "apac/frontend.hpp"
#include "apac/parser.hpp"
#include "apac/taskgraph_sim.hpp"
#include "apac/throttle.hpp"
#include "apac/transform.hpp"

namespace py = pybind11;
using namespace apac;

namespace {

struct Pipeline {
    std::unique_ptr<TranslationUnit> unit;
    std::unique_ptr<UnitIndex> index;
    std::unique_ptr<UnitPlan> plan;
};

Pipeline build(const std::string& source, const AnalysisOptions& opts = {}) {
    Pipeline p;
    p.unit = parse_translation_unit(source, "<python>");
    p.index = std::make_unique<UnitIndex>(build_index(*p.unit));
    p.plan = std::make_unique<UnitPlan>(analyze_unit(*p.index, opts));
    return p;
}

AnalysisOptions analysis_options(bool coherency_sync, bool promotion,
                                 const std::vector<std::string>& exclude) {
    AnalysisOptions a;
    a.coherency_sync = coherency_sync;
    a.promotion = promotion;
    a.exclude_functions = exclude;
    return a;
}

MemoryState state_from_dict(const py::dict& inputs) {
    MemoryState m;
    for (auto item : inputs) {
        auto name = item.first.cast<std::string>();
        if (py::isinstance<py::int_>(item.second)) {
            m.set_scalar(name, item.second.cast<long long>());
        } else {
            m.set_array(name, item.second.cast<std::vector<long long>>());
        }
    }
    return m;
}

py::object py_value(const Value& v) {
    switch (v.kind) {
        case Value::Kind::Float: return py::cast(v.f);
        case Value::Kind::Bool: return py::cast(v.b);
        case Value::Kind::Ptr: return py::none();
        default: return py::cast(v.i);
    }
}

py::dict state_to_dict(const MemoryState& m) {
    py::dict out;
    for (const auto& [name, cells] : m.cells) {
        if (cells.size() == 1) {
            out[py::str(name)] = py_value(cells[0]);
        } else {
            py::list vals;
            for (const Value& v : cells) vals.append(py_value(v));
            out[py::str(name)] = vals;
        }
    }
    return out;
}

std::string transform_source(const std::string& source,
                             const std::string& strategy, bool coherency_sync,
                             bool promotion,
                             const std::vector<std::string>& exclude,
                             bool header_comment) {
    Pipeline p =
        build(source, analysis_options(coherency_sync, promotion, exclude));
    return transform_unit(*p.plan, ThrottleStrategy::parse(strategy),
                          header_comment);
}

py::list analyze_source(const std::string& source) {
    Pipeline p = build(source);
    py::list fns;
    for (const auto& fp : p.plan->functions) {
        if (!fp.fn) continue;
        py::dict f;
        f["name"] = fp.fn->qualified_name.empty() ? fp.fn->name
                                                  : fp.fn->qualified_name;
        f["taskgroup"] = fp.needs_taskgroup;
        py::list tasks;
        for (const auto& tp : fp.tasks) {
            const auto& site = fp.sites[tp.site_index];
            py::dict t;
            t["callee"] = site.callee_name;
            t["line"] = site.stmt_span.line;
            t["depend_in"] = tp.depend.in;
            t["depend_inout"] = tp.depend.inout;
            t["firstprivate"] = tp.firstprivate_vars;
            t["hoisted"] = tp.is_hoisted;
            t["taskwait_before"] = tp.preceded_by_taskwait;
            tasks.append(t);
        }
        f["tasks"] = tasks;
        py::list syncs;
        for (const auto& s : fp.syncs) {
            py::dict e;
            e["line"] = s.position.line;
            e["at_body_end"] = s.at_body_end;
            syncs.append(e);
        }
        f["syncs"] = syncs;
        py::list promos;
        for (const auto& pc : fp.promotions) {
            py::dict e;
            e["var"] = pc.var;
            e["pointer"] = pc.ptr_name;
            e["alias"] = pc.is_alias;
            promos.append(e);
        }
        f["promotions"] = promos;
        fns.append(f);
    }
    return fns;
}

SimOptions sim_options(const std::string& strategy, const std::string& cost,
                       int recursion_limit) {
    SimOptions s;
    s.strategy = ThrottleStrategy::parse(strategy);
    s.cost = CostModel::parse(cost);
    s.recursion_limit = recursion_limit;
    return s;
}

std::string graph_dot_source(const std::string& source,
                             const std::string& entry, const py::dict& inputs,
                             const std::string& strategy) {
    Pipeline p = build(source);
    TaskGraph g = extract_task_graph(*p.plan, entry, state_from_dict(inputs),
                                     sim_options(strategy, "unit", 200));
    return graph_dot(g);
}

py::dict check_source(const std::string& source, const std::string& entry,
                      const py::dict& inputs, const std::string& strategy,
                      const std::string& schedules, unsigned seed) {
    Pipeline p = build(source);
    MemoryState input = state_from_dict(inputs);
    SimOptions opts = sim_options(strategy, "unit", 200);
    TaskGraph g = extract_task_graph(*p.plan, entry, input, opts);
    MemoryState seq = sequential_execute(*p.index, entry, input);
    CheckOutcome out = check_schedules(g, seq, input,
                                       ScheduleSpec::parse(schedules), seed);
    py::dict r;
    r["tasks"] = g.tasks.size();
    r["total"] = out.total;
    r["passed"] = out.passed;
    r["failed"] = out.failed;
    r["divergent"] = out.failed.size();
    r["exhaustive"] = out.exhaustive;
    r["lines"] = out.lines;
    r["sequential_state"] = state_to_dict(seq);
    return r;
}

py::dict run_source(const std::string& source, const std::string& entry,
                    const py::dict& inputs) {
    Pipeline p = build(source);
    return state_to_dict(
        sequential_execute(*p.index, entry, state_from_dict(inputs)));
}

py::dict simulate(const std::string& source, const std::string& entry,
                  const py::dict& inputs, const std::string& strategy,
                  const std::string& cost, int workers) {
    Pipeline p = build(source);
    TaskGraph g = extract_task_graph(*p.plan, entry, state_from_dict(inputs),
                                     sim_options(strategy, cost, 200));
    MakespanResult m = simulate_makespan(g, workers);
    py::dict r;
    r["tasks"] = g.tasks.size();
    r["nodes"] = g.nodes.size();
    r["edges"] = g.edges.size();
    r["workers"] = workers;
    r["total_cost"] = m.total_cost;
    r["critical_path"] = m.critical_path;
    r["makespan"] = m.makespan;
    r["speedup"] = m.speedup;
    return r;
}

}  // namespace

PYBIND11_MODULE(_apac, m) {
    m.doc() = "Task-based parallelizer: OpenMP task annotation and task "
              "graph simulation for a C++ subset";
    m.attr("__version__") = "0.1.0";
    py::register_exception<ApacError>(m, "ApacError");

    m.def("transform_source", &transform_source, py::arg("source"),
          py::arg("strategy") = "depth:5", py::arg("coherency_sync") = true,
          py::arg("promotion") = true,
          py::arg("exclude") = std::vector<std::string>{},
          py::arg("header_comment") = true,
          "Rewrite source text with OpenMP task pragmas.");
    m.def("analyze_source", &analyze_source, py::arg("source"),
          "Per-function taskification report: taskgroup decision, task "
          "depend clauses, sync points and promotions.");
    m.def("graph_dot_source", &graph_dot_source, py::arg("source"),
          py::arg("entry") = "main", py::arg("inputs") = py::dict(),
          py::arg("strategy") = "depth:5",
          "DOT text of the dynamic task graph reached from entry.");
    m.def("check_source", &check_source, py::arg("source"),
          py::arg("entry") = "main", py::arg("inputs") = py::dict(),
          py::arg("strategy") = "depth:5", py::arg("schedules") = "auto",
          py::arg("seed") = 20240817u,
          "Replay admissible schedules against sequential execution.");
    m.def("simulate", &simulate, py::arg("source"), py::arg("entry") = "main",
          py::arg("inputs") = py::dict(), py::arg("strategy") = "depth:5",
          py::arg("cost") = "unit", py::arg("workers") = 4,
          "Greedy list-scheduling makespan and speedup estimate.");
}
