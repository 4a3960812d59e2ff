#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "apac/access_analysis.hpp"
#include "apac/throttle.hpp"

namespace apac {

// ---------------------------------------------------------------------------
// Values and observable memory
// ---------------------------------------------------------------------------

// Scalar runtime value. Pointers name a cell plus an element offset.
struct Value {
    enum class Kind { Int, Float, Bool, Ptr };
    Kind kind = Kind::Int;
    long long i = 0;
    double f = 0.0;
    bool b = false;
    int cell = -1;
    long long off = 0;

    static Value of_int(long long v);
    static Value of_float(double v);
    static Value of_bool(bool v);
    static Value of_ptr(int cell, long long off);

    bool operator==(const Value& o) const;
    bool operator!=(const Value& o) const { return !(*this == o); }
    std::string to_string() const;
};

// Observable store: entry parameters (pointer parameters report the array
// they point at), globals, and "<return>" for a non-void entry.
struct MemoryState {
    std::map<std::string, std::vector<Value>> cells;

    bool operator==(const MemoryState& o) const { return cells == o.cells; }
    bool operator!=(const MemoryState& o) const { return !(*this == o); }
    std::string to_string() const;

    void set_scalar(const std::string& name, long long v);
    void set_array(const std::string& name, const std::vector<long long>& v);
};

// ---------------------------------------------------------------------------
// Simulation knobs
// ---------------------------------------------------------------------------

// Task cost: one unit each, or the span between two integer arguments
// (subarray length for partition-style signatures), floored at 1.
struct CostModel {
    enum class Kind { Unit, ArgSpan };
    Kind kind = Kind::Unit;
    int lo_arg = 0;
    int hi_arg = 1;

    static CostModel parse(const std::string& text);
    std::string format() const;
};

struct SimOptions {
    ThrottleStrategy strategy;
    CostModel cost;
    int recursion_limit = 200;
    // Ablations for sync-necessity experiments.
    std::set<int> drop_sync_stmt_ids;   // ignore sync events at these stmts
    bool strip_cleanup_depends = false; // cleanup tasks lose their ordering
};

// ---------------------------------------------------------------------------
// The extracted graph
// ---------------------------------------------------------------------------

enum class EdgeKind { RAW, WAR, WAW, Sync };
enum class SimNodeKind { Host, Task, Barrier };

struct NodeOps;        // replay payload (internal)
struct ReplayContext;  // cell layout and seeding (internal)

// One schedulable unit: a task's leading segment, a host/continuation
// segment, or a barrier. Host code between submissions stays in program
// order via Sync edges; tasks float inside their submission window.
struct SimNode {
    int id = 0;
    SimNodeKind kind = SimNodeKind::Host;
    int task_id = -1;  // owning task, -1 for the entry spine
    double cost = 0.0;
    std::string label;
    std::set<int> reads;   // cell ids from the depend clause (tasks only)
    std::set<int> writes;
    std::shared_ptr<NodeOps> ops;
};

struct SimEdge {
    int from = 0;
    int to = 0;
    EdgeKind kind = EdgeKind::Sync;
};

// One dynamically created task (may span several nodes when its body
// submits nested tasks).
struct SimTaskInfo {
    int id = 0;
    std::string label;   // callee@site
    std::string callee;
    int site_stmt_id = 0;
    int depth = 0;
    int parent = -1;     // parent task id, -1 when spawned by the entry
    double cost = 0.0;
    int first_node = -1;
    int last_node = -1;
    std::set<int> reads;
    std::set<int> writes;
};

struct CounterTrace {
    long long increments = 0;
    long long decrements = 0;
    long long max_live = 0;
    long long final_live = 0;
};

struct TaskGraph {
    std::vector<SimNode> nodes;
    std::vector<SimEdge> edges;
    std::vector<SimTaskInfo> tasks;
    CounterTrace counter;
    std::shared_ptr<ReplayContext> replay;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

// Instrumented sequential interpretation of entry: one task per dynamically
// created task, depend edges among siblings, Sync edges for program order,
// taskwait, and taskgroup completion. Inline (throttled-out) calls merge
// into the submitting node. Throws ApacError on interpreter faults or when
// recursion exceeds the limit.
TaskGraph extract_task_graph(const UnitPlan& plan, const std::string& entry,
                             const MemoryState& input,
                             const SimOptions& opts = {});

// Plain sequential interpretation without any task machinery; oracle side
// of the equivalence check.
MemoryState sequential_execute(const UnitIndex& index,
                               const std::string& entry,
                               const MemoryState& input,
                               int recursion_limit = 200);

// Observable state reached while the graph was extracted (sequential order).
MemoryState extraction_state(const TaskGraph& graph);

struct ScheduleResult {
    MemoryState state;
    bool control_diverged = false;
    std::string note;
};

// Re-executes node payloads in the given order against fresh memory.
// Throws ApacError when the order is not a permutation respecting edges.
ScheduleResult schedule_execute(const TaskGraph& graph,
                                const std::vector<int>& order,
                                const MemoryState& input);

struct ScheduleSet {
    std::vector<std::vector<int>> orders;
    bool exhaustive = false;
};

// All topological orders when there are at most `limit`, else `limit`
// seeded samples drawn by uniform ready-set choice.
ScheduleSet enumerate_schedules(const TaskGraph& graph, size_t limit,
                                unsigned seed = 20240817);

struct MakespanResult {
    double makespan = 0.0;
    double speedup = 1.0;
    double total_cost = 0.0;
    double critical_path = 0.0;
};

// Greedy list scheduling with a FIFO ready queue over `workers` workers.
MakespanResult simulate_makespan(const TaskGraph& graph, int workers);

// Task-level DOT: tasks and entry-level barriers as nodes, host segments
// contracted, edges labeled RAW/WAR/WAW/Sync.
std::string graph_dot(const TaskGraph& graph);

struct ScheduleSpec {
    enum class Kind { All, Random, Auto };
    Kind kind = Kind::Auto;
    size_t samples = 1000;

    static ScheduleSpec parse(const std::string& text);
    std::string format() const;
};

struct CheckOutcome {
    size_t total = 0;
    size_t passed = 0;
    bool exhaustive = false;
    std::vector<std::string> lines;  // one PASS/FAIL line per schedule
    std::vector<size_t> failed;      // indices of diverging schedules
};

// Runs every enumerated schedule and compares against the sequential state.
CheckOutcome check_schedules(const TaskGraph& graph,
                             const MemoryState& sequential_state,
                             const MemoryState& input,
                             const ScheduleSpec& spec,
                             unsigned seed = 20240817);

}  // namespace apac
