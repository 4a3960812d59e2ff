#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "apac/frontend.hpp"

namespace apac {

enum class AccessMode { In, InOut };

// Ordered depend lists. `in` and `inout` stay disjoint: a variable hit with
// both modes collapses into inout, keeping its first-seen position.
struct DependClause {
    std::vector<std::string> in;
    std::vector<std::string> inout;

    void add(const std::string& var, AccessMode mode);
    bool mentions(const std::string& var) const;
    bool empty() const { return in.empty() && inout.empty(); }
    std::vector<std::string> all_vars() const;
};

// In iff the parameter cannot write through: by-value or const-qualified.
AccessMode classify_parameter(const ParamInfo& p);

// Depend clause of one call: argument variables get the matching parameter's
// mode (the written-through base for inout, every other referenced variable
// in), the receiver joins per method constness, a bound result joins inout.
DependClause classify_call(const CallSiteInfo& site);

enum class SyncReason { Coherency, IndexDependency, ReturnBarrier };

struct SyncPointInfo {
    SourceSpan position;  // the statement a taskwait goes in front of
    SyncReason reason = SyncReason::Coherency;
    int stmt_id = 0;      // anchor statement (enclosing loop for body-end)
    bool at_body_end = false;  // loop wrap-around: taskwait before body close
};

struct PromotionCandidate {
    std::string var;
    std::string ptr_name;  // apac_ptr_<var>, collision-adjusted
    TypeRef type;
    SourceSpan decl_span;       // whole declaration statement
    SourceSpan init_span;       // initializer expression, when present
    bool has_init = false;
    SourceSpan scope_end_span;  // closing brace of the owning scope
    int decl_stmt_id = 0;
    int scope_stmt_id = 0;
    bool is_alias = false;      // alias declarations are never promoted
    std::string alias_root;
};

// One wrapped call. Hoisted tasks materialize an inner call into a fresh
// temporary declared immediately before the enclosing statement.
struct TaskPlan {
    size_t site_index = 0;
    int stmt_id = 0;
    DependClause depend;            // names as written
    DependClause depend_canonical;  // aliases folded to their roots
    std::vector<std::string> firstprivate_vars;
    bool preceded_by_taskwait = false;
    bool is_hoisted = false;
    std::string hoist_temp;
    std::string result_decl_type;  // spelling for the split declaration
};

struct PreStmtEvent {
    enum class Kind { Sync, Task };
    Kind kind = Kind::Sync;
    SyncReason sync_reason = SyncReason::Coherency;
    size_t task_index = 0;  // when kind == Task (hoisted task)
};

struct StmtPlanEntry {
    std::vector<PreStmtEvent> pre;  // insertions in front of the statement
    int task_index = -1;            // statement itself runs as this task
    bool sync_at_body_end = false;  // loops only
};

enum class ReturnMode { NoRewrite, TrailingKept, Full };

struct ReturnPlan {
    ReturnMode mode = ReturnMode::NoRewrite;
    std::string result_var;  // apac_res, collision-adjusted
    std::string end_label;
    bool emit_label = false;           // at least one goto targets it
    std::vector<int> return_stmt_ids;  // rewritten returns
    int trailing_stmt_id = -1;         // TrailingKept: the kept return
};

struct FunctionPlan {
    const FunctionDecl* fn = nullptr;
    bool needs_taskgroup = false;
    std::vector<CallSiteInfo> sites;
    std::vector<TaskPlan> tasks;  // submission order
    std::map<int, StmtPlanEntry> stmt_plans;
    std::vector<SyncPointInfo> syncs;
    std::vector<PromotionCandidate> promotions;
    std::map<std::string, std::string> alias_roots;  // var -> outer root
    ReturnPlan returns;

    const StmtPlanEntry* entry_for(int stmt_id) const;
};

// Unit-wide generated identifiers, adjusted to dodge user names.
struct GeneratedNames {
    std::string active = "apac_active";
    std::string res = "apac_res";
    std::string depth = "apac_depth";
    std::string depth_local = "apac_depth_local";
    std::string task_count = "apac_task_count";
    std::string tmp_base = "apac_tmp";
    std::string ptr_base = "apac_ptr";
    std::string label_base = "apac_endtaskgrouplabel";
};

struct AnalysisOptions {
    bool coherency_sync = true;
    bool promotion = true;
    std::vector<std::string> exclude_functions;
};

struct UnitPlan {
    const UnitIndex* index = nullptr;
    std::vector<FunctionPlan> functions;  // aligned with index->functions
    std::set<std::string> tainted;        // not taskifiable: touches globals
    GeneratedNames names;
    DiagnosticList diagnostics;

    const FunctionPlan* plan_for(const FunctionDecl* fn) const;
    bool any_taskgroup() const;
};

// True iff the function's body holds at least one call the pipeline turns
// into a task (resolved, non-std, not global-tainted, not excluded).
bool function_needs_taskgroup(const UnitIndex& index, const FunctionDecl& fn,
                              const std::set<std::string>& tainted,
                              const std::vector<std::string>& excludes);

// True iff an argument of the call subscripts with an index variable some
// pending task may still write.
bool find_index_dependencies(const CallSiteInfo& site,
                             const std::vector<DependClause>& pending);

// Functions whose bodies touch a global variable, directly or through a
// callee; each gets a warning naming the offending global.
std::set<std::string> find_global_tainted(const UnitIndex& index,
                                          DiagnosticList& diags);

UnitPlan analyze_unit(const UnitIndex& index, const AnalysisOptions& opts);

// Per-function views over an analyzed unit.
std::vector<SyncPointInfo> find_coherency_syncs(const UnitPlan& plan,
                                                const FunctionDecl& fn);
std::vector<PromotionCandidate> find_promotions(const UnitPlan& plan,
                                                const FunctionDecl& fn);

}  // namespace apac
