#include "apac/taskgraph_sim.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <queue>
#include <random>
#include <sstream>

namespace apac {

namespace {

[[noreturn]] void sim_error(const std::string& msg) {
    Diagnostic d;
    d.severity = Severity::Error;
    d.message = msg;
    throw ApacError(d);
}

constexpr long long kPoison = -86110197;  // value a deleted cell decays to

}  // namespace

// ---------------------------------------------------------------------------
// Value / MemoryState
// ---------------------------------------------------------------------------

Value Value::of_int(long long v) {
    Value r;
    r.kind = Kind::Int;
    r.i = v;
    return r;
}

Value Value::of_float(double v) {
    Value r;
    r.kind = Kind::Float;
    r.f = v;
    return r;
}

Value Value::of_bool(bool v) {
    Value r;
    r.kind = Kind::Bool;
    r.b = v;
    return r;
}

Value Value::of_ptr(int cell, long long off) {
    Value r;
    r.kind = Kind::Ptr;
    r.cell = cell;
    r.off = off;
    return r;
}

bool Value::operator==(const Value& o) const {
    if (kind != o.kind) return false;
    switch (kind) {
        case Kind::Int: return i == o.i;
        case Kind::Float: return f == o.f;
        case Kind::Bool: return b == o.b;
        case Kind::Ptr: return cell == o.cell && off == o.off;
    }
    return false;
}

std::string Value::to_string() const {
    std::ostringstream os;
    switch (kind) {
        case Kind::Int: os << i; break;
        case Kind::Float: os << f; break;
        case Kind::Bool: os << (b ? "true" : "false"); break;
        case Kind::Ptr: os << "ptr(" << cell << "+" << off << ")"; break;
    }
    return os.str();
}

std::string MemoryState::to_string() const {
    std::ostringstream os;
    for (const auto& [name, vals] : cells) {
        os << name << " = ";
        if (vals.size() == 1) {
            os << vals[0].to_string();
        } else {
            os << "[";
            for (size_t i = 0; i < vals.size(); ++i) {
                if (i) os << ", ";
                os << vals[i].to_string();
            }
            os << "]";
        }
        os << "\n";
    }
    return os.str();
}

void MemoryState::set_scalar(const std::string& name, long long v) {
    cells[name] = {Value::of_int(v)};
}

void MemoryState::set_array(const std::string& name,
                            const std::vector<long long>& v) {
    std::vector<Value> vals;
    vals.reserve(v.size());
    for (long long x : v) vals.push_back(Value::of_int(x));
    cells[name] = std::move(vals);
}

// ---------------------------------------------------------------------------
// CostModel / ScheduleSpec
// ---------------------------------------------------------------------------

CostModel CostModel::parse(const std::string& text) {
    CostModel m;
    if (text == "unit") return m;
    if (text.rfind("argspan:", 0) == 0) {
        std::string rest = text.substr(8);
        size_t colon = rest.find(':');
        if (colon != std::string::npos) {
            try {
                int lo = std::stoi(rest.substr(0, colon));
                int hi = std::stoi(rest.substr(colon + 1));
                if (lo >= 0 && hi >= 0) {
                    m.kind = Kind::ArgSpan;
                    m.lo_arg = lo;
                    m.hi_arg = hi;
                    return m;
                }
            } catch (const std::exception&) {
            }
        }
    }
    sim_error("unknown cost model '" + text +
              "' (expected unit or argspan:<i>:<j>)");
}

std::string CostModel::format() const {
    if (kind == Kind::Unit) return "unit";
    return "argspan:" + std::to_string(lo_arg) + ":" + std::to_string(hi_arg);
}

ScheduleSpec ScheduleSpec::parse(const std::string& text) {
    ScheduleSpec s;
    if (text == "all") {
        s.kind = Kind::All;
        return s;
    }
    if (text == "auto") {
        s.kind = Kind::Auto;
        return s;
    }
    if (text.rfind("random:", 0) == 0) {
        try {
            long long k = std::stoll(text.substr(7));
            if (k >= 1) {
                s.kind = Kind::Random;
                s.samples = static_cast<size_t>(k);
                return s;
            }
        } catch (const std::exception&) {
        }
    }
    sim_error("unknown schedule spec '" + text +
              "' (expected all, auto, or random:<k>)");
}

std::string ScheduleSpec::format() const {
    switch (kind) {
        case Kind::All: return "all";
        case Kind::Auto: return "auto";
        case Kind::Random: return "random:" + std::to_string(samples);
    }
    return "auto";
}

// ---------------------------------------------------------------------------
// Interpreter internals
// ---------------------------------------------------------------------------

struct Binding {
    enum class Kind { Scalar, Array, Object };
    Kind kind = Kind::Scalar;
    int cell = -1;
    long long off = 0;    // Scalar: reference bindings may sit mid-array
    long long size = 0;   // Array
    std::string object_class;
    std::shared_ptr<std::map<std::string, int>> fields;  // Object
};

struct EnvNode {
    std::string name;
    Binding b;
    std::shared_ptr<EnvNode> parent;
};
using EnvPtr = std::shared_ptr<EnvNode>;

EnvPtr bind(EnvPtr parent, std::string name, Binding b) {
    auto n = std::make_shared<EnvNode>();
    n->name = std::move(name);
    n->b = std::move(b);
    n->parent = std::move(parent);
    return n;
}

const Binding* lookup(const EnvPtr& env, const std::string& name) {
    for (const EnvNode* n = env.get(); n; n = n->parent.get())
        if (n->name == name) return &n->b;
    return nullptr;
}

struct HoistMap {
    std::map<int, int> cells;  // call expr node_id -> temp cell
};

struct Lv {
    int cell = -1;
    long long off = 0;
};

struct Store {
    struct CellData {
        std::vector<Value> v;
        std::string name;
    };
    std::vector<CellData> cells;

    int alloc(long long n, std::string name) {
        if (n < 1) n = 1;
        cells.push_back({std::vector<Value>(static_cast<size_t>(n)),
                         std::move(name)});
        return static_cast<int>(cells.size()) - 1;
    }

    void check(int c, long long off) const {
        if (c < 0 || c >= static_cast<int>(cells.size()))
            sim_error("access through an invalid pointer");
        const auto& cd = cells[static_cast<size_t>(c)];
        if (off < 0 || off >= static_cast<long long>(cd.v.size()))
            sim_error("out-of-bounds access on '" + cd.name + "' (index " +
                      std::to_string(off) + ", size " +
                      std::to_string(cd.v.size()) + ")");
    }

    Value load(int c, long long off) const {
        check(c, off);
        return cells[static_cast<size_t>(c)].v[static_cast<size_t>(off)];
    }

    void put(int c, long long off, const Value& v) {
        check(c, off);
        cells[static_cast<size_t>(c)].v[static_cast<size_t>(off)] = v;
    }

    long long size_of(int c) const {
        return static_cast<long long>(cells[static_cast<size_t>(c)].v.size());
    }
};

struct Frame {
    EnvPtr env;
    std::shared_ptr<HoistMap> hoists;
    int ret_cell = -1;
    const ClassDecl* self_class = nullptr;
    int ignore_hoist = -1;  // node id whose hoist entry must not short-circuit
};

enum class Flow { Normal, Returned, Broke, Continued };

// Thrown when a replayed branch decision no longer matches the recording.
struct ControlDivergence {
    std::string note;
};

struct MicroOp {
    enum class K {
        Run,         // one primitive statement (decl init / assign / incdec / expr)
        Cond,        // re-check an if/while/for branch decision
        Switch,      // re-check the selected switch section
        ParamBind,   // evaluate an argument into a by-value parameter cell
        ReturnVal,   // evaluate a return expression into the invocation slot
        ResultCopy,  // move a finished call's value into its binding
        HoistCall,   // evaluate a hoisted call into its temporary
        Poison,      // scope cleanup: clobber the promoted cell
        EntryRun,    // run a whole unplanned entry body
    };
    K k = K::Run;
    const Stmt* stmt = nullptr;
    const Expr* expr = nullptr;
    const FunctionDecl* fn = nullptr;
    const ClassDecl* self = nullptr;
    EnvPtr env;
    std::shared_ptr<HoistMap> hoists;
    bool expected = false;
    long long expected_case = -2;
    int dst_cell = -1;
    long long dst_off = 0;
    int src_cell = -1;
    std::string op = "=";  // assignment operator for ResultCopy
};

struct NodeOps {
    std::vector<MicroOp> ops;
};

struct ReplayContext {
    const UnitIndex* index = nullptr;
    const UnitPlan* plan = nullptr;
    int recursion_limit = 200;
    std::vector<long long> cell_sizes;
    std::vector<std::string> cell_names;
    std::vector<std::pair<int, std::vector<Value>>> fixed;  // post-init cells
    std::vector<std::pair<std::string, int>> seeds;         // input name -> cell
    std::vector<std::pair<std::string, int>> observables;
    MemoryState extraction_state;
};

namespace {

// ---------------------------------------------------------------------------
// Graph construction
// ---------------------------------------------------------------------------

struct GraphBuild {
    TaskGraph* g = nullptr;
    int cur = -1;
    // Set after a submission: work recorded next must land in a fresh
    // segment so it can race the task instead of preceding it.
    bool need_split = false;

    int add_node(SimNodeKind kind, int task_id, std::string label,
                 double cost = 0.0) {
        SimNode n;
        n.id = static_cast<int>(g->nodes.size());
        n.kind = kind;
        n.task_id = task_id;
        n.label = std::move(label);
        n.cost = cost;
        n.ops = std::make_shared<NodeOps>();
        g->nodes.push_back(std::move(n));
        return g->nodes.back().id;
    }

    void add_edge(int from, int to, EdgeKind kind) {
        if (from == to || from < 0 || to < 0) return;
        g->edges.push_back({from, to, kind});
    }

    // Barriers carry no effects and submissions end the current window;
    // either way the next effect starts a fresh segment on the spine.
    void ensure_segment() {
        const SimNode& c = g->nodes[static_cast<size_t>(cur)];
        if (!need_split && c.kind != SimNodeKind::Barrier) return;
        int seg = add_node(SimNodeKind::Host, c.task_id, "seg");
        add_edge(cur, seg, EdgeKind::Sync);
        cur = seg;
        need_split = false;
    }

    void rec(MicroOp op) {
        ensure_segment();
        g->nodes[static_cast<size_t>(cur)].ops->ops.push_back(std::move(op));
    }
};

struct Sibling {
    int task = -1;
    int completion = -1;
    std::set<int> reads;
    std::set<int> writes;
};

struct RegionCtx {
    const FunctionPlan* fp = nullptr;
    int owner = -1;
    bool active = true;
    long long depth_local = 0;
    std::vector<Sibling> sibs;
    std::map<std::string, int> temp_cells;
    bool closed = false;
};

// ---------------------------------------------------------------------------
// The interpreter: shared by plain execution, extraction, and replay
// ---------------------------------------------------------------------------

class Interp {
  public:
    Interp(const UnitIndex& index, int limit) : index_(index), limit_(limit) {}

    Store store;
    EnvPtr genv;

    // Extraction hooks; null for plain interpretation and replay.
    const UnitPlan* plan = nullptr;
    const SimOptions* opts = nullptr;
    GraphBuild* gb = nullptr;
    long long sim_depth = 0;
    long long live = 0;
    CounterTrace trace;

    // --- universe -----------------------------------------------------

    struct Universe {
        const FunctionDecl* entry = nullptr;
        EnvPtr entry_env;
        int ret_cell = -1;
        std::vector<std::pair<int, std::vector<Value>>> fixed;
        std::vector<std::pair<std::string, int>> seeds;
        std::vector<std::pair<std::string, int>> observables;
    };

    const FunctionDecl* find_entry(const std::string& name) const {
        for (const FunctionDecl* fn : index_.functions) {
            if (fn->qualified_name != name && fn->name != name) continue;
            if (fn->is_method)
                sim_error("entry '" + name + "' is a method; use a free function");
            if (!fn->body || fn->is_external)
                sim_error("entry function '" + name + "' has no body");
            return fn;
        }
        sim_error("entry function '" + name + "' not found");
    }

    Universe setup_universe(const std::string& entry_name,
                            const MemoryState& input) {
        Universe u;
        u.entry = find_entry(entry_name);

        EnvPtr env;
        const TranslationUnit* unit = index_.unit;
        if (unit) {
            for (const GlobalVarDecl* g : unit->globals()) {
                const VarDeclData& d = g->decl;
                Binding b;
                if (d.type.is_array()) {
                    b.kind = Binding::Kind::Array;
                    b.cell = store.alloc(d.type.array_len, d.name);
                    b.size = d.type.array_len;
                } else {
                    b.kind = Binding::Kind::Scalar;
                    b.cell = store.alloc(1, d.name);
                }
                env = bind(env, d.name, b);
                if (d.init) {
                    Frame f{env, nullptr, -1, nullptr};
                    store.put(b.cell, 0, eval(*d.init, f));
                }
                u.seeds.emplace_back(d.name, b.cell);
                u.observables.emplace_back(d.name, b.cell);
            }
        }
        genv = env;

        EnvPtr penv = env;
        for (const ParamInfo& p : u.entry->params) {
            if (!is_builtin_type(p.base_type))
                sim_error("entry parameter '" + p.name +
                          "' has a class type; drive it through a wrapper");
            if (p.declarator == Declarator::Pointer) {
                auto it = input.cells.find(p.name);
                if (it == input.cells.end())
                    sim_error("pointer parameter '" + p.name +
                              "' needs an input array");
                int backing = store.alloc(
                    static_cast<long long>(it->second.size()), p.name + "[]");
                int pcell = store.alloc(1, p.name);
                store.put(pcell, 0, Value::of_ptr(backing, 0));
                Binding b;
                b.kind = Binding::Kind::Scalar;
                b.cell = pcell;
                penv = bind(penv, p.name, b);
                u.seeds.emplace_back(p.name, backing);
                u.observables.emplace_back(p.name, backing);
            } else {
                int cell = store.alloc(1, p.name);
                Binding b;
                b.kind = Binding::Kind::Scalar;
                b.cell = cell;
                penv = bind(penv, p.name, b);
                u.seeds.emplace_back(p.name, cell);
                u.observables.emplace_back(p.name, cell);
            }
        }
        u.entry_env = penv;

        if (u.entry->return_type.base != "void" ||
            u.entry->return_type.declarator != Declarator::ByValue) {
            u.ret_cell = store.alloc(1, "<return>");
            u.observables.emplace_back("<return>", u.ret_cell);
        }

        // Snapshot everything the setup wrote before inputs land.
        for (size_t c = 0; c < store.cells.size(); ++c)
            u.fixed.emplace_back(static_cast<int>(c), store.cells[c].v);

        apply_input(u.seeds, input);
        return u;
    }

    void apply_input(const std::vector<std::pair<std::string, int>>& seeds,
                     const MemoryState& input) {
        std::map<std::string, int> by_name(seeds.begin(), seeds.end());
        for (const auto& [name, vals] : input.cells) {
            auto it = by_name.find(name);
            if (it == by_name.end())
                sim_error("input names unknown cell '" + name + "'");
            int cell = it->second;
            if (static_cast<long long>(vals.size()) != store.size_of(cell))
                sim_error("input for '" + name + "' has length " +
                          std::to_string(vals.size()) + ", expected " +
                          std::to_string(store.size_of(cell)));
            for (size_t i = 0; i < vals.size(); ++i)
                store.put(cell, static_cast<long long>(i), vals[i]);
        }
    }

    MemoryState observe(
        const std::vector<std::pair<std::string, int>>& observables) const {
        MemoryState m;
        for (const auto& [name, cell] : observables)
            m.cells[name] = store.cells[static_cast<size_t>(cell)].v;
        return m;
    }

    // --- expression evaluation -----------------------------------------

    static bool truth(const Value& v) {
        switch (v.kind) {
            case Value::Kind::Int: return v.i != 0;
            case Value::Kind::Float: return v.f != 0.0;
            case Value::Kind::Bool: return v.b;
            case Value::Kind::Ptr: return v.cell >= 0;
        }
        return false;
    }

    static double numeric(const Value& v) {
        switch (v.kind) {
            case Value::Kind::Int: return static_cast<double>(v.i);
            case Value::Kind::Float: return v.f;
            case Value::Kind::Bool: return v.b ? 1.0 : 0.0;
            case Value::Kind::Ptr: break;
        }
        sim_error("pointer used in arithmetic");
    }

    static long long integral(const Value& v) {
        switch (v.kind) {
            case Value::Kind::Int: return v.i;
            case Value::Kind::Bool: return v.b ? 1 : 0;
            case Value::Kind::Float: return static_cast<long long>(v.f);
            case Value::Kind::Ptr: break;
        }
        sim_error("pointer used as an integer");
    }

    Value binop(const std::string& op, const Value& a, const Value& b) {
        if (a.kind == Value::Kind::Ptr || b.kind == Value::Kind::Ptr)
            return ptr_binop(op, a, b);
        bool flt = a.kind == Value::Kind::Float || b.kind == Value::Kind::Float;
        if (op == "+" || op == "-" || op == "*" || op == "/" || op == "%") {
            if (flt) {
                double x = numeric(a), y = numeric(b);
                if (op == "+") return Value::of_float(x + y);
                if (op == "-") return Value::of_float(x - y);
                if (op == "*") return Value::of_float(x * y);
                if (op == "/") return Value::of_float(x / y);
                sim_error("'%' needs integer operands");
            }
            long long x = integral(a), y = integral(b);
            if (op == "+") return Value::of_int(x + y);
            if (op == "-") return Value::of_int(x - y);
            if (op == "*") return Value::of_int(x * y);
            if (y == 0) sim_error("division by zero");
            if (op == "/") return Value::of_int(x / y);
            return Value::of_int(x % y);
        }
        if (op == "<" || op == "<=" || op == ">" || op == ">=") {
            double x = numeric(a), y = numeric(b);
            if (op == "<") return Value::of_bool(x < y);
            if (op == "<=") return Value::of_bool(x <= y);
            if (op == ">") return Value::of_bool(x > y);
            return Value::of_bool(x >= y);
        }
        if (op == "==") return Value::of_bool(numeric(a) == numeric(b));
        if (op == "!=") return Value::of_bool(numeric(a) != numeric(b));
        if (op == "&&") return Value::of_bool(truth(a) && truth(b));
        if (op == "||") return Value::of_bool(truth(a) || truth(b));
        sim_error("unsupported operator '" + op + "'");
    }

    Value ptr_binop(const std::string& op, const Value& a, const Value& b) {
        if (op == "+" && a.kind == Value::Kind::Ptr &&
            b.kind != Value::Kind::Ptr)
            return Value::of_ptr(a.cell, a.off + integral(b));
        if (op == "+" && b.kind == Value::Kind::Ptr &&
            a.kind != Value::Kind::Ptr)
            return Value::of_ptr(b.cell, b.off + integral(a));
        if (op == "-" && a.kind == Value::Kind::Ptr &&
            b.kind != Value::Kind::Ptr)
            return Value::of_ptr(a.cell, a.off - integral(b));
        if (a.kind == Value::Kind::Ptr && b.kind == Value::Kind::Ptr) {
            if (op == "-") {
                if (a.cell != b.cell)
                    sim_error("subtracting pointers into different objects");
                return Value::of_int(a.off - b.off);
            }
            if (op == "==") return Value::of_bool(a == b);
            if (op == "!=") return Value::of_bool(!(a == b));
            if (op == "<") return Value::of_bool(a.off < b.off);
            if (op == "<=") return Value::of_bool(a.off <= b.off);
            if (op == ">") return Value::of_bool(a.off > b.off);
            if (op == ">=") return Value::of_bool(a.off >= b.off);
        }
        sim_error("unsupported pointer operation '" + op + "'");
    }

    Value eval(const Expr& e, Frame& f) {
        if (f.hoists && e.node_id != f.ignore_hoist) {
            auto it = f.hoists->cells.find(e.node_id);
            if (it != f.hoists->cells.end()) return store.load(it->second, 0);
        }
        switch (e.kind) {
            case ExprKind::IntLit: return Value::of_int(e.int_val);
            case ExprKind::FloatLit: return Value::of_float(e.float_val);
            case ExprKind::BoolLit: return Value::of_bool(e.bool_val);
            case ExprKind::Paren: return eval(*e.lhs, f);
            case ExprKind::Ident: {
                const Binding* b = lookup(f.env, e.name);
                if (!b) sim_error("unknown variable '" + e.name + "'");
                if (b->kind == Binding::Kind::Scalar)
                    return store.load(b->cell, b->off);
                if (b->kind == Binding::Kind::Array)
                    return Value::of_ptr(b->cell, 0);
                sim_error("object '" + e.name + "' used as a value");
            }
            case ExprKind::Subscript: {
                Value base = eval(*e.lhs, f);
                if (base.kind != Value::Kind::Ptr)
                    sim_error("subscript on a non-pointer value");
                long long idx = integral(eval(*e.index, f));
                return store.load(base.cell, base.off + idx);
            }
            case ExprKind::Member: {
                Lv lv = eval_lv(e, f);
                if (store.size_of(lv.cell) > 1 && lv.off == 0)
                    return Value::of_ptr(lv.cell, 0);  // array field decays
                return store.load(lv.cell, lv.off);
            }
            case ExprKind::Unary: {
                if (e.op == "&") {
                    Lv lv = eval_lv(*e.lhs, f);
                    return Value::of_ptr(lv.cell, lv.off);
                }
                if (e.op == "*") {
                    Value p = eval(*e.lhs, f);
                    if (p.kind != Value::Kind::Ptr)
                        sim_error("dereference of a non-pointer value");
                    return store.load(p.cell, p.off);
                }
                Value v = eval(*e.lhs, f);
                if (e.op == "-") {
                    if (v.kind == Value::Kind::Float)
                        return Value::of_float(-v.f);
                    return Value::of_int(-integral(v));
                }
                if (e.op == "!") return Value::of_bool(!truth(v));
                sim_error("unsupported unary operator '" + e.op + "'");
            }
            case ExprKind::Binary: {
                if (e.op == "&&") {
                    Value a = eval(*e.lhs, f);
                    if (!truth(a)) return Value::of_bool(false);
                    return Value::of_bool(truth(eval(*e.rhs, f)));
                }
                if (e.op == "||") {
                    Value a = eval(*e.lhs, f);
                    if (truth(a)) return Value::of_bool(true);
                    return Value::of_bool(truth(eval(*e.rhs, f)));
                }
                Value a = eval(*e.lhs, f);
                Value b = eval(*e.rhs, f);
                return binop(e.op, a, b);
            }
            case ExprKind::Call: return eval_call(e, f);
        }
        sim_error("unsupported expression");
    }

    Lv eval_lv(const Expr& e, Frame& f) {
        switch (e.kind) {
            case ExprKind::Paren: return eval_lv(*e.lhs, f);
            case ExprKind::Ident: {
                const Binding* b = lookup(f.env, e.name);
                if (!b) sim_error("unknown variable '" + e.name + "'");
                if (b->kind != Binding::Kind::Scalar)
                    sim_error("'" + e.name + "' is not assignable");
                return {b->cell, b->off};
            }
            case ExprKind::Subscript: {
                Value base = eval(*e.lhs, f);
                if (base.kind != Value::Kind::Ptr)
                    sim_error("subscript on a non-pointer value");
                long long idx = integral(eval(*e.index, f));
                return {base.cell, base.off + idx};
            }
            case ExprKind::Member: {
                if (e.lhs->kind != ExprKind::Ident)
                    sim_error("nested member access is not supported");
                const Binding* b = lookup(f.env, e.lhs->name);
                if (!b || b->kind != Binding::Kind::Object)
                    sim_error("'" + e.lhs->name + "' is not an object");
                auto it = b->fields->find(e.name);
                if (it == b->fields->end())
                    sim_error("'" + e.lhs->name + "' has no field '" + e.name +
                              "'");
                return {it->second, 0};
            }
            case ExprKind::Unary:
                if (e.op == "*") {
                    Value p = eval(*e.lhs, f);
                    if (p.kind != Value::Kind::Ptr)
                        sim_error("dereference of a non-pointer value");
                    return {p.cell, p.off};
                }
                break;
            default: break;
        }
        sim_error("expression is not assignable");
    }

    // --- calls ----------------------------------------------------------

    Value eval_call(const Expr& e, Frame& f) {
        if (e.is_std_qualified()) return eval_std(e, f);
        const FunctionDecl* fn = nullptr;
        const Binding* recv = nullptr;
        if (e.is_method_call()) {
            if (e.lhs->kind != ExprKind::Ident)
                sim_error("method receiver must be a variable");
            recv = lookup(f.env, e.lhs->name);
            if (!recv || recv->kind != Binding::Kind::Object)
                sim_error("'" + e.lhs->name + "' is not an object");
            fn = index_.resolve_method(recv->object_class, e.name,
                                       e.args.size());
        } else {
            fn = index_.resolve_free(e.name, e.args.size());
            if (!fn && f.self_class)
                fn = index_.resolve_method(f.self_class->name, e.name,
                                           e.args.size());
        }
        if (!fn || !fn->body)
            sim_error("call to unknown or external function '" + e.name + "'");
        return call_plain(*fn, e, f, recv);
    }

    Value eval_std(const Expr& e, Frame& f) {
        const std::string& n = e.name;
        if (n == "std::swap" && e.args.size() == 2) {
            Lv a = eval_lv(*e.args[0], f);
            Lv b = eval_lv(*e.args[1], f);
            Value va = store.load(a.cell, a.off);
            Value vb = store.load(b.cell, b.off);
            store.put(a.cell, a.off, vb);
            store.put(b.cell, b.off, va);
            return Value::of_int(0);
        }
        if ((n == "std::min" || n == "std::max") && e.args.size() == 2) {
            Value a = eval(*e.args[0], f);
            Value b = eval(*e.args[1], f);
            bool pick_a = n == "std::min" ? numeric(a) <= numeric(b)
                                          : numeric(a) >= numeric(b);
            return pick_a ? a : b;
        }
        if (n == "std::abs" && e.args.size() == 1) {
            Value a = eval(*e.args[0], f);
            if (a.kind == Value::Kind::Float)
                return Value::of_float(a.f < 0 ? -a.f : a.f);
            long long v = integral(a);
            return Value::of_int(v < 0 ? -v : v);
        }
        sim_error("unsupported std function '" + n + "'");
    }

    EnvPtr bind_receiver(EnvPtr env, const Binding& recv) {
        for (const auto& [field, cell] : *recv.fields) {
            Binding b;
            if (store.size_of(cell) > 1) {
                b.kind = Binding::Kind::Array;
                b.size = store.size_of(cell);
            }
            b.cell = cell;
            env = bind(env, field, b);
        }
        return env;
    }

    static bool lvalue_shaped(const Expr& e) {
        switch (e.kind) {
            case ExprKind::Paren: return lvalue_shaped(*e.lhs);
            case ExprKind::Ident:
            case ExprKind::Subscript:
            case ExprKind::Member: return true;
            case ExprKind::Unary: return e.op == "*";
            default: return false;
        }
    }

    // A const reference accepts an rvalue argument by materializing a
    // temporary, like C++ does; a mutable reference insists on an lvalue.
    Binding bind_ref_arg(const ParamInfo& p, const Expr& arg, Frame& caller) {
        Binding b;
        if (lvalue_shaped(arg)) {
            Lv lv = eval_lv(arg, caller);
            b.cell = lv.cell;
            b.off = lv.off;
            return b;
        }
        if (!p.is_const_qualified)
            sim_error("argument for reference parameter '" + p.name +
                      "' must be an lvalue");
        b.cell = store.alloc(1, p.name + ":tmp");
        store.put(b.cell, 0, eval(arg, caller));
        return b;
    }

    Value call_plain(const FunctionDecl& fn, const Expr& call, Frame& caller,
                     const Binding* recv) {
        if (++depth_ > limit_) {
            --depth_;
            sim_error("recursion limit (" + std::to_string(limit_) +
                      ") exceeded interpreting '" + fn.qualified_name + "'");
        }
        EnvPtr env = genv;
        if (recv) env = bind_receiver(env, *recv);
        if (call.args.size() != fn.params.size())
            sim_error("call to '" + fn.qualified_name +
                      "' with wrong arity");
        for (size_t i = 0; i < fn.params.size(); ++i) {
            const ParamInfo& p = fn.params[i];
            const Expr& arg = *call.args[i];
            if (p.declarator == Declarator::Reference) {
                if (!is_builtin_type(p.base_type)) {
                    if (arg.kind != ExprKind::Ident)
                        sim_error("object argument must be a variable");
                    const Binding* ob = lookup(caller.env, arg.name);
                    if (!ob || ob->kind != Binding::Kind::Object)
                        sim_error("'" + arg.name + "' is not an object");
                    env = bind(env, p.name, *ob);
                } else {
                    env = bind(env, p.name, bind_ref_arg(p, arg, caller));
                }
            } else {
                if (!is_builtin_type(p.base_type))
                    sim_error("object parameters must be passed by reference");
                int cell = store.alloc(1, p.name);
                store.put(cell, 0, eval(arg, caller));
                Binding b;
                b.cell = cell;
                env = bind(env, p.name, b);
            }
        }
        int ret = store.alloc(1, fn.name + ":ret");
        Frame f{env, nullptr, ret, fn.owner};
        plain_block(fn.body->body, f);
        --depth_;
        return store.load(ret, 0);
    }

    // --- plain structural walker ----------------------------------------

    void declare_plain(const Stmt& s, Frame& f) {
        const VarDeclData& d = *s.decl;
        const TypeRef& t = d.type;
        if (!is_builtin_type(t.base) && !t.is_array() &&
            t.declarator == Declarator::ByValue) {
            auto it = index_.classes.find(t.base);
            if (it == index_.classes.end())
                sim_error("unknown type '" + t.base + "'");
            if (d.init) sim_error("object initializers are not supported");
            Binding b;
            b.kind = Binding::Kind::Object;
            b.object_class = t.base;
            b.fields = std::make_shared<std::map<std::string, int>>();
            for (const FieldDecl& fd : it->second->fields) {
                long long n = fd.type.is_array() ? fd.type.array_len : 1;
                (*b.fields)[fd.name] = store.alloc(n, d.name + "." + fd.name);
            }
            f.env = bind(f.env, d.name, b);
            return;
        }
        if (t.is_array()) {
            if (d.init) sim_error("array initializers are not supported");
            Binding b;
            b.kind = Binding::Kind::Array;
            b.cell = store.alloc(t.array_len, d.name);
            b.size = t.array_len;
            f.env = bind(f.env, d.name, b);
            return;
        }
        if (t.declarator == Declarator::Reference) {
            if (!d.init) sim_error("reference '" + d.name + "' needs an initializer");
            Lv lv = eval_lv(*d.init, f);
            Binding b;
            b.cell = lv.cell;
            b.off = lv.off;
            f.env = bind(f.env, d.name, b);
            return;
        }
        Binding b;
        b.cell = store.alloc(1, d.name);
        f.env = bind(f.env, d.name, b);
        if (d.init) store.put(b.cell, 0, eval(*d.init, f));
    }

    void primitive(const Stmt& s, Frame& f) {
        switch (s.kind) {
            case StmtKind::Decl: {
                const Binding* b = lookup(f.env, s.decl->name);
                if (!b) sim_error("unbound declaration '" + s.decl->name + "'");
                store.put(b->cell, b->off, eval(*s.decl->init, f));
                return;
            }
            case StmtKind::Assign: {
                Lv lv = eval_lv(*s.lhs, f);
                Value v = eval(*s.rhs, f);
                if (s.op != "=") {
                    std::string base(1, s.op[0]);
                    v = binop(base, store.load(lv.cell, lv.off), v);
                }
                store.put(lv.cell, lv.off, v);
                return;
            }
            case StmtKind::IncDec: {
                Lv lv = eval_lv(*s.lhs, f);
                Value v = store.load(lv.cell, lv.off);
                Value one = Value::of_int(1);
                store.put(lv.cell, lv.off,
                          binop(s.op == "++" ? "+" : "-", v, one));
                return;
            }
            case StmtKind::ExprStmt: eval(*s.lhs, f); return;
            default: sim_error("not a primitive statement");
        }
    }

    long long match_case(const Stmt& sw, const Value& v) const {
        long long def = -1;
        for (size_t i = 0; i < sw.cases.size(); ++i) {
            if (sw.cases[i].is_default) {
                def = static_cast<long long>(i);
                continue;
            }
            if (sw.cases[i].value == v.i &&
                (v.kind == Value::Kind::Int || v.kind == Value::Kind::Bool))
                return static_cast<long long>(i);
        }
        return def;
    }

    Flow plain_block(const std::vector<StmtPtr>& stmts, Frame& f) {
        EnvPtr saved = f.env;
        Flow fl = Flow::Normal;
        for (const StmtPtr& s : stmts) {
            fl = plain_stmt(*s, f);
            if (fl != Flow::Normal) break;
        }
        f.env = saved;
        return fl;
    }

    Flow plain_stmt(const Stmt& s, Frame& f) {
        switch (s.kind) {
            case StmtKind::Decl: declare_plain(s, f); return Flow::Normal;
            case StmtKind::Assign:
            case StmtKind::IncDec:
            case StmtKind::ExprStmt: primitive(s, f); return Flow::Normal;
            case StmtKind::Block: return plain_block(s.body, f);
            case StmtKind::If: {
                if (truth(eval(*s.cond, f))) return plain_stmt(*s.then_branch, f);
                if (s.else_branch) return plain_stmt(*s.else_branch, f);
                return Flow::Normal;
            }
            case StmtKind::While: {
                while (truth(eval(*s.cond, f))) {
                    Flow fl = plain_stmt(*s.loop_body, f);
                    if (fl == Flow::Returned) return fl;
                    if (fl == Flow::Broke) break;
                }
                return Flow::Normal;
            }
            case StmtKind::For: {
                EnvPtr saved = f.env;
                if (s.init_stmt) plain_stmt(*s.init_stmt, f);
                while (!s.cond || truth(eval(*s.cond, f))) {
                    Flow fl = plain_stmt(*s.loop_body, f);
                    if (fl == Flow::Returned) {
                        f.env = saved;
                        return fl;
                    }
                    if (fl == Flow::Broke) break;
                    if (s.step_stmt) plain_stmt(*s.step_stmt, f);
                }
                f.env = saved;
                return Flow::Normal;
            }
            case StmtKind::Switch: {
                Value v = eval(*s.cond, f);
                long long idx = match_case(s, v);
                if (idx < 0) return Flow::Normal;
                for (size_t i = static_cast<size_t>(idx); i < s.cases.size();
                     ++i) {
                    for (const StmtPtr& cs : s.cases[i].body) {
                        Flow fl = plain_stmt(*cs, f);
                        if (fl == Flow::Broke) return Flow::Normal;
                        if (fl != Flow::Normal) return fl;
                    }
                }
                return Flow::Normal;
            }
            case StmtKind::Return:
                if (s.ret_value && f.ret_cell >= 0)
                    store.put(f.ret_cell, 0, eval(*s.ret_value, f));
                return Flow::Returned;
            case StmtKind::Break: return Flow::Broke;
            case StmtKind::Continue: return Flow::Continued;
            case StmtKind::Empty: return Flow::Normal;
        }
        return Flow::Normal;
    }

    // --- micro-op replay (also drives extraction-time effects) -----------

    void run_op(const MicroOp& op) {
        Frame f{op.env, op.hoists, -1, op.self};
        switch (op.k) {
            case MicroOp::K::Run: primitive(*op.stmt, f); return;
            case MicroOp::K::Cond: {
                bool got = truth(eval(*op.expr, f));
                if (got != op.expected)
                    throw ControlDivergence{
                        "branch decision changed under this schedule"};
                return;
            }
            case MicroOp::K::Switch: {
                long long got = match_case(*op.stmt, eval(*op.expr, f));
                if (got != op.expected_case)
                    throw ControlDivergence{
                        "switch selection changed under this schedule"};
                return;
            }
            case MicroOp::K::ParamBind:
                store.put(op.dst_cell, 0, eval(*op.expr, f));
                return;
            case MicroOp::K::ReturnVal:
                if (op.expr && op.dst_cell >= 0)
                    store.put(op.dst_cell, 0, eval(*op.expr, f));
                return;
            case MicroOp::K::ResultCopy: {
                Lv dst{op.dst_cell, op.dst_off};
                if (op.expr) dst = eval_lv(*op.expr, f);
                Value v = store.load(op.src_cell, 0);
                if (op.op != "=") {
                    std::string base(1, op.op[0]);
                    v = binop(base, store.load(dst.cell, dst.off), v);
                }
                store.put(dst.cell, dst.off, v);
                return;
            }
            case MicroOp::K::HoistCall:
                f.ignore_hoist = op.expr->node_id;
                store.put(op.dst_cell, 0, eval(*op.expr, f));
                return;
            case MicroOp::K::Poison: {
                long long n = store.size_of(op.dst_cell);
                for (long long i = 0; i < n; ++i)
                    store.put(op.dst_cell, i, Value::of_int(kPoison));
                return;
            }
            case MicroOp::K::EntryRun: {
                Frame ef{op.env, nullptr, op.dst_cell, nullptr};
                plain_block(op.fn->body->body, ef);
                return;
            }
        }
    }

    // --- recording walker (extraction) ------------------------------------

    bool dropped(int stmt_id) const {
        return opts && opts->drop_sync_stmt_ids.count(stmt_id) > 0;
    }

    MicroOp base_op(MicroOp::K k, Frame& f) const {
        MicroOp op;
        op.k = k;
        op.env = f.env;
        op.hoists = f.hoists;
        op.self = f.self_class;
        return op;
    }

    void rec_run(MicroOp op) {
        gb->rec(op);
        run_op(op);
    }

    void counter_inc() {
        ++live;
        ++trace.increments;
        trace.max_live = std::max(trace.max_live, live);
    }

    void counter_dec() {
        --live;
        ++trace.decrements;
    }

    bool region_active() const {
        switch (opts->strategy.kind) {
            case ThrottleKind::Unlimited: return true;
            case ThrottleKind::MaxDepth: return sim_depth < opts->strategy.limit;
            case ThrottleKind::MaxCount: return live < opts->strategy.limit;
        }
        return true;
    }

    void barrier(RegionCtx& R, const char* label) {
        if (R.sibs.empty()) return;
        int b = gb->add_node(SimNodeKind::Barrier, R.owner, label);
        gb->add_edge(gb->cur, b, EdgeKind::Sync);
        for (const Sibling& sib : R.sibs)
            gb->add_edge(sib.completion, b, EdgeKind::Sync);
        gb->cur = b;
        gb->need_split = false;
    }

    void close_group(RegionCtx& R) {
        if (R.closed) return;
        R.closed = true;
        barrier(R, "taskgroup_end");
    }

    std::set<int> resolve_cells(const std::vector<std::string>& vars,
                                Frame& f, RegionCtx& R) {
        std::set<int> out;
        for (const std::string& var : vars) {
            auto it = R.temp_cells.find(var);
            if (it != R.temp_cells.end()) {
                out.insert(it->second);
                continue;
            }
            const Binding* b = lookup(f.env, var);
            if (!b) sim_error("depend variable '" + var + "' is unbound");
            if (b->kind == Binding::Kind::Object) {
                for (const auto& [fname, cell] : *b->fields) out.insert(cell);
            } else {
                out.insert(b->cell);
            }
        }
        return out;
    }

    // Span cost: value(args[hi]) - value(args[lo]); with lo == hi, the
    // argument's own value. Non-numeric arguments fall back to unit cost.
    double task_cost(const CallSiteInfo& site, Frame& f) {
        if (opts->cost.kind == CostModel::Kind::Unit) return 1.0;
        size_t lo = static_cast<size_t>(opts->cost.lo_arg);
        size_t hi = static_cast<size_t>(opts->cost.hi_arg);
        if (!site.call || lo >= site.call->args.size() ||
            hi >= site.call->args.size())
            return 1.0;
        Value vh = eval(*site.call->args[hi], f);
        if (vh.kind == Value::Kind::Ptr) return 1.0;
        if (lo == hi) return std::max(1.0, numeric(vh));
        Value vl = eval(*site.call->args[lo], f);
        if (vl.kind == Value::Kind::Ptr) return 1.0;
        return std::max(1.0, numeric(vh) - numeric(vl));
    }

    void link_siblings(RegionCtx& R, int first, const std::set<int>& reads,
                       const std::set<int>& writes) {
        auto hits = [](const std::set<int>& a, const std::set<int>& b) {
            for (int x : a)
                if (b.count(x)) return true;
            return false;
        };
        for (const Sibling& sib : R.sibs) {
            EdgeKind kind;
            if (hits(sib.writes, reads)) kind = EdgeKind::RAW;
            else if (hits(sib.writes, writes)) kind = EdgeKind::WAW;
            else if (hits(sib.reads, writes)) kind = EdgeKind::WAR;
            else continue;
            gb->add_edge(sib.completion, first, kind);
        }
    }

    // Creates (or merges) one dynamically submitted task. temp_cell is the
    // destination for hoisted call sites, -1 otherwise.
    void submit_task(RegionCtx& R, Frame& f, const TaskPlan& tp,
                     const CallSiteInfo& site, int temp_cell) {
        // Dependence matching is address based, exactly like the emitted
        // depend clauses: an alias pointer is its own storage, distinct from
        // its root array, so sibling calls on disjoint halves stay parallel.
        std::set<int> writes = resolve_cells(tp.depend.inout, f, R);
        std::set<int> reads = resolve_cells(tp.depend.in, f, R);
        for (int c : writes) reads.erase(c);

        const FunctionDecl* callee = site.callee;
        const FunctionPlan* cfp = callee ? plan->plan_for(callee) : nullptr;
        bool group = cfp && cfp->needs_taskgroup;
        bool active = R.active;
        std::string callee_name =
            callee ? callee->qualified_name : site.callee_name;
        std::string label =
            callee_name + "@s" + std::to_string(site.stmt->node_id);

        int tid = -1;
        int first = -1;
        int saved_cur = gb->cur;
        if (active) {
            tid = static_cast<int>(gb->g->tasks.size());
            first = gb->add_node(SimNodeKind::Task, tid, label,
                                 task_cost(site, f));
            SimNode& n = gb->g->nodes[static_cast<size_t>(first)];
            n.reads = reads;
            n.writes = writes;
            SimTaskInfo info;
            info.id = tid;
            info.label = label;
            info.callee = callee_name;
            info.site_stmt_id = site.stmt->node_id;
            info.depth = static_cast<int>(R.depth_local) + 1;
            info.parent = R.owner;
            info.cost = n.cost;
            info.first_node = first;
            info.reads = reads;
            info.writes = writes;
            gb->g->tasks.push_back(std::move(info));
            link_siblings(R, first, reads, writes);
            gb->add_edge(saved_cur, first, EdgeKind::Sync);
            if (opts->strategy.kind == ThrottleKind::MaxCount) counter_inc();
            gb->cur = first;
            gb->need_split = false;
        }

        long long saved_depth = sim_depth;
        sim_depth = R.depth_local + 1;

        int completion;
        if (!group) {
            if (temp_cell >= 0) {
                MicroOp op = base_op(MicroOp::K::HoistCall, f);
                op.expr = site.call;
                op.dst_cell = temp_cell;
                rec_run(op);
            } else {
                MicroOp op = base_op(MicroOp::K::Run, f);
                op.stmt = site.stmt;
                rec_run(op);
            }
            completion = gb->cur;
        } else {
            EnvPtr cenv = bind_params_recorded(*callee, *site.call, f);
            int owner = active ? tid : R.owner;
            int rcell = store.alloc(1, callee->name + ":ret");
            completion = invoke_region(*callee, *cfp, cenv, owner, rcell);
            MicroOp op = base_op(MicroOp::K::ResultCopy, f);
            op.src_cell = rcell;
            bool has_dst = true;
            if (temp_cell >= 0) {
                op.dst_cell = temp_cell;
            } else if (site.position == CallPosition::PureInit) {
                const Binding* b = lookup(f.env, site.stmt->decl->name);
                op.dst_cell = b->cell;
            } else if (site.position == CallPosition::PureAssign) {
                op.expr = site.stmt->lhs.get();  // resolved when the copy runs
                op.op = site.stmt->op;
            } else {
                has_dst = false;
            }
            if (has_dst) {
                gb->ensure_segment();
                rec_run(op);
                completion = gb->cur;
            }
        }

        sim_depth = saved_depth;
        if (active) {
            SimTaskInfo& info = gb->g->tasks[static_cast<size_t>(tid)];
            info.last_node = completion;
            if (group && opts->cost.kind == CostModel::Kind::ArgSpan) {
                // The first segment only binds arguments and spawns; charge
                // it the span left over after the work it delegated.
                double child_sum = 0.0;
                for (const SimTaskInfo& t : gb->g->tasks)
                    if (t.parent == tid) child_sum += t.cost;
                gb->g->nodes[static_cast<size_t>(first)].cost =
                    std::max(1.0, info.cost - child_sum);
            }
            if (opts->strategy.kind == ThrottleKind::MaxCount) counter_dec();
            R.sibs.push_back({tid, completion, reads, writes});
            gb->cur = saved_cur;
            gb->need_split = true;
        }
        // Inactive group callees may have moved the spine past internal
        // barriers; recording continues from wherever they ended.
    }

    void submit_cleanup(RegionCtx& R, Frame& f, const PromotionCandidate& pc) {
        const Binding* b = lookup(f.env, pc.var);
        if (!b || b->kind == Binding::Kind::Object)
            sim_error("promoted variable '" + pc.var + "' is unbound");
        std::set<int> writes;
        if (!opts->strip_cleanup_depends) writes.insert(b->cell);
        std::string label = "delete:" + pc.var + "@s" +
                            std::to_string(pc.scope_stmt_id);
        bool active = R.active;
        int saved_cur = gb->cur;
        int tid = -1;
        if (active) {
            tid = static_cast<int>(gb->g->tasks.size());
            int first = gb->add_node(SimNodeKind::Task, tid, label, 1.0);
            SimNode& n = gb->g->nodes[static_cast<size_t>(first)];
            n.writes = writes;
            SimTaskInfo info;
            info.id = tid;
            info.label = label;
            info.callee = "delete:" + pc.var;
            info.site_stmt_id = pc.scope_stmt_id;
            info.depth = static_cast<int>(R.depth_local) + 1;
            info.parent = R.owner;
            info.cost = 1.0;
            info.first_node = first;
            info.last_node = first;
            info.writes = writes;
            gb->g->tasks.push_back(std::move(info));
            link_siblings(R, first, {}, writes);
            gb->add_edge(saved_cur, first, EdgeKind::Sync);
            if (opts->strategy.kind == ThrottleKind::MaxCount) counter_inc();
            gb->cur = first;
            gb->need_split = false;
        }
        MicroOp op = base_op(MicroOp::K::Poison, f);
        op.dst_cell = b->cell;
        rec_run(op);
        if (active) {
            if (opts->strategy.kind == ThrottleKind::MaxCount) counter_dec();
            R.sibs.push_back({tid, gb->cur, {}, writes});
            gb->cur = saved_cur;
            gb->need_split = true;
        }
    }

    // Binds callee parameters for a task: by-value parameters become
    // ParamBind ops (the argument is read when the task runs), references
    // bind the caller's cell directly.
    EnvPtr bind_params_recorded(const FunctionDecl& fn, const Expr& call,
                                Frame& caller) {
        EnvPtr env = genv;
        if (call.lhs) {  // method receiver
            if (call.lhs->kind != ExprKind::Ident)
                sim_error("method receiver must be a variable");
            const Binding* recv = lookup(caller.env, call.lhs->name);
            if (!recv || recv->kind != Binding::Kind::Object)
                sim_error("'" + call.lhs->name + "' is not an object");
            env = bind_receiver(env, *recv);
        }
        if (call.args.size() != fn.params.size())
            sim_error("call to '" + fn.qualified_name + "' with wrong arity");
        for (size_t i = 0; i < fn.params.size(); ++i) {
            const ParamInfo& p = fn.params[i];
            const Expr& arg = *call.args[i];
            if (p.declarator == Declarator::Reference &&
                (lvalue_shaped(arg) || !is_builtin_type(p.base_type))) {
                if (!is_builtin_type(p.base_type)) {
                    if (arg.kind != ExprKind::Ident)
                        sim_error("object argument must be a variable");
                    const Binding* ob = lookup(caller.env, arg.name);
                    if (!ob || ob->kind != Binding::Kind::Object)
                        sim_error("'" + arg.name + "' is not an object");
                    env = bind(env, p.name, *ob);
                } else {
                    Lv lv = eval_lv(arg, caller);
                    Binding b;
                    b.cell = lv.cell;
                    b.off = lv.off;
                    env = bind(env, p.name, b);
                }
            } else {
                if (p.declarator == Declarator::Reference &&
                    !p.is_const_qualified)
                    sim_error("argument for reference parameter '" + p.name +
                              "' must be an lvalue");
                if (!is_builtin_type(p.base_type))
                    sim_error("object parameters must be passed by reference");
                int cell = store.alloc(1, p.name);
                MicroOp op = base_op(MicroOp::K::ParamBind, caller);
                op.expr = &arg;
                op.dst_cell = cell;
                rec_run(op);
                Binding b;
                b.cell = cell;
                env = bind(env, p.name, b);
            }
        }
        return env;
    }

    // Executes one planned function invocation, recording nodes and edges.
    // Returns the completion node.
    int invoke_region(const FunctionDecl& fn, const FunctionPlan& fp,
                      EnvPtr env, int owner, int ret_cell) {
        if (++depth_ > limit_) {
            --depth_;
            sim_error("recursion limit (" + std::to_string(limit_) +
                      ") exceeded interpreting '" + fn.qualified_name + "'");
        }
        RegionCtx R;
        R.fp = &fp;
        R.owner = owner;
        R.depth_local = sim_depth;
        R.active = region_active();
        Frame f{env, std::make_shared<HoistMap>(), ret_cell, fn.owner};
        EnvPtr saved = f.env;
        Flow fl = Flow::Normal;
        for (const StmtPtr& s : fn.body->body) {
            fl = rec_stmt(*s, R, f);
            if (fl != Flow::Normal) break;
        }
        if (fl == Flow::Normal) run_scope_cleanups(fn.body->node_id, R, f);
        f.env = saved;
        close_group(R);
        --depth_;
        return gb->cur;
    }

    void declare_for_task(const Stmt& s, Frame& f) {
        const VarDeclData& d = *s.decl;
        Binding b;
        b.cell = store.alloc(1, d.name);
        f.env = bind(f.env, d.name, b);
    }

    void rec_declare(const Stmt& s, RegionCtx& R, Frame& f) {
        const VarDeclData& d = *s.decl;
        const TypeRef& t = d.type;
        bool scalar_init = d.init && is_builtin_type(t.base) && !t.is_array() &&
                           t.declarator != Declarator::Reference;
        if (!scalar_init) {
            declare_plain(s, f);  // bindings only; references pin their cell
            return;
        }
        Binding b;
        b.cell = store.alloc(1, d.name);
        f.env = bind(f.env, d.name, b);
        MicroOp op = base_op(MicroOp::K::Run, f);
        op.stmt = &s;
        rec_run(op);
    }

    void run_scope_cleanups(int block_id, RegionCtx& R, Frame& f) {
        for (const PromotionCandidate& pc : R.fp->promotions)
            if (pc.scope_stmt_id == block_id && !pc.is_alias)
                submit_cleanup(R, f, pc);
    }

    Flow rec_stmt(const Stmt& s, RegionCtx& R, Frame& f) {
        const StmtPlanEntry* entry = R.fp->entry_for(s.node_id);
        if (entry) {
            for (const PreStmtEvent& ev : entry->pre) {
                if (ev.kind == PreStmtEvent::Kind::Sync) {
                    if (!dropped(s.node_id)) barrier(R, "taskwait");
                    continue;
                }
                const TaskPlan& tp = R.fp->tasks[ev.task_index];
                const CallSiteInfo& site = R.fp->sites[tp.site_index];
                int tc = store.alloc(1, tp.hoist_temp);
                R.temp_cells[tp.hoist_temp] = tc;
                f.hoists->cells[site.call->node_id] = tc;
                submit_task(R, f, tp, site, tc);
            }
            if (entry->task_index >= 0) {
                const TaskPlan& tp = R.fp->tasks[entry->task_index];
                const CallSiteInfo& site = R.fp->sites[tp.site_index];
                if (site.position == CallPosition::PureInit)
                    declare_for_task(s, f);
                submit_task(R, f, tp, site, -1);
                return Flow::Normal;
            }
        }
        switch (s.kind) {
            case StmtKind::Decl: rec_declare(s, R, f); return Flow::Normal;
            case StmtKind::Assign:
            case StmtKind::IncDec:
            case StmtKind::ExprStmt: {
                MicroOp op = base_op(MicroOp::K::Run, f);
                op.stmt = &s;
                rec_run(op);
                return Flow::Normal;
            }
            case StmtKind::Block: {
                EnvPtr saved = f.env;
                Flow fl = Flow::Normal;
                for (const StmtPtr& child : s.body) {
                    fl = rec_stmt(*child, R, f);
                    if (fl != Flow::Normal) break;
                }
                if (fl == Flow::Normal) run_scope_cleanups(s.node_id, R, f);
                f.env = saved;
                return fl;
            }
            case StmtKind::If: {
                bool taken = truth(eval(*s.cond, f));
                MicroOp op = base_op(MicroOp::K::Cond, f);
                op.expr = s.cond.get();
                op.expected = taken;
                gb->rec(op);
                if (taken) return rec_stmt(*s.then_branch, R, f);
                if (s.else_branch) return rec_stmt(*s.else_branch, R, f);
                return Flow::Normal;
            }
            case StmtKind::While: {
                while (true) {
                    bool taken = truth(eval(*s.cond, f));
                    MicroOp op = base_op(MicroOp::K::Cond, f);
                    op.expr = s.cond.get();
                    op.expected = taken;
                    gb->rec(op);
                    if (!taken) break;
                    Flow fl = rec_stmt(*s.loop_body, R, f);
                    if (fl == Flow::Returned) return fl;
                    if (entry && entry->sync_at_body_end && fl != Flow::Broke &&
                        !dropped(s.node_id))
                        barrier(R, "taskwait");
                    if (fl == Flow::Broke) break;
                }
                return Flow::Normal;
            }
            case StmtKind::For: {
                EnvPtr saved = f.env;
                if (s.init_stmt) rec_stmt(*s.init_stmt, R, f);
                while (true) {
                    bool taken = !s.cond || truth(eval(*s.cond, f));
                    if (s.cond) {
                        MicroOp op = base_op(MicroOp::K::Cond, f);
                        op.expr = s.cond.get();
                        op.expected = taken;
                        gb->rec(op);
                    }
                    if (!taken) break;
                    Flow fl = rec_stmt(*s.loop_body, R, f);
                    if (fl == Flow::Returned) {
                        f.env = saved;
                        return fl;
                    }
                    if (entry && entry->sync_at_body_end && fl != Flow::Broke &&
                        !dropped(s.node_id))
                        barrier(R, "taskwait");
                    if (fl == Flow::Broke) break;
                    if (s.step_stmt) rec_stmt(*s.step_stmt, R, f);
                }
                f.env = saved;
                return Flow::Normal;
            }
            case StmtKind::Switch: {
                Value v = eval(*s.cond, f);
                long long idx = match_case(s, v);
                MicroOp op = base_op(MicroOp::K::Switch, f);
                op.stmt = &s;
                op.expr = s.cond.get();
                op.expected_case = idx;
                gb->rec(op);
                if (idx < 0) return Flow::Normal;
                for (size_t i = static_cast<size_t>(idx); i < s.cases.size();
                     ++i) {
                    for (const StmtPtr& cs : s.cases[i].body) {
                        Flow fl = rec_stmt(*cs, R, f);
                        if (fl == Flow::Broke) return Flow::Normal;
                        if (fl != Flow::Normal) return fl;
                    }
                }
                return Flow::Normal;
            }
            case StmtKind::Return: {
                const ReturnPlan& rp = R.fp->returns;
                if (rp.mode == ReturnMode::Full) {
                    if (!dropped(s.node_id)) barrier(R, "taskwait");
                } else if (rp.mode == ReturnMode::TrailingKept &&
                           s.node_id == rp.trailing_stmt_id) {
                    close_group(R);
                }
                MicroOp op = base_op(MicroOp::K::ReturnVal, f);
                op.expr = s.ret_value.get();
                op.dst_cell = f.ret_cell;
                rec_run(op);
                return Flow::Returned;
            }
            case StmtKind::Break: return Flow::Broke;
            case StmtKind::Continue: return Flow::Continued;
            case StmtKind::Empty: return Flow::Normal;
        }
        return Flow::Normal;
    }

  private:
    const UnitIndex& index_;
    int limit_;
    int depth_ = 0;
};

// ---------------------------------------------------------------------------
// Graph algorithms
// ---------------------------------------------------------------------------

std::vector<std::vector<int>> successors(const TaskGraph& g) {
    std::vector<std::vector<int>> adj(g.nodes.size());
    for (const SimEdge& e : g.edges)
        adj[static_cast<size_t>(e.from)].push_back(e.to);
    return adj;
}

std::vector<int> indegrees(const TaskGraph& g) {
    std::vector<int> indeg(g.nodes.size(), 0);
    for (const SimEdge& e : g.edges) ++indeg[static_cast<size_t>(e.to)];
    return indeg;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public operations
// ---------------------------------------------------------------------------

TaskGraph extract_task_graph(const UnitPlan& plan, const std::string& entry,
                             const MemoryState& input, const SimOptions& opts) {
    if (!plan.index) sim_error("analysis plan has no index");
    TaskGraph g;
    GraphBuild gb;
    gb.g = &g;

    Interp in(*plan.index, opts.recursion_limit);
    in.plan = &plan;
    in.opts = &opts;
    in.gb = &gb;

    Interp::Universe u = in.setup_universe(entry, input);
    gb.cur = gb.add_node(SimNodeKind::Host, -1, "entry");

    const FunctionPlan* fp = plan.plan_for(u.entry);
    if (fp && fp->needs_taskgroup) {
        in.invoke_region(*u.entry, *fp, u.entry_env, -1, u.ret_cell);
    } else {
        MicroOp op;
        op.k = MicroOp::K::EntryRun;
        op.fn = u.entry;
        op.env = u.entry_env;
        op.dst_cell = u.ret_cell;
        gb.rec(op);
        in.run_op(op);
    }

    in.trace.final_live = in.live;
    g.counter = in.trace;

    auto ctx = std::make_shared<ReplayContext>();
    ctx->index = plan.index;
    ctx->plan = &plan;
    ctx->recursion_limit = opts.recursion_limit;
    for (const auto& cd : in.store.cells) {
        ctx->cell_sizes.push_back(static_cast<long long>(cd.v.size()));
        ctx->cell_names.push_back(cd.name);
    }
    ctx->fixed = std::move(u.fixed);
    ctx->seeds = std::move(u.seeds);
    ctx->observables = std::move(u.observables);
    ctx->extraction_state = in.observe(ctx->observables);
    g.replay = std::move(ctx);
    return g;
}

MemoryState sequential_execute(const UnitIndex& index, const std::string& entry,
                               const MemoryState& input, int recursion_limit) {
    Interp in(index, recursion_limit);
    Interp::Universe u = in.setup_universe(entry, input);
    Frame f{u.entry_env, nullptr, u.ret_cell, u.entry->owner};
    in.plain_block(u.entry->body->body, f);
    return in.observe(u.observables);
}

MemoryState extraction_state(const TaskGraph& graph) {
    if (!graph.replay) sim_error("graph has no replay context");
    return graph.replay->extraction_state;
}

ScheduleResult schedule_execute(const TaskGraph& graph,
                                const std::vector<int>& order,
                                const MemoryState& input) {
    const auto& ctx = graph.replay;
    if (!ctx) sim_error("graph has no replay context");

    size_t n = graph.nodes.size();
    if (order.size() != n)
        sim_error("invalid schedule: expected " + std::to_string(n) +
                  " nodes, got " + std::to_string(order.size()));
    std::vector<int> pos(n, -1);
    for (size_t i = 0; i < order.size(); ++i) {
        int id = order[i];
        if (id < 0 || id >= static_cast<int>(n) || pos[static_cast<size_t>(id)] >= 0)
            sim_error("invalid schedule: not a permutation of node ids");
        pos[static_cast<size_t>(id)] = static_cast<int>(i);
    }
    for (const SimEdge& e : graph.edges)
        if (pos[static_cast<size_t>(e.from)] > pos[static_cast<size_t>(e.to)])
            sim_error("invalid schedule: node " + std::to_string(e.to) +
                      " runs before its dependency " + std::to_string(e.from));

    Interp in(*ctx->index, ctx->recursion_limit);
    for (size_t c = 0; c < ctx->cell_sizes.size(); ++c)
        in.store.alloc(ctx->cell_sizes[c], ctx->cell_names[c]);
    for (const auto& [cell, vals] : ctx->fixed)
        for (size_t i = 0; i < vals.size(); ++i)
            in.store.put(cell, static_cast<long long>(i), vals[i]);
    in.apply_input(ctx->seeds, input);

    ScheduleResult r;
    try {
        for (int id : order)
            for (const MicroOp& op : graph.nodes[static_cast<size_t>(id)].ops->ops)
                in.run_op(op);
    } catch (const ControlDivergence& cd) {
        r.control_diverged = true;
        r.note = cd.note;
    } catch (const ApacError& err) {
        r.control_diverged = true;
        r.note = std::string("runtime fault: ") + err.what();
    }
    r.state = in.observe(ctx->observables);
    return r;
}

ScheduleSet enumerate_schedules(const TaskGraph& graph, size_t limit,
                                unsigned seed) {
    size_t n = graph.nodes.size();
    auto adj = successors(graph);
    std::vector<int> indeg0 = indegrees(graph);

    ScheduleSet out;
    if (n == 0) {
        out.exhaustive = true;
        return out;
    }
    if (limit == 0) limit = 1;

    // Exhaustive backtracking, aborted once the count passes the limit.
    {
        std::vector<int> indeg = indeg0;
        std::vector<int> ready;
        for (size_t i = 0; i < n; ++i)
            if (indeg[i] == 0) ready.push_back(static_cast<int>(i));
        std::vector<int> cur;
        bool overflow = false;
        std::function<void()> walk = [&]() {
            if (overflow) return;
            if (cur.size() == n) {
                if (out.orders.size() >= limit) {
                    overflow = true;
                    return;
                }
                out.orders.push_back(cur);
                return;
            }
            for (size_t k = 0; k < ready.size() && !overflow; ++k) {
                int v = ready[k];
                size_t mark = ready.size() - 1;
                ready.erase(ready.begin() + static_cast<long>(k));
                cur.push_back(v);
                for (int w : adj[static_cast<size_t>(v)])
                    if (--indeg[static_cast<size_t>(w)] == 0) ready.push_back(w);
                walk();
                for (int w : adj[static_cast<size_t>(v)])
                    ++indeg[static_cast<size_t>(w)];
                ready.resize(mark);
                cur.pop_back();
                ready.insert(ready.begin() + static_cast<long>(k), v);
            }
        };
        walk();
        if (!overflow) {
            out.exhaustive = true;
            return out;
        }
    }

    // Too many orders: sample by uniform ready-set choice.
    out.orders.clear();
    out.exhaustive = false;
    std::mt19937 rng(seed);
    std::set<std::vector<int>> seen;
    size_t attempts = 0;
    size_t max_attempts = 20 * limit + 100;
    while (out.orders.size() < limit && attempts < max_attempts) {
        ++attempts;
        std::vector<int> indeg = indeg0;
        std::vector<int> ready;
        for (size_t i = 0; i < n; ++i)
            if (indeg[i] == 0) ready.push_back(static_cast<int>(i));
        std::vector<int> order;
        order.reserve(n);
        while (!ready.empty()) {
            size_t k = std::uniform_int_distribution<size_t>(
                0, ready.size() - 1)(rng);
            int v = ready[k];
            ready.erase(ready.begin() + static_cast<long>(k));
            order.push_back(v);
            for (int w : adj[static_cast<size_t>(v)])
                if (--indeg[static_cast<size_t>(w)] == 0) ready.push_back(w);
        }
        if (order.size() != n) sim_error("task graph has a cycle");
        if (seen.insert(order).second) out.orders.push_back(std::move(order));
    }
    return out;
}

MakespanResult simulate_makespan(const TaskGraph& graph, int workers) {
    if (workers < 1) sim_error("worker count must be at least 1");
    size_t n = graph.nodes.size();
    MakespanResult r;
    if (n == 0) return r;

    auto adj = successors(graph);
    std::vector<int> indeg = indegrees(graph);

    for (const SimNode& node : graph.nodes) r.total_cost += node.cost;

    // Critical path over a Kahn order.
    {
        std::vector<double> cp(n, 0.0);
        std::vector<int> d = indeg;
        std::deque<int> q;
        for (size_t i = 0; i < n; ++i)
            if (d[i] == 0) {
                q.push_back(static_cast<int>(i));
                cp[i] = graph.nodes[i].cost;
            }
        size_t seen = 0;
        while (!q.empty()) {
            int v = q.front();
            q.pop_front();
            ++seen;
            for (int w : adj[static_cast<size_t>(v)]) {
                size_t wi = static_cast<size_t>(w);
                cp[wi] = std::max(cp[wi], cp[static_cast<size_t>(v)] +
                                              graph.nodes[wi].cost);
                if (--d[wi] == 0) q.push_back(w);
            }
        }
        if (seen != n) sim_error("task graph has a cycle");
        for (double v : cp) r.critical_path = std::max(r.critical_path, v);
    }

    // Greedy list scheduling, FIFO ready queue, ties broken by node id.
    std::deque<int> ready;
    for (size_t i = 0; i < n; ++i)
        if (indeg[i] == 0) ready.push_back(static_cast<int>(i));
    using Ev = std::pair<double, int>;
    std::priority_queue<Ev, std::vector<Ev>, std::greater<Ev>> running;
    int free_workers = workers;
    double now = 0.0;
    size_t done = 0;
    while (done < n) {
        while (free_workers > 0 && !ready.empty()) {
            int id = ready.front();
            ready.pop_front();
            running.push({now + graph.nodes[static_cast<size_t>(id)].cost, id});
            --free_workers;
        }
        if (running.empty()) sim_error("task graph has a cycle");
        auto [t, id] = running.top();
        running.pop();
        now = t;
        ++done;
        ++free_workers;
        for (int w : adj[static_cast<size_t>(id)])
            if (--indeg[static_cast<size_t>(w)] == 0) ready.push_back(w);
    }
    r.makespan = now;
    r.speedup = r.makespan > 0.0 ? r.total_cost / r.makespan : 1.0;
    return r;
}

std::string graph_dot(const TaskGraph& graph) {
    // Visible entities: tasks, plus barriers on the entry spine. Host
    // segments contract away; paths through them surface as Sync edges.
    size_t n = graph.nodes.size();
    std::vector<std::string> dot_name(n);
    for (size_t i = 0; i < n; ++i) {
        const SimNode& node = graph.nodes[i];
        if (node.task_id >= 0)
            dot_name[i] = "t" + std::to_string(node.task_id);
        else if (node.kind == SimNodeKind::Barrier)
            dot_name[i] = "b" + std::to_string(node.id);
    }

    auto is_ancestor_task = [&](int task, int maybe_ancestor) {
        while (task >= 0) {
            task = graph.tasks[static_cast<size_t>(task)].parent;
            if (task == maybe_ancestor) return true;
        }
        return false;
    };

    auto adj_edges = std::vector<std::vector<const SimEdge*>>(n);
    for (const SimEdge& e : graph.edges)
        adj_edges[static_cast<size_t>(e.from)].push_back(&e);

    auto kind_name = [](EdgeKind k) {
        switch (k) {
            case EdgeKind::RAW: return "RAW";
            case EdgeKind::WAR: return "WAR";
            case EdgeKind::WAW: return "WAW";
            case EdgeKind::Sync: return "Sync";
        }
        return "Sync";
    };
    auto kind_rank = [](EdgeKind k) {
        switch (k) {
            case EdgeKind::RAW: return 0;
            case EdgeKind::WAW: return 1;
            case EdgeKind::WAR: return 2;
            case EdgeKind::Sync: return 3;
        }
        return 3;
    };

    std::map<std::pair<std::string, std::string>, EdgeKind> picked;
    for (size_t i = 0; i < n; ++i) {
        if (dot_name[i].empty()) continue;
        // Walk forward through invisible nodes.
        std::set<int> visited;
        std::vector<std::tuple<int, bool, EdgeKind>> work;
        for (const SimEdge* e : adj_edges[i])
            work.push_back({e->to, true, e->kind});
        while (!work.empty()) {
            auto [v, direct, kind] = work.back();
            work.pop_back();
            size_t vi = static_cast<size_t>(v);
            if (dot_name[vi].empty()) {
                if (!visited.insert(v).second) continue;
                for (const SimEdge* e : adj_edges[vi])
                    work.push_back({e->to, false, EdgeKind::Sync});
                continue;
            }
            if (dot_name[vi] == dot_name[i]) continue;
            int src_task = graph.nodes[i].task_id;
            int tgt_task = graph.nodes[vi].task_id;
            if (src_task >= 0 && tgt_task >= 0 &&
                is_ancestor_task(src_task, tgt_task))
                continue;  // completion feeding an enclosing task
            EdgeKind k = direct ? kind : EdgeKind::Sync;
            auto key = std::make_pair(dot_name[i], dot_name[vi]);
            auto it = picked.find(key);
            if (it == picked.end() || kind_rank(k) < kind_rank(it->second))
                picked[key] = k;
        }
    }

    std::ostringstream os;
    os << "digraph apac_tasks {\n";
    os << "  rankdir=LR;\n";
    for (const SimTaskInfo& t : graph.tasks)
        os << "  t" << t.id << " [label=\"" << t.label
           << " depth=" << t.depth << "\"];\n";
    for (size_t i = 0; i < n; ++i)
        if (graph.nodes[i].task_id < 0 &&
            graph.nodes[i].kind == SimNodeKind::Barrier)
            os << "  b" << graph.nodes[i].id << " [label=\""
               << graph.nodes[i].label << "\" shape=box];\n";
    for (const auto& [key, kind] : picked)
        os << "  " << key.first << " -> " << key.second << " [label=\""
           << kind_name(kind) << "\"];\n";
    os << "}\n";
    return os.str();
}

CheckOutcome check_schedules(const TaskGraph& graph,
                             const MemoryState& sequential_state,
                             const MemoryState& input, const ScheduleSpec& spec,
                             unsigned seed) {
    ScheduleSet ss;
    switch (spec.kind) {
        case ScheduleSpec::Kind::All: {
            constexpr size_t kAllCap = 250000;
            ss = enumerate_schedules(graph, kAllCap, seed);
            if (!ss.exhaustive)
                sim_error("schedule space exceeds " + std::to_string(kAllCap) +
                          " orders; use random:<k>");
            break;
        }
        case ScheduleSpec::Kind::Auto: {
            ss = enumerate_schedules(graph, 5040, seed);
            if (!ss.exhaustive) ss = enumerate_schedules(graph, 1000, seed);
            break;
        }
        case ScheduleSpec::Kind::Random:
            ss = enumerate_schedules(graph, spec.samples, seed);
            break;
    }

    CheckOutcome out;
    out.total = ss.orders.size();
    out.exhaustive = ss.exhaustive;
    for (size_t i = 0; i < ss.orders.size(); ++i) {
        ScheduleResult r = schedule_execute(graph, ss.orders[i], input);
        bool ok = !r.control_diverged && r.state == sequential_state;
        std::string line = "schedule " + std::to_string(i) + ": ";
        if (ok) {
            line += "PASS";
            ++out.passed;
        } else {
            line += "FAIL";
            if (r.control_diverged) line += " (" + r.note + ")";
            else line += " (final state differs)";
            out.failed.push_back(i);
        }
        out.lines.push_back(std::move(line));
    }
    return out;
}

}  // namespace apac
