#include "doctest.h"

#include <algorithm>
#include <memory>
#include <set>
#include <vector>

#include "apac/access_analysis.hpp"
#include "apac/parser.hpp"
#include "apac/taskgraph_sim.hpp"

using namespace apac;

namespace {

struct Sim {
    std::unique_ptr<TranslationUnit> owned;
    std::unique_ptr<UnitIndex> index;
    std::unique_ptr<UnitPlan> plan;
};

Sim prep(const std::string& src, AnalysisOptions aopts = {}) {
    Sim s;
    s.owned = parse_translation_unit(src, "test.cpp");
    REQUIRE(s.owned != nullptr);
    s.index = std::make_unique<UnitIndex>(build_index(*s.owned));
    REQUIRE_FALSE(s.index->diagnostics.has_errors());
    s.plan = std::make_unique<UnitPlan>(analyze_unit(*s.index, aopts));
    return s;
}

SimOptions unlimited() {
    SimOptions o;
    o.strategy = ThrottleStrategy::parse("none");
    return o;
}

// The depend edge surfaced between two tasks, if any.
const SimEdge* edge_between(const TaskGraph& g, int from_task, int to_task) {
    int from = g.tasks[static_cast<size_t>(from_task)].last_node;
    int to = g.tasks[static_cast<size_t>(to_task)].first_node;
    for (const SimEdge& e : g.edges)
        if (e.from == from && e.to == to && e.kind != EdgeKind::Sync) return &e;
    return nullptr;
}

// Runs every schedule (or a seeded sample) and checks the final state
// against the plain sequential run. Returns the outcome for extra checks.
CheckOutcome verify_stf(const Sim& s, const std::string& entry,
                        const MemoryState& input,
                        const SimOptions& o) {
    TaskGraph g = extract_task_graph(*s.plan, entry, input, o);
    MemoryState seq = sequential_execute(*s.index, entry, input);
    INFO("sequential:\n" << seq.to_string());
    INFO("extraction:\n" << extraction_state(g).to_string());
    CHECK(extraction_state(g) == seq);
    for (const SimTaskInfo& t : g.tasks) {
        std::set<int> both;
        for (int c : t.reads)
            if (t.writes.count(c)) both.insert(c);
        CHECK(both.empty());
    }
    for (const SimEdge& e : g.edges) CHECK(e.from < e.to);
    ScheduleSpec spec;  // auto
    return check_schedules(g, seq, input, spec);
}

}  // namespace

TEST_CASE("values compare by kind and payload") {
    CHECK(Value::of_int(3) == Value::of_int(3));
    CHECK_FALSE(Value::of_int(3) == Value::of_int(4));
    CHECK_FALSE(Value::of_int(1) == Value::of_bool(true));
    CHECK(Value::of_ptr(2, 5) == Value::of_ptr(2, 5));
    CHECK_FALSE(Value::of_ptr(2, 5) == Value::of_ptr(2, 6));
    CHECK(Value::of_float(0.5).to_string() == "0.5");

    MemoryState a;
    a.set_array("v", {1, 2});
    MemoryState b;
    b.set_array("v", {1, 2});
    CHECK(a == b);
    b.set_scalar("x", 0);
    CHECK_FALSE(a == b);
}

TEST_CASE("cost model and schedule spec parse round trips") {
    CHECK(CostModel::parse("unit").kind == CostModel::Kind::Unit);
    CostModel m = CostModel::parse("argspan:1:2");
    CHECK(m.kind == CostModel::Kind::ArgSpan);
    CHECK(m.lo_arg == 1);
    CHECK(m.hi_arg == 2);
    CHECK(m.format() == "argspan:1:2");
    CHECK_THROWS_AS(CostModel::parse("argspan:x"), ApacError);
    CHECK_THROWS_AS(CostModel::parse("weight"), ApacError);

    CHECK(ScheduleSpec::parse("all").kind == ScheduleSpec::Kind::All);
    CHECK(ScheduleSpec::parse("auto").kind == ScheduleSpec::Kind::Auto);
    ScheduleSpec r = ScheduleSpec::parse("random:25");
    CHECK(r.kind == ScheduleSpec::Kind::Random);
    CHECK(r.samples == 25);
    CHECK(r.format() == "random:25");
    CHECK_THROWS_AS(ScheduleSpec::parse("random:0"), ApacError);
    CHECK_THROWS_AS(ScheduleSpec::parse("some"), ApacError);
}

TEST_CASE("sequential interpreter covers the statement subset") {
    const char* src = R"(
int gcount = 2;

int classify(int v) {
    switch (v) {
        case 0:
            return 10;
        case 1:
        case 2:
            return 20;
        default:
            break;
    }
    return 30;
}

int fact(int n) {
    if (n <= 1) {
        return 1;
    }
    return n * fact(n - 1);
}

void fill(int* a, int n) {
    for (int i = 0; i < n; i = i + 1) {
        if (i % 2 == 0) {
            continue;
        }
        a[i] = a[i] + gcount;
    }
    int k = 0;
    while (true) {
        k = k + 1;
        if (k >= 3) {
            break;
        }
    }
    a[0] = k;
}

int run(int* a, int n, int x) {
    fill(a, n);
    int* p = a + 1;
    *p = *p + std::min(x, 100);
    int& first = a[0];
    first = first + std::abs(0 - 2);
    std::swap(a[2], a[3]);
    return classify(x) + fact(4) + gcount;
}
)";
    Sim s = prep(src);
    MemoryState in;
    in.set_array("a", {0, 0, 7, 9});
    in.set_scalar("n", 4);
    in.set_scalar("x", 1);
    MemoryState out = sequential_execute(*s.index, "run", in);

    // fill adds gcount at odd slots and sets a[0]=3: a = [3,2,7,11];
    // *p: a[1]=2+1=3; first: a[0]=3+abs(0-2)=5; swap a[2],a[3] ->
    // [5,3,11,7]; return classify(1)+fact(4)+gcount = 20 + 24 + 2 = 46.
    MemoryState expect;
    expect.set_array("a", {5, 3, 11, 7});
    expect.set_scalar("n", 4);
    expect.set_scalar("x", 1);
    expect.set_scalar("gcount", 2);
    expect.set_scalar("<return>", 46);
    INFO(out.to_string());
    CHECK(out == expect);
}

TEST_CASE("interpreter reports subset faults") {
    const char* src = R"(
int peek(const int* a, int i) { return a[i]; }
int run(int* a, int d) { return peek(a, 5) / d; }
void loop(int* a) { loop(a); }
)";
    Sim s = prep(src);
    MemoryState in;
    in.set_array("a", {1, 2});
    in.set_scalar("d", 0);
    CHECK_THROWS_AS(sequential_execute(*s.index, "run", in), ApacError);

    MemoryState ok;
    ok.set_array("a", {1, 2, 3, 4, 5, 6});
    ok.set_scalar("d", 0);
    CHECK_THROWS_AS(sequential_execute(*s.index, "run", ok), ApacError);

    MemoryState li;
    li.set_array("a", {1});
    CHECK_THROWS_AS(sequential_execute(*s.index, "loop", li, 50), ApacError);

    MemoryState missing;
    CHECK_THROWS_AS(sequential_execute(*s.index, "run", missing), ApacError);
    MemoryState wrong;
    wrong.set_array("a", {1, 2});
    wrong.set_scalar("d", 1);
    wrong.set_scalar("nosuch", 0);
    CHECK_THROWS_AS(sequential_execute(*s.index, "run", wrong), ApacError);
    CHECK_THROWS_AS(sequential_execute(*s.index, "nothere", in), ApacError);
}

TEST_CASE("nested call sites become a task chain") {
    const char* src = R"(
void leaf(int* a) { a[0] = a[0] + 1; }
void mid(int* a) { leaf(a); }
void top(int* a) { mid(a); }
)";
    Sim s = prep(src);
    MemoryState in;
    in.set_array("a", {5});

    TaskGraph g = extract_task_graph(*s.plan, "top", in, unlimited());
    REQUIRE(g.tasks.size() == 2);
    CHECK(g.tasks[0].callee == "mid");
    CHECK(g.tasks[0].depth == 1);
    CHECK(g.tasks[0].parent == -1);
    CHECK(g.tasks[1].callee == "leaf");
    CHECK(g.tasks[1].depth == 2);
    CHECK(g.tasks[1].parent == 0);

    std::string dot = graph_dot(g);
    CHECK(dot.find("t0 -> t1") != std::string::npos);
    CHECK(graph_dot(extract_task_graph(*s.plan, "top", in, unlimited())) ==
          dot);

    ScheduleSet ss = enumerate_schedules(g, 100);
    CHECK(ss.exhaustive);
    CHECK(ss.orders.size() == 1);

    CheckOutcome out = verify_stf(s, "top", in, unlimited());
    CHECK(out.total == out.passed);
    MemoryState seq = sequential_execute(*s.index, "top", in);
    CHECK(seq.cells.at("a")[0] == Value::of_int(6));
}

TEST_CASE("read-only sharing keeps tasks independent") {
    const char* src = R"(
void addto(const int* src, int* dst) { dst[0] = dst[0] + src[0]; }
void run(int* a, int* x, int* y) {
    addto(a, x);
    addto(a, y);
}
)";
    Sim s = prep(src);
    MemoryState in;
    in.set_array("a", {4});
    in.set_array("x", {1});
    in.set_array("y", {2});

    TaskGraph g = extract_task_graph(*s.plan, "run", in, unlimited());
    REQUIRE(g.tasks.size() == 2);
    CHECK(edge_between(g, 0, 1) == nullptr);

    ScheduleSet ss = enumerate_schedules(g, 100);
    CHECK(ss.exhaustive);
    CHECK(ss.orders.size() == 2);

    CheckOutcome out = verify_stf(s, "run", in, unlimited());
    CHECK(out.total == 2);
    CHECK(out.passed == 2);

    MakespanResult one = simulate_makespan(g, 1);
    CHECK(one.makespan == doctest::Approx(one.total_cost));
    CHECK(one.speedup == doctest::Approx(1.0));
    MakespanResult two = simulate_makespan(g, 2);
    CHECK(two.speedup == doctest::Approx(2.0));
    CHECK(two.critical_path <= two.makespan);
    CHECK(two.makespan <= two.total_cost);
}

TEST_CASE("write-write conflicts serialize into one schedule") {
    const char* src = R"(
void bump(int* a) { a[0] = a[0] * 2; }
void run(int* a) {
    bump(a);
    bump(a);
    bump(a);
}
)";
    Sim s = prep(src);
    MemoryState in;
    in.set_array("a", {1});

    TaskGraph g = extract_task_graph(*s.plan, "run", in, unlimited());
    REQUIRE(g.tasks.size() == 3);
    const SimEdge* e01 = edge_between(g, 0, 1);
    const SimEdge* e12 = edge_between(g, 1, 2);
    REQUIRE(e01 != nullptr);
    REQUIRE(e12 != nullptr);
    CHECK(e01->kind == EdgeKind::WAW);
    CHECK(e12->kind == EdgeKind::WAW);

    ScheduleSet ss = enumerate_schedules(g, 100);
    CHECK(ss.exhaustive);
    CHECK(ss.orders.size() == 1);

    CheckOutcome out = verify_stf(s, "run", in, unlimited());
    CHECK(out.passed == out.total);
    MemoryState seq = sequential_execute(*s.index, "run", in);
    CHECK(seq.cells.at("a")[0] == Value::of_int(8));
}

TEST_CASE("independent fan-out admits all interleavings") {
    const char* src = R"(
void bump(int* a) { a[0] = a[0] + 1; }
void run(int* x, int* y, int* z) {
    bump(x);
    bump(y);
    bump(z);
}
)";
    Sim s = prep(src);
    MemoryState in;
    in.set_array("x", {0});
    in.set_array("y", {0});
    in.set_array("z", {0});

    TaskGraph g = extract_task_graph(*s.plan, "run", in, unlimited());
    ScheduleSet ss = enumerate_schedules(g, 100);
    CHECK(ss.exhaustive);
    CHECK(ss.orders.size() == 6);

    CheckOutcome out = verify_stf(s, "run", in, unlimited());
    CHECK(out.total == 6);
    CHECK(out.passed == 6);
}

TEST_CASE("diamond dependencies admit exactly two orders") {
    const char* src = R"(
void produce(int* a) { a[0] = 5; }
void fan(const int* a, int* o) { o[0] = a[0] + 1; }
void join(const int* x, const int* y, int* a) { a[0] = x[0] + y[0]; }
void run(int* a, int* x, int* y) {
    produce(a);
    fan(a, x);
    fan(a, y);
    join(x, y, a);
}
)";
    Sim s = prep(src);
    MemoryState in;
    in.set_array("a", {0});
    in.set_array("x", {0});
    in.set_array("y", {0});

    TaskGraph g = extract_task_graph(*s.plan, "run", in, unlimited());
    REQUIRE(g.tasks.size() == 4);
    REQUIRE(edge_between(g, 0, 1) != nullptr);
    CHECK(edge_between(g, 0, 1)->kind == EdgeKind::RAW);
    REQUIRE(edge_between(g, 0, 2) != nullptr);
    CHECK(edge_between(g, 1, 2) == nullptr);
    REQUIRE(edge_between(g, 1, 3) != nullptr);
    REQUIRE(edge_between(g, 2, 3) != nullptr);
    REQUIRE(edge_between(g, 0, 3) != nullptr);
    CHECK(edge_between(g, 0, 3)->kind == EdgeKind::WAW);

    ScheduleSet ss = enumerate_schedules(g, 100);
    CHECK(ss.exhaustive);
    CHECK(ss.orders.size() == 2);

    CheckOutcome out = verify_stf(s, "run", in, unlimited());
    CHECK(out.passed == out.total);
    MemoryState seq = sequential_execute(*s.index, "run", in);
    CHECK(seq.cells.at("a")[0] == Value::of_int(12));
}

namespace {

const char* kQuicksort = R"(
int partition(int* data, int n) {
    int pivot = data[n - 1];
    int i = 0;
    for (int j = 0; j + 1 < n; j = j + 1) {
        if (data[j] < pivot) {
            std::swap(data[i], data[j]);
            i = i + 1;
        }
    }
    std::swap(data[i], data[n - 1]);
    return i;
}

void quicksort(int* data, int n) {
    if (n < 2) {
        return;
    }
    int p = partition(data, n);
    int* left = data;
    int* right = data + p + 1;
    quicksort(left, p);
    quicksort(right, n - p - 1);
}

void sort_all(int* data, int n) {
    quicksort(data, n);
}
)";

MemoryState sort_input(const std::vector<long long>& data) {
    MemoryState in;
    in.set_array("data", data);
    in.set_scalar("n", static_cast<long long>(data.size()));
    return in;
}

std::vector<long long> sorted_copy(std::vector<long long> v) {
    std::sort(v.begin(), v.end());
    return v;
}

}  // namespace

TEST_CASE("quicksort sorts and sibling ranges run in parallel") {
    Sim s = prep(kQuicksort);
    std::vector<long long> data = {3, 1, 2};
    MemoryState in = sort_input(data);

    MemoryState seq = sequential_execute(*s.index, "sort_all", in);
    std::vector<long long> want = sorted_copy(data);
    for (size_t i = 0; i < want.size(); ++i)
        CHECK(seq.cells.at("data")[i] == Value::of_int(want[i]));

    TaskGraph g = extract_task_graph(*s.plan, "sort_all", in, unlimited());
    CHECK(extraction_state(g) == seq);

    // The root sort spawns partition plus the two half sorts; the halves
    // must not depend on each other.
    int lo_sort = -1;
    int hi_sort = -1;
    for (const SimTaskInfo& t : g.tasks) {
        if (t.callee != "quicksort" || t.depth != 2) continue;
        if (lo_sort < 0) lo_sort = t.id;
        else hi_sort = t.id;
    }
    REQUIRE(lo_sort >= 0);
    REQUIRE(hi_sort >= 0);
    CHECK(edge_between(g, lo_sort, hi_sort) == nullptr);

    bool has_wait = false;
    for (const SimNode& n : g.nodes)
        if (n.kind == SimNodeKind::Barrier && n.label == "taskwait")
            has_wait = true;
    CHECK(has_wait);

    CheckOutcome out = verify_stf(s, "sort_all", in, unlimited());
    CHECK(out.passed == out.total);
    CHECK(out.total >= 2);
}

TEST_CASE("quicksort equivalence holds on sampled larger inputs") {
    Sim s = prep(kQuicksort);
    std::vector<long long> data = {9, 4, 7, 1, 8, 2, 6, 3, 5, 0, 11, 10};
    MemoryState in = sort_input(data);
    CheckOutcome out = verify_stf(s, "sort_all", in, unlimited());
    CHECK(out.total >= 1);
    CHECK(out.passed == out.total);
}

TEST_CASE("host read-modify-write after a task waits for it") {
    const char* src = R"(
void doubleit(int& v) { v = v * 2; }
void run(int& var) {
    doubleit(var);
    var = var + 1;
}
)";
    Sim s = prep(src);
    MemoryState in;
    in.set_scalar("var", 3);

    CheckOutcome out = verify_stf(s, "run", in, unlimited());
    CHECK(out.passed == out.total);
    MemoryState seq = sequential_execute(*s.index, "run", in);
    CHECK(seq.cells.at("var")[0] == Value::of_int(7));

    // Deleting the coherency wait must expose at least one bad order.
    const FunctionDecl* fn = s.owned->find_function("run");
    const FunctionPlan* fp = s.plan->plan_for(fn);
    REQUIRE(fp != nullptr);
    REQUIRE_FALSE(fp->syncs.empty());
    SimOptions loose = unlimited();
    for (const SyncPointInfo& sp : fp->syncs)
        loose.drop_sync_stmt_ids.insert(sp.stmt_id);
    TaskGraph g = extract_task_graph(*s.plan, "run", in, loose);
    ScheduleSpec all;
    all.kind = ScheduleSpec::Kind::All;
    CheckOutcome raced = check_schedules(g, seq, in, all);
    CHECK(raced.total > 1);
    CHECK(raced.passed < raced.total);
    CHECK_FALSE(raced.failed.empty());
}

TEST_CASE("subscript index writes wait for reading tasks") {
    const char* src = R"(
void put(int* a, int i, int v) { a[i] = v; }
void run(int* a, int i) {
    put(a, i, 5);
    i = i + 1;
    put(a, i, 7);
}
)";
    Sim s = prep(src);
    MemoryState in;
    in.set_array("a", {0, 0, 0});
    in.set_scalar("i", 0);

    CheckOutcome out = verify_stf(s, "run", in, unlimited());
    CHECK(out.passed == out.total);
    MemoryState seq = sequential_execute(*s.index, "run", in);
    CHECK(seq.cells.at("a")[0] == Value::of_int(5));
    CHECK(seq.cells.at("a")[1] == Value::of_int(7));

    const FunctionPlan* fp = s.plan->plan_for(s.owned->find_function("run"));
    REQUIRE(fp != nullptr);
    REQUIRE_FALSE(fp->syncs.empty());
    SimOptions loose = unlimited();
    for (const SyncPointInfo& sp : fp->syncs)
        loose.drop_sync_stmt_ids.insert(sp.stmt_id);
    TaskGraph g = extract_task_graph(*s.plan, "run", in, loose);
    ScheduleSpec all;
    all.kind = ScheduleSpec::Kind::All;
    CheckOutcome raced = check_schedules(g, seq, in, all);
    CHECK(raced.passed < raced.total);
}

TEST_CASE("scope cleanup stays ordered after consumers") {
    const char* src = R"(
int produce(const int* src) { return src[0] * 3; }
void consume(int v, int* out) { out[0] = v; }
void run(const int* src, int* out) {
    {
        int y = produce(src);
        consume(y, out);
    }
}
)";
    Sim s = prep(src);
    MemoryState in;
    in.set_array("src", {7});
    in.set_array("out", {0});

    const FunctionPlan* fp = s.plan->plan_for(s.owned->find_function("run"));
    REQUIRE(fp != nullptr);
    REQUIRE_FALSE(fp->promotions.empty());

    TaskGraph g = extract_task_graph(*s.plan, "run", in, unlimited());
    bool has_cleanup = false;
    for (const SimTaskInfo& t : g.tasks)
        if (t.callee.rfind("delete:", 0) == 0) has_cleanup = true;
    CHECK(has_cleanup);

    MemoryState seq = sequential_execute(*s.index, "run", in);
    CHECK(seq.cells.at("out")[0] == Value::of_int(21));
    ScheduleSpec all;
    all.kind = ScheduleSpec::Kind::All;
    CheckOutcome out = check_schedules(g, seq, in, all);
    CHECK(out.passed == out.total);

    // Stripping the cleanup's ordering lets the delete land early.
    SimOptions stripped = unlimited();
    stripped.strip_cleanup_depends = true;
    TaskGraph g2 = extract_task_graph(*s.plan, "run", in, stripped);
    CheckOutcome raced = check_schedules(g2, seq, in, all);
    CHECK(raced.total > out.total);
    CHECK(raced.passed < raced.total);
}

TEST_CASE("hoisted nested calls feed their consumer through a temp") {
    const char* src = R"(
int f(int x) { return x + 1; }
int g(int x) { return x * 2; }
int run(int x) {
    int r = g(f(x));
    return r;
}
)";
    Sim s = prep(src);
    MemoryState in;
    in.set_scalar("x", 4);

    TaskGraph g = extract_task_graph(*s.plan, "run", in, unlimited());
    REQUIRE(g.tasks.size() == 2);
    CHECK(g.tasks[0].callee == "f");
    CHECK(g.tasks[1].callee == "g");
    REQUIRE(edge_between(g, 0, 1) != nullptr);
    CHECK(edge_between(g, 0, 1)->kind == EdgeKind::RAW);

    CheckOutcome out = verify_stf(s, "run", in, unlimited());
    CHECK(out.passed == out.total);
    MemoryState seq = sequential_execute(*s.index, "run", in);
    CHECK(seq.cells.at("<return>")[0] == Value::of_int(10));
}

TEST_CASE("fresh declaration bound to a nested-taskgroup callee") {
    // The callee spawns tasks of its own, so its result arrives through a
    // region return cell and a copy into the split declaration.
    const char* src = R"(
void bump(int* a, int i) { a[i] = a[i] + 1; }
int touch_all(int* a, int n) {
    for (int i = 0; i < n; i = i + 1) {
        bump(a, i);
    }
    return a[0];
}
int run(int* a, int n) {
    int first = touch_all(a, n);
    return first * 10;
}
)";
    Sim s = prep(src);
    MemoryState in;
    in.set_array("a", {4, 7});
    in.set_scalar("n", 2);

    TaskGraph g = extract_task_graph(*s.plan, "run", in, unlimited());
    REQUIRE(g.tasks.size() == 3);  // touch_all + two bump children
    CHECK(g.tasks[0].callee == "touch_all");
    CHECK(g.tasks[1].parent == 0);
    CHECK(g.tasks[2].parent == 0);

    MemoryState seq = sequential_execute(*s.index, "run", in);
    CHECK(seq.cells.at("<return>")[0] == Value::of_int(50));
    CHECK(extraction_state(g) == seq);

    CheckOutcome out = verify_stf(s, "run", in, unlimited());
    CHECK(out.passed == out.total);
}

TEST_CASE("method tasks serialize on their receiver") {
    const char* src = R"(
class Accum {
    int total;
    void reset() { total = 0; }
    void add(int v) { total = total + v; }
    int get() const { return total; }
};

int run(int a, int b) {
    Accum acc;
    acc.reset();
    acc.add(a);
    acc.add(b);
    return acc.get();
}
)";
    Sim s = prep(src);
    MemoryState in;
    in.set_scalar("a", 11);
    in.set_scalar("b", 31);

    MemoryState seq = sequential_execute(*s.index, "run", in);
    CHECK(seq.cells.at("<return>")[0] == Value::of_int(42));

    CheckOutcome out = verify_stf(s, "run", in, unlimited());
    CHECK(out.passed == out.total);

    TaskGraph g = extract_task_graph(*s.plan, "run", in, unlimited());
    int adds = 0;
    for (const SimTaskInfo& t : g.tasks)
        if (t.callee == "Accum::add") ++adds;
    CHECK(adds == 2);
}

TEST_CASE("control flow in planned functions replays faithfully") {
    const char* src = R"(
void scale(int* a, int k) { a[0] = a[0] * k; }

void run(int* a, int mode, int reps) {
    switch (mode) {
        case 0:
            scale(a, 2);
            break;
        case 1:
            scale(a, 3);
            break;
        default:
            scale(a, 5);
            break;
    }
    for (int i = 0; i < reps; i = i + 1) {
        a[0] = a[0] + 1;
    }
    if (a[0] > 10) {
        scale(a, 7);
    }
}
)";
    Sim s = prep(src);
    for (long long mode : {0, 1, 9}) {
        MemoryState in;
        in.set_array("a", {2});
        in.set_scalar("mode", mode);
        in.set_scalar("reps", 3);
        CheckOutcome out = verify_stf(s, "run", in, unlimited());
        CHECK(out.passed == out.total);
    }
}

TEST_CASE("depth throttle caps task nesting") {
    Sim s = prep(kQuicksort);
    std::vector<long long> data = {7, 3, 11, 1, 9, 5, 13, 0, 8, 4, 12, 2,
                                   10, 6, 14};
    MemoryState in = sort_input(data);

    SimOptions capped;
    capped.strategy = ThrottleStrategy::parse("depth:2");
    TaskGraph g = extract_task_graph(*s.plan, "sort_all", in, capped);
    CHECK(g.tasks.size() >= 1);
    CHECK(g.tasks.size() <= 7);
    for (const SimTaskInfo& t : g.tasks) CHECK(t.depth <= 2);

    MemoryState seq = sequential_execute(*s.index, "sort_all", in);
    CHECK(extraction_state(g) == seq);
    std::vector<long long> want = sorted_copy(data);
    for (size_t i = 0; i < want.size(); ++i)
        CHECK(seq.cells.at("data")[i] == Value::of_int(want[i]));

    ScheduleSpec spec;
    CheckOutcome out = check_schedules(g, seq, in, spec);
    CHECK(out.passed == out.total);

    SimOptions off;
    off.strategy = ThrottleStrategy::parse("depth:0");
    TaskGraph flat = extract_task_graph(*s.plan, "sort_all", in, off);
    CHECK(flat.tasks.empty());
    CHECK(extraction_state(flat) == seq);
    MakespanResult m = simulate_makespan(flat, 4);
    CHECK(m.speedup == doctest::Approx(1.0));
}

TEST_CASE("count throttle balances and saturates") {
    const char* src = R"(
void rec(int* a, int n) {
    if (n < 1) {
        return;
    }
    a[n - 1] = a[n - 1] + 1;
    rec(a, n - 1);
}
void run(int* a, int n) {
    rec(a, n);
}
)";
    Sim s = prep(src);
    MemoryState in;
    in.set_array("a", {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0});
    in.set_scalar("n", 12);

    SimOptions two;
    two.strategy = ThrottleStrategy::parse("count:2");
    TaskGraph g2 = extract_task_graph(*s.plan, "run", in, two);
    CHECK(g2.tasks.size() == 2);
    CHECK(g2.counter.increments == 2);
    CHECK(g2.counter.decrements == 2);
    CHECK(g2.counter.max_live == 2);
    CHECK(g2.counter.final_live == 0);

    SimOptions eight;
    eight.strategy = ThrottleStrategy::parse("count:8");
    TaskGraph g8 = extract_task_graph(*s.plan, "run", in, eight);
    CHECK(g8.tasks.size() == 8);
    CHECK(g8.counter.max_live == 8);
    CHECK(g8.counter.increments == g8.counter.decrements);
    CHECK(g8.counter.final_live == 0);

    MemoryState seq = sequential_execute(*s.index, "run", in);
    CHECK(extraction_state(g2) == seq);
    CHECK(extraction_state(g8) == seq);
    ScheduleSpec spec;
    CheckOutcome out = check_schedules(g8, seq, in, spec);
    CHECK(out.passed == out.total);
}

TEST_CASE("schedule validation rejects malformed orders") {
    const char* src = R"(
void bump(int* a) { a[0] = a[0] * 2; }
void run(int* a) {
    bump(a);
    bump(a);
}
)";
    Sim s = prep(src);
    MemoryState in;
    in.set_array("a", {1});
    TaskGraph g = extract_task_graph(*s.plan, "run", in, unlimited());
    ScheduleSet ss = enumerate_schedules(g, 10);
    REQUIRE(ss.orders.size() == 1);
    std::vector<int> good = ss.orders[0];

    std::vector<int> short_order(good.begin(), good.end() - 1);
    CHECK_THROWS_AS(schedule_execute(g, short_order, in), ApacError);

    std::vector<int> dup = good;
    dup[0] = dup[1];
    CHECK_THROWS_AS(schedule_execute(g, dup, in), ApacError);

    // Swap the two dependent tasks.
    std::vector<int> bad = good;
    int a = g.tasks[0].first_node;
    int b = g.tasks[1].first_node;
    auto pa = std::find(bad.begin(), bad.end(), a);
    auto pb = std::find(bad.begin(), bad.end(), b);
    std::iter_swap(pa, pb);
    CHECK_THROWS_AS(schedule_execute(g, bad, in), ApacError);

    ScheduleResult ok = schedule_execute(g, good, in);
    CHECK_FALSE(ok.control_diverged);
    CHECK(ok.state == sequential_execute(*s.index, "run", in));
}

TEST_CASE("sampling large schedule spaces is deterministic") {
    const char* src = R"(
void bump(int* a) { a[0] = a[0] + 1; }
void run(int* q, int* r, int* t, int* u, int* v, int* w) {
    bump(q);
    bump(r);
    bump(t);
    bump(u);
    bump(v);
    bump(w);
}
)";
    Sim s = prep(src);
    MemoryState in;
    for (const char* n : {"q", "r", "t", "u", "v", "w"})
        in.set_array(n, {0});
    TaskGraph g = extract_task_graph(*s.plan, "run", in, unlimited());

    // 6! = 720 orders; force sampling with a small limit.
    ScheduleSet a = enumerate_schedules(g, 20, 99);
    CHECK_FALSE(a.exhaustive);
    CHECK(a.orders.size() == 20);
    std::set<std::vector<int>> uniq(a.orders.begin(), a.orders.end());
    CHECK(uniq.size() == 20);
    ScheduleSet b = enumerate_schedules(g, 20, 99);
    CHECK(a.orders == b.orders);
    ScheduleSet c = enumerate_schedules(g, 720, 99);
    CHECK(c.exhaustive);
    CHECK(c.orders.size() == 720);
}

TEST_CASE("argument span costing rewards balanced recursion") {
    Sim s = prep(kQuicksort);
    std::vector<long long> data;
    for (long long i = 0; i < 64; ++i) data.push_back((i * 37 + 11) % 64);
    MemoryState in = sort_input(data);

    SimOptions o;
    o.strategy = ThrottleStrategy::parse("depth:3");
    // With identical indices the span is the argument itself, so every
    // sort and partition task is charged its subrange length.
    o.cost = CostModel::parse("argspan:1:1");
    TaskGraph g = extract_task_graph(*s.plan, "sort_all", in, o);
    MakespanResult m1 = simulate_makespan(g, 1);
    MakespanResult m4 = simulate_makespan(g, 4);
    CHECK(m1.makespan == doctest::Approx(m1.total_cost));
    CHECK(m4.critical_path <= m4.makespan + 1e-9);
    CHECK(m4.makespan <= m4.total_cost + 1e-9);
    CHECK(m4.speedup > 1.0);
}
