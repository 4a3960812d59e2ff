#include "doctest.h"

#include <memory>

#include "apac/access_analysis.hpp"
#include "apac/lexer.hpp"
#include "apac/parser.hpp"
#include "apac/transform.hpp"

using namespace apac;

namespace {

struct Transformed {
    std::unique_ptr<TranslationUnit> owned;
    UnitIndex index;
    UnitPlan plan;
};

Transformed analyze(const std::string& src, AnalysisOptions opts = {}) {
    Transformed t;
    t.owned = parse_translation_unit(src, "test.cpp");
    t.index = build_index(*t.owned);
    REQUIRE_FALSE(t.index.diagnostics.has_errors());
    t.plan = analyze_unit(t.index, opts);
    return t;
}

std::string run_transform(const std::string& src,
                          const std::string& strategy = "none",
                          AnalysisOptions opts = {}) {
    Transformed t = analyze(src, opts);
    return transform_unit(t.plan, ThrottleStrategy::parse(strategy), false);
}

// Whitespace- and comment-insensitive equality with exact identifiers.
std::string token_text(const std::string& src) {
    std::string out;
    for (const auto& t : comparison_tokens(src, false)) {
        if (!out.empty()) out += ' ';
        out += t;
    }
    return out;
}

void check_tokens(const std::string& got, const std::string& want) {
    CHECK(token_text(got) == token_text(want));
}

}  // namespace

// ----- transformation catalog, strategy none -----

TEST_CASE("golden: statement call wrapped in a task inside main") {
    const char* input = R"(void f(const int& a, const int& b, int& c) {
    c = a + b;
}

int main() {
    int a = 1;
    int b = 2;
    int c = 0;
    f(a, b, c);
    return 0;
}
)";
    const char* expected = R"(void f(const int& a, const int& b, int& c) {
    c = a + b;
}

int main() {
    #pragma omp parallel
    #pragma omp master
    #pragma omp taskgroup
    {
    int a = 1;
    int b = 2;
    int c = 0;
    #pragma omp task depend(in:a,b) depend(inout:c) default(shared)
    {
        f(a, b, c);
    }
    }
    return 0;
}
)";
    check_tokens(run_transform(input), expected);
}

TEST_CASE("golden: const declaration split into decl plus task assignment") {
    const char* input = R"(int f(const int& x) {
    return x * 2;
}

void sink(const int& a, int& out) {
    out = a;
}

void g(const int& x, int& out) {
    const int y = f(x);
    sink(y, out);
}
)";
    const char* expected = R"(int f(const int& x) {
    return x * 2;
}

void sink(const int& a, int& out) {
    out = a;
}

void g(const int& x, int& out) {
    #pragma omp taskgroup
    {
    int y;
    #pragma omp task depend(in:x) depend(inout:y) default(shared)
    {
        y = f(x);
    }
    #pragma omp task depend(in:y) depend(inout:out) default(shared)
    {
        sink(y, out);
    }
    }
}
)";
    check_tokens(run_transform(input), expected);
}

TEST_CASE("golden: scope-local promoted to heap, alias untouched") {
    const char* input = R"(void touch(int& v) {
    v += 1;
}

void h(int& z) {
    if (z > 0) {
        int var1;
        int& var2 = z;
        touch(var1);
        touch(var2);
    }
}
)";
    const char* expected = R"(void touch(int& v) {
    v += 1;
}

void h(int& z) {
    #pragma omp taskgroup
    {
    if (z > 0) {
        int* apac_ptr_var1 = new int();
        int& var1 = *apac_ptr_var1;
        int& var2 = z;
        #pragma omp task depend(inout:var1) default(shared)
        {
            touch(var1);
        }
        #pragma omp task depend(inout:var2) default(shared) firstprivate(var2)
        {
            touch(var2);
        }
        #pragma omp task depend(inout:var1) firstprivate(apac_ptr_var1) default(shared)
        {
            delete apac_ptr_var1;
        }
    }
    }
}
)";
    check_tokens(run_transform(input), expected);
}

TEST_CASE("golden: taskwait shields a host mutation of a task variable") {
    const char* input = R"(void bump(int& v) {
    v += 1;
}

void g(int& var) {
    bump(var);
    var += 1;
}
)";
    const char* expected = R"(void bump(int& v) {
    v += 1;
}

void g(int& var) {
    #pragma omp taskgroup
    {
    #pragma omp task depend(inout:var) default(shared)
    {
        bump(var);
    }
    #pragma omp taskwait
    var += 1;
    }
}
)";
    check_tokens(run_transform(input), expected);
}

TEST_CASE("golden: multiple returns funnel through result var and goto") {
    const char* input = R"(int work(const int& x) {
    return x * 3;
}

int compute(const int& x) {
    if (x < 0) {
        return 0;
    }
    int y = work(x);
    return y;
}
)";
    const char* expected = R"(int work(const int& x) {
    return x * 3;
}

int compute(const int& x) {
    int apac_res;
    #pragma omp taskgroup
    {
    if (x < 0) {
        #pragma omp taskwait
        apac_res = 0;
        goto apac_endtaskgrouplabel_compute;
    }
    int y;
    #pragma omp task depend(in:x) depend(inout:y) default(shared)
    {
        y = work(x);
    }
    #pragma omp taskwait
    apac_res = y;
    goto apac_endtaskgrouplabel_compute;
    apac_endtaskgrouplabel_compute: ;
    }
    return apac_res;
}
)";
    check_tokens(run_transform(input), expected);
}

// ----- other emission shapes -----

TEST_CASE("nested call hoisted into a temp task feeding the outer task") {
    const char* input = R"(int f(const int& x) {
    return x + 1;
}

int g(const int& x) {
    return x * 2;
}

void chain(int& out) {
    out = g(f(3));
}
)";
    const char* expected = R"(int f(const int& x) {
    return x + 1;
}

int g(const int& x) {
    return x * 2;
}

void chain(int& out) {
    #pragma omp taskgroup
    {
    int apac_tmp_1;
    #pragma omp task depend(inout:apac_tmp_1) default(shared)
    {
        apac_tmp_1 = f(3);
    }
    #pragma omp task depend(in:apac_tmp_1) depend(inout:out) default(shared)
    {
        out = g(apac_tmp_1);
    }
    }
}
)";
    check_tokens(run_transform(input), expected);
}

TEST_CASE("promoted declaration with call initializer folds into one task") {
    const char* input = R"(int source(const int& x) {
    return x * 2;
}

void sink(const int& a, int& out) {
    out += a;
}

void scoped(int& out) {
    if (out > 0) {
        int y = source(out);
        sink(y, out);
    }
}
)";
    const char* expected = R"(int source(const int& x) {
    return x * 2;
}

void sink(const int& a, int& out) {
    out += a;
}

void scoped(int& out) {
    #pragma omp taskgroup
    {
    if (out > 0) {
        int* apac_ptr_y = new int();
        int& y = *apac_ptr_y;
        #pragma omp task depend(in:out) depend(inout:y) default(shared)
        {
            y = source(out);
        }
        #pragma omp task depend(in:y) depend(inout:out) default(shared)
        {
            sink(y, out);
        }
        #pragma omp task depend(inout:y) firstprivate(apac_ptr_y) default(shared)
        {
            delete apac_ptr_y;
        }
    }
    }
}
)";
    check_tokens(run_transform(input), expected);
}

TEST_CASE("else-if with a pending conflict gains braces around the taskwait") {
    const char* input = R"(void bump(int& v) {
    v += 1;
}

void g(int& a, int& b) {
    bump(a);
    if (b > 0) {
        b += 1;
    } else if (a > 0) {
        a += 1;
    }
}
)";
    const char* expected = R"(void bump(int& v) {
    v += 1;
}

void g(int& a, int& b) {
    #pragma omp taskgroup
    {
    #pragma omp task depend(inout:a) default(shared)
    {
        bump(a);
    }
    if (b > 0) {
        b += 1;
    } else {
        #pragma omp taskwait
        if (a > 0) {
        a += 1;
    }
    }
    }
}
)";
    check_tokens(run_transform(input), expected);
}

TEST_CASE("loop whose condition reads a task variable syncs at body end") {
    const char* input = R"(void bump(int& v) {
    v += 1;
}

void iterate(int& x) {
    while (x < 3) {
        bump(x);
    }
}
)";
    const char* expected = R"(void bump(int& v) {
    v += 1;
}

void iterate(int& x) {
    #pragma omp taskgroup
    {
    while (x < 3) {
        #pragma omp task depend(inout:x) default(shared)
        {
            bump(x);
        }
        #pragma omp taskwait
    }
    }
}
)";
    check_tokens(run_transform(input), expected);
}

TEST_CASE("declaration after a return loses its initializer to an assignment") {
    const char* input = R"(int f(const int& x) {
    return x + 1;
}

int multi(const int& x) {
    if (x > 0) {
        return f(x);
    }
    int z = x + 5;
    return z;
}
)";
    const char* expected = R"(int f(const int& x) {
    return x + 1;
}

int multi(const int& x) {
    int apac_res;
    #pragma omp taskgroup
    {
    if (x > 0) {
        int apac_tmp_1;
        #pragma omp task depend(in:x) depend(inout:apac_tmp_1) default(shared)
        {
            apac_tmp_1 = f(x);
        }
        #pragma omp taskwait
        apac_res = apac_tmp_1;
        goto apac_endtaskgrouplabel_multi;
    }
    int z;
    z = x + 5;
    #pragma omp taskwait
    apac_res = z;
    goto apac_endtaskgrouplabel_multi;
    apac_endtaskgrouplabel_multi: ;
    }
    return apac_res;
}
)";
    check_tokens(run_transform(input), expected);
}

TEST_CASE("reference declared after a return is rejected") {
    const char* input = R"(int f(const int& x) {
    return x + 1;
}

int bad(int& x) {
    if (x > 0) {
        return f(x);
    }
    int& r = x;
    r += 1;
    return x;
}
)";
    Transformed t = analyze(input);
    CHECK_THROWS_AS(
        transform_unit(t.plan, ThrottleStrategy::parse("none"), false),
        ApacError);
}

// ----- throttling strategies through the pipeline -----

TEST_CASE("count strategy instruments counter, guard, and atomics") {
    const char* input = R"(void f(const int& a, const int& b, int& c) {
    c = a + b;
}

int main() {
    int a = 1;
    int b = 2;
    int c = 0;
    f(a, b, c);
    return 0;
}
)";
    const char* expected = R"(int apac_task_count = 0;

void f(const int& a, const int& b, int& c) {
    c = a + b;
}

int main() {
    #pragma omp parallel
    #pragma omp master
    #pragma omp taskgroup
    {
    const bool apac_active = apac_task_count < 2;
    int a = 1;
    int b = 2;
    int c = 0;
    if (apac_active) {
    #pragma omp atomic
    apac_task_count += 1;
    }
    #pragma omp task depend(in:a,b) depend(inout:c) default(shared) if(apac_active)
    {
        f(a, b, c);
        if (apac_active) {
        #pragma omp atomic
        apac_task_count -= 1;
        }
    }
    }
    return 0;
}
)";
    check_tokens(run_transform(input, "count:2"), expected);
}

TEST_CASE("depth strategy threads the level through firstprivate") {
    const char* input = R"(void f(const int& a, const int& b, int& c) {
    c = a + b;
}

int main() {
    int a = 1;
    int b = 2;
    int c = 0;
    f(a, b, c);
    return 0;
}
)";
    const char* expected = R"(int apac_depth = 0;
#pragma omp threadprivate(apac_depth)

void f(const int& a, const int& b, int& c) {
    c = a + b;
}

int main() {
    #pragma omp parallel
    #pragma omp master
    #pragma omp taskgroup
    {
    const int apac_depth_local = apac_depth;
    const bool apac_active = apac_depth_local < 1;
    int a = 1;
    int b = 2;
    int c = 0;
    #pragma omp task depend(in:a,b) depend(inout:c) default(shared) if(apac_active) firstprivate(apac_depth_local)
    {
        apac_depth = apac_depth_local + 1;
        f(a, b, c);
    }
    }
    return 0;
}
)";
    check_tokens(run_transform(input, "depth:1"), expected);
}

TEST_CASE("depth strategy instruments the promotion cleanup task too") {
    const char* input = R"(void touch(int& v) {
    v += 1;
}

void h(int& z) {
    if (z > 0) {
        int var1;
        touch(var1);
    }
}
)";
    std::string got = run_transform(input, "depth:5");
    CHECK(got.find("#pragma omp task depend(inout:var1) "
                   "firstprivate(apac_ptr_var1,apac_depth_local) "
                   "default(shared) if(apac_active)") != std::string::npos);
    CHECK(got.find("delete apac_ptr_var1;") != std::string::npos);
}

// ----- whole-unit behavior -----

TEST_CASE("unit without taskifiable calls comes back byte-identical") {
    const char* input = R"(#include <cstdio>

int twice(int x) {
    return x * 2;
}

int main() {
    int v = twice(3);
    v += 1;
    return v;
}
)";
    // twice taskifiable would flip this; make it sequential via exclusion
    AnalysisOptions opts;
    opts.exclude_functions.push_back("twice");
    CHECK(run_transform(input, "none", opts) == input);
    CHECK(run_transform(input, "depth:5", opts) == input);

    Transformed t = analyze(input, opts);
    std::string with_header =
        transform_unit(t.plan, ThrottleStrategy::parse("none"), true);
    CHECK(with_header ==
          std::string("// Parallelized by apac (strategy none): OpenMP task "
                      "pragmas added, other code unchanged.\n") +
              input);
}

TEST_CASE("transform output is deterministic") {
    const char* input = R"(int f(const int& x) {
    return x + 1;
}

int main() {
    int a = 0;
    int b = f(a);
    a = f(b);
    return 0;
}
)";
    Transformed t = analyze(input);
    ThrottleStrategy s = ThrottleStrategy::parse("depth:5");
    std::string first = transform_unit(t.plan, s);
    std::string second = transform_unit(t.plan, s);
    CHECK(first == second);

    Transformed again = analyze(input);
    CHECK(first == transform_unit(again.plan, s));
}

TEST_CASE("braces stay balanced across emitted shapes") {
    const char* inputs[] = {
        R"(void bump(int& v) { v += 1; }
void a(int& x) { bump(x); x += 1; }
)",
        R"(int f(const int& x) { return x + 1; }
int b(const int& x) {
    if (x > 0) {
        return f(x);
    }
    return 0;
}
)",
        R"(void bump(int& v) { v += 1; }
void c(int& x) {
    while (x < 5) {
        bump(x);
    }
}
)",
    };
    for (const char* input : inputs) {
        for (const char* strategy : {"none", "count:3", "depth:2"}) {
            std::string out = run_transform(input, strategy);
            int depth = 0;
            for (const auto& tok : comparison_tokens(out, false)) {
                if (tok == "{") ++depth;
                if (tok == "}") --depth;
                CHECK(depth >= 0);
            }
            CHECK(depth == 0);
        }
    }
}

TEST_CASE("step ops compose to the same text as the whole-unit pipeline") {
    const char* input = R"(void f(const int& a, const int& b, int& c) {
    c = a + b;
}

int main() {
    int a = 1;
    int b = 2;
    int c = 0;
    f(a, b, c);
    return 0;
}
)";
    Transformed t = analyze(input);
    ThrottleStrategy s = ThrottleStrategy::parse("none");
    const FunctionPlan* fp = t.plan.plan_for(t.owned->find_function("main"));
    REQUIRE(fp != nullptr);
    REQUIRE(fp->needs_taskgroup);
    REQUIRE(fp->tasks.size() == 1);

    RewriteBuffer rb(t.owned->source);
    wrap_function_body(rb, t.plan, *fp, s);
    wrap_call_in_task(rb, t.plan, *fp, fp->tasks[0], s);
    CHECK(rb.materialize() == transform_unit(t.plan, s, false));
}

TEST_CASE("standalone sync insertion lands in front of the statement") {
    const char* input = R"(void bump(int& v) {
    v += 1;
}

void g(int& var) {
    bump(var);
    var += 1;
}
)";
    Transformed t = analyze(input);
    const FunctionPlan* fp = t.plan.plan_for(t.owned->find_function("g"));
    REQUIRE(fp != nullptr);
    auto syncs = find_coherency_syncs(t.plan, *t.owned->find_function("g"));
    REQUIRE(syncs.size() == 1);

    RewriteBuffer rb(t.owned->source);
    insert_sync(rb, t.plan, syncs[0]);
    std::string out = rb.materialize();
    CHECK(out.find("#pragma omp taskwait\n    var += 1;") !=
          std::string::npos);
}
