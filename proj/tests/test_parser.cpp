#include <random>
#include <string>

#include "apac/parser.hpp"
#include "doctest.h"

using namespace apac;

namespace {

std::string reassemble(const TranslationUnit& tu) {
    std::string out;
    for (const auto& item : tu.items)
        out += tu.source.substr(item.tile_span.begin, item.tile_span.length());
    return out;
}

}  // namespace

TEST_CASE("top level items tile the file byte for byte") {
    std::string src =
        "#include <cstdio>\n"
        "\n"
        "int g = 3;\n"
        "\n"
        "int twice(const int x) { return x * 2; }\n"
        "\n"
        "class Point {\n"
        "  int x;\n"
        "  int y;\n"
        "  int sum() const { return x + y; }\n"
        "};\n"
        "\n"
        "int main() {\n"
        "  int v = twice(4);\n"
        "  return v;\n"
        "}\n";
    auto tu = parse_translation_unit(src, "t.cpp");
    CHECK(reassemble(*tu) == src);
    REQUIRE(tu->items.size() == 5);
    CHECK(tu->items[0].kind == TopItemKind::Include);
    CHECK(tu->items[1].kind == TopItemKind::GlobalVar);
    CHECK(tu->items[2].kind == TopItemKind::Function);
    CHECK(tu->items[3].kind == TopItemKind::Class);
    CHECK(tu->items[4].kind == TopItemKind::Function);
    // First tile starts at 0; each tile starts where the previous ended.
    CHECK(tu->items.front().tile_span.begin == 0);
    for (size_t i = 1; i < tu->items.size(); ++i)
        CHECK(tu->items[i].tile_span.begin == tu->items[i - 1].tile_span.end);
    CHECK(tu->items.back().tile_span.end == src.size());
}

TEST_CASE("function structure is captured") {
    std::string src = "int addmul(int a, const int b, double& c) {\n"
                      "  c = c * a;\n"
                      "  return a + b;\n"
                      "}\n";
    auto tu = parse_translation_unit(src, "t.cpp");
    auto fns = tu->functions();
    REQUIRE(fns.size() == 1);
    const FunctionDecl& f = *fns[0];
    CHECK(f.name == "addmul");
    REQUIRE(f.params.size() == 3);
    CHECK(f.params[0].declarator == Declarator::ByValue);
    CHECK_FALSE(f.params[0].is_const_qualified);
    CHECK(f.params[1].is_const_qualified);
    CHECK(f.params[2].declarator == Declarator::Reference);
    REQUIRE(f.body);
    REQUIRE(f.body->body.size() == 2);
    CHECK(f.body->body[0]->kind == StmtKind::Assign);
    CHECK(f.body->body[1]->kind == StmtKind::Return);
    CHECK(src.substr(f.body_span.begin, 1) == "{");
}

TEST_CASE("statement forms parse") {
    std::string src =
        "void fill(int* a, int n) {\n"
        "  for (int i = 0; i < n; i++) {\n"
        "    a[i] = i;\n"
        "  }\n"
        "  int j = 0;\n"
        "  while (j < n) {\n"
        "    j += 1;\n"
        "    if (j == 3) { continue; }\n"
        "  }\n"
        "  switch (n) {\n"
        "    case 0: { break; }\n"
        "    default: { break; }\n"
        "  }\n"
        "}\n";
    auto tu = parse_translation_unit(src, "t.cpp");
    const FunctionDecl& f = *tu->functions()[0];
    REQUIRE(f.body->body.size() == 4);
    const Stmt& loop = *f.body->body[0];
    CHECK(loop.kind == StmtKind::For);
    CHECK(loop.init_stmt->kind == StmtKind::Decl);
    CHECK(loop.step_stmt->kind == StmtKind::IncDec);
    const Stmt& sw = *f.body->body[3];
    REQUIRE(sw.cases.size() == 2);
    CHECK_FALSE(sw.cases[0].is_default);
    CHECK(sw.cases[1].is_default);
}

TEST_CASE("expressions keep precedence") {
    std::string src = "int f(int a, int b) { return a + b * 2 - -a; }\n";
    auto tu = parse_translation_unit(src, "t.cpp");
    const Stmt& ret = *tu->functions()[0]->body->body[0];
    REQUIRE(ret.ret_value);
    const Expr& e = *ret.ret_value;  // (a + b*2) - (-a)
    CHECK(e.kind == ExprKind::Binary);
    CHECK(e.op == "-");
    CHECK(e.lhs->op == "+");
    CHECK(e.lhs->rhs->op == "*");
    CHECK(e.rhs->kind == ExprKind::Unary);
}

TEST_CASE("unsupported constructs are rejected with clear messages") {
    auto expect_reject = [](const std::string& body_or_item) {
        CHECK_THROWS_AS(parse_translation_unit(body_or_item, "t.cpp"), ApacError);
    };
    expect_reject("template <class T> T id(T x) { return x; }\n");
    expect_reject("int f() { auto x = 1; return x; }\n");
    expect_reject("int f() { int* p = new int; return 0; }\n");
    expect_reject("int f() { try { } catch (...) { } return 0; }\n");
    expect_reject("int f(int n) { if (n) return 1; return 0; }\n");  // unbraced body
    expect_reject("int f() { int x = 1, y = 2; return x; }\n");      // two declarators
    expect_reject("float f() { return 0; }\n");
    expect_reject("int f() { goto done; done: return 0; }\n");
    expect_reject("struct A : B { int x; };\n");
}

TEST_CASE("unsupported statements report positions") {
    std::string src = "int f() {\n  do { } while (1);\n  return 0;\n}\n";
    try {
        parse_translation_unit(src, "t.cpp");
        FAIL("expected rejection");
    } catch (const ApacError& e) {
        CHECK(e.diagnostic().span.line == 2);
        CHECK(std::string(e.what()).find("unsupported") != std::string::npos);
    }
}

TEST_CASE("method calls and member access parse") {
    std::string src =
        "class Cell {\n"
        "  int v;\n"
        "  void bump(int d) { v = v + d; }\n"
        "  int get() const { return v; }\n"
        "};\n"
        "int main() {\n"
        "  Cell c;\n"
        "  c.bump(2);\n"
        "  int r = c.get();\n"
        "  return r;\n"
        "}\n";
    auto tu = parse_translation_unit(src, "t.cpp");
    auto classes = tu->classes();
    REQUIRE(classes.size() == 1);
    CHECK(classes[0]->fields.size() == 1);
    REQUIRE(classes[0]->methods.size() == 2);
    CHECK(classes[0]->methods[1]->is_const_method);
    const FunctionDecl* m = tu->find_function("main");
    REQUIRE(m != nullptr);
    const Stmt& call_stmt = *m->body->body[1];
    CHECK(call_stmt.kind == StmtKind::ExprStmt);
    CHECK(call_stmt.lhs->is_method_call());
    CHECK(call_stmt.lhs->name == "bump");
}

TEST_CASE("std qualified calls are plain calls") {
    std::string src =
        "#include <algorithm>\n"
        "void s(int* v, int n) {\n"
        "  std::sort(v, v + n);\n"
        "}\n";
    auto tu = parse_translation_unit(src, "t.cpp");
    const Stmt& st = *tu->functions()[0]->body->body[0];
    CHECK(st.lhs->kind == ExprKind::Call);
    CHECK(st.lhs->name == "std::sort");
    CHECK(st.lhs->is_std_qualified());
}

TEST_CASE("random whitespace preserves tiling") {
    std::string base =
        "#include <cstdio>\nint g = 1;\nint f(int x) { return x; }\nint main() { return f(g); }\n";
    std::mt19937 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        std::string src;
        for (char ch : base) {
            src += ch;
            if (ch == '\n' && rng() % 3 == 0) src += "\n";
            if (ch == ';' && rng() % 4 == 0) src += "  // note\n";
        }
        auto tu = parse_translation_unit(src, "t.cpp");
        CHECK(reassemble(*tu) == src);
    }
}
