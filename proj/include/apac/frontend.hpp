#pragma once

#include <map>
#include <string>
#include <vector>

#include "apac/ast.hpp"

namespace apac {

struct ResultBinding {
    enum class Kind { None, ExistingVar, FreshDecl };
    Kind kind = Kind::None;
    std::string name;
    bool is_const = false;
};

struct ArgInfo {
    const Expr* expr = nullptr;
    std::vector<std::string> vars;  // base variables, first-use order
    std::vector<std::string> subscript_index_vars;
};

// Where a call expression sits relative to its statement. Statement/PureAssign/
// PureInit calls can be wrapped or split directly; Nested calls get hoisted.
enum class CallPosition { Statement, PureAssign, PureInit, Nested };

struct CallSiteInfo {
    const Expr* call = nullptr;
    const Stmt* stmt = nullptr;  // enclosing statement
    SourceSpan stmt_span;
    const FunctionDecl* callee = nullptr;  // null when unresolved
    std::string callee_name;               // as written (may be std::...)
    bool is_std_or_external = false;
    bool is_method_call = false;
    std::string receiver_var;  // identifier receiver, when resolvable
    std::vector<ArgInfo> args;
    ResultBinding result;
    CallPosition position = CallPosition::Nested;
};

struct UnitIndex {
    const TranslationUnit* unit = nullptr;
    std::vector<FunctionDecl*> functions;
    std::map<std::string, const ClassDecl*> classes;
    std::map<std::string, std::vector<const FunctionDecl*>> free_by_name;
    std::map<std::string, const GlobalVarDecl*> globals;
    DiagnosticList diagnostics;

    const FunctionDecl* resolve_free(const std::string& name,
                                     size_t arity) const;
    const FunctionDecl* resolve_method(const std::string& class_name,
                                       const std::string& method,
                                       size_t arity) const;
};

UnitIndex build_index(const TranslationUnit& unit);

// All functions and methods in definition order.
std::vector<FunctionDecl*> enumerate_functions(const TranslationUnit& unit);

// Call expressions of fn's body in source order, nested calls innermost
// first. Arguments of std-qualified callees are not descended into.
std::vector<CallSiteInfo> enumerate_call_sites(const UnitIndex& index,
                                               const FunctionDecl& fn);

// Base variables an expression reads (callee names excluded), first-use order.
void collect_vars(const Expr& e, std::vector<std::string>& out);

// Variables appearing inside subscript index expressions of e.
void collect_subscript_index_vars(const Expr& e,
                                  std::vector<std::string>& out);

// The variable an lvalue expression designates (a for a[i], o for o.f).
std::string lvalue_base_var(const Expr& e);

}  // namespace apac
