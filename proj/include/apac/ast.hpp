#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "apac/source.hpp"

namespace apac {

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

enum class Declarator { ByValue, Reference, Pointer };

struct TypeRef {
    std::string base;  // void, int, long, double, bool, or a class name
    bool is_const = false;  // const applies to the base (pointee for T*)
    Declarator declarator = Declarator::ByValue;
    long long array_len = -1;  // >= 0 for T name[N]

    bool is_array() const { return array_len >= 0; }
    std::string spelling() const;
};

struct ParamInfo {
    std::string name;
    std::string base_type;
    Declarator declarator = Declarator::ByValue;
    bool is_const_qualified = false;
    SourceSpan span;
};

// ---------------------------------------------------------------------------
// Expressions
// ---------------------------------------------------------------------------

enum class ExprKind {
    IntLit,
    FloatLit,
    BoolLit,
    Ident,
    Subscript,  // lhs[index]
    Member,     // lhs.name
    Unary,      // op lhs   (&, *, -, !)
    Binary,     // lhs op rhs
    Call,       // callee_name(args) or lhs.callee_name(args)
    Paren,      // (lhs)
};

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

struct Expr {
    ExprKind kind;
    SourceSpan span;
    int node_id = 0;

    long long int_val = 0;
    double float_val = 0.0;
    bool bool_val = false;
    std::string name;  // Ident; Member field; Call callee (maybe std::...)
    std::string op;

    ExprPtr lhs;    // unary/binary/paren operand, subscript/member base,
                    // method-call receiver
    ExprPtr index;  // subscript index
    ExprPtr rhs;    // binary right operand
    std::vector<ExprPtr> args;  // call arguments

    bool is_method_call() const { return kind == ExprKind::Call && lhs; }
    bool is_std_qualified() const {
        return kind == ExprKind::Call && name.rfind("std::", 0) == 0;
    }
};

// ---------------------------------------------------------------------------
// Statements
// ---------------------------------------------------------------------------

enum class StmtKind {
    Decl,
    ExprStmt,  // expression (typically a call) followed by ';'
    Assign,    // lhs = rhs; also compound ops recorded in `op`
    IncDec,    // lhs++ / --lhs as a statement or for-step
    If,
    While,
    For,
    Switch,
    Return,
    Block,
    Break,
    Continue,
    Empty,
};

struct Stmt;
using StmtPtr = std::unique_ptr<Stmt>;

struct VarDeclData {
    std::string name;
    TypeRef type;
    ExprPtr init;  // may be null
    SourceSpan name_span;
};

struct SwitchCase {
    bool is_default = false;
    long long value = 0;
    SourceSpan span;
    std::vector<StmtPtr> body;  // statements until next case/default/end
};

struct Stmt {
    StmtKind kind;
    SourceSpan span;  // includes the trailing ';' where applicable
    int node_id = 0;

    std::optional<VarDeclData> decl;

    ExprPtr lhs;   // assign target / incdec target / expr-stmt expression
    ExprPtr rhs;   // assign value
    std::string op;  // "=", "+=", "-=", "*=", "/=", "%=", "++", "--"

    ExprPtr cond;          // if/while/for/switch condition
    StmtPtr init_stmt;     // for-init (Decl/Assign/Empty)
    StmtPtr step_stmt;     // for-step (Assign/IncDec/Empty)
    StmtPtr then_branch;   // if body (Block)
    StmtPtr else_branch;   // else body (Block or If), may be null
    StmtPtr loop_body;     // while/for body (Block)
    ExprPtr ret_value;     // return expression, may be null
    std::vector<StmtPtr> body;        // Block statements
    std::vector<SwitchCase> cases;    // Switch sections
};

// ---------------------------------------------------------------------------
// Declarations and the translation unit
// ---------------------------------------------------------------------------

struct ClassDecl;

struct FunctionDecl {
    std::string name;
    std::string qualified_name;  // Class::name for methods
    std::vector<ParamInfo> params;
    TypeRef return_type;
    StmtPtr body;  // Block; null when only declared
    bool is_method = false;
    bool is_const_method = false;
    bool is_main = false;
    bool is_external = false;  // declared without a body in this unit
    SourceSpan span;       // first token to last token of the definition
    SourceSpan body_span;  // the braces of the body, when present
    SourceSpan name_span;
    const ClassDecl* owner = nullptr;
};

struct FieldDecl {
    std::string name;
    TypeRef type;
    SourceSpan span;
};

struct ClassDecl {
    std::string name;
    std::vector<FieldDecl> fields;
    std::vector<std::unique_ptr<FunctionDecl>> methods;
    SourceSpan span;
};

struct GlobalVarDecl {
    VarDeclData decl;
    SourceSpan span;
};

enum class TopItemKind { Include, Function, Class, GlobalVar };

// Top-level items tile the file: each tile_span starts where the previous
// one ended, so concatenating them reproduces the input byte for byte.
struct TopItem {
    TopItemKind kind;
    SourceSpan tile_span;
    SourceSpan exact_span;  // first to last token of the item itself
    std::string include_text;  // Include: the raw directive line
    std::unique_ptr<FunctionDecl> function;
    std::unique_ptr<ClassDecl> class_decl;
    std::unique_ptr<GlobalVarDecl> global;
};

struct TranslationUnit {
    std::string file;
    std::string source;
    std::vector<TopItem> items;

    std::vector<FunctionDecl*> functions() const;  // free + methods, in order
    std::vector<const ClassDecl*> classes() const;
    std::vector<const GlobalVarDecl*> globals() const;
    const FunctionDecl* find_function(const std::string& qualified) const;
};

bool is_builtin_type(const std::string& name);

}  // namespace apac
