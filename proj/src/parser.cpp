#include "apac/parser.hpp"

#include <set>

#include "apac/lexer.hpp"

namespace apac {

namespace {

const std::set<std::string> kRejectedKeywords = {
    "template", "typename", "lambda",   "try",    "throw", "catch",
    "goto",     "auto",     "using",    "namespace", "new", "delete",
    "do",       "operator", "virtual",  "static", "extern", "typedef",
    "unsigned", "signed",   "float",    "char",   "short", "enum",
    "union",    "friend",   "inline",   "constexpr", "sizeof", "this",
};

class Parser {
public:
    Parser(const std::string& source, const std::string& file)
        : src_(source), file_(file), toks_(lex(source, file)) {}

    std::unique_ptr<TranslationUnit> run() {
        auto unit = std::make_unique<TranslationUnit>();
        unit->file = file_;
        unit->source = src_;
        while (!peek().is(Tok::Eof)) unit->items.push_back(parse_top_item());
        // Tile the file so top-level spans concatenate to the input.
        size_t cursor = 0;
        for (auto& item : unit->items) {
            item.tile_span = item.exact_span;
            item.tile_span.begin = cursor;
            cursor = item.tile_span.end;
        }
        if (!unit->items.empty())
            unit->items.back().tile_span.end = src_.size();
        return unit;
    }

private:
    const std::string& src_;
    std::string file_;
    std::vector<Token> toks_;
    size_t pos_ = 0;
    int next_id_ = 1;
    std::set<std::string> class_names_;

    // -- token helpers ------------------------------------------------------

    const Token& peek(size_t ahead = 0) const {
        const size_t i = pos_ + ahead;
        return i < toks_.size() ? toks_[i] : toks_.back();
    }
    const Token& advance() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
    bool accept_punct(std::string_view text) {
        if (peek().is_punct(text)) {
            advance();
            return true;
        }
        return false;
    }
    bool accept_ident(std::string_view text) {
        if (peek().is_ident(text)) {
            advance();
            return true;
        }
        return false;
    }
    const Token& expect_punct(std::string_view text) {
        if (!peek().is_punct(text))
            fail("expected '" + std::string(text) + "' before '" +
                 describe(peek()) + "'");
        return advance();
    }
    const Token& expect_ident() {
        if (!peek().is(Tok::Identifier))
            fail("expected identifier before '" + describe(peek()) + "'");
        return advance();
    }

    static std::string describe(const Token& t) {
        return t.kind == Tok::Eof ? "end of file" : t.text;
    }
    [[noreturn]] void fail(const std::string& msg) const {
        throw ApacError(
            {Severity::Error, peek().span, file_, msg});
    }
    [[noreturn]] void unsupported(const std::string& what,
                                  const SourceSpan& span) const {
        throw ApacError({Severity::Error, span, file_,
                         "unsupported construct: " + what});
    }
    void check_not_rejected(const Token& t) const {
        if (t.kind == Tok::Identifier && kRejectedKeywords.count(t.text))
            unsupported("'" + t.text + "'", t.span);
    }

    SourceSpan span_from(const SourceSpan& begin) const {
        SourceSpan s = begin;
        s.end = toks_[pos_ > 0 ? pos_ - 1 : 0].span.end;
        return s;
    }
    int fresh_id() { return next_id_++; }

    // -- types --------------------------------------------------------------

    bool at_type_start() const {
        const Token& t = peek();
        if (t.is_ident("const")) return true;
        if (t.kind != Tok::Identifier) return false;
        if (is_builtin_type(t.text)) return true;
        if (class_names_.count(t.text)) {
            // Class name starts a declaration only when a declarator or a
            // name follows; `c.get()` must stay an expression.
            const Token& n = peek(1);
            return n.is(Tok::Identifier) && !kRejectedKeywords.count(n.text)
                       ? true
                       : n.is_punct("*") || n.is_punct("&");
        }
        return false;
    }

    TypeRef parse_type() {
        TypeRef type;
        if (accept_ident("const")) type.is_const = true;
        const Token& base = peek();
        check_not_rejected(base);
        if (base.kind != Tok::Identifier ||
            (!is_builtin_type(base.text) && !class_names_.count(base.text)))
            fail("expected type name before '" + describe(base) + "'");
        type.base = advance().text;
        if (accept_punct("*"))
            type.declarator = Declarator::Pointer;
        else if (accept_punct("&"))
            type.declarator = Declarator::Reference;
        if (peek().is_punct("*") || peek().is_punct("&"))
            unsupported("multi-level declarator", peek().span);
        if (peek().is_ident("const"))
            unsupported("const declarator qualifier", peek().span);
        return type;
    }

    // -- top level ----------------------------------------------------------

    TopItem parse_top_item() {
        const Token& t = peek();
        if (t.is(Tok::HashLine)) {
            TopItem item;
            item.kind = TopItemKind::Include;
            item.exact_span = t.span;
            item.include_text = t.text;
            advance();
            return item;
        }
        check_not_rejected(t);
        if (t.is_ident("class") || t.is_ident("struct")) return parse_class();
        return parse_function_or_global();
    }

    TopItem parse_class() {
        const SourceSpan begin = peek().span;
        advance();  // class/struct
        const Token& name_tok = expect_ident();
        auto cls = std::make_unique<ClassDecl>();
        cls->name = name_tok.text;
        if (peek().is_punct(":"))
            unsupported("class inheritance", peek().span);
        class_names_.insert(cls->name);
        expect_punct("{");
        while (!peek().is_punct("}")) {
            if (peek().is(Tok::Eof)) fail("unterminated class body");
            if (peek().is_ident("public") || peek().is_ident("private") ||
                peek().is_ident("protected")) {
                advance();
                expect_punct(":");
                continue;
            }
            parse_member(*cls);
        }
        expect_punct("}");
        expect_punct(";");
        cls->span = span_from(begin);
        TopItem item;
        item.kind = TopItemKind::Class;
        item.exact_span = cls->span;
        item.class_decl = std::move(cls);
        return item;
    }

    void parse_member(ClassDecl& cls) {
        const SourceSpan begin = peek().span;
        TypeRef type = parse_type();
        const Token& name_tok = expect_ident();
        check_not_rejected(name_tok);
        if (peek().is_punct("(")) {
            auto fn = std::make_unique<FunctionDecl>();
            fn->name = name_tok.text;
            fn->qualified_name = cls.name + "::" + fn->name;
            fn->return_type = type;
            fn->is_method = true;
            fn->name_span = name_tok.span;
            fn->owner = &cls;
            parse_function_rest(*fn, begin);
            cls.methods.push_back(std::move(fn));
            return;
        }
        FieldDecl field;
        field.name = name_tok.text;
        field.type = type;
        if (accept_punct("[")) {
            if (!peek().is(Tok::IntLit))
                fail("array bound must be an integer literal");
            field.type.array_len = std::stoll(advance().text);
            expect_punct("]");
        }
        if (peek().is_punct("="))
            unsupported("field initializer", peek().span);
        expect_punct(";");
        field.span = span_from(begin);
        cls.fields.push_back(std::move(field));
    }

    TopItem parse_function_or_global() {
        const SourceSpan begin = peek().span;
        TypeRef type = parse_type();
        const Token& name_tok = expect_ident();
        check_not_rejected(name_tok);
        if (peek().is_punct("(")) {
            auto fn = std::make_unique<FunctionDecl>();
            fn->name = name_tok.text;
            fn->qualified_name = fn->name;
            fn->return_type = type;
            fn->is_main = fn->name == "main";
            fn->name_span = name_tok.span;
            parse_function_rest(*fn, begin);
            TopItem item;
            item.kind = TopItemKind::Function;
            item.exact_span = fn->span;
            item.function = std::move(fn);
            return item;
        }
        auto global = std::make_unique<GlobalVarDecl>();
        global->decl.name = name_tok.text;
        global->decl.type = type;
        global->decl.name_span = name_tok.span;
        if (accept_punct("[")) {
            if (!peek().is(Tok::IntLit))
                fail("array bound must be an integer literal");
            global->decl.type.array_len = std::stoll(advance().text);
            expect_punct("]");
        }
        if (accept_punct("=")) global->decl.init = parse_expr();
        expect_punct(";");
        global->span = span_from(begin);
        TopItem item;
        item.kind = TopItemKind::GlobalVar;
        item.exact_span = global->span;
        item.global = std::move(global);
        return item;
    }

    void parse_function_rest(FunctionDecl& fn, const SourceSpan& begin) {
        expect_punct("(");
        if (!peek().is_punct(")")) {
            for (;;) {
                fn.params.push_back(parse_param());
                if (!accept_punct(",")) break;
            }
        }
        expect_punct(")");
        if (accept_ident("const")) {
            if (!fn.is_method)
                unsupported("const qualifier on a free function",
                            toks_[pos_ - 1].span);
            fn.is_const_method = true;
        }
        if (accept_punct(";")) {
            fn.is_external = true;
            fn.span = span_from(begin);
            return;
        }
        const SourceSpan body_begin = peek().span;
        fn.body = parse_block();
        fn.body_span = fn.body->span;
        (void)body_begin;
        fn.span = span_from(begin);
    }

    ParamInfo parse_param() {
        const SourceSpan begin = peek().span;
        TypeRef type = parse_type();
        ParamInfo p;
        p.base_type = type.base;
        p.is_const_qualified = type.is_const;
        p.declarator = type.declarator;
        if (peek().is(Tok::Identifier) &&
            !kRejectedKeywords.count(peek().text))
            p.name = advance().text;
        if (peek().is_punct("["))
            unsupported("array parameter (use a pointer)", peek().span);
        p.span = span_from(begin);
        return p;
    }

    // -- statements ----------------------------------------------------------

    StmtPtr parse_block() {
        const SourceSpan begin = peek().span;
        expect_punct("{");
        auto block = std::make_unique<Stmt>();
        block->kind = StmtKind::Block;
        block->node_id = fresh_id();
        while (!peek().is_punct("}")) {
            if (peek().is(Tok::Eof)) fail("unterminated block");
            block->body.push_back(parse_stmt());
        }
        expect_punct("}");
        block->span = span_from(begin);
        return block;
    }

    StmtPtr parse_braced_body(const char* context) {
        if (!peek().is_punct("{"))
            unsupported(std::string("unbraced ") + context + " body",
                        peek().span);
        return parse_block();
    }

    StmtPtr parse_stmt() {
        const Token& t = peek();
        if (t.is(Tok::HashLine))
            unsupported("preprocessor directive inside a function", t.span);
        check_not_rejected(t);
        if (t.is_punct("{")) return parse_block();
        if (t.is_punct(";")) {
            auto s = make_stmt(StmtKind::Empty, t.span);
            advance();
            s->span = span_from(t.span);
            return s;
        }
        if (t.is_ident("if")) return parse_if();
        if (t.is_ident("while")) return parse_while();
        if (t.is_ident("for")) return parse_for();
        if (t.is_ident("switch")) return parse_switch();
        if (t.is_ident("return")) return parse_return();
        if (t.is_ident("break") || t.is_ident("continue")) {
            auto s = make_stmt(t.text == "break" ? StmtKind::Break
                                                 : StmtKind::Continue,
                               t.span);
            advance();
            expect_punct(";");
            s->span = span_from(t.span);
            return s;
        }
        if (at_type_start()) return parse_decl_stmt();
        return parse_expr_like_stmt(/*need_semi=*/true);
    }

    StmtPtr make_stmt(StmtKind kind, const SourceSpan& begin) {
        auto s = std::make_unique<Stmt>();
        s->kind = kind;
        s->span = begin;
        s->node_id = fresh_id();
        return s;
    }

    StmtPtr parse_decl_stmt() {
        const SourceSpan begin = peek().span;
        auto s = make_stmt(StmtKind::Decl, begin);
        VarDeclData d;
        d.type = parse_type();
        const Token& name_tok = expect_ident();
        check_not_rejected(name_tok);
        d.name = name_tok.text;
        d.name_span = name_tok.span;
        if (accept_punct("[")) {
            if (d.type.declarator != Declarator::ByValue)
                unsupported("array of pointers/references", peek().span);
            if (!peek().is(Tok::IntLit))
                fail("array bound must be an integer literal");
            d.type.array_len = std::stoll(advance().text);
            expect_punct("]");
        }
        if (peek().is_punct(","))
            unsupported("multiple declarators in one declaration",
                        peek().span);
        if (accept_punct("=")) d.init = parse_expr();
        if (d.type.declarator == Declarator::Reference && !d.init)
            fail("reference declaration requires an initializer");
        expect_punct(";");
        s->decl = std::move(d);
        s->span = span_from(begin);
        return s;
    }

    // Assignment / compound assignment / ++ / -- / expression statement.
    // In for-steps the trailing ';' is absent.
    StmtPtr parse_expr_like_stmt(bool need_semi) {
        const SourceSpan begin = peek().span;
        if (peek().is_punct("++") || peek().is_punct("--")) {
            auto s = make_stmt(StmtKind::IncDec, begin);
            s->op = advance().text;
            s->lhs = parse_unary();
            if (need_semi) expect_punct(";");
            s->span = span_from(begin);
            return s;
        }
        ExprPtr e = parse_expr();
        const Token& t = peek();
        if (t.is_punct("=") || t.is_punct("+=") || t.is_punct("-=") ||
            t.is_punct("*=") || t.is_punct("/=") || t.is_punct("%=")) {
            auto s = make_stmt(StmtKind::Assign, begin);
            s->op = advance().text;
            s->lhs = std::move(e);
            require_lvalue(*s->lhs);
            s->rhs = parse_expr();
            if (need_semi) expect_punct(";");
            s->span = span_from(begin);
            return s;
        }
        if (t.is_punct("++") || t.is_punct("--")) {
            auto s = make_stmt(StmtKind::IncDec, begin);
            s->op = advance().text;
            s->lhs = std::move(e);
            require_lvalue(*s->lhs);
            if (need_semi) expect_punct(";");
            s->span = span_from(begin);
            return s;
        }
        auto s = make_stmt(StmtKind::ExprStmt, begin);
        s->lhs = std::move(e);
        if (need_semi) expect_punct(";");
        s->span = span_from(begin);
        return s;
    }

    void require_lvalue(const Expr& e) const {
        switch (e.kind) {
            case ExprKind::Ident:
            case ExprKind::Subscript:
            case ExprKind::Member:
                return;
            case ExprKind::Unary:
                if (e.op == "*") return;
                break;
            case ExprKind::Paren:
                require_lvalue(*e.lhs);
                return;
            default:
                break;
        }
        throw ApacError({Severity::Error, e.span, file_,
                         "assignment target is not an lvalue"});
    }

    StmtPtr parse_if() {
        const SourceSpan begin = peek().span;
        advance();
        auto s = make_stmt(StmtKind::If, begin);
        expect_punct("(");
        s->cond = parse_expr();
        expect_punct(")");
        s->then_branch = parse_braced_body("if");
        if (accept_ident("else")) {
            if (peek().is_ident("if"))
                s->else_branch = parse_if();
            else
                s->else_branch = parse_braced_body("else");
        }
        s->span = span_from(begin);
        return s;
    }

    StmtPtr parse_while() {
        const SourceSpan begin = peek().span;
        advance();
        auto s = make_stmt(StmtKind::While, begin);
        expect_punct("(");
        s->cond = parse_expr();
        expect_punct(")");
        s->loop_body = parse_braced_body("while");
        s->span = span_from(begin);
        return s;
    }

    StmtPtr parse_for() {
        const SourceSpan begin = peek().span;
        advance();
        auto s = make_stmt(StmtKind::For, begin);
        expect_punct("(");
        if (peek().is_punct(";")) {
            s->init_stmt = make_stmt(StmtKind::Empty, peek().span);
            advance();
        } else if (at_type_start()) {
            s->init_stmt = parse_decl_stmt();
        } else {
            s->init_stmt = parse_expr_like_stmt(/*need_semi=*/true);
        }
        if (!peek().is_punct(";")) s->cond = parse_expr();
        expect_punct(";");
        if (peek().is_punct(")"))
            s->step_stmt = make_stmt(StmtKind::Empty, peek().span);
        else
            s->step_stmt = parse_expr_like_stmt(/*need_semi=*/false);
        expect_punct(")");
        s->loop_body = parse_braced_body("for");
        s->span = span_from(begin);
        return s;
    }

    StmtPtr parse_switch() {
        const SourceSpan begin = peek().span;
        advance();
        auto s = make_stmt(StmtKind::Switch, begin);
        expect_punct("(");
        s->cond = parse_expr();
        expect_punct(")");
        expect_punct("{");
        while (!peek().is_punct("}")) {
            if (peek().is(Tok::Eof)) fail("unterminated switch body");
            SwitchCase sc;
            const SourceSpan case_begin = peek().span;
            if (accept_ident("case")) {
                bool neg = accept_punct("-");
                if (!peek().is(Tok::IntLit))
                    fail("case label must be an integer literal");
                sc.value = std::stoll(advance().text);
                if (neg) sc.value = -sc.value;
            } else if (accept_ident("default")) {
                sc.is_default = true;
            } else {
                fail("expected 'case' or 'default'");
            }
            expect_punct(":");
            while (!peek().is_punct("}") && !peek().is_ident("case") &&
                   !peek().is_ident("default")) {
                if (at_type_start())
                    unsupported(
                        "declaration directly inside a switch section "
                        "(wrap it in a block)",
                        peek().span);
                sc.body.push_back(parse_stmt());
            }
            sc.span = span_from(case_begin);
            s->cases.push_back(std::move(sc));
        }
        expect_punct("}");
        s->span = span_from(begin);
        return s;
    }

    StmtPtr parse_return() {
        const SourceSpan begin = peek().span;
        advance();
        auto s = make_stmt(StmtKind::Return, begin);
        if (!peek().is_punct(";")) s->ret_value = parse_expr();
        expect_punct(";");
        s->span = span_from(begin);
        return s;
    }

    // -- expressions ---------------------------------------------------------

    ExprPtr make_expr(ExprKind kind, const SourceSpan& begin) {
        auto e = std::make_unique<Expr>();
        e->kind = kind;
        e->span = begin;
        e->node_id = fresh_id();
        return e;
    }

    ExprPtr parse_expr() { return parse_binary(0); }

    struct Level {
        int prec;
        std::string_view ops[5];
    };

    ExprPtr parse_binary(int level) {
        static const Level kLevels[] = {
            {0, {"||"}},
            {1, {"&&"}},
            {2, {"==", "!="}},
            {3, {"<", "<=", ">", ">="}},
            {4, {"+", "-"}},
            {5, {"*", "/", "%"}},
        };
        constexpr int kMax = 5;
        if (level > kMax) return parse_unary();
        const SourceSpan begin = peek().span;
        ExprPtr lhs = parse_binary(level + 1);
        for (;;) {
            bool matched = false;
            for (std::string_view op : kLevels[level].ops) {
                if (!op.empty() && peek().is_punct(op)) {
                    auto e = make_expr(ExprKind::Binary, begin);
                    e->op = advance().text;
                    e->lhs = std::move(lhs);
                    e->rhs = parse_binary(level + 1);
                    e->span = span_from(begin);
                    lhs = std::move(e);
                    matched = true;
                    break;
                }
            }
            if (!matched) return lhs;
        }
    }

    ExprPtr parse_unary() {
        const Token& t = peek();
        if (t.is_punct("&") || t.is_punct("*") || t.is_punct("-") ||
            t.is_punct("!") || t.is_punct("+")) {
            const SourceSpan begin = t.span;
            auto e = make_expr(ExprKind::Unary, begin);
            e->op = advance().text;
            e->lhs = parse_unary();
            e->span = span_from(begin);
            return e;
        }
        if (t.is_punct("++") || t.is_punct("--"))
            unsupported("increment/decrement inside an expression", t.span);
        return parse_postfix();
    }

    ExprPtr parse_postfix() {
        const SourceSpan begin = peek().span;
        ExprPtr e = parse_primary();
        for (;;) {
            if (peek().is_punct("[")) {
                advance();
                auto sub = make_expr(ExprKind::Subscript, begin);
                sub->lhs = std::move(e);
                sub->index = parse_expr();
                expect_punct("]");
                sub->span = span_from(begin);
                e = std::move(sub);
                continue;
            }
            if (peek().is_punct(".")) {
                advance();
                const Token& name_tok = expect_ident();
                if (peek().is_punct("(")) {
                    auto call = make_expr(ExprKind::Call, begin);
                    call->name = name_tok.text;
                    call->lhs = std::move(e);
                    parse_args(*call);
                    call->span = span_from(begin);
                    e = std::move(call);
                } else {
                    auto mem = make_expr(ExprKind::Member, begin);
                    mem->name = name_tok.text;
                    mem->lhs = std::move(e);
                    mem->span = span_from(begin);
                    e = std::move(mem);
                }
                continue;
            }
            if (peek().is_punct("->"))
                unsupported("'->' member access (use '.' via a reference)",
                            peek().span);
            if (peek().is_punct("(")) {
                if (e->kind != ExprKind::Ident)
                    fail("call target must be a function name");
                auto call = make_expr(ExprKind::Call, begin);
                call->name = e->name;
                parse_args(*call);
                call->span = span_from(begin);
                e = std::move(call);
                continue;
            }
            return e;
        }
    }

    void parse_args(Expr& call) {
        expect_punct("(");
        if (!peek().is_punct(")")) {
            for (;;) {
                call.args.push_back(parse_expr());
                if (!accept_punct(",")) break;
            }
        }
        expect_punct(")");
    }

    ExprPtr parse_primary() {
        const Token& t = peek();
        const SourceSpan begin = t.span;
        if (t.is(Tok::IntLit)) {
            auto e = make_expr(ExprKind::IntLit, begin);
            e->int_val = std::stoll(advance().text);
            e->span = span_from(begin);
            return e;
        }
        if (t.is(Tok::FloatLit)) {
            auto e = make_expr(ExprKind::FloatLit, begin);
            e->float_val = std::stod(advance().text);
            e->span = span_from(begin);
            return e;
        }
        if (t.is_ident("true") || t.is_ident("false")) {
            auto e = make_expr(ExprKind::BoolLit, begin);
            e->bool_val = t.text == "true";
            advance();
            e->span = span_from(begin);
            return e;
        }
        if (t.is_punct("(")) {
            advance();
            auto e = make_expr(ExprKind::Paren, begin);
            e->lhs = parse_expr();
            expect_punct(")");
            e->span = span_from(begin);
            return e;
        }
        if (t.is_punct("["))
            unsupported("lambda expression", t.span);
        if (t.is(Tok::Identifier)) {
            check_not_rejected(t);
            std::string name = advance().text;
            while (peek().is_punct("::")) {
                if (name != "std" && name.rfind("std::", 0) != 0)
                    unsupported("qualified name outside std::", peek().span);
                advance();
                name += "::" + expect_ident().text;
            }
            auto e = make_expr(ExprKind::Ident, begin);
            e->name = std::move(name);
            e->span = span_from(begin);
            return e;
        }
        fail("expected expression before '" + describe(t) + "'");
    }
};

}  // namespace

std::unique_ptr<TranslationUnit> parse_translation_unit(
    const std::string& source, const std::string& file) {
    validate_utf8(source, file);
    return Parser(source, file).run();
}

}  // namespace apac
