#include "apac/frontend.hpp"

#include <algorithm>
#include <functional>

namespace apac {

namespace {

void add_unique(std::vector<std::string>& out, const std::string& name) {
    if (name.find("::") != std::string::npos) return;
    if (std::find(out.begin(), out.end(), name) == out.end())
        out.push_back(name);
}

}  // namespace

void collect_vars(const Expr& e, std::vector<std::string>& out) {
    switch (e.kind) {
        case ExprKind::Ident:
            add_unique(out, e.name);
            return;
        case ExprKind::Subscript:
            collect_vars(*e.lhs, out);
            collect_vars(*e.index, out);
            return;
        case ExprKind::Member:
        case ExprKind::Unary:
        case ExprKind::Paren:
            collect_vars(*e.lhs, out);
            return;
        case ExprKind::Binary:
            collect_vars(*e.lhs, out);
            collect_vars(*e.rhs, out);
            return;
        case ExprKind::Call:
            if (e.lhs) collect_vars(*e.lhs, out);
            for (const auto& a : e.args) collect_vars(*a, out);
            return;
        default:
            return;
    }
}

void collect_subscript_index_vars(const Expr& e,
                                  std::vector<std::string>& out) {
    switch (e.kind) {
        case ExprKind::Subscript:
            collect_vars(*e.index, out);
            collect_subscript_index_vars(*e.lhs, out);
            collect_subscript_index_vars(*e.index, out);
            return;
        case ExprKind::Member:
        case ExprKind::Unary:
        case ExprKind::Paren:
            collect_subscript_index_vars(*e.lhs, out);
            return;
        case ExprKind::Binary:
            collect_subscript_index_vars(*e.lhs, out);
            collect_subscript_index_vars(*e.rhs, out);
            return;
        case ExprKind::Call:
            if (e.lhs) collect_subscript_index_vars(*e.lhs, out);
            for (const auto& a : e.args)
                collect_subscript_index_vars(*a, out);
            return;
        default:
            return;
    }
}

std::string lvalue_base_var(const Expr& e) {
    switch (e.kind) {
        case ExprKind::Ident:
            return e.name;
        case ExprKind::Subscript:
        case ExprKind::Member:
        case ExprKind::Unary:
        case ExprKind::Paren:
            return e.lhs ? lvalue_base_var(*e.lhs) : std::string();
        default:
            return {};
    }
}

const FunctionDecl* UnitIndex::resolve_free(const std::string& name,
                                            size_t arity) const {
    auto it = free_by_name.find(name);
    if (it == free_by_name.end()) return nullptr;
    const FunctionDecl* match = nullptr;
    for (const FunctionDecl* f : it->second) {
        if (f->params.size() != arity) continue;
        // Prefer a definition over a bare declaration of the same signature.
        if (!match || (match->is_external && !f->is_external)) match = f;
    }
    return match;
}

const FunctionDecl* UnitIndex::resolve_method(const std::string& class_name,
                                              const std::string& method,
                                              size_t arity) const {
    auto it = classes.find(class_name);
    if (it == classes.end()) return nullptr;
    for (const auto& m : it->second->methods)
        if (m->name == method && m->params.size() == arity) return m.get();
    return nullptr;
}

namespace {

void reject_calls_in_global_init(const Expr& e, const std::string& file) {
    if (e.kind == ExprKind::Call)
        throw ApacError({Severity::Error, e.span, file,
                         "unsupported construct: call in a global "
                         "initializer"});
    if (e.lhs) reject_calls_in_global_init(*e.lhs, file);
    if (e.rhs) reject_calls_in_global_init(*e.rhs, file);
    if (e.index) reject_calls_in_global_init(*e.index, file);
    for (const auto& a : e.args) reject_calls_in_global_init(*a, file);
}

}  // namespace

UnitIndex build_index(const TranslationUnit& unit) {
    UnitIndex index;
    index.unit = &unit;
    index.functions = unit.functions();
    int mains = 0;
    for (const FunctionDecl* f : index.functions) {
        if (f->is_main && !f->is_external) ++mains;
        if (!f->is_method)
            index.free_by_name[f->name].push_back(f);
    }
    if (mains > 1)
        index.diagnostics.error({}, unit.file,
                                "multiple definitions of main");
    for (const ClassDecl* c : unit.classes()) {
        if (!index.classes.emplace(c->name, c).second)
            index.diagnostics.error(c->span, unit.file,
                                    "duplicate class '" + c->name + "'");
    }
    for (const GlobalVarDecl* g : unit.globals()) {
        index.globals[g->decl.name] = g;
        if (g->decl.init) reject_calls_in_global_init(*g->decl.init, unit.file);
    }
    // Same-name same-arity free function definitions collide.
    for (auto& [name, fns] : index.free_by_name) {
        for (size_t i = 0; i < fns.size(); ++i)
            for (size_t j = i + 1; j < fns.size(); ++j)
                if (fns[i]->params.size() == fns[j]->params.size() &&
                    !fns[i]->is_external && !fns[j]->is_external)
                    index.diagnostics.error(
                        fns[j]->span, unit.file,
                        "redefinition of '" + name + "' with the same arity");
    }
    return index;
}

std::vector<FunctionDecl*> enumerate_functions(const TranslationUnit& unit) {
    return unit.functions();
}

namespace {

// Walks one function body in source order tracking variable types so method
// receivers resolve, and collects call sites innermost-first per statement.
class CallSiteCollector {
public:
    CallSiteCollector(const UnitIndex& index, const FunctionDecl& fn)
        : index_(index), fn_(fn) {}

    std::vector<CallSiteInfo> run() {
        scopes_.emplace_back();
        for (const auto& [name, g] : index_.globals)
            scopes_.back()[name] = g->decl.type;
        if (fn_.is_method && fn_.owner) {
            scopes_.emplace_back();
            for (const auto& f : fn_.owner->fields)
                scopes_.back()[f.name] = f.type;
        }
        scopes_.emplace_back();
        for (const auto& p : fn_.params) {
            TypeRef t;
            t.base = p.base_type;
            t.is_const = p.is_const_qualified;
            t.declarator = p.declarator;
            scopes_.back()[p.name] = t;
        }
        if (fn_.body) walk_stmt(*fn_.body);
        return std::move(sites_);
    }

private:
    const UnitIndex& index_;
    const FunctionDecl& fn_;
    std::vector<CallSiteInfo> sites_;
    std::vector<std::map<std::string, TypeRef>> scopes_;

    const TypeRef* lookup(const std::string& name) const {
        for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
            auto found = it->find(name);
            if (found != it->end()) return &found->second;
        }
        return nullptr;
    }

    void walk_stmt(const Stmt& s) {
        switch (s.kind) {
            case StmtKind::Block: {
                scopes_.emplace_back();
                for (const auto& child : s.body) walk_stmt(*child);
                scopes_.pop_back();
                return;
            }
            case StmtKind::Decl: {
                if (s.decl->init) {
                    const bool pure =
                        s.decl->init->kind == ExprKind::Call;
                    if (pure &&
                        s.decl->type.declarator == Declarator::Reference)
                        throw ApacError(
                            {Severity::Error, s.span, index_.unit->file,
                             "unsupported construct: reference bound "
                             "directly to a call result"});
                    walk_expr(*s.decl->init, s,
                              pure ? CallPosition::PureInit
                                   : CallPosition::Nested,
                              s.decl->name, s.decl->type.is_const);
                }
                scopes_.back()[s.decl->name] = s.decl->type;
                return;
            }
            case StmtKind::Assign: {
                walk_expr(*s.lhs, s, CallPosition::Nested);
                const bool pure = s.op == "=" &&
                                  s.rhs->kind == ExprKind::Call &&
                                  s.lhs->kind == ExprKind::Ident;
                walk_expr(*s.rhs, s,
                          pure ? CallPosition::PureAssign
                               : CallPosition::Nested,
                          pure ? s.lhs->name : std::string());
                return;
            }
            case StmtKind::IncDec:
                walk_expr(*s.lhs, s, CallPosition::Nested);
                return;
            case StmtKind::ExprStmt: {
                const bool pure = s.lhs->kind == ExprKind::Call;
                walk_expr(*s.lhs, s,
                          pure ? CallPosition::Statement
                               : CallPosition::Nested);
                return;
            }
            case StmtKind::If:
                walk_expr(*s.cond, s, CallPosition::Nested);
                walk_stmt(*s.then_branch);
                if (s.else_branch) walk_stmt(*s.else_branch);
                return;
            case StmtKind::While:
                walk_expr(*s.cond, s, CallPosition::Nested);
                walk_stmt(*s.loop_body);
                return;
            case StmtKind::For: {
                scopes_.emplace_back();
                walk_stmt(*s.init_stmt);
                if (s.cond) walk_expr(*s.cond, s, CallPosition::Nested);
                walk_stmt(*s.loop_body);
                walk_stmt(*s.step_stmt);
                scopes_.pop_back();
                return;
            }
            case StmtKind::Switch:
                walk_expr(*s.cond, s, CallPosition::Nested);
                for (const auto& c : s.cases)
                    for (const auto& child : c.body) walk_stmt(*child);
                return;
            case StmtKind::Return:
                if (s.ret_value)
                    walk_expr(*s.ret_value, s, CallPosition::Nested);
                return;
            default:
                return;
        }
    }

    // Post-order walk: nested calls are reported before the enclosing call.
    // top_position applies only to `top` itself.
    void walk_expr(const Expr& e, const Stmt& stmt, CallPosition top_position,
                   const std::string& bind_name = {},
                   bool bind_const = false) {
        walk_expr_inner(e, stmt, &e, top_position, bind_name, bind_const);
    }

    void walk_expr_inner(const Expr& e, const Stmt& stmt, const Expr* top,
                         CallPosition top_position,
                         const std::string& bind_name, bool bind_const) {
        const bool skip_args =
            e.kind == ExprKind::Call && e.is_std_qualified();
        if (!skip_args) {
            if (e.lhs)
                walk_expr_inner(*e.lhs, stmt, top, top_position, bind_name,
                                bind_const);
            if (e.index)
                walk_expr_inner(*e.index, stmt, top, top_position, bind_name,
                                bind_const);
            if (e.rhs)
                walk_expr_inner(*e.rhs, stmt, top, top_position, bind_name,
                                bind_const);
            for (const auto& a : e.args)
                walk_expr_inner(*a, stmt, top, top_position, bind_name,
                                bind_const);
        }
        if (e.kind != ExprKind::Call) return;
        sites_.push_back(
            make_site(e, stmt, &e == top ? top_position : CallPosition::Nested,
                      bind_name, bind_const));
    }

    CallSiteInfo make_site(const Expr& e, const Stmt& stmt,
                           CallPosition position, const std::string& bind_name,
                           bool bind_const) {
        CallSiteInfo site;
        site.call = &e;
        site.stmt = &stmt;
        site.stmt_span = stmt.span;
        site.callee_name = e.name;
        site.position = position;
        if (e.is_std_qualified()) {
            site.is_std_or_external = true;
        } else if (e.is_method_call()) {
            site.is_method_call = true;
            if (e.lhs->kind == ExprKind::Ident) {
                site.receiver_var = e.lhs->name;
                if (const TypeRef* t = lookup(e.lhs->name))
                    site.callee = index_.resolve_method(t->base, e.name,
                                                        e.args.size());
            }
            site.is_std_or_external = site.callee == nullptr ||
                                      site.callee->is_external;
            if (site.callee)
                site.callee_name = site.callee->qualified_name;
        } else {
            site.callee = index_.resolve_free(e.name, e.args.size());
            site.is_std_or_external =
                site.callee == nullptr || site.callee->is_external;
        }
        for (const auto& a : e.args) {
            ArgInfo info;
            info.expr = a.get();
            collect_vars(*a, info.vars);
            collect_subscript_index_vars(*a, info.subscript_index_vars);
            site.args.push_back(std::move(info));
        }
        switch (position) {
            case CallPosition::PureAssign:
                site.result = {ResultBinding::Kind::ExistingVar, bind_name,
                               false};
                break;
            case CallPosition::PureInit:
                site.result = {ResultBinding::Kind::FreshDecl, bind_name,
                               bind_const};
                break;
            default:
                break;
        }
        return site;
    }
};

}  // namespace

std::vector<CallSiteInfo> enumerate_call_sites(const UnitIndex& index,
                                               const FunctionDecl& fn) {
    return CallSiteCollector(index, fn).run();
}

}  // namespace apac
