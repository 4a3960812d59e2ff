#include "apac/access_analysis.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <tuple>

#include "apac/lexer.hpp"

namespace apac {

void DependClause::add(const std::string& var, AccessMode mode) {
    auto in_it = std::find(in.begin(), in.end(), var);
    auto io_it = std::find(inout.begin(), inout.end(), var);
    if (mode == AccessMode::InOut) {
        if (io_it != inout.end()) return;
        if (in_it != in.end()) in.erase(in_it);
        inout.push_back(var);
    } else {
        if (io_it != inout.end() || in_it != in.end()) return;
        in.push_back(var);
    }
}

bool DependClause::mentions(const std::string& var) const {
    return std::find(in.begin(), in.end(), var) != in.end() ||
           std::find(inout.begin(), inout.end(), var) != inout.end();
}

std::vector<std::string> DependClause::all_vars() const {
    std::vector<std::string> out = in;
    out.insert(out.end(), inout.begin(), inout.end());
    return out;
}

AccessMode classify_parameter(const ParamInfo& p) {
    if (p.declarator == Declarator::ByValue || p.is_const_qualified)
        return AccessMode::In;
    return AccessMode::InOut;
}

namespace {

// The variable written through when an argument feeds a non-const
// reference/pointer parameter: the lvalue path root, or the first referenced
// variable for pointer arithmetic like `data + i`.
std::string written_base(const Expr& expr,
                         const std::vector<std::string>& vars) {
    std::string base = lvalue_base_var(expr);
    if (base.empty() && !vars.empty()) base = vars.front();
    return base;
}

void add_argument(DependClause& clause, AccessMode mode, const Expr& expr,
                  const std::vector<std::string>& vars) {
    if (mode == AccessMode::InOut) {
        std::string base = written_base(expr, vars);
        if (!base.empty()) clause.add(base, AccessMode::InOut);
        for (const auto& v : vars)
            if (v != base) clause.add(v, AccessMode::In);
    } else {
        for (const auto& v : vars) clause.add(v, AccessMode::In);
    }
}

}  // namespace

DependClause classify_call(const CallSiteInfo& site) {
    if (site.callee && site.callee->params.size() != site.args.size()) {
        throw ApacError({Severity::Error, site.call->span, "",
                         "arity mismatch calling '" + site.callee_name + "'"});
    }
    DependClause clause;
    if (site.is_method_call && !site.receiver_var.empty()) {
        const bool ro = site.callee && site.callee->is_const_method;
        clause.add(site.receiver_var, ro ? AccessMode::In : AccessMode::InOut);
    }
    for (size_t i = 0; i < site.args.size(); ++i) {
        AccessMode mode = AccessMode::InOut;
        if (site.callee) mode = classify_parameter(site.callee->params[i]);
        add_argument(clause, mode, *site.args[i].expr, site.args[i].vars);
    }
    if (site.result.kind != ResultBinding::Kind::None)
        clause.add(site.result.name, AccessMode::InOut);
    return clause;
}

bool find_index_dependencies(const CallSiteInfo& site,
                             const std::vector<DependClause>& pending) {
    for (const auto& arg : site.args) {
        for (const auto& idx : arg.subscript_index_vars) {
            for (const auto& cl : pending) {
                if (std::find(cl.inout.begin(), cl.inout.end(), idx) !=
                    cl.inout.end())
                    return true;
            }
        }
    }
    return false;
}

// ---------------------------------------------------------------------------
// Global taint
// ---------------------------------------------------------------------------

namespace {

// Scope-aware search for references to globals inside one function body.
class GlobalRefScanner {
public:
    GlobalRefScanner(const UnitIndex& index, const FunctionDecl& fn)
        : index_(index), fn_(fn) {}

    std::vector<std::string> run() {
        scopes_.emplace_back();
        if (fn_.is_method && fn_.owner)
            for (const auto& f : fn_.owner->fields)
                scopes_.back().insert(f.name);
        scopes_.emplace_back();
        for (const auto& p : fn_.params) scopes_.back().insert(p.name);
        if (fn_.body) walk_stmt(*fn_.body);
        return {hits_.begin(), hits_.end()};
    }

private:
    const UnitIndex& index_;
    const FunctionDecl& fn_;
    std::vector<std::set<std::string>> scopes_;
    std::set<std::string> hits_;

    bool shadowed(const std::string& name) const {
        for (const auto& s : scopes_)
            if (s.count(name)) return true;
        return false;
    }

    void walk_expr(const Expr& e) {
        if (e.kind == ExprKind::Ident && index_.globals.count(e.name) &&
            !shadowed(e.name))
            hits_.insert(e.name);
        if (e.lhs) walk_expr(*e.lhs);
        if (e.index) walk_expr(*e.index);
        if (e.rhs) walk_expr(*e.rhs);
        for (const auto& a : e.args) walk_expr(*a);
    }

    void walk_stmt(const Stmt& s) {
        switch (s.kind) {
            case StmtKind::Block:
                scopes_.emplace_back();
                for (const auto& c : s.body) walk_stmt(*c);
                scopes_.pop_back();
                return;
            case StmtKind::Decl:
                if (s.decl->init) walk_expr(*s.decl->init);
                scopes_.back().insert(s.decl->name);
                return;
            case StmtKind::Assign:
                walk_expr(*s.lhs);
                walk_expr(*s.rhs);
                return;
            case StmtKind::IncDec:
            case StmtKind::ExprStmt:
                walk_expr(*s.lhs);
                return;
            case StmtKind::If:
                walk_expr(*s.cond);
                walk_stmt(*s.then_branch);
                if (s.else_branch) walk_stmt(*s.else_branch);
                return;
            case StmtKind::While:
                walk_expr(*s.cond);
                walk_stmt(*s.loop_body);
                return;
            case StmtKind::For:
                scopes_.emplace_back();
                walk_stmt(*s.init_stmt);
                if (s.cond) walk_expr(*s.cond);
                walk_stmt(*s.step_stmt);
                walk_stmt(*s.loop_body);
                scopes_.pop_back();
                return;
            case StmtKind::Switch:
                walk_expr(*s.cond);
                for (const auto& c : s.cases)
                    for (const auto& b : c.body) walk_stmt(*b);
                return;
            case StmtKind::Return:
                if (s.ret_value) walk_expr(*s.ret_value);
                return;
            default:
                return;
        }
    }
};

}  // namespace

std::set<std::string> find_global_tainted(const UnitIndex& index,
                                          DiagnosticList& diags) {
    std::set<std::string> tainted;
    if (index.globals.empty()) return tainted;

    std::map<std::string, std::vector<std::string>> callers_of;
    for (const FunctionDecl* fn : index.functions) {
        if (!fn->body) continue;
        GlobalRefScanner scanner(index, *fn);
        auto globals = scanner.run();
        if (!globals.empty()) {
            tainted.insert(fn->qualified_name);
            diags.warning(fn->name_span, index.unit->file,
                          "'" + fn->qualified_name + "' references global '" +
                              globals.front() + "' and will not be taskified");
        }
        for (const auto& site : enumerate_call_sites(index, *fn))
            if (site.callee)
                callers_of[site.callee->qualified_name].push_back(
                    fn->qualified_name);
    }

    // Callers of tainted functions are tainted too.
    std::vector<std::string> work(tainted.begin(), tainted.end());
    while (!work.empty()) {
        std::string cur = work.back();
        work.pop_back();
        for (const auto& caller : callers_of[cur]) {
            if (tainted.insert(caller).second) {
                work.push_back(caller);
                const FunctionDecl* fn = nullptr;
                for (const FunctionDecl* f : index.functions)
                    if (f->qualified_name == caller) fn = f;
                diags.warning(fn ? fn->name_span : SourceSpan{},
                              index.unit->file,
                              "'" + caller +
                                  "' reaches a global through a callee and "
                                  "will not be taskified");
            }
        }
    }
    return tainted;
}

// ---------------------------------------------------------------------------
// Unit-wide generated-name allocation
// ---------------------------------------------------------------------------

namespace {

class NameAllocator {
public:
    explicit NameAllocator(const TranslationUnit& unit) {
        for (const auto& tok :
             lex(unit.source, unit.file, LexMode::Program)) {
            if (tok.kind == Tok::Identifier) used_.insert(tok.text);
        }
    }

    std::string pick(const std::string& base) {
        std::string candidate = base;
        for (int k = 2; used_.count(candidate); ++k)
            candidate = base + "_" + std::to_string(k);
        used_.insert(candidate);
        return candidate;
    }

    std::string pick_tmp(const std::string& base) {
        std::string candidate;
        do {
            candidate = base + "_" + std::to_string(++tmp_counter_);
        } while (used_.count(candidate));
        used_.insert(candidate);
        return candidate;
    }

private:
    std::set<std::string> used_;
    int tmp_counter_ = 0;
};

// ---------------------------------------------------------------------------
// Per-function analysis
// ---------------------------------------------------------------------------

struct SiteData {
    bool taskifiable = false;
    bool inline_user_call = false;  // resolved user call left inline
    bool hoisted = false;
    std::string temp;
    std::vector<std::vector<std::string>> arg_vars;  // hoist-substituted
    std::vector<std::string> idx_vars;               // union, substituted
    DependClause depend;
    DependClause depend_canon;
    std::vector<std::string> firstprivates;
    std::string result_decl_type;
};

struct DeclInfo {
    const Stmt* stmt = nullptr;
    std::string name;
    bool is_alias = false;
    bool used_by_task = false;
};

struct WalkScope {
    const Stmt* block = nullptr;  // null for for-header pseudo scopes
    bool promotable = false;
    std::vector<DeclInfo> decls;
};

struct SyncKey {
    int stmt_id = 0;
    int slot = 0;  // hoist ordinal, kHostSlot before the statement, -1 body end
    bool operator<(const SyncKey& o) const {
        return std::tie(stmt_id, slot) < std::tie(o.stmt_id, o.slot);
    }
};

constexpr int kHostSlot = 1 << 20;

class FunctionAnalyzer {
public:
    FunctionAnalyzer(const UnitIndex& index, const AnalysisOptions& opts,
                     const std::set<std::string>& tainted,
                     NameAllocator& names, const GeneratedNames& gen,
                     FunctionPlan& fp)
        : index_(index),
          opts_(opts),
          tainted_(tainted),
          names_(names),
          gen_(gen),
          fp_(fp) {}

    void run() {
        fp_.sites = enumerate_call_sites(index_, *fp_.fn);
        for (size_t i = 0; i < fp_.sites.size(); ++i)
            sites_by_stmt_[fp_.sites[i].stmt->node_id].push_back(i);

        collect_header_stmts(*fp_.fn->body);
        scan_returns();
        classify_taskifiable();

        bool any = false;
        for (const auto& sd : site_data_) any = any || sd.taskifiable;
        if (!any) {
            fp_.needs_taskgroup = false;
            fp_.returns = ReturnPlan{};
            return;
        }
        fp_.needs_taskgroup = true;
        scan_aliases(*fp_.fn->body);
        build_depends();
        finalize_return_names();

        // Discover sync points to a fixed point, then record the plan.
        const int cap = 4 + static_cast<int>(sync_keys_.size()) + 64;
        for (int iter = 0; iter < cap; ++iter) {
            changed_ = false;
            walk_function(false);
            if (!changed_) break;
        }
        walk_function(true);
    }

private:
    const UnitIndex& index_;
    const AnalysisOptions& opts_;
    const std::set<std::string>& tainted_;
    NameAllocator& names_;
    const GeneratedNames& gen_;
    FunctionPlan& fp_;

    std::map<int, std::vector<size_t>> sites_by_stmt_;
    std::set<int> header_stmts_;  // for-init and for-step statements
    std::vector<SiteData> site_data_;
    std::map<SyncKey, SyncReason> sync_keys_;
    bool changed_ = false;

    // walk state
    std::vector<DependClause> pending_;
    std::vector<WalkScope> scopes_;
    bool recording_ = false;

    // ----- structural pre-passes -----

    void collect_header_stmts(const Stmt& s) {
        if (s.kind == StmtKind::For) {
            header_stmts_.insert(s.init_stmt->node_id);
            header_stmts_.insert(s.step_stmt->node_id);
        }
        for_each_child(s, [&](const Stmt& c) { collect_header_stmts(c); });
    }

    static void for_each_child(const Stmt& s,
                               const std::function<void(const Stmt&)>& f) {
        if (s.init_stmt) f(*s.init_stmt);
        if (s.step_stmt) f(*s.step_stmt);
        if (s.then_branch) f(*s.then_branch);
        if (s.else_branch) f(*s.else_branch);
        if (s.loop_body) f(*s.loop_body);
        for (const auto& c : s.body) f(*c);
        for (const auto& sc : s.cases)
            for (const auto& c : sc.body) f(*c);
    }

    void collect_returns(const Stmt& s, std::vector<const Stmt*>& out) {
        if (s.kind == StmtKind::Return) out.push_back(&s);
        for_each_child(s, [&](const Stmt& c) { collect_returns(c, out); });
    }

    void collect_decl_names(const Stmt& s, std::set<std::string>& out) {
        if (s.kind == StmtKind::Decl) out.insert(s.decl->name);
        for_each_child(s, [&](const Stmt& c) { collect_decl_names(c, out); });
    }

    void scan_returns() {
        std::vector<const Stmt*> returns;
        collect_returns(*fp_.fn->body, returns);
        ReturnPlan& rp = fp_.returns;
        if (returns.empty()) {
            rp.mode = ReturnMode::NoRewrite;
            return;
        }
        const Stmt* trailing = fp_.fn->body->body.empty()
                                   ? nullptr
                                   : fp_.fn->body->body.back().get();
        if (returns.size() == 1 && trailing == returns.front()) {
            std::set<std::string> declared;
            collect_decl_names(*fp_.fn->body, declared);
            std::vector<std::string> used;
            if (trailing->ret_value) collect_vars(*trailing->ret_value, used);
            bool touches_local = false;
            for (const auto& v : used)
                if (declared.count(v)) touches_local = true;
            if (!touches_local) {
                rp.mode = ReturnMode::TrailingKept;
                rp.trailing_stmt_id = trailing->node_id;
                return;
            }
        }
        rp.mode = ReturnMode::Full;
        for (const Stmt* r : returns) rp.return_stmt_ids.push_back(r->node_id);
        rp.emit_label = true;
    }

    void finalize_return_names() {
        ReturnPlan& rp = fp_.returns;
        if (rp.mode != ReturnMode::Full) return;
        if (fp_.fn->return_type.base != "void" ||
            fp_.fn->return_type.declarator != Declarator::ByValue)
            rp.result_var = gen_.res;
        std::string label_name = fp_.fn->qualified_name;
        for (auto& ch : label_name)
            if (ch == ':') ch = '_';
        rp.end_label = names_.pick(gen_.label_base + "_" + label_name);
    }

    void scan_aliases(const Stmt& s) {
        if (s.kind == StmtKind::Decl && s.decl->init &&
            !s.decl->type.is_array()) {
            const Expr* init = s.decl->init.get();
            while (init->kind == ExprKind::Paren) init = init->lhs.get();
            if (s.decl->type.declarator == Declarator::Reference) {
                if (init->kind == ExprKind::Ident) {
                    fp_.alias_roots[s.decl->name] = init->name;
                } else if (init->kind == ExprKind::Unary && init->op == "*" &&
                           init->lhs->kind == ExprKind::Ident) {
                    fp_.alias_roots[s.decl->name] = init->lhs->name;
                } else if (init->kind != ExprKind::Call) {
                    throw ApacError(
                        {Severity::Error, s.span, index_.unit->file,
                         "unsupported construct: reference initializer must "
                         "be a variable or a dereferenced pointer"});
                }
            } else if (s.decl->type.declarator == Declarator::Pointer &&
                       !pointer_reassigned(s.decl->name)) {
                std::string root = alias_root_of_pointer_init(*init);
                if (!root.empty()) fp_.alias_roots[s.decl->name] = root;
            }
        }
        for_each_child(s, [&](const Stmt& c) { scan_aliases(c); });
    }

    static std::string alias_root_of_pointer_init(const Expr& init) {
        switch (init.kind) {
            case ExprKind::Ident:
                return init.name;
            case ExprKind::Paren:
                return alias_root_of_pointer_init(*init.lhs);
            case ExprKind::Unary:
                if (init.op == "&") return lvalue_base_var(*init.lhs);
                return {};
            case ExprKind::Binary: {
                if (init.op != "+" && init.op != "-") return {};
                std::string left = alias_root_of_pointer_init(*init.lhs);
                if (!left.empty()) return left;
                return alias_root_of_pointer_init(*init.rhs);
            }
            default:
                return {};
        }
    }

    bool pointer_reassigned(const std::string& name) {
        bool hit = false;
        std::function<void(const Stmt&)> walk = [&](const Stmt& s) {
            if ((s.kind == StmtKind::Assign || s.kind == StmtKind::IncDec) &&
                s.lhs->kind == ExprKind::Ident && s.lhs->name == name)
                hit = true;
            for_each_child(s, walk);
        };
        walk(*fp_.fn->body);
        return hit;
    }

    std::string canonical(const std::string& name) const {
        std::string cur = name;
        for (size_t hops = 0; hops <= fp_.alias_roots.size(); ++hops) {
            auto it = fp_.alias_roots.find(cur);
            if (it == fp_.alias_roots.end()) return cur;
            cur = it->second;
        }
        return cur;
    }

    bool excluded(const FunctionDecl& callee) const {
        for (const auto& e : opts_.exclude_functions)
            if (e == callee.name || e == callee.qualified_name) return true;
        return false;
    }

    // ----- site classification and hoisting -----

    void classify_taskifiable() {
        site_data_.resize(fp_.sites.size());
        for (size_t i = 0; i < fp_.sites.size(); ++i) {
            const CallSiteInfo& site = fp_.sites[i];
            SiteData& sd = site_data_[i];
            bool resolved_user = site.callee && !site.is_std_or_external;
            if (!resolved_user) continue;
            bool ok = !tainted_.count(site.callee->qualified_name) &&
                      !excluded(*site.callee) &&
                      !header_stmts_.count(site.stmt->node_id) &&
                      site.stmt->node_id != fp_.returns.trailing_stmt_id;
            if (ok) {
                switch (site.position) {
                    case CallPosition::Statement:
                    case CallPosition::PureAssign:
                    case CallPosition::PureInit:
                        sd.taskifiable = true;
                        break;
                    case CallPosition::Nested:
                        switch (site.stmt->kind) {
                            case StmtKind::Decl:
                            case StmtKind::Assign:
                            case StmtKind::IncDec:
                            case StmtKind::ExprStmt:
                                sd.taskifiable = sd.hoisted = true;
                                break;
                            case StmtKind::Return:
                                sd.taskifiable = sd.hoisted =
                                    fp_.returns.mode == ReturnMode::Full;
                                break;
                            default:
                                break;
                        }
                        break;
                }
            }
            if (!sd.taskifiable) sd.inline_user_call = true;
        }
    }

    void build_depends() {
        std::map<int, std::string> temp_of_call;
        for (size_t i = 0; i < fp_.sites.size(); ++i) {
            const CallSiteInfo& site = fp_.sites[i];
            SiteData& sd = site_data_[i];
            if (!sd.taskifiable) continue;
            if (sd.hoisted) {
                sd.temp = names_.pick_tmp(gen_.tmp_base);
                temp_of_call[site.call->node_id] = sd.temp;
                TypeRef t = site.callee->return_type;
                t.is_const = false;
                sd.result_decl_type = t.spelling();
            } else if (site.result.kind == ResultBinding::Kind::FreshDecl) {
                TypeRef t = site.stmt->decl->type;
                t.is_const = false;
                sd.result_decl_type = t.spelling();
            }
        }

        // Depend clauses over hoist-substituted argument variables.
        for (size_t i = 0; i < fp_.sites.size(); ++i) {
            const CallSiteInfo& site = fp_.sites[i];
            SiteData& sd = site_data_[i];
            if (!sd.taskifiable) continue;

            sd.arg_vars.resize(site.args.size());
            for (size_t a = 0; a < site.args.size(); ++a) {
                subst_vars(*site.args[a].expr, site.call->node_id,
                           temp_of_call, sd.arg_vars[a]);
                subst_idx_vars(*site.args[a].expr, temp_of_call, sd.idx_vars);
            }

            DependClause& clause = sd.depend;
            if (site.is_method_call && !site.receiver_var.empty()) {
                const bool ro = site.callee->is_const_method;
                clause.add(site.receiver_var,
                           ro ? AccessMode::In : AccessMode::InOut);
            }
            for (size_t a = 0; a < site.args.size(); ++a) {
                AccessMode mode = classify_parameter(site.callee->params[a]);
                add_argument(clause, mode, *site.args[a].expr,
                             sd.arg_vars[a]);
            }
            if (sd.hoisted) {
                clause.add(sd.temp, AccessMode::InOut);
            } else if (site.result.kind != ResultBinding::Kind::None) {
                clause.add(site.result.name, AccessMode::InOut);
            }

            for (const auto& v : clause.in)
                sd.depend_canon.add(canonical(v), AccessMode::In);
            for (const auto& v : clause.inout)
                sd.depend_canon.add(canonical(v), AccessMode::InOut);
            for (const auto& v : clause.all_vars())
                if (fp_.alias_roots.count(v)) sd.firstprivates.push_back(v);
        }
    }

    // Variables of an expression with hoisted sub-calls replaced by their
    // temporaries; `self` keeps the walked call from swallowing itself.
    void subst_vars(const Expr& e, int self,
                    const std::map<int, std::string>& temps,
                    std::vector<std::string>& out) const {
        if (e.node_id != self) {
            auto it = temps.find(e.node_id);
            if (it != temps.end()) {
                if (std::find(out.begin(), out.end(), it->second) == out.end())
                    out.push_back(it->second);
                return;
            }
        }
        if (e.kind == ExprKind::Ident) {
            if (e.name.find("::") == std::string::npos &&
                std::find(out.begin(), out.end(), e.name) == out.end())
                out.push_back(e.name);
            return;
        }
        if (e.kind == ExprKind::Call && e.is_std_qualified()) return;
        if (e.lhs) subst_vars(*e.lhs, self, temps, out);
        if (e.index) subst_vars(*e.index, self, temps, out);
        if (e.rhs) subst_vars(*e.rhs, self, temps, out);
        for (const auto& a : e.args) subst_vars(*a, self, temps, out);
    }

    void subst_idx_vars(const Expr& e,
                        const std::map<int, std::string>& temps,
                        std::vector<std::string>& out) const {
        if (e.kind == ExprKind::Subscript) {
            subst_vars(*e.index, -1, temps, out);
            subst_idx_vars(*e.lhs, temps, out);
            subst_idx_vars(*e.index, temps, out);
            return;
        }
        if (temps.count(e.node_id)) return;
        if (e.lhs) subst_idx_vars(*e.lhs, temps, out);
        if (e.index) subst_idx_vars(*e.index, temps, out);
        if (e.rhs) subst_idx_vars(*e.rhs, temps, out);
        for (const auto& a : e.args) subst_idx_vars(*a, temps, out);
    }

    // ----- the ordered walk -----

    void walk_function(bool recording) {
        recording_ = recording;
        pending_.clear();
        scopes_.clear();
        WalkScope top;
        top.block = fp_.fn->body.get();
        top.promotable = false;
        scopes_.push_back(std::move(top));
        for (const auto& c : fp_.fn->body->body) walk_stmt(*c);
        scopes_.pop_back();
    }

    StmtPlanEntry& entry(int stmt_id) { return fp_.stmt_plans[stmt_id]; }

    void record_sync(const Stmt& anchor, int slot, SyncReason reason) {
        SyncKey key{anchor.node_id, slot};
        auto it = sync_keys_.find(key);
        if (it == sync_keys_.end()) {
            sync_keys_.emplace(key, reason);
            changed_ = true;
        }
        pending_.clear();
        if (recording_) {
            SyncPointInfo info;
            info.reason = sync_keys_.at(key);
            info.stmt_id = anchor.node_id;
            info.at_body_end = slot == -1;
            if (slot == -1) {
                const Stmt* body = anchor.loop_body.get();
                info.position = body->span;
                info.position.begin = body->span.end - 1;
            } else {
                info.position = anchor.span;
                info.position.end = anchor.span.begin;
            }
            fp_.syncs.push_back(info);
            if (slot == -1)
                entry(anchor.node_id).sync_at_body_end = true;
            else
                entry(anchor.node_id)
                    .pre.push_back({PreStmtEvent::Kind::Sync,
                                    sync_keys_.at(key), 0});
        }
    }

    bool has_committed(const Stmt& anchor, int slot) const {
        return sync_keys_.count(SyncKey{anchor.node_id, slot}) != 0;
    }

    void maybe_sync(const Stmt& anchor, int slot, bool needed,
                    SyncReason reason) {
        if (has_committed(anchor, slot)) {
            SyncKey key{anchor.node_id, slot};
            if (recording_) {
                record_sync(anchor, slot, sync_keys_.at(key));
            } else {
                pending_.clear();
            }
            return;
        }
        if (needed) record_sync(anchor, slot, reason);
    }

    bool conflicts(const std::set<std::string>& reads,
                   const std::set<std::string>& writes) const {
        for (const auto& cl : pending_) {
            for (const auto& w : writes)
                if (cl.mentions(w)) return true;
            for (const auto& r : reads)
                if (std::find(cl.inout.begin(), cl.inout.end(), r) !=
                    cl.inout.end())
                    return true;
        }
        return false;
    }

    std::set<std::string> canon_set(const std::vector<std::string>& vars) {
        std::set<std::string> out;
        for (const auto& v : vars) out.insert(canonical(v));
        return out;
    }

    void mark_used_one(const std::string& name) {
        for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
            for (auto& d : it->decls) {
                if (d.name == name) {
                    d.used_by_task = true;
                    return;  // innermost declaration only
                }
            }
        }
    }

    void mark_used(const std::string& name) {
        std::string cur = name;
        for (size_t hops = 0; hops <= fp_.alias_roots.size() + 1; ++hops) {
            mark_used_one(cur);
            auto next = fp_.alias_roots.find(cur);
            if (next == fp_.alias_roots.end()) break;
            cur = next->second;
        }
    }

    void submit_task(const Stmt& stmt, size_t site_idx, int slot,
                     bool as_stmt_task) {
        SiteData& sd = site_data_[site_idx];

        bool idx_hit = false;
        for (const auto& idx : sd.idx_vars) {
            std::string c = canonical(idx);
            for (const auto& cl : pending_)
                if (std::find(cl.inout.begin(), cl.inout.end(), c) !=
                    cl.inout.end())
                    idx_hit = true;
        }
        maybe_sync(stmt, slot, idx_hit, SyncReason::IndexDependency);

        pending_.push_back(sd.depend_canon);
        for (const auto& v : sd.depend.all_vars()) mark_used(v);
        for (const auto& v : sd.firstprivates) mark_used(v);

        if (recording_) {
            TaskPlan tp;
            tp.site_index = site_idx;
            tp.stmt_id = stmt.node_id;
            tp.depend = sd.depend;
            tp.depend_canonical = sd.depend_canon;
            tp.firstprivate_vars = sd.firstprivates;
            tp.preceded_by_taskwait = has_committed(stmt, slot);
            tp.is_hoisted = sd.hoisted;
            tp.hoist_temp = sd.temp;
            tp.result_decl_type = sd.result_decl_type;
            fp_.tasks.push_back(std::move(tp));
            size_t task_index = fp_.tasks.size() - 1;
            if (as_stmt_task)
                entry(stmt.node_id).task_index =
                    static_cast<int>(task_index);
            else
                entry(stmt.node_id)
                    .pre.push_back({PreStmtEvent::Kind::Task,
                                    SyncReason::Coherency, task_index});
        }
    }

    // Hoisted tasks attached to a statement, in innermost-first site order.
    // Returns the site index of the statement's own task, or npos.
    size_t process_pre_tasks(const Stmt& s) {
        size_t own = static_cast<size_t>(-1);
        auto it = sites_by_stmt_.find(s.node_id);
        if (it == sites_by_stmt_.end()) return own;
        int slot = 0;
        for (size_t idx : it->second) {
            const SiteData& sd = site_data_[idx];
            if (!sd.taskifiable) continue;
            if (sd.hoisted) {
                submit_task(s, idx, slot++, false);
            } else {
                own = idx;
            }
        }
        return own;
    }

    bool stmt_has_inline_user_call(const Stmt& s) const {
        auto it = sites_by_stmt_.find(s.node_id);
        if (it == sites_by_stmt_.end()) return false;
        for (size_t idx : it->second)
            if (site_data_[idx].inline_user_call) return true;
        return false;
    }

    void external_site_writes(const Stmt& s, std::set<std::string>& writes) {
        auto it = sites_by_stmt_.find(s.node_id);
        if (it == sites_by_stmt_.end()) return;
        for (size_t idx : it->second) {
            const CallSiteInfo& site = fp_.sites[idx];
            if (!site.is_std_or_external) continue;
            for (const auto& arg : site.args)
                for (const auto& v : arg.vars) writes.insert(canonical(v));
            if (!site.receiver_var.empty())
                writes.insert(canonical(site.receiver_var));
        }
    }

    void host_check(const Stmt& s, const std::set<std::string>& reads,
                    const std::set<std::string>& writes) {
        bool needed = false;
        if (opts_.coherency_sync) {
            if (stmt_has_inline_user_call(s) && !pending_.empty())
                needed = true;
            else
                needed = conflicts(reads, writes);
        }
        maybe_sync(s, kHostSlot, needed, SyncReason::Coherency);
    }

    void register_decl(const Stmt& s) {
        DeclInfo d;
        d.stmt = &s;
        d.name = s.decl->name;
        d.is_alias = fp_.alias_roots.count(s.decl->name) != 0;
        scopes_.back().decls.push_back(d);
    }

    void pop_scope() {
        WalkScope scope = std::move(scopes_.back());
        scopes_.pop_back();
        if (!scope.promotable || !opts_.promotion) return;
        for (const auto& d : scope.decls) {
            if (!d.used_by_task || d.is_alias) continue;
            DependClause cleanup;
            cleanup.add(canonical(d.name), AccessMode::InOut);
            pending_.push_back(cleanup);
            if (recording_) {
                PromotionCandidate pc;
                pc.var = d.name;
                pc.ptr_name = names_.pick(gen_.ptr_base + "_" + d.name);
                pc.type = d.stmt->decl->type;
                pc.decl_span = d.stmt->span;
                pc.decl_stmt_id = d.stmt->node_id;
                if (d.stmt->decl->init) {
                    bool init_taken_by_task =
                        entry_task_writes_decl(d.stmt->node_id);
                    pc.has_init = !init_taken_by_task;
                    pc.init_span = d.stmt->decl->init->span;
                }
                pc.scope_stmt_id = scope.block->node_id;
                pc.scope_end_span = scope.block->span;
                pc.scope_end_span.begin = scope.block->span.end - 1;
                fp_.promotions.push_back(std::move(pc));
            }
        }
    }

    bool entry_task_writes_decl(int stmt_id) const {
        auto it = fp_.stmt_plans.find(stmt_id);
        return it != fp_.stmt_plans.end() && it->second.task_index >= 0;
    }

    void walk_block(const Stmt& block, bool promotable) {
        WalkScope scope;
        scope.block = &block;
        scope.promotable = promotable;
        scopes_.push_back(std::move(scope));
        for (const auto& c : block.body) walk_stmt(*c);
        pop_scope();
    }

    static void merge_pending(std::vector<DependClause>& into,
                              const std::vector<DependClause>& from) {
        into.insert(into.end(), from.begin(), from.end());
    }

    void walk_stmt(const Stmt& s) {
        switch (s.kind) {
            case StmtKind::Block:
                walk_block(s, true);
                return;
            case StmtKind::Decl:
                walk_decl(s);
                return;
            case StmtKind::Assign:
            case StmtKind::IncDec:
            case StmtKind::ExprStmt:
                walk_simple(s);
                return;
            case StmtKind::If: {
                walk_cond_stmt(s);
                auto before = pending_;
                walk_block(*s.then_branch, true);
                auto after_then = pending_;
                pending_ = before;
                if (s.else_branch) {
                    if (s.else_branch->kind == StmtKind::Block)
                        walk_block(*s.else_branch, true);
                    else
                        walk_stmt(*s.else_branch);  // else-if chain
                    merge_pending(pending_, after_then);
                } else {
                    merge_pending(pending_, after_then);
                }
                return;
            }
            case StmtKind::While: {
                walk_cond_stmt(s);
                auto before = pending_;
                walk_loop(s, *s.loop_body, nullptr);
                merge_pending(pending_, before);
                return;
            }
            case StmtKind::For: {
                scopes_.push_back(WalkScope{});  // for-header pseudo scope
                if (s.init_stmt->kind == StmtKind::Decl)
                    register_decl(*s.init_stmt);
                walk_for_header(s);
                auto before = pending_;
                walk_loop(s, *s.loop_body, s.step_stmt.get());
                merge_pending(pending_, before);
                scopes_.pop_back();
                return;
            }
            case StmtKind::Switch: {
                walk_cond_stmt(s);
                auto before = pending_;
                auto merged = before;
                for (const auto& c : s.cases) {
                    pending_ = before;
                    scopes_.push_back(WalkScope{});
                    for (const auto& b : c.body) walk_stmt(*b);
                    scopes_.pop_back();
                    merge_pending(merged, pending_);
                }
                pending_ = std::move(merged);
                return;
            }
            case StmtKind::Return:
                walk_return(s);
                return;
            default:
                return;
        }
    }

    // Condition evaluation of if/while/for/switch as a host access.
    void walk_cond_stmt(const Stmt& s) {
        std::vector<std::string> cond_vars;
        if (s.cond) collect_vars(*s.cond, cond_vars);
        std::set<std::string> writes;
        external_site_writes(s, writes);
        host_check(s, canon_set(cond_vars), writes);
    }

    // For headers fold init and first condition read into one entry check.
    void walk_for_header(const Stmt& s) {
        std::vector<std::string> reads;
        std::set<std::string> writes;
        const Stmt& init = *s.init_stmt;
        if (init.kind == StmtKind::Decl) {
            writes.insert(canonical(init.decl->name));
            if (init.decl->init) collect_vars(*init.decl->init, reads);
        } else if (init.kind == StmtKind::Assign) {
            writes.insert(canonical(lvalue_base_var(*init.lhs)));
            collect_vars(*init.rhs, reads);
        }
        if (s.cond) collect_vars(*s.cond, reads);
        external_site_writes(s, writes);
        external_site_writes(init, writes);
        bool inline_call = stmt_has_inline_user_call(s) ||
                           stmt_has_inline_user_call(init);
        bool needed = false;
        if (opts_.coherency_sync) {
            if (inline_call && !pending_.empty())
                needed = true;
            else
                needed = conflicts(canon_set(reads), writes);
        }
        maybe_sync(s, kHostSlot, needed, SyncReason::Coherency);
    }

    // Loop bodies run the walk twice while discovering so wrap-around
    // conflicts surface; the recorder walks once.
    void walk_loop(const Stmt& loop, const Stmt& body, const Stmt* step) {
        const int passes = recording_ ? 1 : 2;
        for (int p = 0; p < passes; ++p) {
            walk_block(body, true);
            loop_end_check(loop, body, step);
        }
    }

    void loop_end_check(const Stmt& loop, const Stmt& body,
                        const Stmt* step) {
        std::vector<std::string> reads;
        std::set<std::string> writes;
        if (loop.cond) collect_vars(*loop.cond, reads);
        external_site_writes(loop, writes);
        bool inline_call = stmt_has_inline_user_call(loop);
        if (step) {
            if (step->kind == StmtKind::Assign) {
                writes.insert(canonical(lvalue_base_var(*step->lhs)));
                collect_vars(*step->rhs, reads);
                if (step->op != "=")
                    collect_vars(*step->lhs, reads);
            } else if (step->kind == StmtKind::IncDec) {
                writes.insert(canonical(lvalue_base_var(*step->lhs)));
                collect_vars(*step->lhs, reads);
            }
            external_site_writes(*step, writes);
            inline_call = inline_call || stmt_has_inline_user_call(*step);
        }
        bool needed = false;
        if (opts_.coherency_sync) {
            if (inline_call && !pending_.empty())
                needed = true;
            else
                needed = conflicts(canon_set(reads), writes);
        }
        if (has_committed(loop, -1)) {
            if (recording_)
                record_sync(loop, -1, sync_keys_.at(SyncKey{loop.node_id, -1}));
            else
                pending_.clear();
            return;
        }
        if (needed) record_sync(loop, -1, SyncReason::Coherency);
    }

    void walk_decl(const Stmt& s) {
        size_t own = process_pre_tasks(s);
        register_decl(s);
        if (own != static_cast<size_t>(-1)) {
            submit_task(s, own, kHostSlot, true);
            return;
        }
        std::vector<std::string> reads;
        std::set<std::string> writes;
        writes.insert(canonical(s.decl->name));
        if (s.decl->init)
            subst_vars_of_stmt_expr(s, *s.decl->init, reads);
        external_site_writes(s, writes);
        host_check(s, canon_set(reads), writes);
    }

    void walk_simple(const Stmt& s) {
        size_t own = process_pre_tasks(s);
        if (own != static_cast<size_t>(-1)) {
            submit_task(s, own, kHostSlot, true);
            return;
        }
        std::vector<std::string> reads;
        std::set<std::string> writes;
        if (s.kind == StmtKind::Assign) {
            writes.insert(canonical(lvalue_base_var(*s.lhs)));
            subst_vars_of_stmt_expr(s, *s.rhs, reads);
            std::vector<std::string> lhs_vars;
            subst_vars_of_stmt_expr(s, *s.lhs, lhs_vars);
            for (const auto& v : lhs_vars)
                if (canonical(v) != canonical(lvalue_base_var(*s.lhs)))
                    reads.push_back(v);
            if (s.op != "=") reads.push_back(lvalue_base_var(*s.lhs));
        } else if (s.kind == StmtKind::IncDec) {
            writes.insert(canonical(lvalue_base_var(*s.lhs)));
            subst_vars_of_stmt_expr(s, *s.lhs, reads);
        } else {
            subst_vars_of_stmt_expr(s, *s.lhs, reads);
        }
        external_site_writes(s, writes);
        host_check(s, canon_set(reads), writes);
    }

    // Expression variables with this statement's hoisted calls replaced.
    void subst_vars_of_stmt_expr(const Stmt& s, const Expr& e,
                                 std::vector<std::string>& out) {
        std::map<int, std::string> temps;
        auto it = sites_by_stmt_.find(s.node_id);
        if (it != sites_by_stmt_.end()) {
            for (size_t idx : it->second)
                if (site_data_[idx].hoisted)
                    temps[fp_.sites[idx].call->node_id] =
                        site_data_[idx].temp;
        }
        subst_vars(e, -1, temps, out);
    }

    void walk_return(const Stmt& s) {
        if (fp_.returns.mode != ReturnMode::Full) return;
        process_pre_tasks(s);
        pending_.clear();
        if (recording_) {
            SyncPointInfo info;
            info.reason = SyncReason::ReturnBarrier;
            info.stmt_id = s.node_id;
            info.position = s.span;
            info.position.end = s.span.begin;
            fp_.syncs.push_back(info);
        }
    }
};

}  // namespace

// ---------------------------------------------------------------------------

bool function_needs_taskgroup(const UnitIndex& index, const FunctionDecl& fn,
                              const std::set<std::string>& tainted,
                              const std::vector<std::string>& excludes) {
    if (!fn.body) return false;
    AnalysisOptions opts;
    opts.exclude_functions = excludes;
    for (const auto& e : excludes)
        if (e == fn.name || e == fn.qualified_name) return false;
    NameAllocator alloc(*index.unit);
    GeneratedNames gen;
    FunctionPlan fp;
    fp.fn = &fn;
    FunctionAnalyzer analyzer(index, opts, tainted, alloc, gen, fp);
    analyzer.run();
    return fp.needs_taskgroup;
}

const StmtPlanEntry* FunctionPlan::entry_for(int stmt_id) const {
    auto it = stmt_plans.find(stmt_id);
    return it == stmt_plans.end() ? nullptr : &it->second;
}

const FunctionPlan* UnitPlan::plan_for(const FunctionDecl* fn) const {
    for (const auto& fp : functions)
        if (fp.fn == fn) return &fp;
    return nullptr;
}

bool UnitPlan::any_taskgroup() const {
    for (const auto& fp : functions)
        if (fp.needs_taskgroup) return true;
    return false;
}

UnitPlan analyze_unit(const UnitIndex& index, const AnalysisOptions& opts) {
    UnitPlan plan;
    plan.index = &index;
    plan.tainted = find_global_tainted(index, plan.diagnostics);

    NameAllocator alloc(*index.unit);
    plan.names.active = alloc.pick(plan.names.active);
    plan.names.res = alloc.pick(plan.names.res);
    plan.names.depth = alloc.pick(plan.names.depth);
    plan.names.depth_local = alloc.pick(plan.names.depth_local);
    plan.names.task_count = alloc.pick(plan.names.task_count);

    for (FunctionDecl* fn : index.functions) {
        FunctionPlan fp;
        fp.fn = fn;
        bool excluded_self = false;
        for (const auto& e : opts.exclude_functions)
            if (e == fn->name || e == fn->qualified_name) excluded_self = true;
        if (fn->body && !excluded_self) {
            FunctionAnalyzer analyzer(index, opts, plan.tainted, alloc,
                                      plan.names, fp);
            analyzer.run();
        }
        plan.functions.push_back(std::move(fp));
    }
    return plan;
}

std::vector<SyncPointInfo> find_coherency_syncs(const UnitPlan& plan,
                                                const FunctionDecl& fn) {
    const FunctionPlan* fp = plan.plan_for(&fn);
    if (!fp) return {};
    std::vector<SyncPointInfo> out;
    for (const auto& s : fp->syncs)
        if (s.reason != SyncReason::ReturnBarrier) out.push_back(s);
    return out;
}

std::vector<PromotionCandidate> find_promotions(const UnitPlan& plan,
                                                const FunctionDecl& fn) {
    const FunctionPlan* fp = plan.plan_for(&fn);
    return fp ? fp->promotions : std::vector<PromotionCandidate>{};
}

}  // namespace apac
