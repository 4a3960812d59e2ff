#include "apac/transform.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>

namespace apac {

namespace {

const char* kIndentUnit = "    ";

// Leading whitespace of the line holding pos, when only whitespace precedes
// pos on that line; empty otherwise (mid-line anchor).
std::string line_indent(const std::string& src, size_t pos) {
    size_t line_start = pos == 0 ? 0 : src.rfind('\n', pos - 1);
    line_start = line_start == std::string::npos ? 0 : line_start + 1;
    for (size_t i = line_start; i < pos; ++i)
        if (src[i] != ' ' && src[i] != '\t') return "";
    return src.substr(line_start, pos - line_start);
}

// Leading whitespace of the line holding pos, regardless of what else
// precedes pos on that line.
std::string line_leading_ws(const std::string& src, size_t pos) {
    size_t line_start = pos == 0 ? 0 : src.rfind('\n', pos - 1);
    line_start = line_start == std::string::npos ? 0 : line_start + 1;
    size_t i = line_start;
    while (i < src.size() && (src[i] == ' ' || src[i] == '\t')) ++i;
    return src.substr(line_start, i - line_start);
}

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i) out += ",";
        out += parts[i];
    }
    return out;
}

// Lines rendered against one base indentation. The first line carries no
// prefix: insertions land right after whatever indentation already exists.
class LineBlock {
public:
    explicit LineBlock(std::string ind) : ind_(std::move(ind)) {}

    void add(const std::string& line, int level = 0) {
        if (!first_) {
            text_ += "\n";
            text_ += ind_;
        }
        first_ = false;
        for (int i = 0; i < level; ++i) text_ += kIndentUnit;
        text_ += line;
    }

    void add(const std::vector<std::string>& lines, int level = 0) {
        for (const auto& l : lines) add(l, level);
    }

    bool empty() const { return first_; }
    const std::string& str() const { return text_; }

private:
    std::string ind_;
    std::string text_;
    bool first_ = true;
};

struct HoistedUse {
    SourceSpan span;
    std::string temp;
};

// Outermost hoisted calls within an expression; a hoisted call swallows its
// own hoisted descendants (they appear inside its task body instead).
void collect_outermost_hoisted(const Expr& e, bool allow_self,
                               const std::map<int, std::string>& temps,
                               std::vector<HoistedUse>& out) {
    if (allow_self) {
        auto it = temps.find(e.node_id);
        if (it != temps.end()) {
            out.push_back({e.span, it->second});
            return;
        }
    }
    if (e.lhs) collect_outermost_hoisted(*e.lhs, true, temps, out);
    if (e.index) collect_outermost_hoisted(*e.index, true, temps, out);
    if (e.rhs) collect_outermost_hoisted(*e.rhs, true, temps, out);
    for (const auto& a : e.args)
        collect_outermost_hoisted(*a, true, temps, out);
}

// Expression text with hoisted sub-calls replaced by their temporaries.
std::string render_expr(const std::string& src, SourceSpan span,
                        const std::vector<HoistedUse>& uses) {
    RewriteBuffer rb(src.substr(span.begin, span.end - span.begin));
    for (const auto& u : uses) {
        SourceSpan rel = u.span;
        rel.begin -= span.begin;
        rel.end -= span.begin;
        rb.record({EditKind::Replace, rel, u.temp});
    }
    return rb.materialize();
}

// Declaration spelling once an initializer moves into a separate assignment.
// Top-level const must go; pointee const stays assignable either way.
std::string split_decl_spelling(TypeRef t) {
    if (t.declarator == Declarator::ByValue) t.is_const = false;
    t.array_len = -1;
    return t.spelling();
}

class FunctionEmitter {
public:
    FunctionEmitter(RewriteBuffer& rb, const UnitPlan& plan,
                    const FunctionPlan& fp, const ThrottleStrategy& strategy)
        : rb_(rb),
          plan_(plan),
          fp_(fp),
          strategy_(strategy),
          src_(plan.index->unit->source),
          names_(plan.names) {
        for (const auto& t : fp.tasks) {
            if (t.is_hoisted)
                temps_[fp.sites[t.site_index].call->node_id] = t.hoist_temp;
        }
        for (const auto& pc : fp.promotions) {
            promoted_by_decl_[pc.decl_stmt_id] = &pc;
            cleanups_by_scope_[pc.scope_stmt_id].push_back(&pc);
        }
        if (fp.returns.mode == ReturnMode::Full)
            for (int id : fp.returns.return_stmt_ids)
                full_replace_.insert(id);
        compute_goto_splits();
    }

    void emit() {
        emit_wrap_body();
        walk_block(*fp_.fn->body);
    }

    // ----- the transformation steps -----

    void emit_wrap_body() {
        const Stmt& body = *fp_.fn->body;
        const ReturnPlan& rp = fp_.returns;
        std::string ind = body_indent();

        LineBlock open(ind);
        if (rp.mode == ReturnMode::Full && !rp.result_var.empty())
            open.add(fp_.fn->return_type.spelling() + " " + rp.result_var +
                     ";");
        if (fp_.fn->is_main) {
            open.add("#pragma omp parallel");
            open.add("#pragma omp master");
        }
        open.add("#pragma omp taskgroup");
        open.add("{");
        if (strategy_.instruments())
            open.add(emit_activation_preamble(names_, strategy_));
        SourceSpan open_brace = body.span;
        open_brace.end = open_brace.begin + 1;
        rb_.record({EditKind::InsertAfter, open_brace,
                    "\n" + ind + open.str()});

        if (rp.mode == ReturnMode::TrailingKept) {
            const Stmt* trailing = stmt_by_id(rp.trailing_stmt_id);
            std::string rind = line_indent(src_, trailing->span.begin);
            rb_.record({EditKind::InsertBefore, trailing->span,
                        "}\n" + rind});
            return;
        }
        SourceSpan close_brace = body.span;
        close_brace.begin = close_brace.end - 1;
        std::string cind = line_indent(src_, close_brace.begin);
        LineBlock close(cind + kIndentUnit);
        if (rp.mode == ReturnMode::Full && rp.emit_label)
            close.add(rp.end_label + ": ;");
        close.add("}");
        if (rp.mode == ReturnMode::Full && !rp.result_var.empty())
            close.add("return " + rp.result_var + ";");
        rb_.record({EditKind::InsertBefore, close_brace,
                    kIndentUnit + close.str() + "\n" + cind});
    }

    void emit_wrap(const TaskPlan& task) {
        const Stmt& s = *fp_.sites[task.site_index].stmt;
        std::string ind = line_indent(src_, s.span.begin);

        LineBlock before(ind);
        before.add(pre_task_lines(names_, strategy_));
        before.add(task_pragma(task));
        before.add("{");
        before.add(task_prologue_lines(names_, strategy_), 1);
        rb_.record({EditKind::InsertBefore, s.span,
                    before.str() + "\n" + ind + kIndentUnit});

        std::string tail;
        for (const auto& l : task_epilogue_lines(names_, strategy_))
            tail += "\n" + ind + kIndentUnit + l;
        tail += "\n" + ind + "}";
        rb_.record({EditKind::InsertAfter, s.span, tail});
    }

    void emit_split(const TaskPlan& task) {
        const Stmt& s = *fp_.sites[task.site_index].stmt;
        const Expr& init = *s.decl->init;
        std::string ind = line_indent(src_, s.span.begin);

        LineBlock head(ind);
        head.add(task.result_decl_type + " " + s.decl->name + ";");
        head.add(pre_task_lines(names_, strategy_));
        head.add(task_pragma(task));
        head.add("{");
        head.add(task_prologue_lines(names_, strategy_), 1);
        head.add(s.decl->name + " = ", 1);
        SourceSpan prefix = s.span;
        prefix.end = init.span.begin;
        rb_.record({EditKind::Replace, prefix, head.str()});

        std::string tail;
        for (const auto& l : task_epilogue_lines(names_, strategy_))
            tail += "\n" + ind + kIndentUnit + l;
        tail += "\n" + ind + "}";
        rb_.record({EditKind::InsertAfter, s.span, tail});
    }

    void emit_promotion_decl(const PromotionCandidate& pc,
                             const TaskPlan* task) {
        const Stmt* s = stmt_by_id(pc.decl_stmt_id);
        std::string ind = line_indent(src_, s->span.begin);
        LineBlock block(ind);

        std::string sp = split_decl_spelling(pc.type);
        if (pc.type.is_array()) {
            block.add(sp + "* " + pc.ptr_name + " = new " + sp + "[" +
                      std::to_string(pc.type.array_len) + "]();");
            block.add(sp + "* " + pc.var + " = " + pc.ptr_name + ";");
        } else {
            std::string init_text = "()";
            if (pc.has_init && s->decl->init && !task)
                init_text = "(" + rendered_expr_of(*s->decl->init) + ")";
            block.add(sp + "* " + pc.ptr_name + " = new " + sp + init_text +
                      ";");
            block.add(sp + "& " + pc.var + " = *" + pc.ptr_name + ";");
        }

        if (task) {
            block.add(pre_task_lines(names_, strategy_));
            block.add(task_pragma(*task));
            block.add("{");
            block.add(task_prologue_lines(names_, strategy_), 1);
            block.add(pc.var + " = " + rendered_expr_of(*s->decl->init) + ";",
                      1);
            block.add(task_epilogue_lines(names_, strategy_), 1);
            block.add("}");
        }
        rb_.record({EditKind::Replace, s->span, block.str()});
    }

    void emit_cleanup(const PromotionCandidate& pc) {
        SourceSpan anchor;
        anchor.begin = pc.scope_end_span.end - 1;
        anchor.end = pc.scope_end_span.end - 1;
        std::string ind = line_indent(src_, anchor.begin);
        LineBlock block(ind + kIndentUnit);
        block.add(pre_task_lines(names_, strategy_));
        std::vector<std::string> caps{pc.ptr_name};
        for (const auto& c : extra_task_captures(names_, strategy_))
            caps.push_back(c);
        block.add("#pragma omp task depend(inout:" + pc.var +
                  ") firstprivate(" + join(caps) + ") default(shared)" +
                  activation_guard_clause(names_, strategy_));
        block.add("{");
        block.add(task_prologue_lines(names_, strategy_), 1);
        block.add(std::string("delete") + (pc.type.is_array() ? "[]" : "") +
                      " " + pc.ptr_name + ";",
                  1);
        block.add(task_epilogue_lines(names_, strategy_), 1);
        block.add("}");
        rb_.record({EditKind::InsertBefore, anchor,
                    kIndentUnit + block.str() + "\n" + ind});
    }

    void emit_sync_at(size_t pos) {
        SourceSpan anchor;
        anchor.begin = anchor.end = pos;
        rb_.record({EditKind::InsertBefore, anchor,
                    "#pragma omp taskwait\n" + line_indent(src_, pos)});
    }

    void emit_body_end_sync(const Stmt& loop) {
        size_t pos = loop.loop_body->span.end - 1;
        SourceSpan anchor;
        anchor.begin = anchor.end = pos;
        std::string ind = line_indent(src_, pos);
        rb_.record({EditKind::InsertBefore, anchor,
                    kIndentUnit + std::string("#pragma omp taskwait\n") +
                        ind});
    }

    void emit_return_replace(const Stmt& s) {
        std::string ind = line_indent(src_, s.span.begin);
        LineBlock block(ind);
        block.add("#pragma omp taskwait");
        if (s.ret_value && !fp_.returns.result_var.empty())
            block.add(fp_.returns.result_var + " = " +
                      rendered_expr_of(*s.ret_value) + ";");
        block.add("goto " + fp_.returns.end_label + ";");
        rb_.record({EditKind::Replace, s.span, block.str()});
    }

    void emit_returns() {
        for (int id : fp_.returns.return_stmt_ids)
            emit_return_replace(*stmt_by_id(id));
    }

    // ----- statement walk -----

    void walk_block(const Stmt& block) {
        for (const auto& c : block.body) walk_stmt(*c, false);
        auto it = cleanups_by_scope_.find(block.node_id);
        if (it != cleanups_by_scope_.end())
            for (const PromotionCandidate* pc : it->second) emit_cleanup(*pc);
    }

    void walk_stmt(const Stmt& s, bool as_else_if) {
        const StmtPlanEntry* entry = fp_.entry_for(s.node_id);

        if (entry && !entry->pre.empty()) {
            if (as_else_if)
                emit_else_if_pre(s, *entry);
            else
                emit_pre_events(s, *entry);
        }

        if (entry && entry->task_index >= 0) {
            const TaskPlan& task = fp_.tasks[entry->task_index];
            auto promoted = promoted_by_decl_.find(s.node_id);
            if (promoted != promoted_by_decl_.end()) {
                emit_promotion_decl(*promoted->second, &task);
            } else if (fp_.sites[task.site_index].position ==
                       CallPosition::PureInit) {
                emit_split(task);
                emit_temp_replaces(s);
            } else {
                emit_wrap(task);
                emit_temp_replaces(s);
            }
        } else if (full_replace_.count(s.node_id)) {
            emit_return_replace(s);
        } else if (promoted_by_decl_.count(s.node_id)) {
            emit_promotion_decl(*promoted_by_decl_.at(s.node_id), nullptr);
        } else if (goto_splits_.count(s.node_id)) {
            emit_goto_split(s);
            emit_temp_replaces(s);
        } else {
            emit_temp_replaces(s);
        }

        switch (s.kind) {
            case StmtKind::Block:
                walk_block(s);
                return;
            case StmtKind::If:
                walk_block(*s.then_branch);
                if (s.else_branch) {
                    if (s.else_branch->kind == StmtKind::Block)
                        walk_block(*s.else_branch);
                    else
                        walk_stmt(*s.else_branch, true);
                }
                return;
            case StmtKind::While:
            case StmtKind::For:
                walk_block(*s.loop_body);
                if (entry && entry->sync_at_body_end) emit_body_end_sync(s);
                return;
            case StmtKind::Switch:
                for (const auto& c : s.cases)
                    for (const auto& b : c.body) walk_stmt(*b, false);
                return;
            default:
                return;
        }
    }

private:
    RewriteBuffer& rb_;
    const UnitPlan& plan_;
    const FunctionPlan& fp_;
    const ThrottleStrategy& strategy_;
    const std::string& src_;
    const GeneratedNames& names_;

    std::map<int, std::string> temps_;  // call expr node id -> temporary
    std::map<int, const PromotionCandidate*> promoted_by_decl_;
    std::map<int, std::vector<const PromotionCandidate*>> cleanups_by_scope_;
    std::set<int> full_replace_;  // returns replaced whole
    std::set<int> goto_splits_;   // decls split so gotos may jump past them
    mutable std::map<int, const Stmt*> stmt_index_;

    std::string task_pragma(const TaskPlan& task) const {
        std::string t = "#pragma omp task";
        if (!task.depend.in.empty())
            t += " depend(in:" + join(task.depend.in) + ")";
        if (!task.depend.inout.empty())
            t += " depend(inout:" + join(task.depend.inout) + ")";
        t += " default(shared)";
        t += activation_guard_clause(names_, strategy_);
        std::vector<std::string> caps = task.firstprivate_vars;
        for (const auto& c : extra_task_captures(names_, strategy_))
            caps.push_back(c);
        if (!caps.empty()) t += " firstprivate(" + join(caps) + ")";
        return t;
    }

    void add_pre_event(LineBlock& block, const PreStmtEvent& ev) {
        if (ev.kind == PreStmtEvent::Kind::Sync) {
            block.add("#pragma omp taskwait");
            return;
        }
        const TaskPlan& task = fp_.tasks[ev.task_index];
        const CallSiteInfo& site = fp_.sites[task.site_index];
        block.add(task.result_decl_type + " " + task.hoist_temp + ";");
        block.add(pre_task_lines(names_, strategy_));
        block.add(task_pragma(task));
        block.add("{");
        block.add(task_prologue_lines(names_, strategy_), 1);
        std::vector<HoistedUse> uses;
        for (const auto& a : site.call->args)
            collect_outermost_hoisted(*a, true, temps_, uses);
        block.add(task.hoist_temp + " = " +
                      render_expr(src_, site.call->span, uses) + ";",
                  1);
        block.add(task_epilogue_lines(names_, strategy_), 1);
        block.add("}");
    }

    void emit_pre_events(const Stmt& s, const StmtPlanEntry& entry) {
        std::string ind = line_indent(src_, s.span.begin);
        LineBlock block(ind);
        for (const auto& ev : entry.pre) add_pre_event(block, ev);
        rb_.record({EditKind::InsertBefore, s.span,
                    block.str() + "\n" + ind});
    }

    // Insertions in front of an else-if need braces, or the inserted lines
    // would separate the else keyword from its statement.
    void emit_else_if_pre(const Stmt& s, const StmtPlanEntry& entry) {
        std::string outer = line_leading_ws(src_, s.span.begin);
        std::string ind = outer + kIndentUnit;
        LineBlock block(ind);
        for (const auto& ev : entry.pre) add_pre_event(block, ev);
        rb_.record({EditKind::InsertBefore, s.span,
                    "{\n" + ind + block.str() + "\n" + ind});
        rb_.record({EditKind::InsertAfter, s.span, "\n" + outer + "}"});
    }

    // In-place substitution of hoisted calls for statements whose original
    // text survives in the output.
    void emit_temp_replaces(const Stmt& s) {
        if (temps_.empty()) return;
        std::vector<HoistedUse> uses;
        auto scan = [&](const Expr* e) {
            if (e) collect_outermost_hoisted(*e, true, temps_, uses);
        };
        switch (s.kind) {
            case StmtKind::Decl:
                scan(s.decl->init.get());
                break;
            case StmtKind::Assign:
                scan(s.lhs.get());
                scan(s.rhs.get());
                break;
            case StmtKind::IncDec:
            case StmtKind::ExprStmt:
                scan(s.lhs.get());
                break;
            case StmtKind::Return:
                scan(s.ret_value.get());
                break;
            default:
                return;
        }
        for (const auto& u : uses)
            rb_.record({EditKind::Replace, u.span, u.temp});
    }

    void emit_goto_split(const Stmt& s) {
        const Expr& init = *s.decl->init;
        std::string ind = line_indent(src_, s.span.begin);
        std::string text = split_decl_spelling(s.decl->type) + " " +
                           s.decl->name + ";\n" + ind + s.decl->name + " = ";
        SourceSpan prefix = s.span;
        prefix.end = init.span.begin;
        rb_.record({EditKind::Replace, prefix, text});
    }

    // In full return mode a goto may jump over any later declaration at the
    // taskgroup's top level; initializers there move into assignments so the
    // jump does not cross an initialization.
    void compute_goto_splits() {
        if (fp_.returns.mode != ReturnMode::Full) return;
        const auto& top = fp_.fn->body->body;
        size_t first = top.size();
        for (size_t i = 0; i < top.size(); ++i) {
            if (contains_return(*top[i])) {
                first = i;
                break;
            }
        }
        for (size_t i = first + 1; i < top.size(); ++i) {
            const Stmt& s = *top[i];
            if (s.kind != StmtKind::Decl || !s.decl->init) continue;
            const StmtPlanEntry* e = fp_.entry_for(s.node_id);
            if (e && e->task_index >= 0) continue;  // task split covers it
            if (s.decl->type.declarator == Declarator::Reference)
                throw ApacError(
                    {Severity::Error, s.span, plan_.index->unit->file,
                     "unsupported construct: reference declared after a "
                     "return statement in a task region"});
            goto_splits_.insert(s.node_id);
        }
    }

    static bool contains_return(const Stmt& s) {
        if (s.kind == StmtKind::Return) return true;
        bool hit = false;
        auto check = [&](const Stmt* c) {
            if (!hit && c) hit = contains_return(*c);
        };
        check(s.init_stmt.get());
        check(s.step_stmt.get());
        check(s.then_branch.get());
        check(s.else_branch.get());
        check(s.loop_body.get());
        for (const auto& c : s.body) check(c.get());
        for (const auto& sc : s.cases)
            for (const auto& c : sc.body) check(c.get());
        return hit;
    }

    std::string rendered_expr_of(const Expr& e) const {
        std::vector<HoistedUse> uses;
        collect_outermost_hoisted(e, true, temps_, uses);
        return render_expr(src_, e.span, uses);
    }

    std::string body_indent() const {
        const Stmt& body = *fp_.fn->body;
        if (!body.body.empty()) {
            std::string ind =
                line_indent(src_, body.body.front()->span.begin);
            if (!ind.empty()) return ind;
        }
        return kIndentUnit;
    }

    const Stmt* stmt_by_id(int id) const {
        if (stmt_index_.empty()) {
            std::function<void(const Stmt&)> index = [&](const Stmt& s) {
                stmt_index_[s.node_id] = &s;
                auto rec = [&](const Stmt* c) {
                    if (c) index(*c);
                };
                rec(s.init_stmt.get());
                rec(s.step_stmt.get());
                rec(s.then_branch.get());
                rec(s.else_branch.get());
                rec(s.loop_body.get());
                for (const auto& c : s.body) rec(c.get());
                for (const auto& sc : s.cases)
                    for (const auto& c : sc.body) rec(c.get());
            };
            index(*fp_.fn->body);
        }
        auto it = stmt_index_.find(id);
        return it == stmt_index_.end() ? nullptr : it->second;
    }
};

}  // namespace

// ---------------------------------------------------------------------------

void wrap_function_body(RewriteBuffer& rb, const UnitPlan& plan,
                        const FunctionPlan& fp,
                        const ThrottleStrategy& strategy) {
    FunctionEmitter(rb, plan, fp, strategy).emit_wrap_body();
}

void wrap_call_in_task(RewriteBuffer& rb, const UnitPlan& plan,
                       const FunctionPlan& fp, const TaskPlan& task,
                       const ThrottleStrategy& strategy) {
    FunctionEmitter emitter(rb, plan, fp, strategy);
    if (task.preceded_by_taskwait)
        emitter.emit_sync_at(fp.sites[task.site_index].stmt->span.begin);
    emitter.emit_wrap(task);
}

void split_assignment(RewriteBuffer& rb, const UnitPlan& plan,
                      const FunctionPlan& fp, const TaskPlan& task,
                      const ThrottleStrategy& strategy) {
    FunctionEmitter(rb, plan, fp, strategy).emit_split(task);
}

void promote_scope_local(RewriteBuffer& rb, const UnitPlan& plan,
                         const FunctionPlan& fp,
                         const PromotionCandidate& candidate,
                         const ThrottleStrategy& strategy) {
    FunctionEmitter emitter(rb, plan, fp, strategy);
    emitter.emit_promotion_decl(candidate, nullptr);
    emitter.emit_cleanup(candidate);
}

void insert_sync(RewriteBuffer& rb, const UnitPlan& plan,
                 const SyncPointInfo& sync) {
    SourceSpan anchor;
    anchor.begin = anchor.end = sync.position.begin;
    rb.record({EditKind::InsertBefore, anchor,
               "#pragma omp taskwait\n" +
                   line_indent(plan.index->unit->source, anchor.begin)});
}

void rewrite_returns(RewriteBuffer& rb, const UnitPlan& plan,
                     const FunctionPlan& fp,
                     const ThrottleStrategy& strategy) {
    FunctionEmitter(rb, plan, fp, strategy).emit_returns();
}

std::string transform_unit(const UnitPlan& plan,
                           const ThrottleStrategy& strategy,
                           bool header_comment) {
    const TranslationUnit& unit = *plan.index->unit;
    RewriteBuffer rb(unit.source);

    if (header_comment) {
        SourceSpan top;
        rb.record({EditKind::InsertBefore, top,
                   "// Parallelized by apac (strategy " + strategy.format() +
                       "): OpenMP task pragmas added, other code unchanged.\n"});
    }

    if (plan.any_taskgroup() && strategy.instruments()) {
        auto lines = instrument_counters(plan.names, strategy);
        if (!lines.empty()) {
            size_t pos = unit.source.size();
            for (const auto& item : unit.items) {
                if (item.kind != TopItemKind::Include) {
                    pos = item.exact_span.begin;
                    break;
                }
            }
            SourceSpan anchor;
            anchor.begin = anchor.end = pos;
            std::string text;
            for (const auto& l : lines) text += l + "\n";
            text += "\n";
            rb.record({EditKind::InsertBefore, anchor, text});
        }
    }

    for (const auto& fp : plan.functions) {
        if (!fp.needs_taskgroup) continue;
        FunctionEmitter(rb, plan, fp, strategy).emit();
    }
    return rb.materialize();
}

}  // namespace apac
