#pragma once

#include <string>

#include "apac/access_analysis.hpp"
#include "apac/rewrite_buffer.hpp"
#include "apac/throttle.hpp"

namespace apac {

// Transform the whole unit: wrap bodies, wrap calls, split declarations,
// promote scope locals, insert taskwaits, rewrite returns, and add the
// strategy instrumentation. Output is deterministic for a given input and
// option set.
std::string transform_unit(const UnitPlan& plan,
                           const ThrottleStrategy& strategy,
                           bool header_comment = true);

// Individual emission steps. Each records edits; the buffer materializes
// them all at once. transform_unit drives these in statement order.

// Taskgroup open/close around the function body; parallel+master+taskgroup
// for main; result-variable declaration, end label and trailing return when
// the return protocol applies.
void wrap_function_body(RewriteBuffer& rb, const UnitPlan& plan,
                        const FunctionPlan& fp,
                        const ThrottleStrategy& strategy);

// Task pragma and braces around a call statement (Statement or PureAssign
// form; hoisted temporaries use the same text block inserted before the
// enclosing statement).
void wrap_call_in_task(RewriteBuffer& rb, const UnitPlan& plan,
                       const FunctionPlan& fp, const TaskPlan& task,
                       const ThrottleStrategy& strategy);

// Declaration-with-call-initializer: plain declaration (const dropped)
// before the task, assignment inside it.
void split_assignment(RewriteBuffer& rb, const UnitPlan& plan,
                      const FunctionPlan& fp, const TaskPlan& task,
                      const ThrottleStrategy& strategy);

// Scope-local used by tasks: heap allocation + reference binding replace
// the declaration; a cleanup task at scope end releases the object.
void promote_scope_local(RewriteBuffer& rb, const UnitPlan& plan,
                         const FunctionPlan& fp,
                         const PromotionCandidate& candidate,
                         const ThrottleStrategy& strategy);

// One taskwait line in front of sync.position.
void insert_sync(RewriteBuffer& rb, const UnitPlan& plan,
                 const SyncPointInfo& sync);

// Full return protocol: every return becomes taskwait + result assignment +
// goto to the end label.
void rewrite_returns(RewriteBuffer& rb, const UnitPlan& plan,
                     const FunctionPlan& fp,
                     const ThrottleStrategy& strategy);

}  // namespace apac
