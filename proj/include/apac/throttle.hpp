#pragma once

#include <string>
#include <vector>

#include "apac/access_analysis.hpp"

namespace apac {

enum class ThrottleKind { Unlimited, MaxCount, MaxDepth };

// Task-creation limit written into the output program. The default matches
// the depth cap that works well for recursive divide-and-conquer codes.
struct ThrottleStrategy {
    ThrottleKind kind = ThrottleKind::MaxDepth;
    int limit = 5;

    // "none" | "count:N" (N >= 1) | "depth:D" (D >= 0)
    static ThrottleStrategy parse(const std::string& text);
    std::string format() const;

    bool instruments() const { return kind != ThrottleKind::Unlimited; }
};

// Lines placed right after a taskgroup opens: the activation boolean every
// task of the group shares, plus the depth snapshot when depth-limited.
std::vector<std::string> emit_activation_preamble(
    const GeneratedNames& names, const ThrottleStrategy& strategy);

// Unit-level declarations (shared task counter or thread-private depth),
// emitted once per file when any taskgroup exists.
std::vector<std::string> instrument_counters(const GeneratedNames& names,
                                             const ThrottleStrategy& strategy);

// " if(apac_active)" when tasks are conditional, empty otherwise.
std::string activation_guard_clause(const GeneratedNames& names,
                                    const ThrottleStrategy& strategy);

// Names every task must capture firstprivate beyond its aliases (the depth
// snapshot under depth limiting).
std::vector<std::string> extra_task_captures(const GeneratedNames& names,
                                             const ThrottleStrategy& strategy);

// Lines submitted immediately before a task statement (counter increment).
std::vector<std::string> pre_task_lines(const GeneratedNames& names,
                                        const ThrottleStrategy& strategy);

// First lines inside a task body (depth handoff).
std::vector<std::string> task_prologue_lines(const GeneratedNames& names,
                                             const ThrottleStrategy& strategy);

// Last lines inside a task body (counter decrement).
std::vector<std::string> task_epilogue_lines(const GeneratedNames& names,
                                             const ThrottleStrategy& strategy);

}  // namespace apac
