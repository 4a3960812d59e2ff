#include "apac/throttle.hpp"

#include <cstdlib>

namespace apac {

namespace {

bool parse_limit(const std::string& text, int& out) {
    if (text.empty()) return false;
    for (char c : text)
        if (c < '0' || c > '9') return false;
    out = std::atoi(text.c_str());
    return true;
}

}  // namespace

ThrottleStrategy ThrottleStrategy::parse(const std::string& text) {
    ThrottleStrategy s;
    if (text == "none") {
        s.kind = ThrottleKind::Unlimited;
        s.limit = 0;
        return s;
    }
    auto bad = [&]() -> ApacError {
        return ApacError({Severity::Error, SourceSpan{}, "",
                          "invalid strategy '" + text +
                              "', expected none|count:N|depth:D"});
    };
    auto colon = text.find(':');
    if (colon == std::string::npos) throw bad();
    std::string head = text.substr(0, colon);
    int limit = 0;
    if (!parse_limit(text.substr(colon + 1), limit)) throw bad();
    if (head == "count") {
        if (limit < 1) throw bad();
        s.kind = ThrottleKind::MaxCount;
    } else if (head == "depth") {
        s.kind = ThrottleKind::MaxDepth;
    } else {
        throw bad();
    }
    s.limit = limit;
    return s;
}

std::string ThrottleStrategy::format() const {
    switch (kind) {
        case ThrottleKind::Unlimited:
            return "none";
        case ThrottleKind::MaxCount:
            return "count:" + std::to_string(limit);
        case ThrottleKind::MaxDepth:
            return "depth:" + std::to_string(limit);
    }
    return "none";
}

std::vector<std::string> emit_activation_preamble(
    const GeneratedNames& names, const ThrottleStrategy& strategy) {
    switch (strategy.kind) {
        case ThrottleKind::Unlimited:
            return {"const bool " + names.active + " = true;"};
        case ThrottleKind::MaxCount:
            return {"const bool " + names.active + " = " + names.task_count +
                    " < " + std::to_string(strategy.limit) + ";"};
        case ThrottleKind::MaxDepth:
            return {"const int " + names.depth_local + " = " + names.depth +
                        ";",
                    "const bool " + names.active + " = " + names.depth_local +
                        " < " + std::to_string(strategy.limit) + ";"};
    }
    return {};
}

std::vector<std::string> instrument_counters(const GeneratedNames& names,
                                             const ThrottleStrategy& strategy) {
    switch (strategy.kind) {
        case ThrottleKind::MaxCount:
            return {"int " + names.task_count + " = 0;"};
        case ThrottleKind::MaxDepth:
            return {"int " + names.depth + " = 0;",
                    "#pragma omp threadprivate(" + names.depth + ")"};
        case ThrottleKind::Unlimited:
            break;
    }
    return {};
}

std::string activation_guard_clause(const GeneratedNames& names,
                                    const ThrottleStrategy& strategy) {
    if (!strategy.instruments()) return "";
    return " if(" + names.active + ")";
}

std::vector<std::string> extra_task_captures(const GeneratedNames& names,
                                             const ThrottleStrategy& strategy) {
    if (strategy.kind == ThrottleKind::MaxDepth) return {names.depth_local};
    return {};
}

std::vector<std::string> pre_task_lines(const GeneratedNames& names,
                                        const ThrottleStrategy& strategy) {
    if (strategy.kind != ThrottleKind::MaxCount) return {};
    return {"if (" + names.active + ") {",
            "#pragma omp atomic",
            names.task_count + " += 1;",
            "}"};
}

std::vector<std::string> task_prologue_lines(const GeneratedNames& names,
                                             const ThrottleStrategy& strategy) {
    if (strategy.kind != ThrottleKind::MaxDepth) return {};
    return {names.depth + " = " + names.depth_local + " + 1;"};
}

std::vector<std::string> task_epilogue_lines(const GeneratedNames& names,
                                             const ThrottleStrategy& strategy) {
    if (strategy.kind != ThrottleKind::MaxCount) return {};
    return {"if (" + names.active + ") {",
            "#pragma omp atomic",
            names.task_count + " -= 1;",
            "}"};
}

}  // namespace apac
