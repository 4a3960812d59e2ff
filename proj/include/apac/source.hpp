#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace apac {

// Half-open byte range [begin, end) into one source buffer, with the
// line/column of the first byte (1-based).
struct SourceSpan {
    uint32_t file_id = 0;
    size_t begin = 0;
    size_t end = 0;
    int line = 1;
    int col = 1;

    size_t length() const { return end - begin; }
    bool contains(const SourceSpan& inner) const {
        return begin <= inner.begin && inner.end <= end;
    }
    bool overlaps(const SourceSpan& other) const {
        return begin < other.end && other.begin < end;
    }
};

enum class Severity { Error, Warning, Note };

struct Diagnostic {
    Severity severity = Severity::Error;
    SourceSpan span;
    std::string file;
    std::string message;
};

// file:line:col: severity: message
std::string format_diagnostic(const Diagnostic& d);

class DiagnosticList {
public:
    void add(Diagnostic d) { items_.push_back(std::move(d)); }
    void error(SourceSpan span, std::string file, std::string message) {
        add({Severity::Error, span, std::move(file), std::move(message)});
    }
    void warning(SourceSpan span, std::string file, std::string message) {
        add({Severity::Warning, span, std::move(file), std::move(message)});
    }
    bool has_errors() const {
        for (const auto& d : items_)
            if (d.severity == Severity::Error) return true;
        return false;
    }
    const std::vector<Diagnostic>& items() const { return items_; }
    void append(const DiagnosticList& other) {
        items_.insert(items_.end(), other.items_.begin(), other.items_.end());
    }

private:
    std::vector<Diagnostic> items_;
};

// Thrown for conditions that abort a pipeline stage (syntax errors,
// unsupported constructs, rewrite conflicts, interpreter faults).
class ApacError : public std::runtime_error {
public:
    explicit ApacError(Diagnostic d)
        : std::runtime_error(format_diagnostic(d)), diag_(std::move(d)) {}
    const Diagnostic& diagnostic() const { return diag_; }

private:
    Diagnostic diag_;
};

// Rejects byte sequences that are not well-formed UTF-8.
void validate_utf8(const std::string& text, const std::string& file);

// Line/column (1-based) for a byte offset.
std::pair<int, int> line_col_at(const std::string& text, size_t offset);

// Writes via a temp file in the same directory plus rename, so readers never
// observe a partially written file.
void write_file_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

}  // namespace apac
