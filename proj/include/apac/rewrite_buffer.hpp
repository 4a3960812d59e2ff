#pragma once

#include <string>
#include <vector>

#include "apac/source.hpp"

namespace apac {

enum class EditKind { InsertBefore, InsertAfter, Replace };

// Edits are expressed against original-buffer offsets and never against
// already-edited text. Same-offset insertions are ordered by (phase, seq).
struct Edit {
    EditKind kind = EditKind::InsertBefore;
    SourceSpan anchor;
    std::string text;
    int phase = 0;
    int seq = -1;  // assigned at record time when negative
};

class RewriteBuffer {
public:
    explicit RewriteBuffer(std::string source) : source_(std::move(source)) {}

    // Validates the anchor and replace-overlap rules; throws ApacError.
    void record(Edit edit);

    // Applies all recorded edits; repeated calls yield identical output.
    std::string materialize() const;

    const std::string& source() const { return source_; }
    const std::vector<Edit>& edits() const { return edits_; }
    bool empty() const { return edits_.empty(); }

private:
    std::string source_;
    std::vector<Edit> edits_;
    int next_seq_ = 0;
};

}  // namespace apac
