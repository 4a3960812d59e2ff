#include "apac/rewrite_buffer.hpp"

#include <algorithm>
#include <cstddef>

namespace apac {

namespace {

std::size_t insert_pos(const Edit& e) {
    return e.kind == EditKind::InsertAfter ? e.anchor.end : e.anchor.begin;
}

[[noreturn]] void fail(const SourceSpan& span, const std::string& msg) {
    Diagnostic d;
    d.severity = Severity::Error;
    d.span = span;
    d.message = msg;
    throw ApacError(d);
}

}  // namespace

void RewriteBuffer::record(Edit edit) {
    if (edit.anchor.begin > edit.anchor.end || edit.anchor.end > source_.size()) {
        fail(edit.anchor, "edit anchor out of range");
    }
    if (edit.seq < 0) edit.seq = next_seq_++;

    for (const Edit& other : edits_) {
        const bool a_rep = edit.kind == EditKind::Replace;
        const bool b_rep = other.kind == EditKind::Replace;
        if (a_rep && b_rep) {
            if (edit.anchor.begin < other.anchor.end && other.anchor.begin < edit.anchor.end) {
                fail(edit.anchor, "overlapping replacements");
            }
        } else if (a_rep != b_rep) {
            const Edit& rep = a_rep ? edit : other;
            const Edit& ins = a_rep ? other : edit;
            std::size_t pos = insert_pos(ins);
            if (rep.anchor.begin < pos && pos < rep.anchor.end) {
                fail(ins.anchor, "insertion inside replaced region");
            }
        }
    }
    edits_.push_back(std::move(edit));
}

std::string RewriteBuffer::materialize() const {
    std::vector<const Edit*> order;
    order.reserve(edits_.size());
    for (const Edit& e : edits_) order.push_back(&e);

    auto key = [](const Edit* e) {
        int rank = e->kind == EditKind::Replace ? 1 : 0;
        return std::tuple<std::size_t, int, int, int>(insert_pos(*e), rank, e->phase, e->seq);
    };
    std::stable_sort(order.begin(), order.end(),
                     [&](const Edit* a, const Edit* b) { return key(a) < key(b); });

    std::string out;
    out.reserve(source_.size() + source_.size() / 2);
    std::size_t cursor = 0;
    for (const Edit* e : order) {
        std::size_t pos = insert_pos(*e);
        if (pos > cursor) {
            out.append(source_, cursor, pos - cursor);
            cursor = pos;
        }
        out += e->text;
        if (e->kind == EditKind::Replace) cursor = e->anchor.end;
    }
    if (cursor < source_.size()) out.append(source_, cursor, source_.size() - cursor);
    return out;
}

}  // namespace apac
