#include "apac/source.hpp"

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace apac {

std::string format_diagnostic(const Diagnostic& d) {
    const char* sev = d.severity == Severity::Error     ? "error"
                      : d.severity == Severity::Warning ? "warning"
                                                        : "note";
    return d.file + ":" + std::to_string(d.span.line) + ":" +
           std::to_string(d.span.col) + ": " + sev + ": " + d.message;
}

void validate_utf8(const std::string& text, const std::string& file) {
    size_t i = 0;
    const size_t n = text.size();
    while (i < n) {
        const unsigned char c = static_cast<unsigned char>(text[i]);
        size_t extra;
        if (c < 0x80)
            extra = 0;
        else if ((c & 0xE0) == 0xC0)
            extra = 1;
        else if ((c & 0xF0) == 0xE0)
            extra = 2;
        else if ((c & 0xF8) == 0xF0)
            extra = 3;
        else
            extra = SIZE_MAX;
        if (extra == SIZE_MAX || i + extra >= n) {
            auto [line, col] = line_col_at(text, i);
            throw ApacError({Severity::Error,
                             {0, i, i + 1, line, col},
                             file,
                             "input is not valid UTF-8"});
        }
        for (size_t k = 1; k <= extra; ++k) {
            if ((static_cast<unsigned char>(text[i + k]) & 0xC0) != 0x80) {
                auto [line, col] = line_col_at(text, i);
                throw ApacError({Severity::Error,
                                 {0, i, i + k + 1, line, col},
                                 file,
                                 "input is not valid UTF-8"});
            }
        }
        i += extra + 1;
    }
}

std::pair<int, int> line_col_at(const std::string& text, size_t offset) {
    int line = 1, col = 1;
    for (size_t i = 0; i < offset && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

void write_file_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    fs::path target(path);
    fs::path dir = target.parent_path();
    fs::path tmp = (dir.empty() ? fs::path(".") : dir) /
                   (target.filename().string() + ".tmp" + std::to_string(::getpid()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw ApacError({Severity::Error, {}, path, "cannot open output file for writing"});
        }
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw ApacError({Severity::Error, {}, path, "write failed"});
        }
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw ApacError({Severity::Error, {}, path, "rename to final path failed"});
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ApacError({Severity::Error, {}, path, "cannot open input file"});
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace apac
