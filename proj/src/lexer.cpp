#include "apac/lexer.hpp"

#include <array>
#include <cctype>

namespace apac {

namespace {

bool is_ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}
bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// Longest-match punctuator table.
const std::array<std::string_view, 34> kPuncts = {
    "<<=", ">>=", "->*", "::", "->", "++", "--", "<<", ">>", "<=", ">=",
    "==",  "!=",  "&&",  "||", "+=", "-=", "*=", "/=", "%=", "&=", "|=",
    "^=",  "{",   "}",   "(",  ")",  "[",  "]",  ";",  ",",  ".",  "#",
    ":"};

}  // namespace

std::vector<Token> lex(const std::string& src, const std::string& file,
                       LexMode mode) {
    std::vector<Token> out;
    size_t i = 0;
    const size_t n = src.size();
    int line = 1, col = 1;

    auto advance = [&](size_t count) {
        for (size_t k = 0; k < count && i < n; ++k, ++i) {
            if (src[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
    };
    auto fail = [&](const std::string& msg) -> void {
        throw ApacError({Severity::Error,
                         {0, i, i + 1, line, col},
                         file,
                         msg});
    };
    auto push = [&](Tok kind, size_t begin, int bline, int bcol) {
        out.push_back(
            {kind, src.substr(begin, i - begin), {0, begin, i, bline, bcol}});
    };

    while (i < n) {
        const char c = src[i];
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            advance(1);
            continue;
        }
        if (c == '/' && i + 1 < n && src[i + 1] == '/') {
            while (i < n && src[i] != '\n') advance(1);
            continue;
        }
        if (c == '/' && i + 1 < n && src[i + 1] == '*') {
            advance(2);
            while (i + 1 < n && !(src[i] == '*' && src[i + 1] == '/'))
                advance(1);
            if (i + 1 >= n) fail("unterminated block comment");
            advance(2);
            continue;
        }
        const size_t begin = i;
        const int bline = line, bcol = col;
        if (c == '#' && mode == LexMode::Program) {
            // Preprocessor line, including continuations.
            while (i < n && src[i] != '\n') {
                if (src[i] == '\\' && i + 1 < n && src[i + 1] == '\n')
                    advance(1);
                advance(1);
            }
            push(Tok::HashLine, begin, bline, bcol);
            continue;
        }
        if (is_ident_start(c)) {
            while (i < n && is_ident_char(src[i])) advance(1);
            push(Tok::Identifier, begin, bline, bcol);
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && i + 1 < n &&
             std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
            bool is_float = false;
            while (i < n && std::isdigit(static_cast<unsigned char>(src[i])))
                advance(1);
            if (i < n && src[i] == '.') {
                is_float = true;
                advance(1);
                while (i < n &&
                       std::isdigit(static_cast<unsigned char>(src[i])))
                    advance(1);
            }
            if (i < n && (src[i] == 'e' || src[i] == 'E')) {
                is_float = true;
                advance(1);
                if (i < n && (src[i] == '+' || src[i] == '-')) advance(1);
                while (i < n &&
                       std::isdigit(static_cast<unsigned char>(src[i])))
                    advance(1);
            }
            while (i < n && (src[i] == 'l' || src[i] == 'L' || src[i] == 'u' ||
                             src[i] == 'U' || src[i] == 'f' || src[i] == 'F')) {
                if (src[i] == 'f' || src[i] == 'F') is_float = true;
                advance(1);
            }
            push(is_float ? Tok::FloatLit : Tok::IntLit, begin, bline, bcol);
            continue;
        }
        if (c == '"' || c == '\'') {
            const char quote = c;
            advance(1);
            while (i < n && src[i] != quote) {
                if (src[i] == '\\') advance(1);
                advance(1);
            }
            if (i >= n) fail("unterminated literal");
            advance(1);
            // Strings/chars only survive inside HashLines in Program mode;
            // they still lex so TokenStream comparison can see them.
            push(Tok::Punct, begin, bline, bcol);
            continue;
        }
        bool matched = false;
        for (std::string_view p : kPuncts) {
            if (src.compare(i, p.size(), p) == 0) {
                advance(p.size());
                push(Tok::Punct, begin, bline, bcol);
                matched = true;
                break;
            }
        }
        if (matched) continue;
        if (std::string_view("+-*/%<>=!&|^~?").find(c) !=
            std::string_view::npos) {
            advance(1);
            push(Tok::Punct, begin, bline, bcol);
            continue;
        }
        fail(std::string("unexpected character '") + c + "'");
    }
    out.push_back({Tok::Eof, "", {0, n, n, line, col}});
    return out;
}

std::vector<std::string> comparison_tokens(const std::string& source,
                                           bool strip_generated_suffix) {
    std::vector<std::string> texts;
    for (const auto& t : lex(source, "<comparison>", LexMode::TokenStream)) {
        if (t.kind == Tok::Eof) continue;
        std::string text = t.text;
        if (strip_generated_suffix && t.kind == Tok::Identifier &&
            text.rfind("apac_", 0) == 0) {
            // Numbering of generated names (apac_tmp_2, collision renames)
            // must not affect equality; drop every trailing _<digits> group.
            for (;;) {
                const size_t us = text.find_last_of('_');
                if (us == std::string::npos || us + 1 >= text.size()) break;
                bool digits = true;
                for (size_t k = us + 1; k < text.size(); ++k)
                    digits = digits && std::isdigit(
                                           static_cast<unsigned char>(text[k]));
                if (!digits) break;
                text = text.substr(0, us);
            }
        }
        texts.push_back(std::move(text));
    }
    return texts;
}

}  // namespace apac
