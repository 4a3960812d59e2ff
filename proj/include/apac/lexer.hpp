#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "apac/source.hpp"

namespace apac {

enum class Tok {
    Identifier,
    IntLit,
    FloatLit,
    Punct,     // operators and separators, text holds the spelling
    HashLine,  // whole preprocessor line (Program mode only)
    Eof,
};

struct Token {
    Tok kind = Tok::Eof;
    std::string text;
    SourceSpan span;

    bool is(Tok k) const { return kind == k; }
    bool is(Tok k, std::string_view t) const { return kind == k && text == t; }
    bool is_punct(std::string_view t) const { return is(Tok::Punct, t); }
    bool is_ident(std::string_view t) const { return is(Tok::Identifier, t); }
};

enum class LexMode {
    Program,      // '#' swallows the rest of the line as one HashLine token
    TokenStream,  // '#' is an ordinary punctuator (used for token comparison)
};

// Comments and whitespace are skipped; byte offsets let callers recover any
// trivia from the original buffer. Throws ApacError on malformed input.
std::vector<Token> lex(const std::string& source, const std::string& file,
                       LexMode mode = LexMode::Program);

// Token texts for whitespace/comment-insensitive comparison. When
// strip_generated_suffix is set, identifiers like apac_tmp_12 lose the final
// _<digits> collision suffix.
std::vector<std::string> comparison_tokens(const std::string& source,
                                           bool strip_generated_suffix = true);

}  // namespace apac
