#pragma once

#include <memory>

#include "apac/ast.hpp"

namespace apac {

// Parses one source buffer into a translation unit. Constructs outside the
// supported language subset raise ApacError with an "unsupported construct"
// diagnostic; malformed input raises a syntax error.
std::unique_ptr<TranslationUnit> parse_translation_unit(
    const std::string& source, const std::string& file);

}  // namespace apac
