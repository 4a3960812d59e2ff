#include "apac/ast.hpp"

namespace apac {

bool is_builtin_type(const std::string& name) {
    return name == "void" || name == "int" || name == "long" ||
           name == "double" || name == "bool";
}

std::string TypeRef::spelling() const {
    std::string s;
    if (is_const) s += "const ";
    s += base;
    if (declarator == Declarator::Pointer) s += "*";
    if (declarator == Declarator::Reference) s += "&";
    return s;
}

std::vector<FunctionDecl*> TranslationUnit::functions() const {
    std::vector<FunctionDecl*> out;
    for (const auto& item : items) {
        if (item.kind == TopItemKind::Function) {
            out.push_back(item.function.get());
        } else if (item.kind == TopItemKind::Class) {
            for (const auto& m : item.class_decl->methods)
                out.push_back(m.get());
        }
    }
    return out;
}

std::vector<const ClassDecl*> TranslationUnit::classes() const {
    std::vector<const ClassDecl*> out;
    for (const auto& item : items)
        if (item.kind == TopItemKind::Class)
            out.push_back(item.class_decl.get());
    return out;
}

std::vector<const GlobalVarDecl*> TranslationUnit::globals() const {
    std::vector<const GlobalVarDecl*> out;
    for (const auto& item : items)
        if (item.kind == TopItemKind::GlobalVar)
            out.push_back(item.global.get());
    return out;
}

const FunctionDecl* TranslationUnit::find_function(
    const std::string& qualified) const {
    for (const auto* f : functions())
        if (f->qualified_name == qualified) return f;
    return nullptr;
}

}  // namespace apac
