#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pseudovos {

// Broad failure classes. The CLI maps each one to a distinct exit code.
enum class ErrorCategory {
    usage,
    io,
    parse,
    validation,
    not_found,
    numeric,
};

constexpr std::string_view category_name(ErrorCategory c) noexcept
{
    switch (c) {
    case ErrorCategory::usage: return "usage";
    case ErrorCategory::io: return "io";
    case ErrorCategory::parse: return "parse";
    case ErrorCategory::validation: return "validation";
    case ErrorCategory::not_found: return "not_found";
    case ErrorCategory::numeric: return "numeric";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category)
    {
    }

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory c, const std::string& what)
{
    throw Error(c, what);
}

inline void require(bool cond, ErrorCategory c, const std::string& what)
{
    if (!cond)
        throw Error(c, what);
}

} // namespace pseudovos
