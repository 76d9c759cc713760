#pragma once

#include <stdexcept>
#include <string>

namespace huapa {

// Failure category; the CLI maps each kind onto a process exit code.
enum class ErrorKind {
    config,   // bad options, bad checkpoint/vocabulary pairing
    data,     // malformed corpus, embeddings, vocabulary files
    numeric,  // non-finite values during training or checking
    shape,    // op contract violated (programming error)
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), m_kind(kind)
    { }

    ErrorKind kind() const noexcept { return m_kind; }

private:
    ErrorKind m_kind;
};

inline const char* to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::data: return "data";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::shape: return "shape";
    }
    return "unknown";
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what)
{
    throw Error(kind, what);
}

}  // namespace huapa
