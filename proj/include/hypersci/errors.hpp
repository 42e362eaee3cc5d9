#pragma once

#include <stdexcept>
#include <string>

namespace hypersci {

// Typed failures so callers (and tests) can distinguish the condition, not
// just the message.
struct OutOfRangeNode : std::runtime_error {
    explicit OutOfRangeNode(const std::string& what) : std::runtime_error(what) {}
};

struct DegenerateEdge : std::runtime_error {
    explicit DegenerateEdge(const std::string& what) : std::runtime_error(what) {}
};

struct IsolatedNode : std::runtime_error {
    explicit IsolatedNode(const std::string& what) : std::runtime_error(what) {}
};

struct ShapeMismatch : std::runtime_error {
    explicit ShapeMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct SizeMismatch : std::runtime_error {
    explicit SizeMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct StaleTape : std::runtime_error {
    explicit StaleTape(const std::string& what) : std::runtime_error(what) {}
};

struct NonFiniteValue : std::runtime_error {
    explicit NonFiniteValue(const std::string& what) : std::runtime_error(what) {}
};

struct EmptyGroup : std::runtime_error {
    explicit EmptyGroup(const std::string& what) : std::runtime_error(what) {}
};

struct DegenerateGroups : std::runtime_error {
    explicit DegenerateGroups(const std::string& what) : std::runtime_error(what) {}
};

struct RowCountMismatch : std::runtime_error {
    explicit RowCountMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

struct DivergenceDetected : std::runtime_error {
    explicit DivergenceDetected(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace hypersci
