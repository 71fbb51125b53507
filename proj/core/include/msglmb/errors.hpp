#pragma once

#include <stdexcept>
#include <string>

namespace msglmb {

struct PointBehindCamera : std::runtime_error {
    explicit PointBehindCamera(const std::string& what) : std::runtime_error(what) {}
};

/// The projected conic is not a bounded ellipse (object crosses the principal plane).
struct DegenerateConic : std::runtime_error {
    explicit DegenerateConic(const std::string& what) : std::runtime_error(what) {}
};

struct BudgetExceeded : std::runtime_error {
    explicit BudgetExceeded(const std::string& what) : std::runtime_error(what) {}
};

struct DuplicateBirthLabel : std::runtime_error {
    explicit DuplicateBirthLabel(const std::string& what) : std::runtime_error(what) {}
};

struct EmptyFrameSet : std::runtime_error {
    explicit EmptyFrameSet(const std::string& what) : std::runtime_error(what) {}
};

struct NoConfidences : std::runtime_error {
    explicit NoConfidences(const std::string& what) : std::runtime_error(what) {}
};

struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

struct SchemaVersionMismatch : std::runtime_error {
    explicit SchemaVersionMismatch(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace msglmb
