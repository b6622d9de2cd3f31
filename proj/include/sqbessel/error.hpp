#pragma once

#include <stdexcept>
#include <string>

namespace sqb {

/// Base class of every error raised by the library. `kind()` is a stable
/// machine-readable tag used by the CLI error JSON.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

struct DomainError : Error {
    explicit DomainError(const std::string& w) : Error("DomainError", w) {}
};

struct NonGenericPhase : Error {
    explicit NonGenericPhase(const std::string& w) : Error("NonGenericPhase", w) {}
};

struct BranchCollision : Error {
    explicit BranchCollision(const std::string& w) : Error("BranchCollision", w) {}
};

struct RootAssignment : Error {
    explicit RootAssignment(const std::string& w) : Error("RootAssignment", w) {}
};

struct TailBudgetExceeded : Error {
    explicit TailBudgetExceeded(const std::string& w) : Error("TailBudgetExceeded", w) {}
};

struct NonConvergence : Error {
    explicit NonConvergence(const std::string& w) : Error("NonConvergence", w) {}
};

struct Infeasible : Error {
    explicit Infeasible(const std::string& w) : Error("Infeasible", w) {}
};

struct IllConditioned : Error {
    explicit IllConditioned(const std::string& w) : Error("IllConditioned", w) {}
};

struct DegenerateDeterminant : Error {
    explicit DegenerateDeterminant(const std::string& w) : Error("DegenerateDeterminant", w) {}
};

}  // namespace sqb
