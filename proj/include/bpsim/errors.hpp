#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace bpsim {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ParseError : Error {
    explicit ParseError(const std::string& msg) : Error("parse error: " + msg) {}
};

// Carries the full list of violated invariants, not just the first one.
struct ValidationError : Error {
    std::vector<std::string> issues;
    explicit ValidationError(std::vector<std::string> v)
        : Error("validation failed: " + join(v)), issues(std::move(v)) {}

  private:
    static std::string join(const std::vector<std::string>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) s += "; ";
            s += v[i];
        }
        return s;
    }
};

struct UnknownScenario : Error {
    explicit UnknownScenario(const std::string& name) : Error("unknown scenario: " + name) {}
};

struct InfeasibleAssignment : Error {
    explicit InfeasibleAssignment(const std::string& msg) : Error("infeasible assignment: " + msg) {}
};

struct InfeasibleAction : Error {
    explicit InfeasibleAction(const std::string& msg) : Error("infeasible action: " + msg) {}
};

struct InfeasiblePair : Error {
    explicit InfeasiblePair(const std::string& msg) : Error("infeasible pair: " + msg) {}
};

struct NonFiniteLoss : Error {
    explicit NonFiniteLoss(const std::string& msg) : Error("non-finite loss: " + msg) {}
};

struct IoError : Error {
    explicit IoError(const std::string& msg) : Error("io error: " + msg) {}
};

} // namespace bpsim
