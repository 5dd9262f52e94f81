#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace stylesim {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition.
class ContractViolation : public Error {
public:
    using Error::Error;
};

class MissingAgentError : public Error {
public:
    explicit MissingAgentError(const std::string& id) : Error("unknown agent: " + id), id_(id) {}
    const std::string& id() const { return id_; }

private:
    std::string id_;
};

class InsufficientDataError : public Error {
public:
    using Error::Error;
};

/// Configuration or input validation failed; carries every problem found.
class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<std::string> problems)
        : Error(join(problems)), problems_(std::move(problems)) {}
    const std::vector<std::string>& problems() const { return problems_; }

private:
    static std::string join(const std::vector<std::string>& p) {
        std::string out;
        for (const auto& s : p) {
            if (!out.empty()) out += "; ";
            out += s;
        }
        return out;
    }
    std::vector<std::string> problems_;
};

/// A replay log failed verification.
class IntegrityError : public Error {
public:
    IntegrityError(std::int64_t step, const std::string& what)
        : Error("integrity error at step " + std::to_string(step) + ": " + what), step_(step) {}
    std::int64_t step() const { return step_; }

private:
    std::int64_t step_;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace stylesim
