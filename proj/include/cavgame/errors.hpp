#pragma once

#include <stdexcept>
#include <string>

namespace cavgame {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NonfiniteInput : public Error {
public:
    using Error::Error;
};

class VelocityFloor : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class MissingNeighbor : public Error {
public:
    using Error::Error;
};

class TooShort : public Error {
public:
    using Error::Error;
};

class MissingSubset : public Error {
public:
    using Error::Error;
};

class Infeasible : public Error {
public:
    using Error::Error;
};

// Raised when a characteristic-value evaluation fails; carries the subset mask.
class EvaluatorFailure : public Error {
public:
    EvaluatorFailure(unsigned subset, const std::string& what)
        : Error("evaluation of subset " + std::to_string(subset) + " failed: " + what), subset_(subset) {}
    unsigned subset() const { return subset_; }

private:
    unsigned subset_;
};

class SchemaError : public Error {
public:
    SchemaError(std::string path, const std::string& what)
        : Error(path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

class SemanticError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    IoError(std::string path, const std::string& what)
        : Error(path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

}  // namespace cavgame
