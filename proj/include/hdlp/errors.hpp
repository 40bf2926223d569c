#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hdlp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Invalid argument or inconsistent dimensions.
class ArgumentError : public Error
{
public:
    using Error::Error;
};

class ParseError : public Error
{
public:
    /// `line` and `column` are 1-based; column 0 means "whole line".
    ParseError(const std::string& msg, std::size_t line, std::size_t column)
        : Error(msg), line_(line), column_(column) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

class EmptyInputError : public Error
{
public:
    using Error::Error;
};

class DegenerateColumnError : public Error
{
public:
    DegenerateColumnError(const std::string& msg, std::size_t column)
        : Error(msg), column_(column) {}
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t column_;
};

class InsufficientSampleError : public Error
{
public:
    using Error::Error;
};

class NonstationaryError : public Error
{
public:
    NonstationaryError(const std::string& msg, double radius)
        : Error(msg), radius_(radius) {}
    double radius() const noexcept { return radius_; }

private:
    double radius_;
};

class ConvergenceError : public Error
{
public:
    ConvergenceError(const std::string& msg, double kkt_residual)
        : Error(msg), kkt_residual_(kkt_residual) {}
    double kkt_residual() const noexcept { return kkt_residual_; }

private:
    double kkt_residual_;
};

class SizeError : public Error
{
public:
    using Error::Error;
};

class DegenerateNodeError : public Error
{
public:
    DegenerateNodeError(const std::string& msg, std::size_t node)
        : Error(msg), node_(node) {}
    std::size_t node() const noexcept { return node_; }

private:
    std::size_t node_;
};

/// Raised when too many Monte Carlo replications fail.
class ScenarioError : public Error
{
public:
    ScenarioError(const std::string& msg, std::size_t failures, std::size_t total)
        : Error(msg), failures_(failures), total_(total) {}
    std::size_t failures() const noexcept { return failures_; }
    std::size_t total() const noexcept { return total_; }

private:
    std::size_t failures_;
    std::size_t total_;
};

} // namespace hdlp
