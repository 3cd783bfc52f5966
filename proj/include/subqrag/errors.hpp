#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace subqrag {

// Root of every error raised by the engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EmptyField : public Error {
public:
    using Error::Error;
};

class UnknownId : public Error {
public:
    explicit UnknownId(std::int64_t id)
        : Error("unknown triple id " + std::to_string(id)), id_(id) {}
    std::int64_t id() const noexcept { return id_; }

private:
    std::int64_t id_;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Line numbers are 1-based; 0 means "not line oriented" (e.g. an array offset).
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class DuplicateKeyError : public Error {
public:
    DuplicateKeyError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": duplicate triple " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class DimensionMismatch : public Error {
public:
    DimensionMismatch(std::size_t expected, std::size_t got)
        : Error("embedding dimension mismatch: index has " + std::to_string(expected) +
                ", got " + std::to_string(got)) {}
};

class EmbedderMismatch : public Error {
public:
    using Error::Error;
};

class TemplateError : public Error {
public:
    using Error::Error;
};

class MissingTemplate : public Error {
public:
    explicit MissingTemplate(std::string name)
        : Error("missing prompt template: " + name), name_(std::move(name)) {}
    const std::string& name() const noexcept { return name_; }

private:
    std::string name_;
};

// Anything the language model backend can fail with. Pipeline stages catch
// this family and degrade; budget and dependency errors are deliberately
// outside it so they abort a question.
class LlmError : public Error {
public:
    using Error::Error;
};

class BackendError : public LlmError {
public:
    BackendError(int status, std::string body)
        : LlmError("backend error (status " + std::to_string(status) + "): " + body),
          status_(status), body_(std::move(body)) {}
    int status() const noexcept { return status_; }
    const std::string& body() const noexcept { return body_; }

private:
    int status_;
    std::string body_;
};

class StubExhausted : public LlmError {
public:
    using LlmError::LlmError;
};

class StructuredParseError : public LlmError {
public:
    StructuredParseError(std::string raw, const std::string& why)
        : LlmError("could not parse structured response: " + why), raw_(std::move(raw)) {}
    const std::string& raw() const noexcept { return raw_; }

private:
    std::string raw_;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class MissingDependency : public Error {
public:
    explicit MissingDependency(int index)
        : Error("sub-question placeholder #" + std::to_string(index) + " has no answer"),
          index_(index) {}
    int index() const noexcept { return index_; }

private:
    int index_;
};

class BudgetExceeded : public Error {
public:
    explicit BudgetExceeded(int budget)
        : Error("LLM call budget of " + std::to_string(budget) + " exhausted"), budget_(budget) {}
    int budget() const noexcept { return budget_; }

private:
    int budget_;
};

class DuplicateDocId : public Error {
public:
    explicit DuplicateDocId(std::string id)
        : Error("duplicate document id: " + id), id_(std::move(id)) {}
    const std::string& id() const noexcept { return id_; }

private:
    std::string id_;
};

class UnsupportedFormat : public Error {
public:
    using Error::Error;
};

class EmptyDataset : public Error {
public:
    EmptyDataset() : Error("dataset is empty") {}
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace subqrag
