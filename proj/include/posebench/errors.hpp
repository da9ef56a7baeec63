#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace posebench {

// Base class for all toolkit errors. Subclasses mirror the failure
// categories surfaced through the CLI exit codes and the service's
// HTTP status mapping.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// --- geometry ---

class InvalidRotation : public Error {
public:
    explicit InvalidRotation(const std::string& msg) : Error(msg) {}
};

class NonPositiveDepth : public Error {
public:
    explicit NonPositiveDepth(const std::string& msg) : Error(msg) {}
};

class TooFewVertices : public Error {
public:
    explicit TooFewVertices(const std::string& msg) : Error(msg) {}
};

class EmptyRange : public Error {
public:
    explicit EmptyRange(const std::string& msg) : Error(msg) {}
};

// --- rendering / maps ---

class MeshEntirelyBehindCamera : public Error {
public:
    explicit MeshEntirelyBehindCamera(const std::string& msg) : Error(msg) {}
};

class DimensionMismatch : public Error {
public:
    explicit DimensionMismatch(const std::string& msg) : Error(msg) {}
};

class EmptySilhouette : public Error {
public:
    explicit EmptySilhouette(const std::string& msg) : Error(msg) {}
};

// --- metrics ---

class EmptyUnion : public Error {
public:
    explicit EmptyUnion(const std::string& msg) : Error(msg) {}
};

class KindMismatch : public Error {
public:
    explicit KindMismatch(const std::string& msg) : Error(msg) {}
};

// --- I/O ---

// Parse failure in any on-disk format. byte_offset is set for binary
// formats, line for row-oriented text formats; -1 when not applicable.
class ParseError : public Error {
public:
    ParseError(const std::string& msg, long long byte_offset = -1, long long line = -1)
        : Error(msg), byte_offset(byte_offset), line(line) {}
    long long byte_offset;
    long long line;
};

class MissingFile : public Error {
public:
    explicit MissingFile(const std::string& msg) : Error(msg) {}
};

class InconsistentIds : public Error {
public:
    explicit InconsistentIds(const std::string& msg) : Error(msg) {}
};

class NonFiniteValue : public Error {
public:
    NonFiniteValue(const std::string& msg, long long line = -1) : Error(msg), line(line) {}
    long long line;
};

// --- scoring ---

class MissingModel : public Error {
public:
    explicit MissingModel(const std::string& msg) : Error(msg) {}
};

class RenderFailure : public Error {
public:
    explicit RenderFailure(const std::string& msg) : Error(msg) {}
};

class EmptyBins : public Error {
public:
    explicit EmptyBins(const std::string& msg) : Error(msg) {}
};

}  // namespace posebench
