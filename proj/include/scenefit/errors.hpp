#pragma once

#include <stdexcept>
#include <string>

namespace scenefit {

// Base class for all library errors. The CLI maps subclasses to exit codes:
// input/validation problems exit 1, optimization failures exit 2.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvalidArgument : Error {
    using Error::Error;
};

// --- input / validation -------------------------------------------------

struct ParseError : Error {
    using Error::Error;
};

struct SchemaError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

struct DegenerateFace : Error {
    using Error::Error;
};

struct EmptyMesh : Error {
    using Error::Error;
};

struct NotWatertight : Error {
    using Error::Error;
};

struct BadJointIndex : Error {
    using Error::Error;
};

struct NoObjects : Error {
    using Error::Error;
};

struct LengthMismatch : Error {
    using Error::Error;
};

struct EmptyMatching : Error {
    using Error::Error;
};

struct DegenerateConfiguration : Error {
    using Error::Error;
};

// --- evaluation / optimization ------------------------------------------

struct NonPositiveDepth : Error {
    using Error::Error;
};

struct NonFiniteLoss : Error {
    using Error::Error;
};

struct LineSearchFailed : Error {
    using Error::Error;
};

struct PlacementFailed : Error {
    using Error::Error;
};

}  // namespace scenefit
