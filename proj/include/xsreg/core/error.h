// Copyright 2026 The xsreg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace xsreg {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller violated an operation's precondition (bad argument, empty input).
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Input data could not be decoded (malformed file, size mismatch).
class FormatError : public Error {
public:
    using Error::Error;
};

/// Geometry is too degenerate for the requested fit.
class DegenerateError : public Error {
public:
    using Error::Error;
};

}  // namespace xsreg
