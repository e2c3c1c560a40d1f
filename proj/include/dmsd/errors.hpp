// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace dmsd {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error { public: using Error::Error; };
class DomainError : public Error { public: using Error::Error; };
class NumericError : public Error { public: using Error::Error; };
class UsageError : public Error { public: using Error::Error; };
class DegenerateInputError : public Error { public: using Error::Error; };
class FormatError : public Error { public: using Error::Error; };
class DataError : public Error { public: using Error::Error; };
class SpecError : public Error { public: using Error::Error; };
class SamplingError : public Error { public: using Error::Error; };
class StructuralError : public Error { public: using Error::Error; };
class ConfigError : public Error { public: using Error::Error; };

}  // namespace dmsd
