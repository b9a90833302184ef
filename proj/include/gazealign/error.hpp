#pragma once

#include <stdexcept>
#include <string>

namespace gazealign {

/// Bad or inconsistent input data (files, flags, misaligned ids). Maps to exit code 2.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A well-formed input the analysis cannot handle (underdetermined fit, empty group). Exit code 1.
class AnalysisError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace gazealign
