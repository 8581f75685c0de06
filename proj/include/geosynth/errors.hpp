#pragma once

#include <stdexcept>
#include <string>

namespace geosynth {

// Bad inputs, configs, schemas. CLI maps this to exit code 2.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Failed factorizations, non-finite posteriors. CLI maps this to exit code 3.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace geosynth
