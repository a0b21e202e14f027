#pragma once

#include <stdexcept>
#include <string>

namespace geoflow {

/// Base class for all library errors.
struct GeoError : std::runtime_error {
    explicit GeoError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConstraintViolation : GeoError {
    using GeoError::GeoError;
};

struct BasepointMismatch : GeoError {
    using GeoError::GeoError;
};

struct InjectivityRadiusExceeded : GeoError {
    using GeoError::GeoError;
};

/// The target point lies at or beyond the cut locus of the base point.
/// Derives from InjectivityRadiusExceeded so callers can catch either.
struct AtCutLocus : InjectivityRadiusExceeded {
    using InjectivityRadiusExceeded::InjectivityRadiusExceeded;
};

struct GridTooCoarse : GeoError {
    using GeoError::GeoError;
};

struct DegenerateInput : GeoError {
    using GeoError::GeoError;
};

struct StepTooLarge : GeoError {
    using GeoError::GeoError;
};

struct ConstraintDrift : GeoError {
    using GeoError::GeoError;
};

struct NeighborLeftInjectivityGuard : GeoError {
    using GeoError::GeoError;
};

struct NotAGeodesic : GeoError {
    using GeoError::GeoError;
};

struct NotOnTrajectory : GeoError {
    using GeoError::GeoError;
};

struct NonPositiveSample : GeoError {
    using GeoError::GeoError;
};

struct WindowTooSmall : GeoError {
    using GeoError::GeoError;
};

struct BeyondValidityRange : GeoError {
    using GeoError::GeoError;
};

struct NotKilling : GeoError {
    using GeoError::GeoError;
};

struct ConfigInvalid : GeoError {
    using GeoError::GeoError;
};

}  // namespace geoflow
