#ifndef SECRELAY_COMMON_HPP
#define SECRELAY_COMMON_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace secrelay {

inline constexpr std::string_view version = "0.1.0";

/// Thrown when a domain object or argument violates an invariant.
/// The message names the offending field (and subchannel index if any).
class validation_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown when an exhaustive search would exceed its point budget.
class size_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Thrown by the gradient check when the query point is too close to a
/// nondifferentiable locus (positive-part kink, min switch, box edge).
class kink_proximity_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace secrelay

#endif
