#pragma once

#include <stdexcept>
#include <string>

namespace limellm {

// Base class for every error raised by the engine.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptyInputError : Error { using Error::Error; };
struct LengthMismatchError : Error { using Error::Error; };
struct InvariantError : Error { using Error::Error; };
struct ExhaustedMaskSpaceError : Error { using Error::Error; };
struct MalformedResponseError : Error { using Error::Error; };
struct MalformedPromptError : Error { using Error::Error; };
struct InsufficientNeighborhoodError : Error { using Error::Error; };
struct SingularSystemError : Error { using Error::Error; };
struct NonFiniteInputError : Error { using Error::Error; };
struct ZeroVectorError : Error { using Error::Error; };
struct DegenerateRationaleError : Error { using Error::Error; };
struct MissingRationaleError : Error { using Error::Error; };
struct InsufficientSeedsError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct CacheIoError : Error { using Error::Error; };

// Raised by remote backends after retries are exhausted. Carries the last
// HTTP status (0 for transport-level failures) and a short body excerpt.
class BackendError : public Error {
public:
    explicit BackendError(const std::string& message, int status = 0,
                          std::string body_excerpt = {})
        : Error(message), status_(status), body_excerpt_(std::move(body_excerpt)) {}

    int status() const noexcept { return status_; }
    const std::string& body_excerpt() const noexcept { return body_excerpt_; }

private:
    int status_ = 0;
    std::string body_excerpt_;
};

} // namespace limellm
