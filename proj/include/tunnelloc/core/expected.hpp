#ifndef TUNNELLOC_CORE_EXPECTED_HPP
#define TUNNELLOC_CORE_EXPECTED_HPP

#include <cassert>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

namespace tunnelloc {

/// Recoverable per-frame failures. Precondition violations throw instead.
enum class ErrorCode {
  kIcpDiverged,
  kNdtIllConditioned,
  kSingularInnovation,
  kWallNotVisible,
  kNoLampMatched,
  kNoLcsDetected,
  kNotInTunnel,
};

constexpr std::string_view to_string(ErrorCode e) {
  switch (e) {
    case ErrorCode::kIcpDiverged: return "IcpDiverged";
    case ErrorCode::kNdtIllConditioned: return "NdtIllConditioned";
    case ErrorCode::kSingularInnovation: return "SingularInnovation";
    case ErrorCode::kWallNotVisible: return "WallNotVisible";
    case ErrorCode::kNoLampMatched: return "NoLampMatched";
    case ErrorCode::kNoLcsDetected: return "NoLcsDetected";
    case ErrorCode::kNotInTunnel: return "NotInTunnel";
  }
  return "Unknown";
}

struct Error {
  ErrorCode code;
  std::string detail;
};

/// Minimal value-or-error carrier (std::expected is not available on every toolchain we target).
template <typename T>
class Expected {
 public:
  Expected(T value) : v_(std::move(value)) {}  // NOLINT(google-explicit-constructor)
  Expected(Error err) : v_(std::move(err)) {}  // NOLINT(google-explicit-constructor)

  bool has_value() const { return v_.index() == 0; }
  explicit operator bool() const { return has_value(); }

  const T& value() const& {
    assert(has_value());
    return std::get<0>(v_);
  }
  T& value() & {
    assert(has_value());
    return std::get<0>(v_);
  }
  T&& value() && {
    assert(has_value());
    return std::get<0>(std::move(v_));
  }
  const T& operator*() const& { return value(); }
  const T* operator->() const { return &value(); }

  const Error& error() const {
    assert(!has_value());
    return std::get<1>(v_);
  }

 private:
  std::variant<T, Error> v_;
};

inline Error make_error(ErrorCode code, std::string detail = {}) { return {code, std::move(detail)}; }

}  // namespace tunnelloc

#endif  // TUNNELLOC_CORE_EXPECTED_HPP
