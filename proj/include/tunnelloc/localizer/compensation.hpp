#ifndef TUNNELLOC_LOCALIZER_COMPENSATION_HPP
#define TUNNELLOC_LOCALIZER_COMPENSATION_HPP

#include <vector>

#include "tunnelloc/core/expected.hpp"
#include "tunnelloc/core/geometry.hpp"
#include "tunnelloc/localizer/ekf.hpp"
#include "tunnelloc/tunnel/tunnel_model.hpp"

namespace tunnelloc {

inline constexpr double kLateralResetSigma = 0.3;
inline constexpr double kLongitudinalResetSigma = 0.5;

/// Position shift that moves the DR position onto the current lane center, measured abeam a
/// matched lamp. Only the vehicle-lateral component is applied.
inline Vec2 lateral_correction(const Pose2D& pose, int lane, const Vec2& lamp_map,
                               const Centerline& axis, const TunnelSpec& spec) {
  const double s_lamp = axis.project(lamp_map).s;
  const Vec2 p_cl = axis.point_at({s_lamp, spec.lane_center(lane)});
  const Mat2 R = vehicle_to_global_rotation(pose.psi());
  const Vec2 l_dr = R.transpose() * (lamp_map - pose.position());
  const Vec2 l_cl = R.transpose() * (lamp_map - p_cl);
  return R * Vec2(l_dr.x() - l_cl.x(), 0.0);
}

inline Expected<FilterState> compensate_lateral(const FilterState& s, int lane,
                                                const std::optional<Vec2>& matched_lamp,
                                                const Centerline& axis, const TunnelSpec& spec) {
  if (!matched_lamp) return make_error(ErrorCode::kNoLampMatched, "no lamp matched");
  if (lane < 1 || lane > spec.lane_count) throw InvalidArgument("compensate_lateral: bad lane");
  FilterState out = s;
  const Vec2 d = lateral_correction(s.mean, lane, *matched_lamp, axis, spec);
  out.mean = Pose2D(s.mean.x + d.x(), s.mean.y + d.y(), s.mean.psi());
  out.cov = reset_axis_variance(s.cov, s.mean.psi(), 0, kLateralResetSigma * kLateralResetSigma);
  return out;
}

/// Longitudinal shift from the mean of the detected LCS points (local plane, as placed by the
/// current estimate) to the mean of their map counterparts.
inline Vec2 longitudinal_correction(const Pose2D& pose, const std::vector<Vec2>& detected,
                                    const std::vector<Vec2>& mapped) {
  Vec2 pd = Vec2::Zero();
  Vec2 pm = Vec2::Zero();
  for (const auto& p : detected) pd += p;
  for (const auto& p : mapped) pm += p;
  pd /= static_cast<double>(detected.size());
  pm /= static_cast<double>(mapped.size());
  const Mat2 R = vehicle_to_global_rotation(pose.psi());
  const Vec2 l = R.transpose() * (pm - pd);
  return R * Vec2(0.0, l.y());
}

inline Expected<FilterState> compensate_longitudinal(const FilterState& s, const std::vector<Vec2>& detected,
                                                     const std::vector<Vec2>& mapped) {
  if (detected.empty() || detected.size() != mapped.size())
    return make_error(ErrorCode::kNoLcsDetected, "no LCS matched");
  FilterState out = s;
  const Vec2 d = longitudinal_correction(s.mean, detected, mapped);
  out.mean = Pose2D(s.mean.x + d.x(), s.mean.y + d.y(), s.mean.psi());
  out.cov = reset_axis_variance(s.cov, s.mean.psi(), 1, kLongitudinalResetSigma * kLongitudinalResetSigma);
  return out;
}

}  // namespace tunnelloc

#endif  // TUNNELLOC_LOCALIZER_COMPENSATION_HPP
