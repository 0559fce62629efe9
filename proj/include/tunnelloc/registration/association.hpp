#ifndef TUNNELLOC_REGISTRATION_ASSOCIATION_HPP
#define TUNNELLOC_REGISTRATION_ASSOCIATION_HPP

#include <algorithm>
#include <cmath>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "tunnelloc/core/geometry.hpp"
#include "tunnelloc/registration/kdtree.hpp"
#include "tunnelloc/tunnel/tunnel_model.hpp"

namespace tunnelloc {

struct Association {
  std::vector<std::pair<int, int>> pairs;  // (source index, target index)
  std::vector<double> euclidean;
  std::vector<double> mahalanobis;  // 0 where not applicable

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

/// Lane map with its mean index and precomputed information matrices.
class LaneIndex {
 public:
  LaneIndex() = default;
  explicit LaneIndex(const LaneDistMap& map) {
    std::vector<Vec2> means;
    means.reserve(map.gaussians.size());
    for (const auto& g : map.gaussians) {
      means.push_back(g.mean);
      info_.push_back(g.cov.inverse());
    }
    tree_ = KdTree<2>(std::move(means));
  }

  const KdTree<2>& tree() const { return tree_; }
  const Mat2& info(int i) const { return info_[i]; }
  std::size_t size() const { return info_.size(); }

 private:
  KdTree<2> tree_;
  std::vector<Mat2> info_;
};

inline double mahalanobis(const Vec2& p, const LaneGaussian& g) {
  const Vec2 e = p - g.mean;
  return std::sqrt(std::max(0.0, e.dot(g.cov.ldlt().solve(e))));
}

/// Nearest Gaussian by mean distance, accepted inside both gates.
inline Association associate_lane(const std::vector<Vec2>& points, const LaneIndex& index,
                                  double euclid_gate = 2.0, double maha_gate = 3.0) {
  if (!(euclid_gate > 0.0) || !(maha_gate > 0.0)) throw InvalidArgument("associate_lane: gates must be > 0");
  Association out;
  if (index.size() == 0) return out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto hit = index.tree().nearest(points[i]);
    const double eu = std::sqrt(hit.sq_dist);
    if (eu > euclid_gate) continue;
    const Vec2 e = points[i] - index.tree().point(hit.index);
    const double m = std::sqrt(std::max(0.0, e.dot(index.info(hit.index) * e)));
    if (m > maha_gate) continue;
    out.pairs.emplace_back(static_cast<int>(i), hit.index);
    out.euclidean.push_back(eu);
    out.mahalanobis.push_back(m);
  }
  return out;
}

inline Association associate_lane(const std::vector<Vec2>& points, const LaneDistMap& map,
                                  double euclid_gate = 2.0, double maha_gate = 3.0) {
  return associate_lane(points, LaneIndex(map), euclid_gate, maha_gate);
}

struct LandmarkObservation {
  FacilityKind kind = FacilityKind::kFireExtinguisherLamp;
  Vec2 position = Vec2::Zero();  // local plane
};

/// Same-kind, one-to-one, greedy by distance inside `gate`.
inline Association associate_landmarks(const std::vector<LandmarkObservation>& detections,
                                       const LandmarkMap& map, double gate = 3.0) {
  if (!(gate > 0.0)) throw InvalidArgument("associate_landmarks: gate must be > 0");
  std::vector<std::tuple<double, int, int>> cand;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    for (std::size_t j = 0; j < map.landmarks.size(); ++j) {
      const auto& lm = map.landmarks[j];
      if (lm.kind != detections[i].kind) continue;
      const double d = (lm.position - detections[i].position).norm();
      if (d <= gate) cand.emplace_back(d, static_cast<int>(i), static_cast<int>(j));
    }
  }
  std::sort(cand.begin(), cand.end());
  std::vector<bool> used_src(detections.size(), false);
  std::vector<bool> used_dst(map.landmarks.size(), false);
  Association out;
  for (const auto& [d, i, j] : cand) {
    if (used_src[i] || used_dst[j]) continue;
    used_src[i] = used_dst[j] = true;
    out.pairs.emplace_back(i, j);
    out.euclidean.push_back(d);
    out.mahalanobis.push_back(0.0);
  }
  return out;
}

}  // namespace tunnelloc

#endif  // TUNNELLOC_REGISTRATION_ASSOCIATION_HPP
