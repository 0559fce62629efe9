#ifndef TUNNELLOC_REGISTRATION_KDTREE_HPP
#define TUNNELLOC_REGISTRATION_KDTREE_HPP

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Core>

namespace tunnelloc {

/// Static kd-tree over Dim-dimensional points; exact nearest-neighbor queries.
template <int Dim>
class KdTree {
 public:
  using Point = Eigen::Matrix<double, Dim, 1>;

  struct Hit {
    int index = -1;
    double sq_dist = std::numeric_limits<double>::infinity();
  };

  KdTree() = default;
  explicit KdTree(std::vector<Point> pts) : pts_(std::move(pts)), idx_(pts_.size()), axis_(pts_.size()) {
    std::iota(idx_.begin(), idx_.end(), 0);
    build(0, static_cast<int>(idx_.size()));
  }

  std::size_t size() const { return pts_.size(); }
  bool empty() const { return pts_.empty(); }
  const Point& point(int i) const { return pts_[i]; }

  Hit nearest(const Point& q) const {
    Hit best;
    if (!pts_.empty()) search(q, 0, static_cast<int>(idx_.size()), best);
    return best;
  }

 private:
  void build(int lo, int hi) {
    if (hi - lo <= 1) return;
    Point mn = pts_[idx_[lo]];
    Point mx = mn;
    for (int i = lo + 1; i < hi; ++i) {
      mn = mn.cwiseMin(pts_[idx_[i]]);
      mx = mx.cwiseMax(pts_[idx_[i]]);
    }
    int ax = 0;
    (mx - mn).maxCoeff(&ax);
    const int mid = (lo + hi) / 2;
    std::nth_element(idx_.begin() + lo, idx_.begin() + mid, idx_.begin() + hi,
                     [&](int a, int b) { return pts_[a][ax] < pts_[b][ax]; });
    axis_[mid] = ax;
    build(lo, mid);
    build(mid + 1, hi);
  }

  void search(const Point& q, int lo, int hi, Hit& best) const {
    if (hi <= lo) return;
    const int mid = (lo + hi) / 2;
    const Point& p = pts_[idx_[mid]];
    const double d2 = (p - q).squaredNorm();
    if (d2 < best.sq_dist || (d2 == best.sq_dist && idx_[mid] < best.index)) {
      best.sq_dist = d2;
      best.index = idx_[mid];
    }
    if (hi - lo == 1) return;
    const int ax = axis_[mid];
    const double diff = q[ax] - p[ax];
    if (diff < 0.0) {
      search(q, lo, mid, best);
      if (diff * diff <= best.sq_dist) search(q, mid + 1, hi, best);
    } else {
      search(q, mid + 1, hi, best);
      if (diff * diff <= best.sq_dist) search(q, lo, mid, best);
    }
  }

  std::vector<Point> pts_;
  std::vector<int> idx_;
  std::vector<int> axis_;
};

}  // namespace tunnelloc

#endif  // TUNNELLOC_REGISTRATION_KDTREE_HPP
