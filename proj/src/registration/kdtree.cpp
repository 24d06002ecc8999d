#include "drivesim/registration/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace drivesim::reg {

namespace {
constexpr std::uint32_t kLeafSize = 8;

bool better(double d, std::size_t i, const KdTree::Result& best) {
  return d < best.squared_distance || (d == best.squared_distance && i < best.index);
}
}  // namespace

KdTree::KdTree(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  if (!points_.empty()) build(0, static_cast<std::uint32_t>(points_.size()), 0);
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end, int depth) {
  auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back({begin, end});
  if (end - begin <= kLeafSize || depth > 64) return id;

  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
  for (auto i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis;
  if ((hi - lo).maxCoeff(&axis) <= 0.0) return id;  // all coincident

  auto mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     double pa = points_[a][axis], pb = points_[b][axis];
                     return pa < pb || (pa == pb && a < b);
                   });
  double split = points_[order_[mid]][axis];
  auto left = build(begin, mid, depth + 1);
  auto right = build(mid, end, depth + 1);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void KdTree::search(std::int32_t id, const Vec3& q, Result& best) const {
  const Node& n = nodes_[id];
  if (n.axis < 0) {
    for (auto i = n.begin; i < n.end; ++i) {
      double d = (points_[order_[i]] - q).squaredNorm();
      if (better(d, order_[i], best)) best = {order_[i], d};
    }
    return;
  }
  // Left holds coordinates <= split, right holds >= split.
  double diff = q[n.axis] - n.split;
  auto near = diff < 0 ? n.left : n.right;
  auto far = diff < 0 ? n.right : n.left;
  search(near, q, best);
  if (diff * diff <= best.squared_distance) search(far, q, best);
}

KdTree::Result KdTree::nearest(const Vec3& q) const {
  Result best{0, std::numeric_limits<double>::infinity()};
  if (!nodes_.empty()) search(0, q, best);
  return best;
}

KdTree::Result nearest_brute(std::span<const Vec3> points, const Vec3& q) {
  KdTree::Result best{0, std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < points.size(); ++i) {
    double d = (points[i] - q).squaredNorm();
    if (better(d, i, best)) best = {i, d};
  }
  return best;
}

}  // namespace drivesim::reg
