#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "drivesim/common/math.hpp"

namespace drivesim::reg {

/// Static 3-d tree for exact nearest-neighbour queries.
class KdTree {
 public:
  struct Result {
    std::size_t index = 0;
    double squared_distance = 0.0;
  };

  KdTree() = default;
  explicit KdTree(std::span<const Vec3> points);

  /// Nearest stored point; ties resolve to the lower index.
  Result nearest(const Vec3& q) const;
  std::size_t size() const { return points_.size(); }

 private:
  struct Node {
    std::uint32_t begin, end;  // range in order_
    std::int32_t left = -1, right = -1;
    int axis = -1;  // -1: leaf
    double split = 0.0;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end, int depth);
  void search(std::int32_t node, const Vec3& q, Result& best) const;

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

/// Linear-scan reference.
KdTree::Result nearest_brute(std::span<const Vec3> points, const Vec3& q);

}  // namespace drivesim::reg
