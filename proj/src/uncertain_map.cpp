#include "mlio/uncertain_map.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <stdexcept>

namespace mlio {

MapPoint to_world(const FilterState& x, const Pose3& rel_to_ref, std::size_t src_lidar, std::size_t ref_lidar,
                  const Vec3& undistorted, const Mat3& cov_in_ref) {
  MapPoint out;
  out.xyz = x.pose() * (rel_to_ref * (x.extrinsics.at(src_lidar) * undistorted));
  const Mat3 r = x.rot.matrix() * x.extrinsics.at(ref_lidar).rotation.matrix();
  out.cov = r * cov_in_ref * r.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

// ---------------------------------------------------------------------------------------
// KdTree

void KdTree::add(const Vec3& p) {
  const auto idx = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back(Node{p});
  ++alive_;
  if (root_ == kNone) {
    root_ = idx;
    return;
  }
  std::vector<std::uint32_t> path;
  std::uint32_t n = root_;
  while (true) {
    path.push_back(n);
    Node& node = nodes_[n];
    ++node.size;
    std::uint32_t& child = p(node.axis) < node.p(node.axis) ? node.left : node.right;
    if (child == kNone) {
      child = idx;
      nodes_[idx].axis = (node.axis + 1) % 3;
      break;
    }
    n = child;
  }
  if (!auto_rebalance_) return;

  for (std::size_t i = 0; i < path.size(); ++i) {
    if (!unbalanced(path[i])) continue;
    const std::uint32_t fresh = rebuild(path[i]);
    if (i == 0) {
      root_ = fresh;
    } else {
      Node& parent = nodes_[path[i - 1]];
      (parent.left == path[i] ? parent.left : parent.right) = fresh;
    }
    // Removed points dropped by the rebuild shrink every ancestor.
    for (std::size_t j = i; j-- > 0;) {
      Node& a = nodes_[path[j]];
      a.size = 1 + subtree_size(a.left) + subtree_size(a.right);
    }
    break;
  }
}

void KdTree::remove(std::uint32_t index) {
  if (index >= nodes_.size() || !nodes_[index].alive) return;
  nodes_[index].alive = false;
  --alive_;
}

bool KdTree::unbalanced(std::uint32_t n) const {
  const Node& node = nodes_[n];
  const double larger = std::max(subtree_size(node.left), subtree_size(node.right));
  return larger > alpha_ * node.size && node.size > 3;
}

void KdTree::collect_alive(std::uint32_t n, std::vector<std::uint32_t>& out) const {
  std::vector<std::uint32_t> stack{n};
  while (!stack.empty()) {
    const std::uint32_t m = stack.back();
    stack.pop_back();
    if (m == kNone) continue;
    if (nodes_[m].alive) out.push_back(m);
    stack.push_back(nodes_[m].left);
    stack.push_back(nodes_[m].right);
  }
}

std::uint32_t KdTree::rebuild(std::uint32_t n) {
  std::vector<std::uint32_t> ids;
  collect_alive(n, ids);
  std::sort(ids.begin(), ids.end());
  return build(ids, 0, ids.size());
}

std::uint32_t KdTree::build(std::vector<std::uint32_t>& ids, std::size_t lo, std::size_t hi) {
  if (lo >= hi) return kNone;
  Vec3 mn = Vec3::Constant(INFINITY), mx = Vec3::Constant(-INFINITY);
  for (std::size_t i = lo; i < hi; ++i) {
    mn = mn.cwiseMin(nodes_[ids[i]].p);
    mx = mx.cwiseMax(nodes_[ids[i]].p);
  }
  int axis = 0;
  (mx - mn).maxCoeff(&axis);
  const std::size_t mid = lo + (hi - lo) / 2;
  std::nth_element(ids.begin() + static_cast<long>(lo), ids.begin() + static_cast<long>(mid),
                   ids.begin() + static_cast<long>(hi), [&](std::uint32_t a, std::uint32_t b) {
                     const double pa = nodes_[a].p(axis), pb = nodes_[b].p(axis);
                     return pa < pb || (pa == pb && a < b);
                   });
  const std::uint32_t n = ids[mid];
  Node& node = nodes_[n];
  node.axis = axis;
  node.size = static_cast<std::uint32_t>(hi - lo);
  const std::uint32_t left = build(ids, lo, mid);
  const std::uint32_t right = build(ids, mid + 1, hi);
  nodes_[n].left = left;
  nodes_[n].right = right;
  return n;
}

std::uint32_t KdTree::rebalance_from(std::uint32_t n) {
  if (n == kNone) return kNone;
  if (unbalanced(n)) return rebuild(n);
  const std::uint32_t left = rebalance_from(nodes_[n].left);
  const std::uint32_t right = rebalance_from(nodes_[n].right);
  Node& node = nodes_[n];
  node.left = left;
  node.right = right;
  node.size = 1 + subtree_size(left) + subtree_size(right);
  return n;
}

void KdTree::maybe_rebalance() {
  if (root_ == kNone) return;
  if (subtree_size(root_) > 2 * alive_ + 16) {
    root_ = rebuild(root_);  // mostly removed points
    return;
  }
  root_ = rebalance_from(root_);
}

std::size_t KdTree::depth() const {
  std::size_t best = 0;
  std::vector<std::pair<std::uint32_t, std::size_t>> stack;
  if (root_ != kNone) stack.emplace_back(root_, 1);
  while (!stack.empty()) {
    const auto [n, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    if (nodes_[n].left != kNone) stack.emplace_back(nodes_[n].left, d + 1);
    if (nodes_[n].right != kNone) stack.emplace_back(nodes_[n].right, d + 1);
  }
  return best;
}

std::vector<Neighbor> KdTree::knn(const Vec3& q, std::size_t k) const {
  using Entry = std::pair<double, std::uint32_t>;
  std::priority_queue<Entry> heap;  // worst on top
  if (k == 0) return {};

  auto visit = [&](auto&& self, std::uint32_t n) -> void {
    if (n == kNone) return;
    const Node& node = nodes_[n];
    if (node.alive) {
      const Entry e{(node.p - q).squaredNorm(), n};
      if (heap.size() < k) {
        heap.push(e);
      } else if (e < heap.top()) {
        heap.pop();
        heap.push(e);
      }
    }
    const double diff = q(node.axis) - node.p(node.axis);
    const std::uint32_t near = diff < 0.0 ? node.left : node.right;
    const std::uint32_t far = diff < 0.0 ? node.right : node.left;
    self(self, near);
    if (heap.size() < k || diff * diff <= heap.top().first) self(self, far);
  };
  visit(visit, root_);

  std::vector<Neighbor> out(heap.size());
  for (std::size_t i = out.size(); i-- > 0;) {
    out[i] = {heap.top().second, heap.top().first};
    heap.pop();
  }
  return out;
}

// ---------------------------------------------------------------------------------------
// UncertainMap

std::size_t UncertainMap::VoxelHash::operator()(const VoxelKey& k) const noexcept {
  std::size_t h = static_cast<std::size_t>(k.x) * 73856093u;
  h ^= static_cast<std::size_t>(k.y) * 19349669u;
  h ^= static_cast<std::size_t>(k.z) * 83492791u;
  return h;
}

UncertainMap::VoxelKey UncertainMap::key_of(const Vec3& p) const {
  const Vec3 c = (p / params_.voxel).array().floor();
  return {static_cast<std::int64_t>(c.x()), static_cast<std::int64_t>(c.y()), static_cast<std::int64_t>(c.z())};
}

bool UncertainMap::center_eligible(const Vec3& p, const VoxelKey& key) const {
  const Vec3 center = (Vec3(static_cast<double>(key.x), static_cast<double>(key.y), static_cast<double>(key.z)) +
                       Vec3::Constant(0.5)) *
                      params_.voxel;
  return ((p - center).cwiseAbs().array() <= params_.center_box.array()).all();
}

InsertOutcome UncertainMap::insert(MapPoint p) {
  const double tr = p.trace();
  if (!std::isfinite(tr) || tr >= params_.tau || !p.xyz.allFinite()) return InsertOutcome::Gated;

  const VoxelKey key = key_of(p.xyz);
  std::vector<std::uint32_t>& cell = voxels_[key];
  const auto incoming = static_cast<std::uint32_t>(store_.size());

  auto store = [&] {
    p.id = incoming;
    store_.push_back(p);
    tree_.add(p.xyz);
    cell.push_back(incoming);
  };

  if (cell.size() < params_.capacity) {
    store();
    return InsertOutcome::Accepted;
  }

  struct Candidate {
    std::uint32_t id;
    bool eligible;
    double trace;
  };
  std::vector<Candidate> ranked;
  for (std::uint32_t id : cell) ranked.push_back({id, center_eligible(store_[id].xyz, key), store_[id].trace()});
  ranked.push_back({incoming, center_eligible(p.xyz, key), tr});
  std::stable_sort(ranked.begin(), ranked.end(), [](const Candidate& a, const Candidate& b) {
    if (a.eligible != b.eligible) return a.eligible;
    if (a.trace != b.trace) return a.trace < b.trace;
    return a.id < b.id;
  });

  const auto kept_end = ranked.begin() + static_cast<long>(params_.capacity);
  const bool keep_incoming =
      std::any_of(ranked.begin(), kept_end, [&](const Candidate& c) { return c.id == incoming; });
  if (!keep_incoming) return InsertOutcome::Dropped;

  for (auto it = kept_end; it != ranked.end(); ++it) {
    tree_.remove(it->id);
    cell.erase(std::find(cell.begin(), cell.end(), it->id));
  }
  store();
  return InsertOutcome::Displaced;
}

KnnResult UncertainMap::knn(const Vec3& q, std::size_t k) const {
  KnnResult out;
  for (const Neighbor& n : tree_.knn(q, k)) {
    out.points.push_back(&store_[n.index]);
    out.dist2.push_back(n.dist2);
  }
  out.complete = out.points.size() == k;
  return out;
}

std::vector<const MapPoint*> UncertainMap::points() const {
  std::vector<const MapPoint*> out;
  out.reserve(tree_.size());
  for (std::uint32_t i = 0; i < store_.size(); ++i)
    if (tree_.alive(i)) out.push_back(&store_[i]);
  return out;
}

void UncertainMap::write_ply(const std::filesystem::path& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  const auto pts = points();
  f << "ply\nformat ascii 1.0\nelement vertex " << pts.size()
    << "\nproperty double x\nproperty double y\nproperty double z\nproperty double trace\nend_header\n";
  f.precision(9);
  for (const MapPoint* p : pts) f << p->xyz.x() << ' ' << p->xyz.y() << ' ' << p->xyz.z() << ' ' << p->trace() << '\n';
}

}  // namespace mlio
