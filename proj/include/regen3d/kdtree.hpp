#pragma once

#include <algorithm>
#include <queue>
#include <vector>

#include "regen3d/vec3.hpp"

namespace regen3d {

// Static 3-d tree over a point set; immutable after construction and safe to
// share across threads. Nearest / k-nearest queries return exact results
// with ties broken by lowest point index.
class KdTree {
public:
    explicit KdTree(std::vector<Vec3> points) : points_(std::move(points)) {
        check(!points_.empty(), "KdTree: empty point set");
        order_.resize(points_.size());
        for (size_t i = 0; i < order_.size(); ++i) order_[i] = int(i);
        nodes_.reserve(points_.size() * 2);
        root_ = build(0, int(points_.size()));
    }

    const std::vector<Vec3>& points() const { return points_; }

    struct Hit {
        int index = -1;
        float dist2 = 0;
    };

    Hit nearest(const Vec3& q) const {
        Hit best{-1, 1e30f};
        search_one(root_, q, best);
        return best;
    }

    // k nearest, optionally excluding one index (the query point itself).
    std::vector<Hit> knearest(const Vec3& q, int k, int exclude_index = -1) const {
        check(k >= 1, "KdTree::knearest: k must be positive");
        Heap heap;
        search_k(root_, q, k, exclude_index, heap);
        std::vector<Hit> out(heap.v.begin(), heap.v.end());
        std::sort(out.begin(), out.end(), [](const Hit& a, const Hit& b) {
            if (a.dist2 != b.dist2) return a.dist2 < b.dist2;
            return a.index < b.index;
        });
        return out;
    }

private:
    struct Node {
        Vec3 point;
        int index = -1;
        int axis = 0;
        int left = -1, right = -1;
    };

    struct Heap {
        // max-heap on (dist2, -index) so the worst candidate is on top
        struct Entry {
            float dist2;
            int index;
            bool operator<(const Entry& o) const {
                if (dist2 != o.dist2) return dist2 < o.dist2;
                return index > o.index;
            }
        };
        std::vector<Hit> v;
        std::vector<Entry> heap;
        void push(float d2, int idx, int cap) {
            heap.push_back({d2, idx});
            std::push_heap(heap.begin(), heap.end());
            if (int(heap.size()) > cap) {
                std::pop_heap(heap.begin(), heap.end());
                heap.pop_back();
            }
            v.clear();
            for (auto& e : heap) v.push_back({e.index, e.dist2});
        }
        float worst(int cap) const {
            return int(heap.size()) < cap ? 1e30f : heap.front().dist2;
        }
    };

    int build(int lo, int hi) {
        if (lo >= hi) return -1;
        int axis = 0;
        {
            Aabb box;
            for (int i = lo; i < hi; ++i) box.extend(points_[size_t(order_[size_t(i)])]);
            const Vec3 ext = box.extent();
            if (ext.y > ext.x) axis = 1;
            if (ext.z > ext[axis]) axis = 2;
        }
        const int mid = (lo + hi) / 2;
        std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                         [&](int a, int b) {
                             const float va = points_[size_t(a)][axis], vb = points_[size_t(b)][axis];
                             if (va != vb) return va < vb;
                             return a < b;
                         });
        Node n;
        n.index = order_[size_t(mid)];
        n.point = points_[size_t(n.index)];
        n.axis = axis;
        const int self = int(nodes_.size());
        nodes_.push_back(n);
        const int l = build(lo, mid);
        const int r = build(mid + 1, hi);
        nodes_[size_t(self)].left = l;
        nodes_[size_t(self)].right = r;
        return self;
    }

    void search_one(int ni, const Vec3& q, Hit& best) const {
        if (ni < 0) return;
        const Node& n = nodes_[size_t(ni)];
        const float d2 = norm2(n.point - q);
        if (d2 < best.dist2 || (d2 == best.dist2 && n.index < best.index)) best = {n.index, d2};
        const float delta = q[n.axis] - n.point[n.axis];
        const int near_child = delta <= 0 ? n.left : n.right;
        const int far_child = delta <= 0 ? n.right : n.left;
        search_one(near_child, q, best);
        if (delta * delta <= best.dist2) search_one(far_child, q, best);
    }

    void search_k(int ni, const Vec3& q, int k, int exclude, Heap& heap) const {
        if (ni < 0) return;
        const Node& n = nodes_[size_t(ni)];
        if (n.index != exclude) {
            const float d2 = norm2(n.point - q);
            if (d2 < heap.worst(k) ||
                (d2 == heap.worst(k) && int(heap.heap.size()) < k))
                heap.push(d2, n.index, k);
        }
        const float delta = q[n.axis] - n.point[n.axis];
        const int near_child = delta <= 0 ? n.left : n.right;
        const int far_child = delta <= 0 ? n.right : n.left;
        search_k(near_child, q, k, exclude, heap);
        if (delta * delta <= heap.worst(k)) search_k(far_child, q, k, exclude, heap);
    }

    std::vector<Vec3> points_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

}  // namespace regen3d
