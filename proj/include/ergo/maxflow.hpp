#pragma once

#include <cstddef>
#include <limits>
#include <queue>
#include <vector>

#include "errors.hpp"

namespace ergo {

/// Dinic max-flow with real-valued capacities. Node and edge insertion order
/// is preserved, so augmentation order (hence the flow decomposition) is
/// deterministic for a fixed instance.
class MaxFlow {
  public:
    explicit MaxFlow(int n_nodes) : head_(n_nodes, -1) {}

    /// Adds a directed edge and its zero-capacity reverse; returns edge id.
    int add_edge(int from, int to, double cap) {
        if (from < 0 || to < 0 || from >= n_nodes() || to >= n_nodes())
            throw SizeError("MaxFlow: node out of range");
        push(from, to, cap);
        push(to, from, 0.0);
        return int(to_.size()) - 2;
    }

    int n_nodes() const { return int(head_.size()); }

    /// Flow currently on edge id (forward direction).
    double flow_on(int edge_id) const { return cap0_[edge_id] - cap_[edge_id]; }

    double run(int source, int sink, double tol = 1e-12) {
        double total = 0.0;
        while (bfs(source, sink, tol)) {
            iter_ = head_;
            double pushed;
            while ((pushed = dfs(source, sink, inf(), tol)) > tol) total += pushed;
        }
        return total;
    }

  private:
    static double inf() { return std::numeric_limits<double>::max(); }

    void push(int from, int to, double cap) {
        to_.push_back(to);
        cap_.push_back(cap);
        cap0_.push_back(cap);
        next_.push_back(head_[from]);
        head_[from] = int(to_.size()) - 1;
    }

    bool bfs(int source, int sink, double tol) {
        level_.assign(head_.size(), -1);
        std::queue<int> q;
        level_[source] = 0;
        q.push(source);
        while (!q.empty()) {
            const int u = q.front();
            q.pop();
            for (int e = head_[u]; e >= 0; e = next_[e]) {
                if (cap_[e] > tol && level_[to_[e]] < 0) {
                    level_[to_[e]] = level_[u] + 1;
                    q.push(to_[e]);
                }
            }
        }
        return level_[sink] >= 0;
    }

    double dfs(int u, int sink, double limit, double tol) {
        if (u == sink) return limit;
        for (int& e = iter_[u]; e >= 0; e = next_[e]) {
            const int v = to_[e];
            if (cap_[e] > tol && level_[v] == level_[u] + 1) {
                const double got = dfs(v, sink, std::min(limit, cap_[e]), tol);
                if (got > tol) {
                    cap_[e] -= got;
                    cap_[e ^ 1] += got;
                    return got;
                }
            }
        }
        level_[u] = -1;
        return 0.0;
    }

    std::vector<int> head_, next_, to_;
    std::vector<double> cap_, cap0_;
    std::vector<int> level_, iter_;
};

} // namespace ergo
