#pragma once

// Tensor grids on truncated boxes [-R, R]^d and grid-indexed Markov policies.
//
// Node enumeration is row-major: the multi-index (i_0, ..., i_{d-1}) maps to
// i_0 * n^{d-1} + ... + i_{d-1}, with coordinate x_p = -R + i_p * h. Interior
// nodes (all i_p in [1, n-2]) are enumerated the same way over n-2 points per
// axis. Boundary nodes carry the Dirichlet value 0 and never appear as unknowns.

#include "rsc/core.hpp"

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

namespace rsc {

struct GridSpec {
    double radius = 1.0;
    int nodes_per_axis = 3;
    int dim = 1;

    double spacing() const { return 2.0 * radius / (nodes_per_axis - 1); }
    std::size_t node_count() const { return ipow(nodes_per_axis); }
    std::size_t interior_per_axis() const { return static_cast<std::size_t>(nodes_per_axis - 2); }
    std::size_t interior_count() const { return ipow(nodes_per_axis - 2); }

    using MultiIndex = std::array<int, kMaxDim>;

    /// Coordinate of full-grid node `index`.
    Point node(std::size_t index) const { return coords(unflatten(index, nodes_per_axis), 0); }

    /// Coordinate of interior node `index` (interior enumeration).
    Point interior_node(std::size_t index) const { return coords(unflatten(index, nodes_per_axis - 2), 1); }

    /// Full-grid multi-index of interior node `index`.
    MultiIndex interior_multi(std::size_t index) const {
        auto m = unflatten(index, nodes_per_axis - 2);
        for (int p = 0; p < dim; ++p) m[p] += 1;
        return m;
    }

    /// Interior index of a full-grid multi-index, or nullopt for boundary nodes.
    std::optional<std::size_t> interior_index(const MultiIndex& full) const {
        std::size_t idx = 0;
        for (int p = 0; p < dim; ++p) {
            if (full[p] < 1 || full[p] > nodes_per_axis - 2) return std::nullopt;
            idx = idx * interior_per_axis() + static_cast<std::size_t>(full[p] - 1);
        }
        return idx;
    }

    std::size_t origin_index() const { return flatten_center(nodes_per_axis); }
    std::size_t interior_origin_index() const { return flatten_center(nodes_per_axis - 2); }

    /// Interior node nearest to x; coordinates outside the grid are clamped.
    std::size_t nearest_interior(const Point& x) const {
        const double h = spacing();
        std::size_t idx = 0;
        for (int p = 0; p < dim; ++p) {
            long i = std::lround((x[p] + radius) / h);
            if (i < 1) i = 1;
            if (i > nodes_per_axis - 2) i = nodes_per_axis - 2;
            idx = idx * interior_per_axis() + static_cast<std::size_t>(i - 1);
        }
        return idx;
    }

private:
    std::size_t ipow(int base) const {
        std::size_t r = 1;
        for (int p = 0; p < dim; ++p) r *= static_cast<std::size_t>(base);
        return r;
    }
    MultiIndex unflatten(std::size_t index, int n) const {
        MultiIndex m{};
        for (int p = dim - 1; p >= 0; --p) {
            m[p] = static_cast<int>(index % static_cast<std::size_t>(n));
            index /= static_cast<std::size_t>(n);
        }
        return m;
    }
    Point coords(const MultiIndex& m, int offset) const {
        Point x(dim);
        const double h = spacing();
        for (int p = 0; p < dim; ++p) x[p] = -radius + (m[p] + offset) * h;
        return x;
    }
    std::size_t flatten_center(int n) const {
        std::size_t idx = 0;
        for (int p = 0; p < dim; ++p) idx = idx * static_cast<std::size_t>(n) + static_cast<std::size_t>(n / 2);
        return idx;
    }
};

inline GridSpec build_grid(double radius, int nodes_per_axis, int dim) {
    require(radius > 0.0, "build_grid: radius must be > 0");
    require(nodes_per_axis >= 3, "build_grid: nodes_per_axis must be >= 3");
    require(nodes_per_axis % 2 == 1, "build_grid: nodes_per_axis must be odd so that the origin is a node");
    require(dim >= 1 && dim <= kMaxDim, "build_grid: unsupported dimension");
    return GridSpec{radius, nodes_per_axis, dim};
}

/// Grid with spacing 1/nodes_per_unit on [-radius, radius]^dim.
inline GridSpec grid_for_density(double radius, int nodes_per_unit, int dim) {
    require(nodes_per_unit >= 1, "nodes_per_unit must be >= 1");
    const double cells = 2.0 * radius * nodes_per_unit;
    const long rounded = std::lround(cells);
    require(std::abs(cells - static_cast<double>(rounded)) < 1e-9 && rounded >= 2,
            "radius * nodes_per_unit must be a positive multiple of 1/2");
    return build_grid(radius, static_cast<int>(rounded) + 1, dim);
}

/// Control index per (interior node, regime); storage is regime-major.
struct MarkovPolicy {
    std::size_t nodes = 0;
    int regimes = 0;
    std::vector<int> table;

    MarkovPolicy() = default;
    MarkovPolicy(std::size_t interior_nodes, int num_regimes, int fill = 0)
        : nodes(interior_nodes),
          regimes(num_regimes),
          table(interior_nodes * static_cast<std::size_t>(num_regimes), fill) {}

    int operator()(std::size_t node, int regime) const { return table[static_cast<std::size_t>(regime) * nodes + node]; }
    int& operator()(std::size_t node, int regime) { return table[static_cast<std::size_t>(regime) * nodes + node]; }

    bool operator==(const MarkovPolicy&) const = default;

    void check(std::size_t interior_nodes, int num_regimes, int num_controls) const {
        require(nodes == interior_nodes && regimes == num_regimes, "policy does not cover the grid interior x regimes");
        for (int v : table) require(v >= 0 && v < num_controls, "policy entry is not a valid control index");
    }

    /// Fraction of entries using each control.
    std::vector<double> histogram(int num_controls) const {
        std::vector<double> h(static_cast<std::size_t>(num_controls), 0.0);
        for (int v : table) h[static_cast<std::size_t>(v)] += 1.0;
        for (auto& x : h) x /= static_cast<double>(table.size());
        return h;
    }
};

}  // namespace rsc
