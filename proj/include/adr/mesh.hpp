#pragma once

#include "adr/geometry.hpp"

#include <array>
#include <functional>
#include <iosfwd>
#include <memory>
#include <set>
#include <string>
#include <vector>

namespace adr {

struct Vertex {
    Vec2 x;
};

/// Node of the bisection forest. Local edge i is the edge opposite local
/// vertex i, i.e. it connects vertices (i+1)%3 and (i+2)%3.
struct Triangle {
    std::array<int, 3> v{-1, -1, -1}; // counterclockwise
    int parent = -1;
    std::array<int, 2> child{-1, -1};
    int level = 0;
    int ref_edge = 0; // local index of the refinement edge

    bool is_leaf() const { return child[0] < 0; }
};

enum class EdgeKind { Interior, Dirichlet, Neumann };

/// Classifies a boundary edge by its midpoint. Interior edges never reach
/// the classifier.
using BoundaryClassifier = std::function<EdgeKind(const Vec2&)>;

struct Edge {
    std::array<int, 2> v{-1, -1};
    EdgeKind kind = EdgeKind::Interior;
    int left = -1;  // adjacent leaf with smaller id; sole element on boundary
    int right = -1; // interior only, left < right
    Vec2 normal;    // unit, oriented left -> right, outward on boundary
    double length = 0.0;

    bool is_boundary() const { return right < 0; }
};

/// Conforming triangulation of a rectangle stored as a bisection forest.
/// Meshes are immutable after construction; refine/coarsen/overlay return
/// new values sharing no mutable state.
class Mesh {
public:
    Rect domain;
    std::vector<Vertex> vertices;
    std::vector<Triangle> tris; // forest, roots first
    int n_roots = 0;
    int nx = 0, ny = 0; // structured root grid, 0 when not grid-built
    std::vector<int> leaves;       // ascending tri ids
    std::vector<Edge> edges;       // leaf skeleton
    BoundaryClassifier boundary;   // applied on rebuild

    int leaf_count() const { return static_cast<int>(leaves.size()); }

    /// Position of a leaf tri id in the ascending leaf list, -1 if absent.
    int leaf_index(int tri_id) const;

    const std::array<int, 3>& tri_vertices(int t) const { return tris[t].v; }
    Vec2 vertex(int t, int local) const { return vertices[tris[t].v[local]].x; }

    double area(int t) const;
    double diameter(int t) const; // longest edge
    double min_angle(int t) const;
    Vec2 centroid(int t) const;

    /// Leaf containing the point (ties resolved toward the lowest root/child
    /// path). Throws if the point lies outside the domain.
    int locate(const Vec2& p) const;

    /// Edges of the leaf skeleton adjacent to each leaf, rebuilt with edges.
    const std::vector<std::vector<int>>& leaf_edges() const { return leaf_edge_ids_; }

    // -- consistency scans used by tests and post-construction assertions --
    bool is_conforming(std::string* why = nullptr) const;
    double total_leaf_area() const;

    void rebuild_derived(); // leaves, edges, adjacency

private:
    std::vector<std::vector<int>> leaf_edge_ids_;
};

using MeshPtr = std::shared_ptr<const Mesh>;

/// Uniform nx-by-ny grid of rectangles, each split into two triangles by the
/// diagonal from the lower-left to the upper-right corner.
MeshPtr build_structured(const Rect& domain, int nx, int ny,
                         BoundaryClassifier boundary = nullptr);

/// Newest-vertex bisection of every marked leaf with recursive conforming
/// closure. Marked ids must be leaves.
MeshPtr refine(const Mesh& mesh, const std::set<int>& marked);

/// Undo bisections: a sibling pair merges into its parent only when both
/// children are marked leaves and the merge leaves no hanging node. Never
/// coarsens below the level-0 mesh; infeasible merges are skipped.
MeshPtr coarsen(const Mesh& mesh, const std::set<int>& marked);

MeshPtr uniform_refine(const Mesh& mesh, int bisection_passes);

/// Overlay (finest common refinement) of two meshes grown from the same
/// level-0 forest, plus the covering leaf of each input mesh for every
/// overlay leaf.
struct MeshOverlay {
    MeshPtr mesh;
    std::vector<int> leaf_in_a; // per overlay leaf: covering leaf id in a
    std::vector<int> leaf_in_b;
};
MeshOverlay union_mesh(const Mesh& a, const Mesh& b);

/// (h_e, n_e, adjacent leaf ids). Boundary edges report one adjacent leaf.
struct EdgeGeometry {
    double length;
    Vec2 normal;
    int left, right;
};
EdgeGeometry edge_geometry(const Mesh& mesh, int edge_id);

/// Pairs of covering leaves (a_leaf, b_leaf) per cell of the common
/// refinement; cell geometry is the finer of the two triangles.
struct OverlapCell {
    int leaf_a, leaf_b;
    std::array<Vec2, 3> corners; // the finer triangle
};
std::vector<OverlapCell> forest_overlap(const Mesh& a, const Mesh& b);

/// Flat structured-text serialization (vertices, forest, boundary handled
/// by the caller-supplied classifier on load).
void save_mesh(const Mesh& mesh, std::ostream& out);
MeshPtr load_mesh(std::istream& in, BoundaryClassifier boundary = nullptr);

} // namespace adr
