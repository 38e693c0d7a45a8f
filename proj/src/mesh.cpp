#include "adr/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace adr {

namespace {

using VertPair = std::pair<int, int>;

VertPair ordered(int a, int b) { return a < b ? VertPair{a, b} : VertPair{b, a}; }

std::array<int, 2> edge_local_vertices(int local_edge) {
    return {(local_edge + 1) % 3, (local_edge + 2) % 3};
}

/// Mutable view used while triangles are being split/merged. Keeps a map
/// from leaf edges (vertex pairs) to the current leaves containing them.
struct Builder {
    Mesh m;
    std::map<VertPair, std::vector<int>> edge_leaves;
    std::map<VertPair, int> midpoints;

    explicit Builder(const Mesh& src) : m(src) {
        for (int t : m.leaves) add_leaf_edges(t);
        collect_midpoints();
    }

    void collect_midpoints() {
        // Record every existing split vertex under its parent edge so that
        // neighboring splits and overlay replays reuse the same vertex.
        for (int t = 0; t < static_cast<int>(m.tris.size()); ++t) {
            const Triangle& tri = m.tris[t];
            if (tri.is_leaf()) continue;
            auto lv = edge_local_vertices(tri.ref_edge);
            auto key = ordered(tri.v[lv[0]], tri.v[lv[1]]);
            midpoints.emplace(key, m.tris[tri.child[0]].v[2]);
        }
    }

    void add_leaf_edges(int t) {
        for (int e = 0; e < 3; ++e) {
            auto lv = edge_local_vertices(e);
            edge_leaves[ordered(m.tris[t].v[lv[0]], m.tris[t].v[lv[1]])].push_back(t);
        }
    }

    void remove_leaf_edges(int t) {
        for (int e = 0; e < 3; ++e) {
            auto lv = edge_local_vertices(e);
            auto key = ordered(m.tris[t].v[lv[0]], m.tris[t].v[lv[1]]);
            auto it = edge_leaves.find(key);
            if (it == edge_leaves.end()) continue;
            auto& vec = it->second;
            vec.erase(std::remove(vec.begin(), vec.end(), t), vec.end());
            if (vec.empty()) edge_leaves.erase(it);
        }
    }

    int other_leaf_on_edge(const VertPair& key, int self) const {
        auto it = edge_leaves.find(key);
        if (it == edge_leaves.end()) return -1;
        for (int t : it->second)
            if (t != self) return t;
        return -1;
    }

    VertPair refinement_edge_verts(int t) const {
        auto lv = edge_local_vertices(m.tris[t].ref_edge);
        return ordered(m.tris[t].v[lv[0]], m.tris[t].v[lv[1]]);
    }

    int midpoint_vertex(const VertPair& key) {
        auto it = midpoints.find(key);
        if (it != midpoints.end()) return it->second;
        int id = static_cast<int>(m.vertices.size());
        Vec2 x = 0.5 * (m.vertices[key.first].x + m.vertices[key.second].x);
        m.vertices.push_back({x});
        midpoints.emplace(key, id);
        return id;
    }

    /// Plain bisection of a leaf; no conformity handling.
    void split(int t) {
        Triangle& tri = m.tris[t];
        const int re = tri.ref_edge;
        const int p = tri.v[re];            // peak
        const int a = tri.v[(re + 1) % 3];  // refinement edge (a,b)
        const int b = tri.v[(re + 2) % 3];
        const int mid = midpoint_vertex(ordered(a, b));

        remove_leaf_edges(t);

        // Children (p,a,mid) and (p,mid,b) keep counterclockwise order and
        // take the parent's untouched edge as their refinement edge, making
        // mid the newest vertex of both.
        Triangle c0, c1;
        c0.v = {p, a, mid};
        c0.ref_edge = 2; // edge (p,a)
        c1.v = {p, mid, b};
        c1.ref_edge = 1; // edge (b,p)
        c0.parent = c1.parent = t;
        c0.level = c1.level = tri.level + 1;

        int id0 = static_cast<int>(m.tris.size());
        m.tris.push_back(c0);
        m.tris.push_back(c1);
        m.tris[t].child = {id0, id0 + 1};
        add_leaf_edges(id0);
        add_leaf_edges(id0 + 1);
    }

    /// Newest-vertex bisection with recursive conforming closure.
    void bisect_conforming(int t, int depth = 0) {
        if (depth > 128)
            throw std::runtime_error("refinement closure did not terminate");
        while (true) {
            if (!m.tris[t].is_leaf()) return; // handled by an earlier closure
            VertPair re = refinement_edge_verts(t);
            int nb = other_leaf_on_edge(re, t);
            if (nb < 0 || refinement_edge_verts(nb) == re) {
                split(t);
                if (nb >= 0) split(nb);
                return;
            }
            bisect_conforming(nb, depth + 1);
        }
    }

    MeshPtr finish() {
        m.rebuild_derived();
        return std::make_shared<Mesh>(std::move(m));
    }
};

} // namespace

// ---------------------------------------------------------------------------
// Mesh basics

int Mesh::leaf_index(int tri_id) const {
    auto it = std::lower_bound(leaves.begin(), leaves.end(), tri_id);
    if (it == leaves.end() || *it != tri_id) return -1;
    return static_cast<int>(it - leaves.begin());
}

double Mesh::area(int t) const {
    return signed_area(vertex(t, 0), vertex(t, 1), vertex(t, 2));
}

double Mesh::diameter(int t) const {
    double h = 0.0;
    for (int e = 0; e < 3; ++e) {
        auto lv = edge_local_vertices(e);
        h = std::max(h, (vertex(t, lv[0]) - vertex(t, lv[1])).norm());
    }
    return h;
}

double Mesh::min_angle(int t) const {
    double best = M_PI;
    for (int i = 0; i < 3; ++i) {
        Vec2 a = vertex(t, (i + 1) % 3) - vertex(t, i);
        Vec2 b = vertex(t, (i + 2) % 3) - vertex(t, i);
        double ang = std::atan2(std::abs(cross2(a, b)), a.dot(b));
        best = std::min(best, ang);
    }
    return best;
}

Vec2 Mesh::centroid(int t) const {
    return (vertex(t, 0) + vertex(t, 1) + vertex(t, 2)) / 3.0;
}

namespace {
bool tri_contains(const Mesh& m, int t, const Vec2& p, double tol) {
    Vec2 a = m.vertex(t, 0), b = m.vertex(t, 1), c = m.vertex(t, 2);
    double s = 2.0 * signed_area(a, b, c);
    double l0 = cross2(b - p, c - p) / s;
    double l1 = cross2(c - p, a - p) / s;
    double l2 = cross2(a - p, b - p) / s;
    return l0 >= -tol && l1 >= -tol && l2 >= -tol;
}
} // namespace

int Mesh::locate(const Vec2& p) const {
    if (!domain.contains(p, 1e-10))
        throw std::invalid_argument("locate: point outside domain");
    const double tol = 1e-12;
    int cur = -1;
    if (nx > 0 && ny > 0) {
        // Structured roots: jump straight to the grid cell, then try the
        // cell's two triangles and, near cell seams, the neighbors.
        int ci = std::clamp(static_cast<int>((p.x() - domain.x0) / domain.width() * nx), 0, nx - 1);
        int cj = std::clamp(static_cast<int>((p.y() - domain.y0) / domain.height() * ny), 0, ny - 1);
        for (int dj = 0; dj >= -1 && cur < 0; --dj)
            for (int di = 0; di >= -1 && cur < 0; --di) {
                int i = ci + di, j = cj + dj;
                if (i < 0 || j < 0 || i >= nx || j >= ny) continue;
                int base = 2 * (j * nx + i);
                if (tri_contains(*this, base, p, 1e-10)) cur = base;
                else if (tri_contains(*this, base + 1, p, 1e-10)) cur = base + 1;
            }
    }
    if (cur < 0)
        for (int r = 0; r < n_roots; ++r)
            if (tri_contains(*this, r, p, tol)) {
                cur = r;
                break;
            }
    if (cur < 0) { // retry with a loose tolerance for points on root seams
        for (int r = 0; r < n_roots; ++r)
            if (tri_contains(*this, r, p, 1e-9)) {
                cur = r;
                break;
            }
    }
    if (cur < 0) throw std::runtime_error("locate: no containing root triangle");
    while (!tris[cur].is_leaf()) {
        int c0 = tris[cur].child[0], c1 = tris[cur].child[1];
        if (tri_contains(*this, c0, p, tol))
            cur = c0;
        else if (tri_contains(*this, c1, p, tol))
            cur = c1;
        else // roundoff on the split line: take the geometrically closer one
            cur = tri_contains(*this, c0, p, 1e-9) ? c0 : c1;
    }
    return cur;
}

void Mesh::rebuild_derived() {
    leaves.clear();
    std::vector<int> stack;
    for (int r = 0; r < n_roots; ++r) stack.push_back(r);
    while (!stack.empty()) {
        int t = stack.back();
        stack.pop_back();
        if (tris[t].is_leaf()) {
            leaves.push_back(t);
        } else {
            stack.push_back(tris[t].child[0]);
            stack.push_back(tris[t].child[1]);
        }
    }
    std::sort(leaves.begin(), leaves.end());

    std::map<VertPair, std::vector<int>> by_edge;
    for (int t : leaves)
        for (int e = 0; e < 3; ++e) {
            auto lv = edge_local_vertices(e);
            by_edge[ordered(tris[t].v[lv[0]], tris[t].v[lv[1]])].push_back(t);
        }

    edges.clear();
    leaf_edge_ids_.assign(leaves.size(), {});
    for (auto& [key, adj] : by_edge) {
        if (adj.size() > 2)
            throw std::runtime_error("mesh edge shared by more than two leaves");
        Edge edge;
        edge.v = {key.first, key.second};
        Vec2 pa = vertices[key.first].x, pb = vertices[key.second].x;
        Vec2 d = pb - pa;
        edge.length = d.norm();
        Vec2 n(d.y(), -d.x());
        n /= n.norm();
        std::sort(adj.begin(), adj.end());
        edge.left = adj[0];
        if (adj.size() == 2) {
            edge.right = adj[1];
            edge.kind = EdgeKind::Interior;
            if (n.dot(centroid(adj[1]) - centroid(adj[0])) < 0.0) n = -n;
        } else {
            Vec2 mid = 0.5 * (pa + pb);
            edge.kind = boundary ? boundary(mid) : EdgeKind::Dirichlet;
            if (n.dot(mid - centroid(adj[0])) < 0.0) n = -n;
        }
        edge.normal = n;
        int id = static_cast<int>(edges.size());
        edges.push_back(edge);
        leaf_edge_ids_[leaf_index(edge.left)].push_back(id);
        if (edge.right >= 0) leaf_edge_ids_[leaf_index(edge.right)].push_back(id);
    }
}

double Mesh::total_leaf_area() const {
    double a = 0.0;
    for (int t : leaves) a += area(t);
    return a;
}

bool Mesh::is_conforming(std::string* why) const {
    std::map<VertPair, int> count;
    for (int t : leaves) {
        if (area(t) <= 0.0) {
            if (why) *why = "non-positive leaf area";
            return false;
        }
        for (int e = 0; e < 3; ++e) {
            auto lv = edge_local_vertices(e);
            count[ordered(tris[t].v[lv[0]], tris[t].v[lv[1]])]++;
        }
    }
    // A hanging node shows up as a vertex lying strictly inside another
    // leaf's edge: the long edge then has a single adjacent leaf without
    // being a boundary edge, or some edge is claimed three times.
    for (auto& [key, n] : count) {
        if (n > 2) {
            if (why) *why = "edge shared by more than two leaves";
            return false;
        }
        if (n == 1) {
            Vec2 mid = 0.5 * (vertices[key.first].x + vertices[key.second].x);
            Vec2 pa = vertices[key.first].x, pb = vertices[key.second].x;
            bool on_boundary = false;
            const Rect& d = domain;
            auto on_line = [&](double va, double vb, double lo) {
                return std::abs(va - lo) < 1e-10 && std::abs(vb - lo) < 1e-10;
            };
            if (on_line(pa.x(), pb.x(), d.x0) || on_line(pa.x(), pb.x(), d.x1) ||
                on_line(pa.y(), pb.y(), d.y0) || on_line(pa.y(), pb.y(), d.y1))
                on_boundary = true;
            if (!on_boundary) {
                if (why) {
                    std::ostringstream os;
                    os << "hanging node near (" << mid.x() << "," << mid.y() << ")";
                    *why = os.str();
                }
                return false;
            }
        }
        // For n == 1 on the boundary the midpoint of a sibling edge could
        // still hang; the split edge would appear with count 1 off-boundary,
        // which the branch above already catches.
    }
    return true;
}

// ---------------------------------------------------------------------------
// Construction

MeshPtr build_structured(const Rect& domain, int nx, int ny,
                         BoundaryClassifier boundary) {
    if (nx < 1 || ny < 1)
        throw std::invalid_argument("build_structured: nx, ny must be >= 1");
    Mesh m;
    m.domain = domain;
    m.boundary = std::move(boundary);
    m.nx = nx;
    m.ny = ny;
    const double dx = domain.width() / nx, dy = domain.height() / ny;
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i)
            m.vertices.push_back({Vec2(domain.x0 + i * dx, domain.y0 + j * dy)});

    auto vid = [&](int i, int j) { return j * (nx + 1) + i; };
    auto longest_edge = [&](const Triangle& t) {
        int best = 0;
        double len = -1.0;
        for (int e = 0; e < 3; ++e) {
            auto lv = edge_local_vertices(e);
            double l =
                (m.vertices[t.v[lv[0]]].x - m.vertices[t.v[lv[1]]].x).norm();
            if (l > len + 1e-12 * std::max(l, len) ||
                (std::abs(l - len) <= 1e-12 * std::max(l, len) &&
                 t.v[e] < t.v[best]))
                best = e, len = std::max(l, len);
        }
        return best;
    };

    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            // Diagonal from lower-left to upper-right in every cell.
            Triangle lo, up;
            lo.v = {vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)};
            up.v = {vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)};
            lo.ref_edge = longest_edge(lo);
            up.ref_edge = longest_edge(up);
            m.tris.push_back(lo);
            m.tris.push_back(up);
        }
    m.n_roots = static_cast<int>(m.tris.size());
    m.rebuild_derived();
    return std::make_shared<Mesh>(std::move(m));
}

MeshPtr refine(const Mesh& mesh, const std::set<int>& marked) {
    for (int t : marked)
        if (t < 0 || t >= static_cast<int>(mesh.tris.size()) ||
            !mesh.tris[t].is_leaf())
            throw std::invalid_argument("refine: marked id is not a leaf");
    Builder b(mesh);
    for (int t : marked)
        if (b.m.tris[t].is_leaf()) b.bisect_conforming(t);
    return b.finish();
}

MeshPtr uniform_refine(const Mesh& mesh, int bisection_passes) {
    MeshPtr cur = std::make_shared<Mesh>(mesh);
    for (int p = 0; p < bisection_passes; ++p) {
        std::set<int> all(cur->leaves.begin(), cur->leaves.end());
        cur = refine(*cur, all);
    }
    return cur;
}

MeshPtr coarsen(const Mesh& mesh, const std::set<int>& marked) {
    for (int t : marked)
        if (t < 0 || t >= static_cast<int>(mesh.tris.size()) ||
            !mesh.tris[t].is_leaf())
            throw std::invalid_argument("coarsen: marked id is not a leaf");

    Mesh m = mesh;
    // Candidate parents: both children are marked leaves above level 0.
    // Grouping by the split vertex (the children's shared newest vertex)
    // lets a merge proceed only when it removes the vertex entirely.
    std::map<int, std::vector<int>> by_split_vertex; // vertex -> parents
    for (int t = 0; t < static_cast<int>(m.tris.size()); ++t) {
        const Triangle& tri = m.tris[t];
        if (tri.is_leaf()) continue;
        int c0 = tri.child[0], c1 = tri.child[1];
        if (!m.tris[c0].is_leaf() || !m.tris[c1].is_leaf()) continue;
        if (!marked.count(c0) || !marked.count(c1)) continue;
        by_split_vertex[m.tris[c0].v[2]].push_back(t); // v[2] of child 0 = mid
    }

    std::map<int, std::vector<int>> vertex_leaves;
    for (int t : m.leaves)
        for (int i = 0; i < 3; ++i) vertex_leaves[m.tris[t].v[i]].push_back(t);

    for (auto& [vert, parents] : by_split_vertex) {
        auto it = vertex_leaves.find(vert);
        if (it == vertex_leaves.end()) continue;
        std::set<int> mergeable_children;
        for (int p : parents) {
            mergeable_children.insert(m.tris[p].child[0]);
            mergeable_children.insert(m.tris[p].child[1]);
        }
        bool all_covered = true;
        for (int leaf : it->second)
            if (!mergeable_children.count(leaf)) {
                all_covered = false;
                break;
            }
        if (!all_covered) continue; // merging would hang this vertex
        for (int p : parents) m.tris[p].child = {-1, -1};
    }
    m.rebuild_derived();
    return std::make_shared<Mesh>(std::move(m));
}

// ---------------------------------------------------------------------------
// Overlay

namespace {

void check_same_roots(const Mesh& a, const Mesh& b) {
    if (a.n_roots != b.n_roots)
        throw std::invalid_argument("union_mesh: incompatible root meshes");
    for (int r = 0; r < a.n_roots; ++r)
        for (int i = 0; i < 3; ++i)
            if ((a.vertex(r, i) - b.vertex(r, i)).norm() != 0.0)
                throw std::invalid_argument("union_mesh: incompatible root meshes");
}

void sync_from(Builder& bu, int tu, const Mesh& other, int to) {
    if (other.tris[to].is_leaf()) return;
    if (bu.m.tris[tu].is_leaf()) bu.split(tu);
    sync_from(bu, bu.m.tris[tu].child[0], other, other.tris[to].child[0]);
    sync_from(bu, bu.m.tris[tu].child[1], other, other.tris[to].child[1]);
}

void collect_overlap(const Mesh& u, int tu, const Mesh& a, int ta, const Mesh& b,
                     int tb, std::vector<std::array<int, 3>>& out) {
    // ta/tb always reference the deepest covering node of each input mesh.
    if (u.tris[tu].is_leaf()) {
        out.push_back({tu, ta, tb});
        return;
    }
    for (int c = 0; c < 2; ++c) {
        int ca = (!a.tris[ta].is_leaf()) ? a.tris[ta].child[c] : ta;
        int cb = (!b.tris[tb].is_leaf()) ? b.tris[tb].child[c] : tb;
        collect_overlap(u, u.tris[tu].child[c], a, ca, b, cb, out);
    }
}

} // namespace

MeshOverlay union_mesh(const Mesh& a, const Mesh& b) {
    check_same_roots(a, b);
    Builder bu(a);
    for (int r = 0; r < a.n_roots; ++r) sync_from(bu, r, b, r);
    MeshPtr u = bu.finish();
    if (std::string why; !u->is_conforming(&why))
        throw std::runtime_error("union_mesh produced a non-conforming mesh: " + why);

    std::vector<std::array<int, 3>> triples;
    for (int r = 0; r < a.n_roots; ++r) collect_overlap(*u, r, a, r, b, r, triples);

    MeshOverlay res;
    res.leaf_in_a.assign(u->leaf_count(), -1);
    res.leaf_in_b.assign(u->leaf_count(), -1);
    for (auto& [tu, ta, tb] : triples) {
        int li = u->leaf_index(tu);
        res.leaf_in_a[li] = ta;
        res.leaf_in_b[li] = tb;
    }
    res.mesh = std::move(u);
    return res;
}

std::vector<OverlapCell> forest_overlap(const Mesh& a, const Mesh& b) {
    MeshOverlay ov = union_mesh(a, b);
    std::vector<OverlapCell> cells;
    cells.reserve(ov.mesh->leaf_count());
    for (int li = 0; li < ov.mesh->leaf_count(); ++li) {
        OverlapCell c;
        c.leaf_a = ov.leaf_in_a[li];
        c.leaf_b = ov.leaf_in_b[li];
        int t = ov.mesh->leaves[li];
        c.corners = {ov.mesh->vertex(t, 0), ov.mesh->vertex(t, 1),
                     ov.mesh->vertex(t, 2)};
        cells.push_back(c);
    }
    return cells;
}

EdgeGeometry edge_geometry(const Mesh& mesh, int edge_id) {
    if (edge_id < 0 || edge_id >= static_cast<int>(mesh.edges.size()))
        throw std::invalid_argument("edge_geometry: stale edge id");
    const Edge& e = mesh.edges[edge_id];
    return {e.length, e.normal, e.left, e.right};
}

// ---------------------------------------------------------------------------
// Serialization

void save_mesh(const Mesh& mesh, std::ostream& out) {
    out.precision(17);
    out << "adr-mesh 1\n";
    out << "domain " << mesh.domain.x0 << " " << mesh.domain.y0 << " "
        << mesh.domain.x1 << " " << mesh.domain.y1 << "\n";
    out << "grid " << mesh.nx << " " << mesh.ny << "\n";
    out << "vertices " << mesh.vertices.size() << "\n";
    for (const auto& v : mesh.vertices) out << v.x.x() << " " << v.x.y() << "\n";
    out << "triangles " << mesh.tris.size() << " roots " << mesh.n_roots << "\n";
    for (const auto& t : mesh.tris)
        out << t.v[0] << " " << t.v[1] << " " << t.v[2] << " " << t.parent << " "
            << t.child[0] << " " << t.child[1] << " " << t.level << " "
            << t.ref_edge << "\n";
}

MeshPtr load_mesh(std::istream& in, BoundaryClassifier boundary) {
    std::string tag;
    int version = 0;
    in >> tag >> version;
    if (tag != "adr-mesh" || version != 1)
        throw std::runtime_error("load_mesh: unrecognized format");
    Mesh m;
    m.boundary = std::move(boundary);
    in >> tag >> m.domain.x0 >> m.domain.y0 >> m.domain.x1 >> m.domain.y1;
    in >> tag >> m.nx >> m.ny;
    size_t nv = 0;
    in >> tag >> nv;
    m.vertices.resize(nv);
    for (auto& v : m.vertices) in >> v.x.x() >> v.x.y();
    size_t nt = 0;
    in >> tag >> nt >> tag >> m.n_roots;
    m.tris.resize(nt);
    for (auto& t : m.tris)
        in >> t.v[0] >> t.v[1] >> t.v[2] >> t.parent >> t.child[0] >>
            t.child[1] >> t.level >> t.ref_edge;
    if (!in) throw std::runtime_error("load_mesh: truncated input");
    m.rebuild_derived();
    return std::make_shared<Mesh>(std::move(m));
}

} // namespace adr
