#include "scenefit/mesh.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace scenefit {

TriMesh TriMesh::create(std::vector<Vec3> vertices, std::vector<std::array<int, 3>> faces) {
    if (vertices.empty() || faces.empty()) throw EmptyMesh("mesh has no vertices or no faces");
    const int n = static_cast<int>(vertices.size());
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const auto& [a, b, c] = faces[f];
        if (a < 0 || b < 0 || c < 0 || a >= n || b >= n || c >= n)
            throw ParseError("face " + std::to_string(f) + " references a vertex out of range");
        if (a == b || b == c || a == c)
            throw DegenerateFace("face " + std::to_string(f) + " repeats a vertex index");
        const Vec3 e1 = vertices[b] - vertices[a];
        const Vec3 e2 = vertices[c] - vertices[a];
        if (e1.cross(e2).norm() == 0.0)
            throw DegenerateFace("face " + std::to_string(f) + " has zero area");
    }
    TriMesh m;
    m.vertices = std::move(vertices);
    m.faces = std::move(faces);
    return m;
}

void TriMesh::aabb(Vec3& lo, Vec3& hi) const {
    lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    hi = -lo;
    for (const Vec3& v : vertices) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
}

namespace {

TriMesh load_obj(std::ifstream& in, const std::filesystem::path& path) {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag)) continue;
        if (tag == "v") {
            double x, y, z;
            if (!(ss >> x >> y >> z))
                throw ParseError(path.string() + ":" + std::to_string(lineno) + ": bad vertex record");
            vertices.push_back({x, y, z});
        } else if (tag == "f") {
            std::vector<int> idx;
            std::string tok;
            while (ss >> tok) {
                // accept "i", "i/t", "i/t/n", "i//n"
                const std::string head = tok.substr(0, tok.find('/'));
                int v = 0;
                try {
                    v = std::stoi(head);
                } catch (const std::exception&) {
                    throw ParseError(path.string() + ":" + std::to_string(lineno) + ": bad face index '" + tok + "'");
                }
                if (v < 0) v = static_cast<int>(vertices.size()) + v + 1;
                idx.push_back(v - 1);
            }
            if (idx.size() < 3)
                throw ParseError(path.string() + ":" + std::to_string(lineno) + ": face with fewer than 3 vertices");
            for (std::size_t k = 1; k + 1 < idx.size(); ++k)
                faces.push_back({idx[0], idx[k], idx[k + 1]});
        }
    }
    return TriMesh::create(std::move(vertices), std::move(faces));
}

TriMesh load_ply(std::ifstream& in, const std::filesystem::path& path) {
    const auto fail = [&](const std::string& why) { throw ParseError(path.string() + ": " + why); };
    std::string line;
    if (!std::getline(in, line) || line.substr(0, 3) != "ply") fail("missing 'ply' magic");

    struct Element {
        std::string name;
        std::size_t count = 0;
        std::vector<std::string> properties;  // scalar property names; "list" marks a list property
    };
    std::vector<Element> elements;
    bool ascii = false;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag)) continue;
        if (tag == "comment") continue;
        if (tag == "format") {
            std::string kind;
            ss >> kind;
            ascii = kind == "ascii";
        } else if (tag == "element") {
            Element e;
            if (!(ss >> e.name >> e.count)) fail("bad element declaration");
            elements.push_back(e);
        } else if (tag == "property") {
            if (elements.empty()) fail("property before any element");
            std::string type;
            ss >> type;
            std::string name;
            if (type == "list") {
                std::string count_type, value_type;
                if (!(ss >> count_type >> value_type >> name)) fail("bad list property");
                elements.back().properties.push_back("list");
            } else {
                if (!(ss >> name)) fail("bad property declaration");
                elements.back().properties.push_back(name);
            }
        } else if (tag == "end_header") {
            break;
        }
    }
    if (!ascii) fail("only ascii format is supported");

    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;
    for (const Element& e : elements) {
        if (e.name == "vertex") {
            int ix = -1, iy = -1, iz = -1;
            for (std::size_t p = 0; p < e.properties.size(); ++p) {
                if (e.properties[p] == "x") ix = static_cast<int>(p);
                if (e.properties[p] == "y") iy = static_cast<int>(p);
                if (e.properties[p] == "z") iz = static_cast<int>(p);
            }
            if (ix < 0 || iy < 0 || iz < 0) fail("vertex element lacks x/y/z properties");
            for (std::size_t i = 0; i < e.count; ++i) {
                if (!std::getline(in, line)) fail("truncated vertex list");
                std::istringstream ss(line);
                std::vector<double> vals(e.properties.size());
                for (double& v : vals)
                    if (!(ss >> v)) fail("bad vertex record '" + line + "'");
                vertices.push_back({vals[ix], vals[iy], vals[iz]});
            }
        } else if (e.name == "face") {
            for (std::size_t i = 0; i < e.count; ++i) {
                if (!std::getline(in, line)) fail("truncated face list");
                std::istringstream ss(line);
                int n = 0;
                if (!(ss >> n) || n < 3) fail("bad face record '" + line + "'");
                std::vector<int> idx(n);
                for (int& v : idx)
                    if (!(ss >> v)) fail("bad face record '" + line + "'");
                for (int k = 1; k + 1 < n; ++k) faces.push_back({idx[0], idx[k], idx[k + 1]});
            }
        } else {
            for (std::size_t i = 0; i < e.count; ++i)
                if (!std::getline(in, line)) fail("truncated element '" + e.name + "'");
        }
    }
    return TriMesh::create(std::move(vertices), std::move(faces));
}

}  // namespace

TriMesh load_mesh(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open mesh file " + path.string());
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".ply" ? load_ply(in, path) : load_obj(in, path);
}

void save_obj(const TriMesh& mesh, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.precision(17);
    for (const Vec3& v : mesh.vertices)
        out << "v " << v.x() << " " << v.y() << " " << v.z() << "\n";
    for (const auto& [a, b, c] : mesh.faces)
        out << "f " << a + 1 << " " << b + 1 << " " << c + 1 << "\n";
    if (!out) throw IoError("failed writing " + path.string());
}

TriMesh normalize_unit_cube(const TriMesh& mesh) {
    if (mesh.vertices.empty()) throw EmptyMesh("cannot normalize an empty mesh");
    Vec3 lo, hi;
    mesh.aabb(lo, hi);
    const double longest = (hi - lo).maxCoeff();
    if (!(longest > 0)) throw InvalidArgument("mesh has zero extent; cannot normalize to the unit cube");
    const Vec3 center = 0.5 * (lo + hi);
    TriMesh out = mesh;
    for (Vec3& v : out.vertices) v = (v - center) / longest;
    return out;
}

TriMesh place_mesh(const TriMesh& mesh, const BBox3D& box) {
    const Mat3 r = yaw_rotation(box.yaw);
    TriMesh out = mesh;
    for (Vec3& v : out.vertices) v = box.centroid + r * v.cwiseProduct(box.size);
    return out;
}

bool is_watertight(const TriMesh& mesh, std::array<int, 2>* bad_edge) {
    std::map<std::pair<int, int>, int> directed;
    for (const auto& [a, b, c] : mesh.faces) {
        ++directed[{a, b}];
        ++directed[{b, c}];
        ++directed[{c, a}];
    }
    for (const auto& [edge, count] : directed) {
        auto rev = directed.find({edge.second, edge.first});
        if (count != 1 || rev == directed.end() || rev->second != 1) {
            if (bad_edge) *bad_edge = {edge.first, edge.second};
            return false;
        }
    }
    return true;
}

namespace {

double solid_angle(const Vec3& a, const Vec3& b, const Vec3& c) {
    const double la = a.norm(), lb = b.norm(), lc = c.norm();
    if (la == 0.0 || lb == 0.0 || lc == 0.0) return 0.0;  // query point on a vertex
    const double numer = a.dot(b.cross(c));
    const double denom = la * lb * lc + a.dot(b) * lc + b.dot(c) * la + c.dot(a) * lb;
    return 2.0 * std::atan2(numer, denom);
}

// Closest point on triangle (Ericson, Real-Time Collision Detection 5.1.5),
// returned as squared distance.
double point_triangle_dist2(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0 && d2 <= 0) return (p - a).squaredNorm();

    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0 && d4 <= d3) return (p - b).squaredNorm();

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) {
        const double v = d1 / (d1 - d3);
        return (p - (a + v * ab)).squaredNorm();
    }

    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0 && d5 <= d6) return (p - c).squaredNorm();

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) {
        const double w = d2 / (d2 - d6);
        return (p - (a + w * ac)).squaredNorm();
    }

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (p - (b + w * (c - b))).squaredNorm();
    }

    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom, w = vc * denom;
    return (p - (a + ab * v + ac * w)).squaredNorm();
}

double aabb_dist2(const Vec3& p, const Vec3& lo, const Vec3& hi) {
    double d2 = 0.0;
    for (int k = 0; k < 3; ++k) {
        const double d = std::max({lo[k] - p[k], 0.0, p[k] - hi[k]});
        d2 += d * d;
    }
    return d2;
}

}  // namespace

double winding_number(const Vec3& p, const TriMesh& mesh) {
    double omega = 0.0;
    for (const auto& [a, b, c] : mesh.faces)
        omega += solid_angle(mesh.vertices[a] - p, mesh.vertices[b] - p, mesh.vertices[c] - p);
    return omega / (4.0 * M_PI);
}

double unsigned_distance_brute(const Vec3& p, const TriMesh& mesh) {
    if (mesh.faces.empty()) throw EmptyMesh("distance query against an empty mesh");
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [a, b, c] : mesh.faces)
        best = std::min(best, point_triangle_dist2(p, mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]));
    return std::sqrt(best);
}

MeshBvh::MeshBvh(const TriMesh& mesh) {
    if (mesh.faces.empty()) throw EmptyMesh("cannot build a BVH over an empty mesh");
    tris_.reserve(mesh.faces.size());
    std::vector<Vec3> centroids;
    centroids.reserve(mesh.faces.size());
    for (const auto& [a, b, c] : mesh.faces) {
        tris_.push_back({mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]});
        centroids.push_back((mesh.vertices[a] + mesh.vertices[b] + mesh.vertices[c]) / 3.0);
    }
    std::vector<std::int32_t> order(tris_.size());
    std::iota(order.begin(), order.end(), 0);
    root_ = build(order, 0, static_cast<std::int32_t>(order.size()), centroids);
    // apply the leaf ordering so leaves reference contiguous ranges
    std::vector<Tri> sorted(tris_.size());
    for (std::size_t i = 0; i < order.size(); ++i) sorted[i] = tris_[order[i]];
    tris_.swap(sorted);
}

std::int32_t MeshBvh::build(std::vector<std::int32_t>& order, std::int32_t begin, std::int32_t end,
                            std::vector<Vec3>& centroids) {
    Node node;
    node.lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    node.hi = -node.lo;
    for (std::int32_t i = begin; i < end; ++i) {
        const Tri& t = tris_[order[i]];
        node.lo = node.lo.cwiseMin(t.a).cwiseMin(t.b).cwiseMin(t.c);
        node.hi = node.hi.cwiseMax(t.a).cwiseMax(t.b).cwiseMax(t.c);
    }
    const std::int32_t id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(node);
    if (end - begin <= 4) {
        nodes_[id].begin = begin;
        nodes_[id].end = end;
        return id;
    }
    Vec3 clo = Vec3::Constant(std::numeric_limits<double>::infinity()), chi = -clo;
    for (std::int32_t i = begin; i < end; ++i) {
        clo = clo.cwiseMin(centroids[order[i]]);
        chi = chi.cwiseMax(centroids[order[i]]);
    }
    int axis = 0;
    (chi - clo).maxCoeff(&axis);
    const std::int32_t mid = (begin + end) / 2;
    std::nth_element(order.begin() + begin, order.begin() + mid, order.begin() + end,
                     [&](std::int32_t x, std::int32_t y) { return centroids[x][axis] < centroids[y][axis]; });
    const std::int32_t left = build(order, begin, mid, centroids);
    const std::int32_t right = build(order, mid, end, centroids);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

void MeshBvh::query(std::int32_t id, const Vec3& p, double& best) const {
    const Node& node = nodes_[id];
    if (aabb_dist2(p, node.lo, node.hi) >= best) return;
    if (node.left < 0) {
        for (std::int32_t i = node.begin; i < node.end; ++i)
            best = std::min(best, point_triangle_dist2(p, tris_[i].a, tris_[i].b, tris_[i].c));
        return;
    }
    const double dl = aabb_dist2(p, nodes_[node.left].lo, nodes_[node.left].hi);
    const double dr = aabb_dist2(p, nodes_[node.right].lo, nodes_[node.right].hi);
    if (dl <= dr) {
        query(node.left, p, best);
        query(node.right, p, best);
    } else {
        query(node.right, p, best);
        query(node.left, p, best);
    }
}

double MeshBvh::unsigned_distance(const Vec3& p) const {
    double best = std::numeric_limits<double>::infinity();
    query(root_, p, best);
    return std::sqrt(best);
}

double MeshBvh::winding_number(const Vec3& p) const {
    double omega = 0.0;
    for (const Tri& t : tris_) omega += solid_angle(t.a - p, t.b - p, t.c - p);
    return omega / (4.0 * M_PI);
}

double unsigned_distance(const Vec3& p, const TriMesh& mesh) {
    return MeshBvh(mesh).unsigned_distance(p);
}

TriMesh make_box_mesh(const Vec3& lo, const Vec3& hi) {
    if (!(lo.x() < hi.x() && lo.y() < hi.y() && lo.z() < hi.z()))
        throw InvalidArgument("box bounds must satisfy lo < hi per axis");
    std::vector<Vec3> vertices;
    vertices.reserve(8);
    for (int i = 0; i < 8; ++i)
        vertices.push_back({(i & 1) ? hi.x() : lo.x(), (i & 2) ? hi.y() : lo.y(), (i & 4) ? hi.z() : lo.z()});
    const std::vector<std::array<int, 3>> faces = {
        {0, 4, 6}, {0, 6, 2},  // x = lo
        {1, 3, 7}, {1, 7, 5},  // x = hi
        {0, 1, 5}, {0, 5, 4},  // y = lo
        {2, 6, 7}, {2, 7, 3},  // y = hi
        {0, 2, 3}, {0, 3, 1},  // z = lo
        {4, 5, 7}, {4, 7, 6},  // z = hi
    };
    return TriMesh::create(std::move(vertices), faces);
}

double signed_distance(const Vec3& p, const TriMesh& mesh) {
    std::array<int, 2> edge;
    if (!is_watertight(mesh, &edge))
        throw NotWatertight("mesh is not watertight at edge (" + std::to_string(edge[0]) + ", " +
                            std::to_string(edge[1]) + ")");
    const double d = unsigned_distance(p, mesh);
    return winding_number(p, mesh) >= 0.5 ? -d : d;
}

}  // namespace scenefit
