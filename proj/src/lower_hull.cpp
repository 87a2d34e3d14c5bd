#include "malab/lower_hull.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "malab/errors.hpp"

namespace malab {
namespace {

struct Face {
  std::array<int, 3> v{};
  std::array<int, 3> nb{-1, -1, -1};  // neighbor across edge v[i] -> v[i+1]
  std::vector<int> outside;
  double nx = 0, ny = 0, nz = 0, off = 0;
  bool alive = true;
};

std::uint64_t edge_key(int a, int b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

class Quickhull {
 public:
  explicit Quickhull(std::vector<Point3> pts) : pts_(std::move(pts)) {}

  void build() {
    init_simplex();
    std::vector<int> pending;
    for (int f = 0; f < static_cast<int>(faces_.size()); ++f)
      if (!faces_[f].outside.empty()) pending.push_back(f);
    while (!pending.empty()) {
      const int f = pending.back();
      pending.pop_back();
      if (!faces_[f].alive || faces_[f].outside.empty()) continue;
      add_point(f, pending);
    }
  }

  const std::vector<Face>& faces() const { return faces_; }
  const std::vector<Point3>& points() const { return pts_; }
  int sentinel() const { return sentinel_; }

 private:
  bool visible(const Face& f, int p) const {
    return orient3d(pts_[f.v[0]], pts_[f.v[1]], pts_[f.v[2]], pts_[p]) > 0;
  }

  int make_face(int a, int b, int c) {
    Face f;
    f.v = {a, b, c};
    const Point3& A = pts_[a];
    const Point3& B = pts_[b];
    const Point3& C = pts_[c];
    const double ux = B.x - A.x, uy = B.y - A.y, uz = B.z - A.z;
    const double wx = C.x - A.x, wy = C.y - A.y, wz = C.z - A.z;
    f.nx = uy * wz - uz * wy;
    f.ny = uz * wx - ux * wz;
    f.nz = ux * wy - uy * wx;
    f.off = f.nx * A.x + f.ny * A.y + f.nz * A.z;
    faces_.push_back(std::move(f));
    return static_cast<int>(faces_.size()) - 1;
  }

  double distance(const Face& f, int p) const {
    const Point3& q = pts_[p];
    return f.nx * q.x + f.ny * q.y + f.nz * q.z - f.off;
  }

  void init_simplex() {
    const int n = static_cast<int>(pts_.size());
    if (n < 3) throw DegenerateGeometry("lower hull needs at least 3 points");
    auto lex_less = [&](int i, int j) {
      return pts_[i].x < pts_[j].x || (pts_[i].x == pts_[j].x && pts_[i].y < pts_[j].y);
    };
    int a = 0, b = 0;
    for (int i = 1; i < n; ++i) {
      if (lex_less(i, a)) a = i;
      if (lex_less(b, i)) b = i;
    }
    int c = -1;
    double best = 0.0;
    for (int i = 0; i < n; ++i) {
      const double area = std::abs((pts_[b].x - pts_[a].x) * (pts_[i].y - pts_[a].y) -
                                   (pts_[b].y - pts_[a].y) * (pts_[i].x - pts_[a].x));
      if (area > best && orient2d_xy(pts_[a], pts_[b], pts_[i]) != 0) {
        best = area;
        c = i;
      }
    }
    if (c < 0) {
      for (int i = 0; i < n && c < 0; ++i)
        if (orient2d_xy(pts_[a], pts_[b], pts_[i]) != 0) c = i;
    }
    if (c < 0) throw DegenerateGeometry("lower hull: all projected points are collinear");

    double zmin = pts_[0].z, zmax = pts_[0].z;
    double xmin = pts_[0].x, xmax = pts_[0].x, ymin = pts_[0].y, ymax = pts_[0].y;
    for (const auto& p : pts_) {
      zmin = std::min(zmin, p.z);
      zmax = std::max(zmax, p.z);
      xmin = std::min(xmin, p.x);
      xmax = std::max(xmax, p.x);
      ymin = std::min(ymin, p.y);
      ymax = std::max(ymax, p.y);
    }
    // A point strictly above everything, projecting inside triangle abc, keeps
    // the hull three-dimensional without touching the lower faces.
    Point3 top;
    top.x = (pts_[a].x + pts_[b].x + pts_[c].x) / 3.0;
    top.y = (pts_[a].y + pts_[b].y + pts_[c].y) / 3.0;
    top.z = zmax + 1.0 + (zmax - zmin) + (xmax - xmin) + (ymax - ymin);
    sentinel_ = n;
    pts_.push_back(top);
    const int s = n;

    std::array<int, 4> t{a, b, c, s};
    if (orient3d(pts_[a], pts_[b], pts_[c], pts_[s]) > 0) std::swap(t[1], t[2]);
    make_face(t[0], t[1], t[2]);
    make_face(t[0], t[3], t[1]);
    make_face(t[1], t[3], t[2]);
    make_face(t[2], t[3], t[0]);
    link_all();

    for (int i = 0; i < n; ++i) {
      if (i == a || i == b || i == c) continue;
      for (int f = 0; f < 4; ++f) {
        if (visible(faces_[f], i)) {
          faces_[f].outside.push_back(i);
          break;
        }
      }
    }
  }

  void link_all() {
    std::unordered_map<std::uint64_t, std::pair<int, int>> owner;
    for (int f = 0; f < static_cast<int>(faces_.size()); ++f)
      for (int e = 0; e < 3; ++e) owner[edge_key(faces_[f].v[e], faces_[f].v[(e + 1) % 3])] = {f, e};
    for (int f = 0; f < static_cast<int>(faces_.size()); ++f)
      for (int e = 0; e < 3; ++e) faces_[f].nb[e] = owner.at(edge_key(faces_[f].v[(e + 1) % 3], faces_[f].v[e])).first;
  }

  void add_point(int f0, std::vector<int>& pending) {
    Face& seed = faces_[f0];
    int p = seed.outside.front();
    double far = distance(seed, p);
    for (int q : seed.outside) {
      const double d = distance(seed, q);
      if (d > far) {
        far = d;
        p = q;
      }
    }

    ++epoch_;
    if (state_.size() < faces_.size()) {
      state_.resize(faces_.size(), 0);
      stamp_.resize(faces_.size(), 0);
    }
    auto mark = [&](int f, int st) {
      stamp_[f] = epoch_;
      state_[f] = st;
    };
    auto status = [&](int f) { return stamp_[f] == epoch_ ? state_[f] : 0; };

    std::vector<int> visible_faces;
    std::vector<std::pair<int, int>> horizon;  // (visible face, edge index)
    std::vector<int> stack{f0};
    mark(f0, 1);
    while (!stack.empty()) {
      const int f = stack.back();
      stack.pop_back();
      visible_faces.push_back(f);
      for (int e = 0; e < 3; ++e) {
        const int g = faces_[f].nb[e];
        int st = status(g);
        if (st == 0) {
          st = visible(faces_[g], p) ? 1 : 2;
          mark(g, st);
          if (st == 1) stack.push_back(g);
        }
        if (st == 2) horizon.emplace_back(f, e);
      }
    }

    std::unordered_map<int, int> starts;  // horizon start vertex -> new face
    std::unordered_map<int, int> ends;    // horizon end vertex -> new face
    std::vector<int> created;
    created.reserve(horizon.size());
    for (const auto& [f, e] : horizon) {
      const int u = faces_[f].v[e];
      const int v = faces_[f].v[(e + 1) % 3];
      const int outer = faces_[f].nb[e];
      const int nf = make_face(u, v, p);
      faces_[nf].nb[0] = outer;
      Face& of = faces_[outer];
      for (int k = 0; k < 3; ++k)
        if (of.v[k] == v && of.v[(k + 1) % 3] == u) of.nb[k] = nf;
      starts[u] = nf;
      ends[v] = nf;
      created.push_back(nf);
    }
    for (int nf : created) {
      Face& face = faces_[nf];
      face.nb[1] = starts.at(face.v[1]);
      face.nb[2] = ends.at(face.v[0]);
    }
    if (state_.size() < faces_.size()) {
      state_.resize(faces_.size(), 0);
      stamp_.resize(faces_.size(), 0);
    }

    for (int f : visible_faces) {
      faces_[f].alive = false;
      for (int q : faces_[f].outside) {
        if (q == p) continue;
        for (int nf : created) {
          if (visible(faces_[nf], q)) {
            faces_[nf].outside.push_back(q);
            break;
          }
        }
      }
      faces_[f].outside.clear();
      faces_[f].outside.shrink_to_fit();
    }
    for (int nf : created)
      if (!faces_[nf].outside.empty()) pending.push_back(nf);
  }

  std::vector<Point3> pts_;
  std::vector<Face> faces_;
  std::vector<int> state_;
  std::vector<int> stamp_;
  int epoch_ = 0;
  int sentinel_ = -1;
};

int find_root(std::vector<int>& parent, int x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

LowerHull extract(std::span<const Point3> input, bool merge) {
  Quickhull qh(std::vector<Point3>(input.begin(), input.end()));
  qh.build();
  const auto& faces = qh.faces();
  const auto& pts = qh.points();
  const int n = static_cast<int>(input.size());

  std::vector<int> lower_id(faces.size(), -1);
  std::vector<int> lower;
  for (int f = 0; f < static_cast<int>(faces.size()); ++f) {
    const Face& face = faces[f];
    if (!face.alive) continue;
    if (face.v[0] == qh.sentinel() || face.v[1] == qh.sentinel() || face.v[2] == qh.sentinel()) continue;
    if (orient2d_xy(pts[face.v[0]], pts[face.v[1]], pts[face.v[2]]) >= 0) continue;
    lower_id[f] = static_cast<int>(lower.size());
    lower.push_back(f);
  }

  // Group coplanar neighbors.
  std::vector<int> parent(lower.size());
  std::iota(parent.begin(), parent.end(), 0);
  for (std::size_t i = 0; i < lower.size(); ++i) {
    const Face& face = faces[lower[i]];
    for (int e = 0; e < 3; ++e) {
      const int g = face.nb[e];
      if (g < 0 || lower_id[g] < 0 || lower_id[g] < static_cast<int>(i)) continue;
      const Face& other = faces[g];
      int opposite = -1;
      for (int k = 0; k < 3; ++k)
        if (other.v[k] != face.v[e] && other.v[k] != face.v[(e + 1) % 3]) opposite = other.v[k];
      if (orient3d(pts[face.v[0]], pts[face.v[1]], pts[face.v[2]], pts[opposite]) == 0) {
        const int ra = find_root(parent, static_cast<int>(i));
        const int rb = find_root(parent, lower_id[g]);
        if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
      }
    }
  }

  LowerHull out;
  out.on_hull.assign(static_cast<std::size_t>(n), false);
  std::unordered_map<int, std::vector<int>> groups;
  std::vector<int> roots;
  for (std::size_t i = 0; i < lower.size(); ++i) {
    const int r = find_root(parent, static_cast<int>(i));
    auto [it, fresh] = groups.try_emplace(r);
    if (fresh) roots.push_back(r);
    it->second.push_back(static_cast<int>(i));
  }
  std::sort(roots.begin(), roots.end());

  int group_id = 0;
  for (int r : roots) {
    const auto& members = groups[r];
    if (!merge || members.size() == 1) {
      for (int m : members) {
        const Face& face = faces[lower[m]];
        out.faces.push_back({face.v[0], face.v[2], face.v[1]});
        out.plane_group.push_back(group_id);
      }
      ++group_id;
      continue;
    }
    // Boundary loop of the planar facet, clockwise in projection.
    std::unordered_map<int, int> next;
    for (int m : members) {
      const Face& face = faces[lower[m]];
      for (int e = 0; e < 3; ++e) {
        const int g = face.nb[e];
        if (g >= 0 && lower_id[g] >= 0 && find_root(parent, lower_id[g]) == r) continue;
        next[face.v[e]] = face.v[(e + 1) % 3];
      }
    }
    std::vector<int> loop;
    const int start = next.begin()->first;
    int cur = start;
    do {
      loop.push_back(cur);
      cur = next.at(cur);
      if (loop.size() > next.size()) throw DegenerateGeometry("lower hull: malformed coplanar facet");
    } while (cur != start);
    std::reverse(loop.begin(), loop.end());
    bool changed = true;
    while (changed && loop.size() > 3) {
      changed = false;
      for (std::size_t i = 0; i < loop.size(); ++i) {
        const int a = loop[(i + loop.size() - 1) % loop.size()];
        const int b = loop[i];
        const int c = loop[(i + 1) % loop.size()];
        if (orient2d_xy(pts[a], pts[b], pts[c]) == 0) {
          loop.erase(loop.begin() + static_cast<std::ptrdiff_t>(i));
          changed = true;
          break;
        }
      }
    }
    const auto lowest = std::min_element(loop.begin(), loop.end());
    std::rotate(loop.begin(), lowest, loop.end());
    for (std::size_t i = 1; i + 1 < loop.size(); ++i) {
      out.faces.push_back({loop[0], loop[i], loop[i + 1]});
      out.plane_group.push_back(group_id);
    }
    ++group_id;
  }
  for (const auto& t : out.faces)
    for (int v : t) out.on_hull[static_cast<std::size_t>(v)] = true;
  return out;
}

}  // namespace

LowerHull lower_hull_3d(std::span<const Point3> points) { return extract(points, true); }

LowerHull lower_hull_3d_unmerged(std::span<const Point3> points) { return extract(points, false); }

}  // namespace malab
