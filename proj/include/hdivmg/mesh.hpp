#pragma once

#include <algorithm>
#include <array>
#include <cassert>
#include <cstdint>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "hdivmg/common.hpp"

namespace hdivmg {

namespace bc {
constexpr int kInterior = 0;
constexpr int kDirichlet = 1;
constexpr int kOutflow = 2;
}  // namespace bc

/// Position of a fine facet relative to its coarse mesh.
enum class FacetClass : std::uint8_t {
  InteriorOfCoarseElement,
  OnCoarseSkeleton,
  OnBoundary,
};

/// Conforming triangle mesh. Facets are stored with vertex ids sorted
/// ascending; the global facet direction runs from the lower to the higher
/// vertex id and the global normal is that tangent rotated by -90 degrees.
struct Mesh {
  struct Element {
    std::array<int, 3> v;           // vertex ids, counterclockwise
    std::array<int, 3> facet;       // facet opposite local vertex i
    std::array<std::int8_t, 3> sigma;  // +1 if global facet normal points outward
    std::array<std::int8_t, 3> rho;    // +1 if local edge direction matches global
  };
  struct Facet {
    int a, b;                 // vertex ids, a < b
    std::array<int, 2> elem;  // adjacent elements, elem[1] = -1 on the boundary
    int tag;                  // bc::kInterior / kDirichlet / kOutflow
  };

  std::vector<Vec2> vertices;
  std::vector<Element> elements;
  std::vector<Facet> facets;

  int nv() const { return static_cast<int>(vertices.size()); }
  int ne() const { return static_cast<int>(elements.size()); }
  int nf() const { return static_cast<int>(facets.size()); }

  /// Local edge i of an element connects local vertices (i+1)%3 and (i+2)%3.
  static constexpr std::array<std::array<int, 2>, 3> kEdgeVertices{
      {{1, 2}, {2, 0}, {0, 1}}};

  Real area(int e) const {
    const auto& el = elements[e];
    Vec2 d1 = vertices[el.v[1]] - vertices[el.v[0]];
    Vec2 d2 = vertices[el.v[2]] - vertices[el.v[0]];
    return 0.5 * (d1.x() * d2.y() - d1.y() * d2.x());
  }

  Vec2 centroid(int e) const {
    const auto& el = elements[e];
    return (vertices[el.v[0]] + vertices[el.v[1]] + vertices[el.v[2]]) / 3.0;
  }

  Real facet_length(int f) const {
    return (vertices[facets[f].b] - vertices[facets[f].a]).norm();
  }

  Vec2 facet_midpoint(int f) const {
    return 0.5 * (vertices[facets[f].a] + vertices[facets[f].b]);
  }

  Vec2 facet_tangent(int f) const {
    return (vertices[facets[f].b] - vertices[facets[f].a]).normalized();
  }

  Vec2 facet_normal(int f) const {
    Vec2 t = facet_tangent(f);
    return Vec2(t.y(), -t.x());
  }

  /// Point on facet f at parameter t in [-1,1] along the global direction.
  Vec2 facet_point(int f, Real t) const {
    return 0.5 * ((1.0 - t) * vertices[facets[f].a] +
                  (1.0 + t) * vertices[facets[f].b]);
  }

  /// Rebuilds facet connectivity and orientation data from elements.
  void finalize() {
    std::map<std::pair<int, int>, int> lookup;
    std::vector<Facet> old = std::move(facets);
    std::map<std::pair<int, int>, int> old_tags;
    for (const Facet& f : old) old_tags[{f.a, f.b}] = f.tag;
    facets.clear();
    for (int e = 0; e < ne(); ++e) {
      auto& el = elements[e];
      for (int i = 0; i < 3; ++i) {
        int ga = el.v[kEdgeVertices[i][0]];
        int gb = el.v[kEdgeVertices[i][1]];
        auto key = std::minmax(ga, gb);
        auto [it, inserted] = lookup.try_emplace(key, nf());
        if (inserted) {
          Facet f;
          f.a = key.first;
          f.b = key.second;
          f.elem = {e, -1};
          f.tag = bc::kInterior;
          facets.push_back(f);
        } else {
          assert(facets[it->second].elem[1] == -1);
          facets[it->second].elem[1] = e;
        }
        el.facet[i] = it->second;
      }
    }
    for (Facet& f : facets) {
      if (f.elem[1] == -1 && f.tag == bc::kInterior) f.tag = bc::kDirichlet;
      auto it = old_tags.find({f.a, f.b});
      if (it != old_tags.end()) f.tag = it->second;
    }
    for (int e = 0; e < ne(); ++e) {
      auto& el = elements[e];
      for (int i = 0; i < 3; ++i) {
        int ga = el.v[kEdgeVertices[i][0]];
        int gb = el.v[kEdgeVertices[i][1]];
        el.rho[i] = (ga < gb) ? 1 : -1;
        int f = el.facet[i];
        Vec2 out = facet_midpoint(f) - centroid(e);
        el.sigma[i] = (out.dot(facet_normal(f)) > 0.0) ? 1 : -1;
      }
    }
  }
};

/// Parent/child correspondence produced by one uniform refinement.
struct RefinementMaps {
  std::vector<std::array<int, 4>> elem_children;   // per coarse element
  std::vector<std::array<int, 2>> facet_children;  // per coarse facet
  std::vector<int> facet_midvertex;                // per coarse facet (fine id)
  std::vector<FacetClass> fine_class;              // per fine facet
  std::vector<int> fine_parent_facet;    // coarse facet id, -1 for interior
  std::vector<int> fine_parent_element;  // coarse element id (always set)
  std::vector<int> elem_parent;          // per fine element
};

/// Splits every triangle into four via edge midpoints. The coarse vertices
/// keep their ids; midpoint vertices are appended in coarse facet order.
inline Mesh refine_uniform(const Mesh& coarse, RefinementMaps& maps) {
  Mesh fine;
  fine.vertices = coarse.vertices;
  fine.vertices.reserve(coarse.nv() + coarse.nf());
  maps.facet_midvertex.resize(coarse.nf());
  for (int f = 0; f < coarse.nf(); ++f) {
    maps.facet_midvertex[f] = fine.nv();
    fine.vertices.push_back(coarse.facet_midpoint(f));
  }
  maps.elem_children.resize(coarse.ne());
  maps.elem_parent.resize(4 * coarse.ne());
  fine.elements.reserve(4 * coarse.ne());
  auto add_elem = [&fine](int a, int b, int c) {
    Mesh::Element el{};
    el.v = {a, b, c};
    fine.elements.push_back(el);
    return static_cast<int>(fine.elements.size()) - 1;
  };
  for (int e = 0; e < coarse.ne(); ++e) {
    const auto& el = coarse.elements[e];
    int v0 = el.v[0], v1 = el.v[1], v2 = el.v[2];
    int m0 = maps.facet_midvertex[el.facet[0]];
    int m1 = maps.facet_midvertex[el.facet[1]];
    int m2 = maps.facet_midvertex[el.facet[2]];
    maps.elem_children[e] = {add_elem(v0, m2, m1), add_elem(m2, v1, m0),
                             add_elem(m1, m0, v2), add_elem(m0, m1, m2)};
    for (int c : maps.elem_children[e]) maps.elem_parent[c] = e;
  }
  fine.finalize();

  maps.facet_children.assign(coarse.nf(), {-1, -1});
  maps.fine_class.assign(fine.nf(), FacetClass::InteriorOfCoarseElement);
  maps.fine_parent_facet.assign(fine.nf(), -1);
  maps.fine_parent_element.assign(fine.nf(), -1);
  std::map<std::pair<int, int>, int> coarse_lookup;
  for (int f = 0; f < coarse.nf(); ++f)
    coarse_lookup[{coarse.facets[f].a, coarse.facets[f].b}] = f;
  for (int ff = 0; ff < fine.nf(); ++ff) {
    auto& fct = fine.facets[ff];
    bool a_coarse = fct.a < coarse.nv();
    bool b_coarse = fct.b < coarse.nv();
    if (a_coarse == b_coarse) {
      // midpoint-midpoint: medial edge inside a coarse element
      assert(!a_coarse && !b_coarse);
      int parent = maps.elem_parent[fct.elem[0]];
      maps.fine_parent_element[ff] = parent;
      continue;
    }
    int cv = a_coarse ? fct.a : fct.b;
    int mid = a_coarse ? fct.b : fct.a;
    int cf = mid - coarse.nv();  // midpoints were appended in facet order
    const auto& pf = coarse.facets[cf];
    assert(cv == pf.a || cv == pf.b);
    maps.fine_parent_facet[ff] = cf;
    maps.fine_parent_element[ff] = maps.elem_parent[fct.elem[0]];
    maps.fine_class[ff] = (pf.elem[1] == -1) ? FacetClass::OnBoundary
                                             : FacetClass::OnCoarseSkeleton;
    fct.tag = pf.tag;
    int slot = (cv == pf.a) ? 0 : 1;
    maps.facet_children[cf][slot] = ff;
  }
  (void)coarse_lookup;
  return fine;
}

/// Structured unit-square mesh with n x n cells split along one diagonal;
/// 2 n^2 elements, all boundary facets tagged Dirichlet.
inline Mesh unit_square_mesh(int n) {
  assert(n >= 1);
  Mesh mesh;
  mesh.vertices.reserve((n + 1) * (n + 1));
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i)
      mesh.vertices.emplace_back(Real(i) / n, Real(j) / n);
  auto vid = [n](int i, int j) { return j * (n + 1) + i; };
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      Mesh::Element a{}, b{};
      a.v = {vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)};
      b.v = {vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)};
      mesh.elements.push_back(a);
      mesh.elements.push_back(b);
    }
  mesh.finalize();
  return mesh;
}

/// Backward-facing-step domain ([0.5,4]x[0,0.5]) U ([0,4]x[0.5,1]) meshed
/// with cells of size 1/n (n even so the step corner lies on the grid).
/// Boundary facets on x=4 are tagged outflow, the rest Dirichlet.
inline Mesh step_mesh(int n) {
  assert(n >= 2 && n % 2 == 0);
  Mesh mesh;
  const int nx = 4 * n, ny = n;
  std::vector<int> vmap((nx + 1) * (ny + 1), -1);
  auto grid = [nx](int i, int j) { return j * (nx + 1) + i; };
  auto inside = [n](int i, int j) {
    Real cx = (i + 0.5) / n, cy = (j + 0.5) / n;
    return cy > 0.5 || cx > 0.5;
  };
  auto vertex = [&](int i, int j) {
    int& id = vmap[grid(i, j)];
    if (id < 0) {
      id = mesh.nv();
      mesh.vertices.emplace_back(Real(i) / n, Real(j) / n);
    }
    return id;
  };
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      if (!inside(i, j)) continue;
      int v00 = vertex(i, j), v10 = vertex(i + 1, j);
      int v11 = vertex(i + 1, j + 1), v01 = vertex(i, j + 1);
      Mesh::Element a{}, b{};
      a.v = {v00, v10, v11};
      b.v = {v00, v11, v01};
      mesh.elements.push_back(a);
      mesh.elements.push_back(b);
    }
  mesh.finalize();
  for (int f = 0; f < mesh.nf(); ++f) {
    if (mesh.facets[f].tag != bc::kInterior &&
        std::abs(mesh.facet_midpoint(f).x() - 4.0) < 1e-12)
      mesh.facets[f].tag = bc::kOutflow;
  }
  return mesh;
}

/// Nested hierarchy of uniformly refined meshes, level 0 coarsest.
struct MeshHierarchy {
  std::vector<Mesh> levels;
  std::vector<RefinementMaps> maps;  // maps[l] refines levels[l] -> levels[l+1]

  static MeshHierarchy build(Mesh base, int n_levels) {
    assert(n_levels >= 1);
    MeshHierarchy h;
    h.levels.push_back(std::move(base));
    for (int l = 1; l < n_levels; ++l) {
      RefinementMaps m;
      h.levels.push_back(refine_uniform(h.levels[l - 1], m));
      h.maps.push_back(std::move(m));
    }
    return h;
  }
};

/// Facet ids incident to each vertex, the patch index sets of the block
/// smoothers. Every facet shows up in exactly two patches (its endpoints).
inline std::vector<std::vector<int>> vertex_patches(const Mesh& mesh) {
  std::vector<std::vector<int>> patches(mesh.nv());
  for (int f = 0; f < mesh.nf(); ++f) {
    patches[mesh.facets[f].a].push_back(f);
    patches[mesh.facets[f].b].push_back(f);
  }
  return patches;
}

inline void write_mesh(const Mesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out.precision(17);
  out << "vertices " << mesh.nv() << "\n";
  for (const auto& v : mesh.vertices) out << v.x() << " " << v.y() << "\n";
  out << "elements " << mesh.ne() << "\n";
  for (const auto& e : mesh.elements)
    out << e.v[0] << " " << e.v[1] << " " << e.v[2] << "\n";
  out << "facets " << mesh.nf() << "\n";
  for (const auto& f : mesh.facets)
    out << f.a << " " << f.b << " " << f.tag << "\n";
}

inline Mesh read_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string word;
  std::size_t n = 0;
  Mesh mesh;
  in >> word >> n;
  if (word != "vertices") throw std::runtime_error("bad mesh header: " + word);
  mesh.vertices.resize(n);
  for (auto& v : mesh.vertices) in >> v.x() >> v.y();
  in >> word >> n;
  if (word != "elements") throw std::runtime_error("bad mesh header: " + word);
  mesh.elements.resize(n);
  for (auto& e : mesh.elements) in >> e.v[0] >> e.v[1] >> e.v[2];
  in >> word >> n;
  if (word != "facets") throw std::runtime_error("bad mesh header: " + word);
  std::vector<std::array<int, 3>> tags(n);
  for (auto& t : tags) in >> t[0] >> t[1] >> t[2];
  if (!in) throw std::runtime_error("truncated mesh file: " + path);
  mesh.finalize();
  if (static_cast<std::size_t>(mesh.nf()) != n)
    throw std::runtime_error("facet count mismatch in " + path);
  std::map<std::pair<int, int>, int> lookup;
  for (int f = 0; f < mesh.nf(); ++f)
    lookup[{mesh.facets[f].a, mesh.facets[f].b}] = f;
  for (const auto& t : tags) {
    auto it = lookup.find(std::minmax(t[0], t[1]));
    if (it == lookup.end()) throw std::runtime_error("unknown facet in " + path);
    mesh.facets[it->second].tag = t[2];
  }
  return mesh;
}

}  // namespace hdivmg
