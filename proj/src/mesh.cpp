#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "compete/discretization.hpp"
#include "compete/error.hpp"

namespace compete {

namespace {

double signed_area(const Point& a, const Point& b, const Point& c) {
  return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]));
}

double distance(const Point& a, const Point& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

}  // namespace

DomainMesh DomainMesh::interval(double a, double b, int elements) {
  if (elements < 1) throw MeshError("interval mesh needs at least one element");
  if (!(std::isfinite(a) && std::isfinite(b)) || !(a < b))
    throw MeshError("interval endpoints must be finite with a < b");
  std::vector<double> nodes(static_cast<std::size_t>(elements) + 1);
  for (int i = 0; i <= elements; ++i) nodes[i] = a + (b - a) * i / elements;
  nodes.back() = b;
  return line(std::move(nodes));
}

DomainMesh DomainMesh::line(std::vector<double> nodes) {
  if (nodes.size() < 2) throw MeshError("1D mesh needs at least two nodes");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!std::isfinite(nodes[i])) throw MeshError("node " + std::to_string(i) + " is not finite");
    if (i > 0 && !(nodes[i] > nodes[i - 1]))
      throw MeshError("nodes not strictly increasing at index " + std::to_string(i));
  }
  DomainMesh m;
  m.dim_ = 1;
  m.nodes_.reserve(nodes.size());
  for (double x : nodes) m.nodes_.push_back({x, 0.0});
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i)
    m.elements_.push_back({static_cast<int>(i), static_cast<int>(i + 1), -1});
  m.finalize();
  return m;
}

DomainMesh DomainMesh::triangulation(std::vector<Point> vertices,
                                     std::vector<std::array<int, 3>> triangles) {
  if (vertices.size() < 3) throw MeshError("2D mesh needs at least three vertices");
  if (triangles.empty()) throw MeshError("2D mesh has no triangles");
  const auto nv = static_cast<int>(vertices.size());
  for (std::size_t i = 0; i < vertices.size(); ++i)
    if (!std::isfinite(vertices[i][0]) || !std::isfinite(vertices[i][1]))
      throw MeshError("vertex " + std::to_string(i) + " is not finite");

  std::vector<bool> used(vertices.size(), false);
  double scale = 0.0;
  for (const auto& v : vertices) scale = std::max({scale, std::abs(v[0]), std::abs(v[1])});
  scale = std::max(scale, 1.0);
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    const auto& tri = triangles[t];
    for (int k = 0; k < 3; ++k) {
      if (tri[k] < 0 || tri[k] >= nv)
        throw MeshError("triangle " + std::to_string(t) + " references vertex " +
                        std::to_string(tri[k]) + " out of range");
      used[tri[k]] = true;
    }
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
      throw MeshError("triangle " + std::to_string(t) + " repeats a vertex");
    const double area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
    if (std::abs(area) <= 1e-14 * scale * scale)
      throw MeshError("triangle " + std::to_string(t) + " is degenerate");
    if (area < 0.0) throw MeshError("triangle " + std::to_string(t) + " is negatively oriented");
  }
  for (std::size_t i = 0; i < used.size(); ++i)
    if (!used[i]) throw MeshError("vertex " + std::to_string(i) + " belongs to no triangle");

  DomainMesh m;
  m.dim_ = 2;
  m.nodes_ = std::move(vertices);
  m.elements_ = std::move(triangles);
  m.finalize();
  return m;
}

DomainMesh DomainMesh::unit_square() {
  return triangulation({{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}}, {{0, 1, 2}, {0, 2, 3}});
}

void DomainMesh::finalize() {
  measures_.resize(elements_.size());
  measure_ = 0.0;
  min_size_ = std::numeric_limits<double>::infinity();
  boundary_.assign(nodes_.size(), false);
  if (dim_ == 1) {
    for (std::size_t e = 0; e < elements_.size(); ++e) {
      measures_[e] = nodes_[elements_[e][1]][0] - nodes_[elements_[e][0]][0];
      min_size_ = std::min(min_size_, measures_[e]);
    }
    boundary_.front() = true;
    boundary_.back() = true;
  } else {
    std::map<std::pair<int, int>, int> edge_count;
    for (std::size_t e = 0; e < elements_.size(); ++e) {
      const auto& t = elements_[e];
      measures_[e] = signed_area(nodes_[t[0]], nodes_[t[1]], nodes_[t[2]]);
      for (int k = 0; k < 3; ++k) {
        const int a = t[k];
        const int b = t[(k + 1) % 3];
        min_size_ = std::min(min_size_, distance(nodes_[a], nodes_[b]));
        ++edge_count[{std::min(a, b), std::max(a, b)}];
      }
    }
    for (const auto& [edge, count] : edge_count) {
      if (count > 2)
        throw MeshError("edge (" + std::to_string(edge.first) + "," + std::to_string(edge.second) +
                        ") is shared by more than two triangles");
      if (count == 1) {
        boundary_[edge.first] = true;
        boundary_[edge.second] = true;
      }
    }
  }
  for (double m : measures_) measure_ += m;
}

std::array<Point, 2> DomainMesh::bounding_box() const {
  Point lo{nodes_[0]};
  Point hi{nodes_[0]};
  for (const auto& x : nodes_) {
    for (int d = 0; d < 2; ++d) {
      lo[d] = std::min(lo[d], x[d]);
      hi[d] = std::max(hi[d], x[d]);
    }
  }
  return {lo, hi};
}

nlohmann::json DomainMesh::to_json() const {
  nlohmann::json j;
  j["dim"] = dim_;
  if (dim_ == 1) {
    std::vector<double> xs;
    xs.reserve(nodes_.size());
    for (const auto& x : nodes_) xs.push_back(x[0]);
    j["nodes"] = xs;
  } else {
    j["vertices"] = nodes_;
    j["triangles"] = elements_;
  }
  return j;
}

DomainMesh DomainMesh::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("dim")) throw MeshError("mesh JSON must be an object with \"dim\"");
  const int dim = j.at("dim").get<int>();
  try {
    if (dim == 1) return line(j.at("nodes").get<std::vector<double>>());
    if (dim == 2)
      return triangulation(j.at("vertices").get<std::vector<Point>>(),
                           j.at("triangles").get<std::vector<std::array<int, 3>>>());
  } catch (const nlohmann::json::exception& e) {
    throw MeshError(std::string("malformed mesh JSON: ") + e.what());
  }
  throw MeshError("mesh dimension must be 1 or 2, got " + std::to_string(dim));
}

RefinedMesh refine_uniform(const DomainMesh& mesh) {
  RefinedMesh out{mesh, {}};
  if (mesh.dimension() == 1) {
    std::vector<double> xs;
    xs.reserve(2 * mesh.num_nodes() - 1);
    for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
      const int ii = static_cast<int>(i);
      if (i > 0) {
        xs.push_back(0.5 * (mesh.node(i - 1)[0] + mesh.node(i)[0]));
        out.parents.push_back({ii - 1, ii});
      }
      xs.push_back(mesh.node(i)[0]);
      out.parents.push_back({ii, ii});
    }
    out.mesh = DomainMesh::line(std::move(xs));
    return out;
  }

  std::vector<Point> vertices;
  vertices.reserve(mesh.num_nodes() * 4);
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
    vertices.push_back(mesh.node(i));
    out.parents.push_back({static_cast<int>(i), static_cast<int>(i)});
  }
  std::map<std::pair<int, int>, int> midpoint;
  auto mid = [&](int a, int b) {
    const std::pair<int, int> key{std::min(a, b), std::max(a, b)};
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    const int id = static_cast<int>(vertices.size());
    const auto& pa = mesh.node(key.first);
    const auto& pb = mesh.node(key.second);
    vertices.push_back({0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])});
    out.parents.push_back({key.first, key.second});
    midpoint.emplace(key, id);
    return id;
  };
  std::vector<std::array<int, 3>> triangles;
  triangles.reserve(4 * mesh.num_elements());
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const auto t = mesh.element(e);
    const int a = t[0], b = t[1], c = t[2];
    const int ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
    triangles.push_back({a, ab, ca});
    triangles.push_back({ab, b, bc});
    triangles.push_back({ca, bc, c});
    triangles.push_back({ab, bc, ca});
  }
  out.mesh = DomainMesh::triangulation(std::move(vertices), std::move(triangles));
  return out;
}

}  // namespace compete
