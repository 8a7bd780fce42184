#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "topoforge/csv.hpp"
#include "topoforge/error.hpp"
#include "topoforge/mesh.hpp"

namespace topoforge {

std::uint64_t fnv1a(const std::string& bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void write_vtk(std::ostream& os, const Mesh& mesh, const std::vector<VtkField>& cell_data,
               const std::vector<VtkField>& point_data) {
  const std::size_t nt = mesh.triangles.size();
  const std::size_t ne = mesh.boundary_edges.size();
  os << "# vtk DataFile Version 3.0\ntopoforge\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << mesh.vertices.size() << " double\n";
  for (const Point& p : mesh.vertices) os << format_number(p[0]) << ' ' << format_number(p[1]) << " 0\n";
  os << "CELLS " << nt + ne << ' ' << 4 * nt + 3 * ne << '\n';
  for (const auto& t : mesh.triangles) os << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  for (const auto& e : mesh.boundary_edges) os << "2 " << e.v[0] << ' ' << e.v[1] << '\n';
  os << "CELL_TYPES " << nt + ne << '\n';
  for (std::size_t i = 0; i < nt; ++i) os << "5\n";
  for (std::size_t i = 0; i < ne; ++i) os << "3\n";
  os << "CELL_DATA " << nt + ne << '\n';
  os << "SCALARS region int 1\nLOOKUP_TABLE default\n";
  for (Region r : mesh.regions) os << static_cast<int>(r) << '\n';
  for (std::size_t i = 0; i < ne; ++i) os << "-1\n";
  os << "SCALARS boundary_marker int 1\nLOOKUP_TABLE default\n";
  for (std::size_t i = 0; i < nt; ++i) os << "-1\n";
  for (const auto& e : mesh.boundary_edges) os << static_cast<int>(e.marker) << '\n';
  for (const auto& f : cell_data) {
    if (f.values.size() != nt) throw Error("cell field '" + f.name + "' has wrong length");
    os << "SCALARS " << f.name << " double 1\nLOOKUP_TABLE default\n";
    for (double v : f.values) os << format_number(v) << '\n';
    for (std::size_t i = 0; i < ne; ++i) os << "0\n";
  }
  if (!point_data.empty()) {
    os << "POINT_DATA " << mesh.vertices.size() << '\n';
    for (const auto& f : point_data) {
      const std::size_t nc = static_cast<std::size_t>(f.components);
      if (f.values.size() != nc * mesh.vertices.size()) throw Error("point field '" + f.name + "' has wrong length");
      if (nc == 1) {
        os << "SCALARS " << f.name << " double 1\nLOOKUP_TABLE default\n";
        for (double v : f.values) os << format_number(v) << '\n';
      } else {
        os << "VECTORS " << f.name << " double\n";
        for (std::size_t i = 0; i < mesh.vertices.size(); ++i)
          os << format_number(f.values[nc * i]) << ' ' << format_number(f.values[nc * i + 1]) << " 0\n";
      }
    }
  }
}

Mesh read_vtk(std::istream& is) {
  Mesh mesh;
  std::string word;
  std::vector<std::vector<int>> cells;
  std::vector<int> types;
  auto expect_ok = [&]() {
    if (!is) throw Error("malformed VTK file");
  };
  while (is >> word) {
    if (word == "POINTS") {
      std::size_t n;
      std::string type;
      is >> n >> type;
      mesh.vertices.resize(n);
      for (auto& p : mesh.vertices) {
        double z;
        is >> p[0] >> p[1] >> z;
      }
      expect_ok();
    } else if (word == "CELLS") {
      std::size_t n, total;
      is >> n >> total;
      cells.resize(n);
      for (auto& c : cells) {
        int k;
        is >> k;
        c.resize(static_cast<std::size_t>(k));
        for (int& v : c) is >> v;
      }
      expect_ok();
    } else if (word == "CELL_TYPES") {
      std::size_t n;
      is >> n;
      types.resize(n);
      for (int& t : types) is >> t;
      expect_ok();
    } else if (word == "SCALARS") {
      std::string name, type, lookup, table;
      int comps;
      is >> name >> type >> comps >> lookup >> table;
      std::vector<double> values(cells.size());
      for (double& v : values) is >> v;
      expect_ok();
      if (name == "region" || name == "boundary_marker") {
        std::size_t e = 0;
        for (std::size_t i = 0; i < cells.size(); ++i) {
          if (types[i] == 5 && name == "region") mesh.regions.push_back(static_cast<Region>(static_cast<int>(values[i])));
          if (types[i] == 3 && name == "boundary_marker") {
            mesh.boundary_edges.push_back({{cells[i][0], cells[i][1]}, static_cast<BoundaryMarker>(static_cast<int>(values[i]))});
            ++e;
          }
        }
      }
    } else if (word == "POINT_DATA") {
      break;
    }
  }
  for (std::size_t i = 0; i < cells.size(); ++i)
    if (types.at(i) == 5) mesh.triangles.push_back({cells[i][0], cells[i][1], cells[i][2]});
  if (mesh.regions.size() != mesh.triangles.size()) mesh.regions.assign(mesh.triangles.size(), Region::outside);
  return mesh;
}

namespace {

constexpr std::uint64_t cache_magic = 0x746f706f6d657368ULL;

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
void get(std::istream& is, T& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
}

}  // namespace

void save_mesh_binary(const std::string& path, const Mesh& mesh) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write mesh cache " + path);
  put(os, cache_magic);
  put(os, static_cast<std::uint64_t>(mesh.vertices.size()));
  put(os, static_cast<std::uint64_t>(mesh.triangles.size()));
  put(os, static_cast<std::uint64_t>(mesh.boundary_edges.size()));
  put(os, static_cast<std::uint64_t>(mesh.load_edges.size()));
  put(os, mesh.h_inside);
  put(os, mesh.h_outside);
  for (const Point& p : mesh.vertices) put(os, p);
  for (const auto& t : mesh.triangles) put(os, t);
  for (Region r : mesh.regions) put(os, r);
  for (const auto& e : mesh.boundary_edges) put(os, e);
  for (const auto& e : mesh.load_edges) put(os, e);
  if (!os) throw Error("failed writing mesh cache " + path);
}

std::optional<Mesh> load_mesh_binary(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) return std::nullopt;
  std::uint64_t magic = 0, nv = 0, nt = 0, nb = 0, nl = 0;
  get(is, magic);
  if (magic != cache_magic) return std::nullopt;
  get(is, nv);
  get(is, nt);
  get(is, nb);
  get(is, nl);
  Mesh mesh;
  get(is, mesh.h_inside);
  get(is, mesh.h_outside);
  mesh.vertices.resize(nv);
  mesh.triangles.resize(nt);
  mesh.regions.resize(nt);
  mesh.boundary_edges.resize(nb);
  mesh.load_edges.resize(nl);
  for (auto& p : mesh.vertices) get(is, p);
  for (auto& t : mesh.triangles) get(is, t);
  for (auto& r : mesh.regions) get(is, r);
  for (auto& e : mesh.boundary_edges) get(is, e);
  for (auto& e : mesh.load_edges) get(is, e);
  if (!is) return std::nullopt;
  return mesh;
}

}  // namespace topoforge
