#include "footfit/mesh_io.hpp"

#include "footfit/error.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

namespace footfit {

namespace {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

int parse_obj_index(const std::string& token, std::size_t vertex_count, const std::filesystem::path& path) {
  const std::string head = token.substr(0, token.find('/'));
  long idx = 0;
  try {
    idx = std::stol(head);
  } catch (const std::exception&) {
    throw IoError(path.string() + ": bad face index '" + token + "'");
  }
  if (idx < 0) idx = static_cast<long>(vertex_count) + idx + 1;  // relative indices
  if (idx < 1 || idx > static_cast<long>(vertex_count)) {
    throw IoError(path.string() + ": face index " + token + " out of range");
  }
  return static_cast<int>(idx - 1);
}

template <class T>
void write_raw(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_raw(std::istream& is, const std::filesystem::path& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw IoError(path.string() + ": truncated PLY body");
  return v;
}

}  // namespace

Mesh read_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Mesh mesh;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Vec3 p;
      if (!(ls >> p.x() >> p.y() >> p.z())) throw IoError(path.string() + ": malformed vertex line");
      mesh.vertices.push_back(p);
    } else if (tag == "f") {
      std::vector<std::string> tokens;
      std::string tok;
      while (ls >> tok) tokens.push_back(tok);
      if (tokens.size() != 3) {
        throw IoError(path.string() + ": only triangular faces are supported (got " +
                      std::to_string(tokens.size()) + " vertices)");
      }
      Face f;
      for (int k = 0; k < 3; ++k) f[k] = parse_obj_index(tokens[k], mesh.vertices.size(), path);
      mesh.faces.push_back(f);
    }
  }
  return mesh;
}

void write_obj(const std::filesystem::path& path, const Mesh& mesh) {
  std::FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) throw IoError("cannot write " + path.string());
  for (const Vec3& v : mesh.vertices) std::fprintf(fp, "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
  for (const Face& f : mesh.faces) std::fprintf(fp, "f %d %d %d\n", f[0] + 1, f[1] + 1, f[2] + 1);
  const bool ok = std::ferror(fp) == 0;
  std::fclose(fp);
  if (!ok) throw IoError("error writing " + path.string());
}

Mesh read_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "ply") throw IoError(path.string() + ": missing 'ply' magic");
  std::size_t nv = 0, nf = 0;
  bool binary_le = false;
  std::vector<std::string> vprops;
  std::string current;
  std::string face_list;
  while (std::getline(in, line)) {
    if (line == "end_header") break;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "format") {
      std::string fmt;
      ls >> fmt;
      binary_le = fmt == "binary_little_endian";
    } else if (tag == "element") {
      std::size_t n = 0;
      ls >> current >> n;
      if (current == "vertex") nv = n;
      if (current == "face") nf = n;
    } else if (tag == "property" && current == "vertex") {
      std::string type, name;
      ls >> type >> name;
      if (type != "double" && type != "float64") {
        throw IoError(path.string() + ": vertex property '" + name + "' must be float64");
      }
      vprops.push_back(name);
    } else if (tag == "property" && current == "face") {
      face_list = line;
    }
  }
  if (!binary_le) throw IoError(path.string() + ": only binary_little_endian PLY is supported");
  if (vprops.size() < 3 || vprops[0] != "x" || vprops[1] != "y" || vprops[2] != "z") {
    throw IoError(path.string() + ": expected vertex properties x, y, z");
  }
  if (nf > 0 && face_list.find("list uchar int") == std::string::npos &&
      face_list.find("list uint8 int32") == std::string::npos) {
    throw IoError(path.string() + ": expected 'property list uchar int vertex_indices'");
  }
  Mesh mesh;
  mesh.vertices.resize(nv);
  for (std::size_t i = 0; i < nv; ++i) {
    std::vector<double> props(vprops.size());
    for (auto& p : props) p = read_raw<double>(in, path);
    mesh.vertices[i] = Vec3(props[0], props[1], props[2]);
  }
  mesh.faces.resize(nf);
  for (std::size_t i = 0; i < nf; ++i) {
    const auto count = read_raw<std::uint8_t>(in, path);
    if (count != 3) throw IoError(path.string() + ": only triangular faces are supported");
    for (int k = 0; k < 3; ++k) {
      const auto idx = read_raw<std::int32_t>(in, path);
      if (idx < 0 || static_cast<std::size_t>(idx) >= nv) throw IoError(path.string() + ": face index out of range");
      mesh.faces[i][k] = idx;
    }
  }
  return mesh;
}

void write_ply(const std::filesystem::path& path, const Mesh& mesh) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << mesh.vertices.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n"
      << "element face " << mesh.faces.size() << "\n"
      << "property list uchar int vertex_indices\nend_header\n";
  for (const Vec3& v : mesh.vertices) {
    write_raw(out, v.x());
    write_raw(out, v.y());
    write_raw(out, v.z());
  }
  for (const Face& f : mesh.faces) {
    write_raw<std::uint8_t>(out, 3);
    for (int k = 0; k < 3; ++k) write_raw<std::int32_t>(out, f[k]);
  }
  if (!out) throw IoError("error writing " + path.string());
}

Mesh read_mesh(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".obj") return read_obj(path);
  if (ext == ".ply") return read_ply(path);
  throw IoError(path.string() + ": unsupported mesh extension '" + ext + "'");
}

void write_mesh(const std::filesystem::path& path, const Mesh& mesh) {
  const auto ext = path.extension().string();
  if (ext == ".obj") return write_obj(path, mesh);
  if (ext == ".ply") return write_ply(path, mesh);
  throw IoError(path.string() + ": unsupported mesh extension '" + ext + "'");
}

}  // namespace footfit
