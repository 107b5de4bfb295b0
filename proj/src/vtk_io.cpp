#include "fiberkit/io.hpp"
#include "mesh_internal.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fiberkit {

std::string Provenance::line() const {
  return std::string("fiberkit ") + version() + " config=" + config_hash + " seed=" + std::to_string(seed);
}

std::string format_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

const DataArray* MeshFile::find_point(const std::string& name) const {
  for (const auto& a : point_data)
    if (a.name == name) return &a;
  return nullptr;
}

void MeshFile::set_point(DataArray a) {
  for (auto& b : point_data)
    if (b.name == a.name) {
      b = std::move(a);
      return;
    }
  point_data.push_back(std::move(a));
}

void MeshFile::set_point_scalar(const std::string& name, const ScalarField& v) {
  set_point(DataArray{name, 1, v, false});
}

void MeshFile::set_point_vector(const std::string& name, const VectorField& v) {
  DataArray a{name, 3, {}, false};
  a.values.reserve(3 * v.size());
  for (const auto& x : v) a.values.insert(a.values.end(), {x.x(), x.y(), x.z()});
  set_point(std::move(a));
}

void MeshFile::set_cell_scalar(const std::string& name, const ScalarField& v) {
  for (auto& b : cell_data)
    if (b.name == name) {
      b.values = v;
      return;
    }
  cell_data.push_back(DataArray{name, 1, v, false});
}

ScalarField MeshFile::point_scalar(const std::string& name) const {
  const DataArray* a = find_point(name);
  if (!a) throw ValidationError("mesh file has no point array '" + name + "'");
  if (a->components != 1 || a->values.size() != mesh.num_nodes())
    throw ValidationError("point array '" + name + "' is not a nodal scalar field");
  return a->values;
}

VectorField MeshFile::point_vector(const std::string& name) const {
  const DataArray* a = find_point(name);
  if (!a) throw ValidationError("mesh file has no point array '" + name + "'");
  if (a->components != 3 || a->values.size() != 3 * mesh.num_nodes())
    throw ValidationError("point array '" + name + "' is not a nodal vector field");
  VectorField out(mesh.num_nodes());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = Vec3(a->values[3 * i], a->values[3 * i + 1], a->values[3 * i + 2]);
  return out;
}

namespace {

class Tokens {
 public:
  Tokens(const std::string& text, std::size_t pos, long line) : s_(text), pos_(pos), line_(line) {}

  bool done() {
    skip();
    return pos_ >= s_.size();
  }
  long line() const { return line_; }
  // Line of the next token.
  long next_line() {
    skip();
    return line_;
  }

  std::string word() {
    skip();
    if (pos_ >= s_.size()) throw ParseError("unexpected end of file", line_);
    std::size_t b = pos_;
    while (pos_ < s_.size() && !std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    return s_.substr(b, pos_ - b);
  }
  std::string rest_of_line() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
    std::size_t b = pos_;
    while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
    return s_.substr(b, pos_ - b);
  }
  double number() {
    skip();
    long ln = line_;
    std::string w = word();
    double v;
    auto r = std::from_chars(w.data(), w.data() + w.size(), v);
    if (r.ec != std::errc() || r.ptr != w.data() + w.size()) throw ParseError("expected a number, got '" + w + "'", ln);
    return v;
  }
  long integer() {
    skip();
    long ln = line_;
    std::string w = word();
    long v;
    auto r = std::from_chars(w.data(), w.data() + w.size(), v);
    if (r.ec != std::errc() || r.ptr != w.data() + w.size()) throw ParseError("expected an integer, got '" + w + "'", ln);
    return v;
  }

 private:
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) {
      if (s_[pos_] == '\n') ++line_;
      ++pos_;
    }
  }
  const std::string& s_;
  std::size_t pos_;
  long line_;
};

std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

bool is_int_type(const std::string& t) {
  auto u = upper(t);
  return u == "INT" || u == "LONG" || u == "SHORT" || u == "UNSIGNED_INT" || u == "UNSIGNED_LONG" ||
         u == "CHAR" || u == "UNSIGNED_CHAR" || u == "VTKIDTYPE";
}

DataArray read_values(Tokens& tk, const std::string& name, int comps, std::size_t tuples, const std::string& type) {
  DataArray a{name, comps, {}, is_int_type(type)};
  a.values.resize(static_cast<std::size_t>(comps) * tuples);
  for (auto& v : a.values) v = tk.number();
  return a;
}

// Reads SCALARS / VECTORS / FIELD blocks until the next top-level keyword.
void read_attribute_block(Tokens& tk, std::size_t count, std::vector<DataArray>& out, std::string& next) {
  next.clear();
  while (!tk.done()) {
    long ln = tk.line();
    std::string kw = upper(tk.word());
    if (kw == "SCALARS") {
      std::string name = tk.word();
      std::string type = tk.word();
      std::string extra = tk.rest_of_line();
      int comps = 1;
      if (!extra.empty()) {
        try {
          comps = std::stoi(extra);
        } catch (...) {
          throw ParseError("bad SCALARS component count", ln);
        }
      }
      if (upper(tk.word()) != "LOOKUP_TABLE") throw ParseError("expected LOOKUP_TABLE after SCALARS", ln + 1);
      tk.word();
      out.push_back(read_values(tk, name, comps, count, type));
    } else if (kw == "VECTORS" || kw == "NORMALS") {
      std::string name = tk.word();
      std::string type = tk.word();
      out.push_back(read_values(tk, name, 3, count, type));
    } else if (kw == "FIELD") {
      tk.word();
      long n = tk.integer();
      for (long i = 0; i < n; ++i) {
        std::string name = tk.word();
        long comps = tk.integer();
        long tuples = tk.integer();
        std::string type = tk.word();
        if (static_cast<std::size_t>(tuples) != count) throw ParseError("field array '" + name + "' has wrong tuple count", ln);
        out.push_back(read_values(tk, name, static_cast<int>(comps), count, type));
      }
    } else {
      next = kw;
      return;
    }
  }
}

}  // namespace

MeshFile parse_mesh_text(const std::string& text, std::vector<std::string>* warnings) {
  MeshFile f;
  std::istringstream head(text);
  std::string l1, l2, l3;
  std::getline(head, l1);
  std::getline(head, l2);
  std::getline(head, l3);
  if (l1.rfind("# vtk DataFile", 0) != 0) throw ParseError("missing '# vtk DataFile' header", 1);
  f.title = l2;
  if (!l3.empty() && l3.back() == '\r') l3.pop_back();
  if (upper(l3) != "ASCII") throw ParseError("only ASCII legacy files are supported", 3);
  std::size_t pos = static_cast<std::size_t>(head.tellg());
  if (head.fail()) throw ParseError("truncated header", 3);
  Tokens tk(text, pos, 4);

  if (upper(tk.word()) != "DATASET" || upper(tk.word()) != "UNSTRUCTURED_GRID")
    throw ParseError("expected DATASET UNSTRUCTURED_GRID", tk.line());

  std::vector<std::array<long, 4>> facet_rows;
  std::vector<long> facet_lines;
  std::vector<long> cell_types;
  std::vector<long> cell_lines;
  std::vector<std::vector<long>> cells;
  bool have_points = false, have_cells = false;
  std::string pending;
  while (!pending.empty() || !tk.done()) {
    long ln = pending.empty() ? tk.next_line() : tk.line();
    std::string kw = pending.empty() ? upper(tk.word()) : pending;
    pending.clear();
    if (kw == "FIELD") {
      tk.word();
      long n = tk.integer();
      for (long i = 0; i < n; ++i) {
        std::string name = tk.word();
        long comps = tk.integer();
        long tuples = tk.integer();
        tk.word();
        if (name == "surface_labels") {
          if (comps != 4) throw ParseError("surface_labels must have 4 components", ln);
          for (long t = 0; t < tuples; ++t) {
            facet_lines.push_back(tk.next_line());
            std::array<long, 4> r;
            for (auto& x : r) x = tk.integer();
            facet_rows.push_back(r);
          }
        } else {
          for (long t = 0; t < comps * tuples; ++t) tk.number();
        }
      }
    } else if (kw == "POINTS") {
      long n = tk.integer();
      tk.word();
      if (n < 0) throw ParseError("negative point count", ln);
      f.mesh.nodes.resize(n);
      for (auto& p : f.mesh.nodes) {
        double x = tk.number(), y = tk.number(), z = tk.number();
        p = Vec3(x, y, z);
      }
      have_points = true;
    } else if (kw == "CELLS") {
      long n = tk.integer();
      tk.integer();
      if (n < 0) throw ParseError("negative cell count", ln);
      cells.resize(n);
      cell_lines.resize(n);
      for (long ci = 0; ci < n; ++ci) {
        auto& c = cells[ci];
        long k = tk.integer();
        cell_lines[ci] = tk.line();
        if (k < 0 || k > 64) throw ParseError("bad cell size", tk.line());
        c.resize(k);
        for (auto& v : c) v = tk.integer();
      }
      have_cells = true;
    } else if (kw == "CELL_TYPES") {
      long n = tk.integer();
      cell_types.resize(n);
      for (auto& t : cell_types) t = tk.integer();
    } else if (kw == "CELL_DATA") {
      long n = tk.integer();
      std::vector<DataArray> arrays;
      read_attribute_block(tk, static_cast<std::size_t>(n), arrays, pending);
      for (auto& a : arrays) {
        if (a.name == "region") {
          f.mesh.regions.resize(a.values.size());
          for (std::size_t i = 0; i < a.values.size(); ++i) {
            if (a.values[i] != 0.0 && a.values[i] != 1.0)
              throw ValidationError("unknown region label " + format_double(a.values[i]) + " on cell " + std::to_string(i));
            f.mesh.regions[i] = a.values[i] == 0.0 ? RegionLabel::LV : RegionLabel::RV;
          }
        } else {
          f.cell_data.push_back(std::move(a));
        }
      }
    } else if (kw == "POINT_DATA") {
      long n = tk.integer();
      read_attribute_block(tk, static_cast<std::size_t>(n), f.point_data, pending);
    } else {
      throw ParseError("unexpected keyword '" + kw + "'", ln);
    }
  }
  if (!have_points || !have_cells) throw ParseError("file lacks POINTS or CELLS", tk.line());
  if (!cell_types.empty() && cell_types.size() != cells.size()) throw ParseError("CELL_TYPES count mismatch", tk.line());

  const long nn = static_cast<long>(f.mesh.nodes.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    if ((!cell_types.empty() && cell_types[c] != 10) || cells[c].size() != 4)
      throw ParseError("cell " + std::to_string(c) + " is not a tetrahedron", cell_lines[c]);
    std::array<int, 4> t;
    for (int a = 0; a < 4; ++a) {
      if (cells[c][a] < 0 || cells[c][a] >= nn)
        throw ParseError("cell " + std::to_string(c) + " references node " + std::to_string(cells[c][a]) +
                             " but there are " + std::to_string(nn) + " nodes", cell_lines[c]);
      t[a] = static_cast<int>(cells[c][a]);
    }
    double v = signed_volume(f.mesh.nodes[t[0]], f.mesh.nodes[t[1]], f.mesh.nodes[t[2]], f.mesh.nodes[t[3]]);
    if (v == 0.0) throw ValidationError("cell " + std::to_string(c) + " is degenerate (zero volume)");
    if (v < 0.0) {
      std::swap(t[2], t[3]);
      if (warnings) warnings->push_back("cell " + std::to_string(c) + " was negatively oriented; repaired by vertex swap");
    }
    f.mesh.tets.push_back(t);
  }
  if (f.mesh.regions.empty()) f.mesh.regions.assign(f.mesh.tets.size(), RegionLabel::LV);
  if (f.mesh.regions.size() != f.mesh.tets.size()) throw ParseError("region array length mismatch", tk.line());

  for (std::size_t i = 0; i < facet_rows.size(); ++i) {
    const auto& r = facet_rows[i];
    BoundaryFacet bf;
    for (int a = 0; a < 3; ++a) {
      if (r[a] < 0 || r[a] >= nn)
        throw ParseError("facet references node " + std::to_string(r[a]) + " but there are " + std::to_string(nn) +
                             " nodes", facet_lines[i]);
      bf.nodes[a] = static_cast<int>(r[a]);
    }
    auto lab = surface_label_from_int(static_cast<int>(r[3]));
    if (!lab) throw ValidationError("unknown surface label " + std::to_string(r[3]) + " (line " + std::to_string(facet_lines[i]) + ")");
    bf.label = *lab;
    f.mesh.facets.push_back(bf);
  }

  // Facets are stored with outward winding; flip any that disagree with their owning tet.
  auto bnd = detail::boundary_faces(f.mesh);
  for (auto& bf : f.mesh.facets) {
    auto key = bf.nodes;
    std::sort(key.begin(), key.end());
    auto it = std::lower_bound(bnd.begin(), bnd.end(), key,
                               [](const detail::FaceRecord& a, const std::array<int, 3>& k) { return a.key < k; });
    if (it == bnd.end() || it->key != key) continue;  // validate_mesh reports this
    const auto& w = it->winding;
    bool same = false;
    for (int s = 0; s < 3; ++s)
      if (bf.nodes[0] == w[s] && bf.nodes[1] == w[(s + 1) % 3]) same = true;
    if (!same) std::swap(bf.nodes[1], bf.nodes[2]);
  }
  validate_mesh(f.mesh);
  for (const auto& a : f.point_data)
    if (a.tuples() != f.mesh.num_nodes()) throw ValidationError("point array '" + a.name + "' has wrong length");
  return f;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

MeshFile read_mesh_file(const std::string& path, std::vector<std::string>* warnings) {
  std::string text = read_text_file(path);
  try {
    return parse_mesh_text(text, warnings);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), 0);
  }
}

std::string mesh_to_text(const MeshFile& f) {
  const TetMesh& m = f.mesh;
  std::string s;
  s.reserve(64 * (m.nodes.size() + m.tets.size() + m.facets.size()));
  auto nl = [&] { s += '\n'; };
  s += "# vtk DataFile Version 3.0\n";
  std::string title = f.title;
  std::replace(title.begin(), title.end(), '\n', ' ');
  s += title;
  nl();
  s += "ASCII\nDATASET UNSTRUCTURED_GRID\n";
  s += "FIELD FieldData 1\nsurface_labels 4 " + std::to_string(m.facets.size()) + " int\n";
  for (const auto& bf : m.facets) {
    s += std::to_string(bf.nodes[0]) + ' ' + std::to_string(bf.nodes[1]) + ' ' + std::to_string(bf.nodes[2]) + ' ' +
         std::to_string(static_cast<int>(bf.label));
    nl();
  }
  s += "POINTS " + std::to_string(m.nodes.size()) + " double\n";
  for (const auto& p : m.nodes) {
    s += format_double(p.x()) + ' ' + format_double(p.y()) + ' ' + format_double(p.z());
    nl();
  }
  s += "CELLS " + std::to_string(m.tets.size()) + ' ' + std::to_string(5 * m.tets.size()) + '\n';
  for (const auto& t : m.tets) {
    s += "4 " + std::to_string(t[0]) + ' ' + std::to_string(t[1]) + ' ' + std::to_string(t[2]) + ' ' + std::to_string(t[3]);
    nl();
  }
  s += "CELL_TYPES " + std::to_string(m.tets.size()) + '\n';
  for (std::size_t i = 0; i < m.tets.size(); ++i) s += "10\n";

  auto write_array = [&](const DataArray& a) {
    const char* type = a.integer ? "int" : "double";
    if (a.components == 3 && !a.integer) {
      s += "VECTORS " + a.name + " double\n";
    } else {
      s += "SCALARS " + a.name + ' ' + type + (a.components == 1 ? std::string() : ' ' + std::to_string(a.components));
      s += "\nLOOKUP_TABLE default\n";
    }
    for (std::size_t i = 0; i < a.tuples(); ++i) {
      for (int c = 0; c < a.components; ++c) {
        if (c) s += ' ';
        double v = a.values[i * a.components + c];
        s += a.integer ? std::to_string(static_cast<long long>(v)) : format_double(v);
      }
      nl();
    }
  };
  s += "CELL_DATA " + std::to_string(m.tets.size()) + '\n';
  DataArray region{"region", 1, {}, true};
  for (auto r : m.regions) region.values.push_back(static_cast<int>(r));
  write_array(region);
  for (const auto& a : f.cell_data) write_array(a);
  if (!f.point_data.empty()) {
    s += "POINT_DATA " + std::to_string(m.nodes.size()) + '\n';
    for (const auto& a : f.point_data) write_array(a);
  }
  return s;
}

void write_text_file(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
  }
  std::string tmp = path + ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
      out.close();
      std::remove(tmp.c_str());
      throw IoError("write failed for '" + path + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, p, ec);
  if (ec) {
    std::remove(tmp.c_str());
    throw IoError("cannot move output into place at '" + path + "': " + ec.message());
  }
}

void write_mesh_file(const MeshFile& f, const std::string& path) { write_text_file(path, mesh_to_text(f)); }

TetMesh read_mesh(const std::string& path, std::vector<std::string>* warnings) {
  return read_mesh_file(path, warnings).mesh;
}

void write_mesh(const TetMesh& m, const std::string& path, const std::string& title) {
  MeshFile f;
  f.mesh = m;
  f.title = title;
  write_mesh_file(f, path);
}

CsvWriter::CsvWriter(const Provenance& prov, std::vector<std::string> columns) {
  buf_ = "# " + prov.line() + '\n';
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) buf_ += ',';
    buf_ += columns[i];
  }
}

void CsvWriter::comment(const std::string& text) {
  buf_ += "\n# " + text;
}

CsvWriter& CsvWriter::row() {
  buf_ += '\n';
  first_ = true;
  return *this;
}

CsvWriter& CsvWriter::add(double v) {
  if (!first_) buf_ += ',';
  buf_ += format_double(v);
  first_ = false;
  return *this;
}

CsvWriter& CsvWriter::add(long long v) {
  if (!first_) buf_ += ',';
  buf_ += std::to_string(v);
  first_ = false;
  return *this;
}

CsvWriter& CsvWriter::add(const std::string& s) {
  if (!first_) buf_ += ',';
  buf_ += s;
  first_ = false;
  return *this;
}

}  // namespace fiberkit
