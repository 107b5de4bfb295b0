#pragma once

#include "fiberkit/mesh.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fiberkit {

struct Provenance {
  std::string config_hash = "none";
  std::uint64_t seed = 0;
  std::string line() const;  // "fiberkit <version> config=<hash> seed=<seed>"
};

struct DataArray {
  std::string name;
  int components = 1;
  std::vector<double> values;
  bool integer = false;

  std::size_t tuples() const { return components > 0 ? values.size() / components : 0; }
};

struct MeshFile {
  TetMesh mesh;
  std::string title;
  std::vector<DataArray> point_data;
  std::vector<DataArray> cell_data;  // region is carried by mesh.regions

  const DataArray* find_point(const std::string& name) const;
  void set_point(DataArray a);  // replaces an existing array of the same name
  void set_point_scalar(const std::string& name, const ScalarField& v);
  void set_point_vector(const std::string& name, const VectorField& v);
  void set_cell_scalar(const std::string& name, const ScalarField& v);

  // Throw ValidationError naming the array if missing or mis-shaped.
  ScalarField point_scalar(const std::string& name) const;
  VectorField point_vector(const std::string& name) const;
};

// Shortest decimal representation that round-trips exactly.
std::string format_double(double v);

MeshFile read_mesh_file(const std::string& path, std::vector<std::string>* warnings = nullptr);
MeshFile parse_mesh_text(const std::string& text, std::vector<std::string>* warnings = nullptr);
std::string mesh_to_text(const MeshFile& f);
void write_mesh_file(const MeshFile& f, const std::string& path);

TetMesh read_mesh(const std::string& path, std::vector<std::string>* warnings = nullptr);
void write_mesh(const TetMesh& m, const std::string& path, const std::string& title = "fiberkit mesh");

// Writes via a temporary sibling and rename so readers never see a partial file.
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

// Minimal CSV builder with a provenance comment line.
class CsvWriter {
 public:
  CsvWriter(const Provenance& prov, std::vector<std::string> columns);
  void comment(const std::string& text);
  CsvWriter& row();
  CsvWriter& add(double v);
  CsvWriter& add(long long v);
  CsvWriter& add(int v) { return add(static_cast<long long>(v)); }
  CsvWriter& add(const std::string& s);
  CsvWriter& add(const char* s) { return add(std::string(s)); }
  const std::string& str() const { return buf_; }
  void save(const std::string& path) const { write_text_file(path, buf_ + '\n'); }

 private:
  std::string buf_;
  bool first_ = true;
};

}  // namespace fiberkit
