#pragma once

#include "fiberkit/config.hpp"
#include "fiberkit/io.hpp"

#include <string>
#include <vector>

namespace fiberkit {

// Collects every file a command writes so a failing command can remove its outputs.
class OutputSet {
 public:
  void text(const std::string& path, const std::string& content);
  void mesh(const MeshFile& f, const std::string& path);
  void csv(const CsvWriter& w, const std::string& path);
  void remove_all() noexcept;
  const std::vector<std::string>& paths() const { return paths_; }

 private:
  std::vector<std::string> paths_;
};

struct PipelineSummary {
  std::size_t nodes = 0, tets = 0;
  double eps_alpha_std_deg = 0, eps_gamma_std_deg = 0;  // at the reference length
  double activation_max_s = 0;
  double lv_ef = 0;
};

// mesh -> laplace -> frames -> ldrbm -> synthetic disarray -> smoothing sweep -> angle statistics
// -> eikonal -> circulation. All artifacts go to `dir`.
PipelineSummary run_pipeline(const Config& cfg, const std::string& dir, const Provenance& prov, OutputSet& out);

// Entry point of the command-line tool; returns the process exit status.
int run_cli(int argc, char** argv);

}  // namespace fiberkit
