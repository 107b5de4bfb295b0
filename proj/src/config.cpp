#include "fiberkit/config.hpp"

#include "fiberkit/io.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace fiberkit {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& text, double& out) {
  const std::string s = trim(text);
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

// Returns an empty string when the value is acceptable.
using Check = std::function<std::string(double)>;

Check any() {
  return [](double) { return std::string(); };
}
Check positive() {
  return [](double v) { return v > 0 ? std::string() : std::string("must be > 0"); };
}
Check nonneg() {
  return [](double v) { return v >= 0 ? std::string() : std::string("must be >= 0"); };
}
Check closed(double lo, double hi) {
  return [lo, hi](double v) {
    return v >= lo && v <= hi ? std::string()
                              : "must lie in [" + format_double(lo) + ", " + format_double(hi) + "]";
  };
}
Check half_open(double lo, double hi) {
  return [lo, hi](double v) {
    return v > lo && v <= hi ? std::string()
                             : "must lie in (" + format_double(lo) + ", " + format_double(hi) + "]";
  };
}

struct Entry {
  std::string section, key;
  std::function<std::string(Config&, const std::string&)> set;
  std::function<std::string(const Config&)> get;
};

using DoubleRef = std::function<double&(Config&)>;

Entry number(std::string sec, std::string key, DoubleRef ref, Check check, double scale = 1.0) {
  Entry e{std::move(sec), std::move(key), nullptr, nullptr};
  e.set = [ref, check, scale](Config& c, const std::string& v) {
    double x;
    if (!parse_double(v, x)) return "'" + v + "' is not a number";
    std::string err = check(x);
    if (!err.empty()) return "value " + trim(v) + " " + err;
    ref(c) = x * scale;
    return std::string();
  };
  e.get = [ref, scale](const Config& c) { return format_double(ref(const_cast<Config&>(c)) / scale); };
  return e;
}

Entry integer(std::string sec, std::string key, std::function<int&(Config&)> ref, int lo, int hi) {
  Entry e{std::move(sec), std::move(key), nullptr, nullptr};
  e.set = [ref, lo, hi](Config& c, const std::string& v) {
    const std::string s = trim(v);
    int x = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) return "'" + v + "' is not an integer";
    if (x < lo || x > hi)
      return "value " + s + " must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]";
    ref(c) = x;
    return std::string();
  };
  e.get = [ref](const Config& c) { return std::to_string(ref(const_cast<Config&>(c))); };
  return e;
}

std::vector<Entry> build_schema() {
  std::vector<Entry> s;
  const double deg = kPi / 180.0;
  // geometry (m)
  const char* axes[] = {"x", "y", "z"};
  for (int i = 0; i < 3; ++i) {
    s.push_back(number("geometry", std::string("lv_endo_r") + axes[i],
                       [i](Config& c) -> double& { return c.geometry.lv_endo_radii[i]; }, positive()));
  }
  for (int i = 0; i < 3; ++i) {
    s.push_back(number("geometry", std::string("rv_endo_r") + axes[i],
                       [i](Config& c) -> double& { return c.geometry.rv_endo_radii[i]; }, positive()));
  }
  s.push_back(number("geometry", "lv_wall", [](Config& c) -> double& { return c.geometry.lv_wall; }, positive()));
  s.push_back(number("geometry", "rv_wall", [](Config& c) -> double& { return c.geometry.rv_wall; }, positive()));
  s.push_back(number("geometry", "rv_offset", [](Config& c) -> double& { return c.geometry.rv_offset; }, any()));
  s.push_back(number("geometry", "base_height", [](Config& c) -> double& { return c.geometry.base_height; }, any()));
  s.push_back(
      number("geometry", "edge_length", [](Config& c) -> double& { return c.geometry.edge_length; }, positive()));
  s.push_back(
      number("geometry", "apex_radius", [](Config& c) -> double& { return c.geometry.apex_radius; }, positive()));
  // laplace
  s.push_back(number("laplace", "rel_tol", [](Config& c) -> double& { return c.laplace.rel_tol; }, closed(1e-16, 1e-2)));
  s.push_back(number("laplace", "max_iter_factor", [](Config& c) -> double& { return c.laplace.max_iter_factor; },
                     positive()));
  // ldrbm (degrees)
  struct AngleKey {
    const char* name;
    double PrescribedAngles::*field;
    bool gamma;
  };
  const AngleKey angle_keys[] = {
      {"alpha_endo_lv", &PrescribedAngles::alpha_endo_lv, false}, {"alpha_epi_lv", &PrescribedAngles::alpha_epi_lv, false},
      {"alpha_endo_rv", &PrescribedAngles::alpha_endo_rv, false}, {"alpha_epi_rv", &PrescribedAngles::alpha_epi_rv, false},
      {"gamma_endo_lv", &PrescribedAngles::gamma_endo_lv, true},  {"gamma_epi_lv", &PrescribedAngles::gamma_epi_lv, true},
      {"gamma_endo_rv", &PrescribedAngles::gamma_endo_rv, true},  {"gamma_epi_rv", &PrescribedAngles::gamma_epi_rv, true},
  };
  for (const auto& k : angle_keys) {
    auto field = k.field;
    s.push_back(number("ldrbm", k.name, [field](Config& c) -> double& { return c.ldrbm.*field; },
                       k.gamma ? half_open(-90, 90) : half_open(-180, 180), deg));
  }
  s.push_back(number("ldrbm", "bin_width", [](Config& c) -> double& { return c.modal_bin_width_deg; },
                     [](double v) {
                       if (!(v > 0 && v <= 180)) return std::string("must lie in (0, 180]");
                       double k = 180.0 / v;
                       return std::abs(k - std::round(k)) < 1e-9 ? std::string() : std::string("must divide 180");
                     }));
  // fiberfield
  {
    Entry e{"fiberfield", "ell", nullptr, nullptr};
    e.set = [](Config& c, const std::string& v) {
      std::vector<double> out;
      for (const auto& item : split(v, ',')) {
        double x;
        if (!parse_double(item, x)) return "'" + item + "' is not a number";
        if (x < 0) return "length " + item + " must be >= 0";
        out.push_back(x);
      }
      if (out.empty()) return std::string("needs at least one length");
      c.fiber.ells = out;
      return std::string();
    };
    e.get = [](const Config& c) {
      std::string o;
      for (std::size_t i = 0; i < c.fiber.ells.size(); ++i) o += (i ? ", " : "") + format_double(c.fiber.ells[i]);
      return o;
    };
    s.push_back(e);
  }
  s.push_back(number("fiberfield", "alpha_noise_std", [](Config& c) -> double& { return c.fiber.alpha_noise_std_deg; },
                     closed(0, 89)));
  s.push_back(number("fiberfield", "gamma_noise_std", [](Config& c) -> double& { return c.fiber.gamma_noise_std_deg; },
                     closed(0, 89)));
  s.push_back(number("fiberfield", "disorder_fraction", [](Config& c) -> double& { return c.fiber.disorder_fraction; },
                     closed(0, 1)));
  s.push_back(integer("fiberfield", "hist_bins", [](Config& c) -> int& { return c.fiber.hist_bins; }, 1, 3600));
  // eikonal
  s.push_back(number("eikonal", "sigma_f", [](Config& c) -> double& { return c.eikonal.sigma.sigma_f; }, positive()));
  s.push_back(number("eikonal", "sigma_s", [](Config& c) -> double& { return c.eikonal.sigma.sigma_s; }, positive()));
  s.push_back(number("eikonal", "sigma_n", [](Config& c) -> double& { return c.eikonal.sigma.sigma_n; }, positive()));
  s.push_back(number("eikonal", "c0", [](Config& c) -> double& { return c.eikonal.c0; }, positive()));
  s.push_back(number("eikonal", "tolerance", [](Config& c) -> double& { return c.eikonal.tolerance; }, positive()));
  s.push_back(number("eikonal", "isochrone_spacing", [](Config& c) -> double& { return c.eikonal.isochrone_spacing; },
                     positive()));
  {
    Entry e{"eikonal", "stimuli", nullptr, nullptr};
    e.set = [](Config& c, const std::string& v) {
      std::vector<StimulationSite> out;
      for (const auto& item : split(v, ';')) {
        if (item.empty()) continue;
        try {
          out.push_back(parse_stimulus(item));
        } catch (const ValidationError& err) {
          return std::string(err.what());
        }
      }
      if (out.empty()) return std::string("needs at least one site x,y,z,r,t");
      c.eikonal.stimuli = out;
      return std::string();
    };
    e.get = [](const Config& c) {
      std::string o;
      for (std::size_t i = 0; i < c.eikonal.stimuli.size(); ++i) {
        const auto& st = c.eikonal.stimuli[i];
        if (i) o += "; ";
        o += format_double((*st.center)[0]) + "," + format_double((*st.center)[1]) + "," +
             format_double((*st.center)[2]) + "," + format_double(st.radius) + "," + format_double(st.onset);
      }
      return o;
    };
    s.push_back(e);
  }
  // tissue
  struct UsykKey {
    const char* name;
    double UsykParams::*field;
  };
  const UsykKey usyk_keys[] = {{"b_f", &UsykParams::b_f},   {"b_s", &UsykParams::b_s},   {"b_n", &UsykParams::b_n},
                               {"b_fs", &UsykParams::b_fs}, {"b_fn", &UsykParams::b_fn}, {"b_sn", &UsykParams::b_sn},
                               {"c", &UsykParams::c},       {"bulk", &UsykParams::bulk}};
  for (const auto& k : usyk_keys) {
    auto field = k.field;
    s.push_back(number("tissue", k.name, [field](Config& c) -> double& { return c.tissue.usyk.*field; }, positive()));
  }
  s.push_back(number("tissue", "a_xb", [](Config& c) -> double& { return c.tissue.a_xb; }, nonneg()));
  s.push_back(number("tissue", "lv_contractility", [](Config& c) -> double& { return c.tissue.lv_contractility; },
                     nonneg()));
  s.push_back(number("tissue", "rv_contractility", [](Config& c) -> double& { return c.tissue.rv_contractility; },
                     nonneg()));
  const char* sf_names[] = {"m_f", "m_s", "m_n"};
  for (int i = 0; i < 3; ++i)
    s.push_back(number("tissue", sf_names[i], [i](Config& c) -> double& { return c.tissue.stress_factors[i]; },
                       nonneg()));
  {
    Entry e{"tissue", "sf_mode", nullptr, nullptr};
    e.set = [](Config& c, const std::string& v) {
      const std::string t = trim(v);
      if (t == "normalize") c.tissue.sf_passthrough = false;
      else if (t == "passthrough") c.tissue.sf_passthrough = true;
      else return "'" + t + "' is not one of normalize, passthrough";
      return std::string();
    };
    e.get = [](const Config& c) { return std::string(c.tissue.sf_passthrough ? "passthrough" : "normalize"); };
    s.push_back(e);
  }
  // circulation (mL, mmHg, s)
  s.push_back(number("circulation", "period", [](Config& c) -> double& { return c.circ.params.period; }, positive()));
  s.push_back(number("circulation", "dt", [](Config& c) -> double& { return c.circ.params.dt; }, positive()));
  s.push_back(integer("circulation", "beats", [](Config& c) -> int& { return c.circ.beats; }, 1, 100000));
  s.push_back(integer("circulation", "stride", [](Config& c) -> int& { return c.circ.stride; }, 0, 1 << 30));
  struct ChamberKey {
    const char* prefix;
    ElastanceChamber CircParams::*field;
  };
  const ChamberKey chambers[] = {{"la", &CircParams::la}, {"lv", &CircParams::lv}, {"ra", &CircParams::ra},
                                 {"rv", &CircParams::rv}};
  for (const auto& ch : chambers) {
    auto f = ch.field;
    const std::string p = ch.prefix;
    s.push_back(number("circulation", p + "_A", [f](Config& c) -> double& { return (c.circ.params.*f).A; }, nonneg()));
    s.push_back(number("circulation", p + "_B", [f](Config& c) -> double& { return (c.circ.params.*f).B; }, nonneg()));
    s.push_back(number("circulation", p + "_V0", [f](Config& c) -> double& { return (c.circ.params.*f).V0; }, nonneg()));
    s.push_back(number("circulation", p + "_t0", [f](Config& c) -> double& { return (c.circ.params.*f).t0; },
                       closed(0, 1)));
    s.push_back(number("circulation", p + "_contraction",
                       [f](Config& c) -> double& { return (c.circ.params.*f).contraction; }, half_open(0, 1)));
    s.push_back(number("circulation", p + "_relaxation",
                       [f](Config& c) -> double& { return (c.circ.params.*f).relaxation; }, half_open(0, 1)));
  }
  struct RlcKey {
    const char* prefix;
    RLCCompartment CircParams::*field;
  };
  const RlcKey rlcs[] = {{"ars", &CircParams::ars}, {"vens", &CircParams::vens}, {"arp", &CircParams::arp},
                         {"venp", &CircParams::venp}};
  for (const auto& r : rlcs) {
    auto f = r.field;
    const std::string p = r.prefix;
    s.push_back(number("circulation", p + "_R", [f](Config& c) -> double& { return (c.circ.params.*f).R; }, positive()));
    s.push_back(number("circulation", p + "_C", [f](Config& c) -> double& { return (c.circ.params.*f).C; }, positive()));
    s.push_back(number("circulation", p + "_L", [f](Config& c) -> double& { return (c.circ.params.*f).L; }, nonneg()));
    s.push_back(
        number("circulation", p + "_R_up", [f](Config& c) -> double& { return (c.circ.params.*f).R_up; }, nonneg()));
  }
  s.push_back(number("circulation", "valve_R_min", [](Config& c) -> double& { return c.circ.params.valves.R_min; },
                     positive()));
  s.push_back(number("circulation", "valve_R_max", [](Config& c) -> double& { return c.circ.params.valves.R_max; },
                     positive()));
  // run
  {
    Entry e{"run", "seed", nullptr, nullptr};
    e.set = [](Config& c, const std::string& v) {
      const std::string t = trim(v);
      std::uint64_t x = 0;
      auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
      if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
        return "'" + t + "' is not a non-negative integer";
      c.run.seed = x;
      return std::string();
    };
    e.get = [](const Config& c) { return std::to_string(c.run.seed); };
    s.push_back(e);
  }
  {
    Entry e{"run", "output_dir", nullptr, nullptr};
    e.set = [](Config& c, const std::string& v) {
      if (trim(v).empty()) return std::string("must not be empty");
      c.run.output_dir = trim(v);
      return std::string();
    };
    e.get = [](const Config& c) { return c.run.output_dir; };
    s.push_back(e);
  }
  return s;
}

const std::vector<Entry>& schema() {
  static const std::vector<Entry> s = build_schema();
  return s;
}

std::size_t levenshtein(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

void cross_validate(const Config& c, std::vector<std::string>& errors) {
  auto guard = [&](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      errors.push_back(e.what());
    }
  };
  guard([&] { validate(c.geometry); });
  guard([&] { validate(c.ldrbm); });
  guard([&] { c.tissue.usyk.validate(); });
  guard([&] { c.circ.params.validate(); });
  guard([&] {
    if (c.tissue.stress_factors[0] + c.tissue.stress_factors[1] + c.tissue.stress_factors[2] == 0)
      throw ConfigError("tissue: stress factors are all zero");
  });
}

}  // namespace

Config default_config() {
  Config c;
  c.eikonal.stimuli = {parse_stimulus("0,0,-4.4e-3,0.5e-3,0"), parse_stimulus("4.9e-3,0,-1.5e-3,0.5e-3,0.005")};
  return c;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& e : schema()) out.push_back(e.section + "." + e.key);
  return out;
}

std::string nearest_key(const std::string& key, const std::vector<std::string>& candidates) {
  std::string best;
  std::size_t best_d = static_cast<std::size_t>(-1);
  for (const auto& c : candidates) {
    const std::size_t d = levenshtein(key, c);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

Config parse_config_text(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError("config: " + e.message(), static_cast<long>(e.line()));
  }
  Config c = default_config();
  std::vector<std::string> errors;
  std::set<std::string> sections;
  for (const auto& e : schema()) sections.insert(e.section);
  for (const auto& [name, sec] : tree) {
    if (sec.empty() && !sec.data().empty()) {
      errors.push_back("key '" + name + "' appears outside any section");
      continue;
    }
    if (!sections.count(name)) {
      errors.push_back("unknown section [" + name + "] (did you mean [" +
                       nearest_key(name, {sections.begin(), sections.end()}) + "]?)");
      continue;
    }
    std::vector<std::string> keys;
    for (const auto& e : schema())
      if (e.section == name) keys.push_back(e.key);
    for (const auto& [key, val] : sec) {
      auto it = std::find_if(schema().begin(), schema().end(),
                             [&](const Entry& e) { return e.section == name && e.key == key; });
      if (it == schema().end()) {
        errors.push_back("unknown key '" + name + "." + key + "' (did you mean '" + nearest_key(key, keys) + "'?)");
        continue;
      }
      const std::string err = it->set(c, val.data());
      if (!err.empty()) errors.push_back(name + "." + key + ": " + err);
    }
  }
  if (errors.empty()) cross_validate(c, errors);
  if (!errors.empty()) {
    std::string msg = "invalid configuration (" + std::to_string(errors.size()) + " problem" +
                      (errors.size() > 1 ? "s" : "") + "):";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return c;
}

Config load_config(const std::string& path) { return parse_config_text(read_text_file(path)); }

std::string canonical_config(const Config& c) {
  std::string out, section;
  for (const auto& e : schema()) {
    if (e.section == "run" && e.key == "output_dir") continue;  // location does not change results
    if (e.section != section) {
      section = e.section;
      out += "[" + section + "]\n";
    }
    out += e.key + " = " + e.get(c) + "\n";
  }
  return out;
}

std::string config_hash(const Config& c) { return hex64(fnv1a64(canonical_config(c))); }

}  // namespace fiberkit
