#include "bcsr/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bcsr/errors.hpp"

namespace bcsr {
namespace {

using nlohmann::json;

// Object view that remembers which keys were read so leftovers can be
// reported as typos.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "$" : path_, "expected an object");
  }

  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }
  const json& at(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError(child(key), "required field is missing");
    return j_.at(key);
  }

  template <typename T>
  T get(const std::string& key) {
    const json& v = at(key);
    try {
      return v.get<T>();
    } catch (const json::exception&) {
      throw ConfigError(child(key), "has the wrong type");
    }
  }
  template <typename T>
  void opt(const std::string& key, T* out) {
    if (has(key)) *out = get<T>(key);
  }
  double positive(const std::string& key, double fallback) {
    const double v = has(key) ? number(key) : fallback;
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(child(key), "must be finite and positive");
    return v;
  }
  double number(const std::string& key) {
    const json& v = at(key);
    if (!v.is_number()) throw ConfigError(child(key), "must be a number");
    return v.get<double>();
  }
  int integer(const std::string& key, int fallback, int min) {
    int v = fallback;
    if (has(key)) {
      const json& j = at(key);
      if (!j.is_number_integer()) throw ConfigError(child(key), "must be an integer");
      v = j.get<int>();
    }
    if (v < min) throw ConfigError(child(key), "must be at least " + std::to_string(min));
    return v;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(child(key), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

MeshSpec parse_mesh(const json& j, const std::string& path, const std::filesystem::path& base) {
  Reader r(j, path);
  const std::string type = r.get<std::string>("type");
  if (type == "disk") {
    DiskMeshSpec s;
    if (r.has("radius")) s.radius = r.positive("radius", 1.0);
    s.rings = r.integer("rings", s.rings, 1);
    s.electrodes = r.integer("electrodes", s.electrodes, 2);
    s.coverage = r.positive("coverage", s.coverage);
    s.contact_impedance = r.positive("contact_impedance", s.contact_impedance);
    if (s.coverage >= 1.0) throw ConfigError(r.child("coverage"), "must be below 1");
    r.finish();
    return s;
  }
  if (type == "cylinder") {
    CylinderMeshSpec s;
    if (r.has("radius")) s.radius = r.positive("radius", 1.0);
    if (r.has("height")) s.height = r.positive("height", 1.0);
    s.layers = r.integer("layers", s.layers, 1);
    s.radial_rings = r.integer("radial_rings", s.radial_rings, 1);
    if (r.has("electrode_rings")) s.electrode_rings = r.integer("electrode_rings", 1, 1);
    s.electrodes_per_ring = r.integer("electrodes_per_ring", s.electrodes_per_ring, 2);
    s.coverage = r.positive("coverage", s.coverage);
    s.contact_impedance = r.positive("contact_impedance", s.contact_impedance);
    if (s.coverage >= 1.0) throw ConfigError(r.child("coverage"), "must be below 1");
    r.finish();
    return s;
  }
  if (type == "file") {
    FileMeshSpec s;
    s.path = resolve(base, r.get<std::string>("path"));
    if (!std::filesystem::exists(s.path)) throw ConfigError(r.child("path"), "file not found: " + s.path.string());
    if (r.has("format")) {
      try {
        s.format = parse_mesh_format(r.get<std::string>("format"));
      } catch (const InputError& e) {
        throw ConfigError(r.child("format"), e.what());
      }
    } else {
      s.format = s.path.extension() == ".msh" ? MeshFormat::gmsh_msh2 : MeshFormat::native_json;
    }
    s.contact_impedance = r.positive("contact_impedance", s.contact_impedance);
    r.finish();
    return s;
  }
  throw ConfigError(r.child("type"), "must be \"disk\", \"cylinder\" or \"file\"");
}

ProtocolSpec parse_protocol(const json& j, const std::string& path) {
  Reader r(j, path);
  ProtocolSpec s;
  r.opt("type", &s.type);
  if (s.type != "adjacent" && s.type != "tank") throw ConfigError(r.child("type"), "must be \"adjacent\" or \"tank\"");
  r.opt("skip_driven", &s.skip_driven);
  r.opt("drop_reciprocal", &s.drop_reciprocal);
  r.opt("terminals", &s.terminals);
  s.amplitude = r.positive("amplitude", s.amplitude);
  r.finish();
  return s;
}

double parse_snr(const json& v, const std::string& path) {
  if (v.is_string() && v.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
  if (!v.is_number()) throw ConfigError(path, "must be a number or \"inf\"");
  const double s = v.get<double>();
  if (!std::isfinite(s)) throw ConfigError(path, "must be finite or \"inf\"");
  return s;
}

}  // namespace

ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("$", std::string("invalid JSON: ") + e.what());
  }
  Reader r(root, "");
  ExperimentConfig c;
  if (r.has("case")) {
    c.case_id = r.get<std::string>("case");
    try {
      (void)case_library(*c.case_id);
    } catch (const InputError& e) {
      throw ConfigError("case", e.what());
    }
  }
  if (r.has("dataset")) {
    c.dataset = resolve(base_dir, r.get<std::string>("dataset"));
    if (!std::filesystem::exists(*c.dataset)) throw ConfigError("dataset", "file not found: " + c.dataset->string());
  }
  if (!c.case_id && !c.dataset) throw ConfigError("case", "either 'case' or 'dataset' is required");

  if (r.has("sim_mesh")) c.sim_mesh = parse_mesh(r.at("sim_mesh"), "sim_mesh", base_dir);
  if (r.has("recon_mesh")) c.recon_mesh = parse_mesh(r.at("recon_mesh"), "recon_mesh", base_dir);
  if (r.has("protocol")) c.protocol = parse_protocol(r.at("protocol"), "protocol");

  if (r.has("bounds")) {
    const json& b = r.at("bounds");
    if (b.is_string()) {
      c.bounds_preset = b.get<std::string>();
      if (c.bounds_preset != "fine" && c.bounds_preset != "coarse") {
        throw ConfigError("bounds", "must be \"fine\", \"coarse\" or [lower, upper]");
      }
    } else if (b.is_array() && b.size() == 2 && b[0].is_number() && b[1].is_number()) {
      c.bounds = std::array<double, 2>{b[0].get<double>(), b[1].get<double>()};
      if (!((*c.bounds)[0] > 0.0 && (*c.bounds)[0] < (*c.bounds)[1])) {
        throw ConfigError("bounds", "need 0 < lower < upper");
      }
    } else {
      throw ConfigError("bounds", "must be \"fine\", \"coarse\" or [lower, upper]");
    }
  }
  if (!c.case_id && !c.bounds) throw ConfigError("bounds", "explicit bounds are required without a case");

  if (r.has("scale_rule")) {
    try {
      c.scale_rule = parse_scale_rule(r.get<std::string>("scale_rule"));
    } catch (const InputError& e) {
      throw ConfigError("scale_rule", e.what());
    }
  }

  if (r.has("n_b")) {
    const json& nb = r.at("n_b");
    auto one = [](const json& v, const std::string& path) {
      if (!v.is_number_integer() || v.get<long long>() < 1) throw ConfigError(path, "must be a positive integer");
      return static_cast<Index>(v.get<long long>());
    };
    if (nb.is_array()) {
      if (nb.empty()) throw ConfigError("n_b", "must not be empty");
      for (std::size_t i = 0; i < nb.size(); ++i) c.n_b.push_back(one(nb[i], "n_b[" + std::to_string(i) + "]"));
    } else {
      c.n_b.push_back(one(nb, "n_b"));
    }
  }
  if (r.has("truncation")) {
    const auto t = r.get<std::string>("truncation");
    if (t == "tank") {
      c.truncation = TruncationRegime::tank;
    } else if (t == "simulation") {
      c.truncation = TruncationRegime::simulation;
    } else {
      throw ConfigError("truncation", "must be \"tank\" or \"simulation\"");
    }
  }

  if (r.has("lmf")) {
    Reader l(r.at("lmf"), "lmf");
    c.lmf.mu0 = l.positive("mu0", c.lmf.mu0);
    c.lmf.gamma1 = l.positive("gamma1", c.lmf.gamma1);
    c.lmf.gamma2 = l.positive("gamma2", c.lmf.gamma2);
    c.lmf.rho1 = l.positive("rho1", c.lmf.rho1);
    c.lmf.rho2 = l.positive("rho2", c.lmf.rho2);
    c.lmf.max_iter = l.integer("max_iter", c.lmf.max_iter, 1);
    if (l.has("eps")) c.lmf.eps = l.positive("eps", 1.0);
    c.lmf.max_inner = l.integer("max_inner", c.lmf.max_inner, 1);
    l.finish();
    try {
      c.lmf.validate();
    } catch (const InputError& e) {
      throw ConfigError("lmf", e.what());
    }
  }

  if (r.has("tv")) {
    Reader t(r.at("tv"), "tv");
    if (t.has("enabled")) {
      const json& e = t.at("enabled");
      if (e.is_boolean()) {
        c.tv_mode = e.get<bool>() ? TVMode::on : TVMode::off;
      } else if (e.is_string() && e.get<std::string>() == "auto") {
        c.tv_mode = TVMode::automatic;
      } else {
        throw ConfigError("tv.enabled", "must be true, false or \"auto\"");
      }
    }
    if (t.has("lambda0")) {
      const double l0 = t.number("lambda0");
      if (!(l0 >= 0.0) || !std::isfinite(l0)) throw ConfigError("tv.lambda0", "must be finite and >= 0");
      c.tv.lambda0 = l0;
    }
    if (t.has("beta")) c.tv.beta = t.positive("beta", 1.0);
    t.finish();
  }

  if (r.has("snr_db")) {
    const json& s = r.at("snr_db");
    c.snr_db.clear();
    if (s.is_array()) {
      if (s.empty()) throw ConfigError("snr_db", "must not be empty");
      for (std::size_t i = 0; i < s.size(); ++i) c.snr_db.push_back(parse_snr(s[i], "snr_db[" + std::to_string(i) + "]"));
    } else {
      c.snr_db.push_back(parse_snr(s, "snr_db"));
    }
  }
  if (r.has("seeds")) {
    const json& s = r.at("seeds");
    c.seeds.clear();
    const json arr = s.is_array() ? s : json::array({s});
    if (arr.empty()) throw ConfigError("seeds", "must not be empty");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      if (!arr[i].is_number_unsigned()) throw ConfigError("seeds[" + std::to_string(i) + "]", "must be a non-negative integer");
      c.seeds.push_back(arr[i].get<std::uint64_t>());
    }
  }
  if (r.has("methods")) {
    c.methods = r.get<std::vector<std::string>>("methods");
    if (c.methods.empty()) throw ConfigError("methods", "must not be empty");
    std::set<std::string> unique;
    for (std::size_t i = 0; i < c.methods.size(); ++i) {
      const auto& m = c.methods[i];
      if (m != "bcsr" && m != "ld" && m != "gn_l2") {
        throw ConfigError("methods[" + std::to_string(i) + "]", "unknown method '" + m + "' (bcsr, ld, gn_l2)");
      }
      if (!unique.insert(m).second) throw ConfigError("methods[" + std::to_string(i) + "]", "duplicate method");
    }
  }
  if (r.has("ld")) {
    Reader l(r.at("ld"), "ld");
    c.ld.alpha_reg = l.positive("alpha_reg", c.ld.alpha_reg);
    if (l.has("sweep")) {
      const json& s = l.at("sweep");
      if (s.is_boolean()) {
        c.ld.sweep = s.get<bool>();
      } else {
        Reader sw(s, "ld.sweep");
        c.ld.sweep = true;
        c.ld.sweep_lo = sw.positive("lo", c.ld.sweep_lo);
        c.ld.sweep_hi = sw.positive("hi", c.ld.sweep_hi);
        c.ld.sweep_count = sw.integer("count", c.ld.sweep_count, 2);
        if (!(c.ld.sweep_hi > c.ld.sweep_lo)) throw ConfigError("ld.sweep.hi", "must exceed lo");
        sw.finish();
      }
    }
    l.finish();
  }
  if (r.has("gn_l2")) {
    Reader g(r.at("gn_l2"), "gn_l2");
    c.gn_l2.weight = g.positive("weight", c.gn_l2.weight);
    c.gn_l2.iters = g.integer("iters", c.gn_l2.iters, 0);
    g.finish();
  }
  if (r.has("mode")) {
    const auto m = r.get<std::string>("mode");
    if (m == "absolute") {
      c.mode = ReconMode::absolute;
    } else if (m == "difference") {
      c.mode = ReconMode::difference;
    } else {
      throw ConfigError("mode", "must be \"absolute\" or \"difference\"");
    }
  }
  if (r.has("frames")) {
    c.frames = r.get<std::vector<double>>("frames");
    if (c.frames.empty()) throw ConfigError("frames", "must not be empty");
  }
  r.opt("enforce_no_inverse_crime", &c.enforce_no_inverse_crime);
  if (r.has("ssim")) {
    Reader s(r.at("ssim"), "ssim");
    if (s.has("range")) {
      try {
        c.ssim.range = parse_ssim_range(s.get<std::string>("range"));
      } catch (const InputError& e) {
        throw ConfigError("ssim.range", e.what());
      }
    }
    s.opt("volume", &c.ssim.volume);
    c.ssim.resolution = s.integer("resolution", c.ssim.resolution, 8);
    s.finish();
  }
  r.opt("include_truth_row", &c.include_truth_row);
  if (r.has("output_dir")) c.output_dir = resolve(base_dir, r.get<std::string>("output_dir"));
  c.jobs = r.integer("jobs", c.jobs, 1);
  if (r.has("cache_dir")) c.cache_dir = resolve(base_dir, r.get<std::string>("cache_dir"));
  r.finish();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

}  // namespace bcsr
