#include "bcsr/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "bcsr/baselines.hpp"
#include "bcsr/errors.hpp"
#include "bcsr/mesh_io.hpp"
#include "bcsr/recon.hpp"

namespace bcsr {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

json to_json(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Eigen::VectorXd to_vector(const json& j, const std::string& what) {
  if (!j.is_array()) throw FormatError(what + " must be an array of numbers");
  Eigen::VectorXd v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw FormatError(what + " must be an array of numbers");
    v(static_cast<Index>(i)) = j[i].get<double>();
  }
  return v;
}

json snr_json(double snr) { return std::isinf(snr) ? json("inf") : json(snr); }

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << text;
    if (!out) throw InputError("write failed: " + path.string());
  }
  fs::rename(tmp, path);
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string nodal_csv(const Eigen::VectorXd& v, const char* column) {
  std::ostringstream out;
  out << "node," << column << "\n";
  char buf[64];
  for (Index n = 0; n < v.size(); ++n) {
    std::snprintf(buf, sizeof(buf), "%lld,%.17g\n", static_cast<long long>(n), v(n));
    out << buf;
  }
  return out.str();
}

// Per-frame noise seeds derived from the grid seed.
std::uint64_t frame_seed(std::uint64_t seed, std::size_t frame) {
  return seed ^ (0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(frame) + 1));
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

ElectrodeMesh build_mesh(const MeshSpec& spec, const CaseSpec* case_spec) {
  return std::visit(
      [&](const auto& s) -> ElectrodeMesh {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, DiskMeshSpec>) {
          if (case_spec && case_spec->domain.type != "disk") {
            throw ConfigError("mesh.type", "case " + case_spec->id + " needs a " + case_spec->domain.type + " mesh");
          }
          const double radius = s.radius.value_or(case_spec ? case_spec->domain.radius : 1.0);
          return generate_disk_mesh(radius, s.rings, s.electrodes, s.coverage, s.contact_impedance);
        } else if constexpr (std::is_same_v<T, CylinderMeshSpec>) {
          if (case_spec && case_spec->domain.type != "cylinder") {
            throw ConfigError("mesh.type", "case " + case_spec->id + " needs a " + case_spec->domain.type + " mesh");
          }
          const double radius = s.radius.value_or(case_spec ? case_spec->domain.radius : 1.0);
          const double height = s.height.value_or(case_spec ? case_spec->domain.height : 1.0);
          const int rings = s.electrode_rings.value_or(case_spec ? case_spec->domain.rings : 1);
          return generate_cylinder_mesh(radius, height, s.layers, rings, s.electrodes_per_ring,
                                        CylinderMeshOptions{s.radial_rings, s.coverage, s.contact_impedance});
        } else {
          return load_mesh(s.path, s.format, s.contact_impedance);
        }
      },
      spec);
}

StimulationProtocol build_protocol(const ProtocolSpec& spec, int electrode_count) {
  if (spec.type == "tank") return tank_protocol(spec.terminals, electrode_count, spec.amplitude);
  return adjacent_protocol(electrode_count, spec.skip_driven, spec.drop_reciprocal, spec.amplitude);
}

std::string format_snr(double snr_db) {
  if (std::isinf(snr_db)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", snr_db);
  return buf;
}

void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& task) {
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  auto run = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        task(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first) first = std::current_exception();
        next = count;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, count); ++w) pool.emplace_back(run);
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

struct Pipeline::Dataset {
  Eigen::VectorXd v;                                 // absolute: the frame; difference: the baseline
  std::vector<std::pair<double, Eigen::VectorXd>> frames;  // difference mode
};

Pipeline::Pipeline(ExperimentConfig config, Logger log) : config_(std::move(config)), log_(std::move(log)) {
  if (config_.case_id) case_ = case_library(*config_.case_id);
  const CaseSpec* cs = case_ ? &*case_ : nullptr;
  const bool cylinder = cs && cs->domain.type == "cylinder";
  MeshSpec recon_spec = cylinder ? MeshSpec{CylinderMeshSpec{}} : MeshSpec{DiskMeshSpec{}};
  MeshSpec sim_spec = recon_spec;
  if (cylinder) {
    auto& c = std::get<CylinderMeshSpec>(sim_spec);
    c.layers = 12;
    c.radial_rings = 10;
  } else {
    std::get<DiskMeshSpec>(sim_spec).rings = 22;
  }
  recon_ = build_mesh(config_.recon_mesh.value_or(recon_spec), cs);
  if (case_ || config_.sim_mesh) sim_ = build_mesh(config_.sim_mesh.value_or(sim_spec), cs);
  if (sim_ && sim_->layout.size() != recon_->layout.size()) {
    throw ConfigError("sim_mesh", "simulation and reconstruction meshes carry different electrode counts");
  }
  if (sim_ && config_.enforce_no_inverse_crime && sim_->mesh.fingerprint() == recon_->mesh.fingerprint()) {
    throw ValidationError("inverse-crime guard: simulation and reconstruction meshes are identical (fingerprint " +
                          hex(sim_->mesh.fingerprint()) + ")");
  }
  try {
    protocol_ = build_protocol(config_.protocol, static_cast<int>(recon_->layout.size()));
  } catch (const InputError& e) {
    throw ConfigError("protocol", e.what());
  }
  recon_model_ = std::make_unique<ForwardModel>(recon_->mesh, recon_->layout, *protocol_);
  if (sim_) sim_model_ = std::make_unique<ForwardModel>(sim_->mesh, sim_->layout, *protocol_);
  for (Index nb : basis_sizes()) {
    if (nb > recon_->mesh.num_nodes()) {
      throw ConfigError("n_b", "basis size " + std::to_string(nb) + " exceeds the " +
                                   std::to_string(recon_->mesh.num_nodes()) + " mesh nodes");
    }
  }
}

Pipeline::~Pipeline() = default;

void Pipeline::log(const std::string& msg) const {
  if (log_) log_(msg);
}

std::string Pipeline::tag() const {
  if (case_) return case_->id;
  return config_.dataset ? config_.dataset->stem().string() : "study";
}

std::vector<GridPoint> Pipeline::grid() const {
  std::vector<GridPoint> out;
  for (double snr : config_.snr_db) {
    for (std::uint64_t seed : config_.seeds) out.push_back({snr, seed});
  }
  return out;
}

std::array<double, 2> Pipeline::bounds() const {
  if (config_.bounds) return *config_.bounds;
  return config_.bounds_preset == "coarse" ? case_->coarse_bounds : case_->fine_bounds;
}

std::vector<Index> Pipeline::basis_sizes() const {
  if (!config_.n_b.empty()) return config_.n_b;
  const TruncationRegime regime =
      config_.truncation.value_or(case_ ? case_->truncation : TruncationRegime::simulation);
  return {default_truncation(recon_->mesh.num_nodes(), regime)};
}

std::string Pipeline::bcsr_name(Index n_b) const {
  return config_.n_b.size() > 1 ? "bcsr_nb" + std::to_string(n_b) : "bcsr";
}

std::vector<std::string> Pipeline::result_methods() const {
  std::vector<std::string> out;
  for (const auto& m : config_.methods) {
    if (m == "bcsr") {
      for (Index nb : basis_sizes()) out.push_back(bcsr_name(nb));
    } else {
      out.push_back(m);
    }
  }
  return out;
}

const GraphBasis& Pipeline::basis() {
  if (!basis_) {
    const auto sizes = basis_sizes();
    const Index nb = *std::max_element(sizes.begin(), sizes.end());
    log("basis: " + std::to_string(nb) + " modes on " + std::to_string(recon_->mesh.num_nodes()) + " nodes");
    basis_ = basis_for_mesh(recon_->mesh, nb, config_.cache_dir);
  }
  return *basis_;
}

Eigen::VectorXd Pipeline::truth_on_recon(double t) const {
  if (!case_) throw ConfigError("case", "ground truth needs a case from the library");
  const Phantom& ph = case_->phantom;
  const Mesh& target = recon_->mesh;
  Eigen::VectorXd field;
  if (sim_) {
    field = transfer_field(sim_->mesh, rasterize_phantom(ph, sim_->mesh), target);
  } else {
    field = rasterize_phantom(ph, target);
  }
  if (config_.mode == ReconMode::difference) {
    return t * (field.array() - ph.background).matrix();
  }
  return field;
}

fs::path Pipeline::dataset_path(const GridPoint& p) const {
  return config_.output_dir / "data" / (tag() + "_snr" + format_snr(p.snr_db) + "_seed" + std::to_string(p.seed) + ".json");
}

fs::path Pipeline::result_path(const GridPoint& p, const std::string& method, const char* ext) const {
  return config_.output_dir / "results" /
         (tag() + "_snr" + format_snr(p.snr_db) + "_seed" + std::to_string(p.seed) + "_" + method + ext);
}

void Pipeline::write_meshes() {
  fs::create_directories(config_.output_dir);
  auto one = [&](const ElectrodeMesh& m, const std::string& name) {
    save_mesh(config_.output_dir / (name + ".json"), m, MeshFormat::native_json);
    write_vtk(config_.output_dir / (name + ".vtk"), m.mesh, {});
    log(name + ": " + std::to_string(m.mesh.num_nodes()) + " nodes, " + std::to_string(m.mesh.num_elements()) +
        " elements, " + std::to_string(m.layout.size()) + " electrodes, fingerprint " + hex(m.mesh.fingerprint()));
  };
  one(*recon_, "recon_mesh");
  if (sim_) one(*sim_, "sim_mesh");
}

std::vector<fs::path> Pipeline::simulate() {
  if (!case_ || !sim_model_) throw ConfigError("case", "simulation needs a case from the library");
  const auto points = grid();
  std::vector<fs::path> written(points.size());
  const Phantom& ph = case_->phantom;
  const Eigen::VectorXd truth = rasterize_phantom(ph, sim_->mesh);
  Eigen::VectorXd v_base_clean;
  std::vector<Eigen::VectorXd> frame_clean;
  if (config_.mode == ReconMode::absolute) {
    v_base_clean = sim_model_->measure(truth);
  } else {
    const Eigen::VectorXd base = Eigen::VectorXd::Constant(truth.size(), ph.background);
    v_base_clean = sim_model_->measure(base);
    for (double t : config_.frames) {
      const Eigen::VectorXd sigma = base + t * (truth - base);
      if (sigma.minCoeff() <= 0.0) throw ConfigError("frames", "a frame amplitude makes the conductivity non-positive");
      frame_clean.push_back(sim_model_->measure(sigma));
    }
  }
  const json protocol = json::parse(protocol_->serialize());
  parallel_for(points.size(), config_.jobs, [&](std::size_t i) {
    const GridPoint& p = points[i];
    json j;
    j["case"] = case_->id;
    j["mode"] = config_.mode == ReconMode::absolute ? "absolute" : "difference";
    j["protocol"] = protocol;
    j["snr_db"] = snr_json(p.snr_db);
    j["seed"] = p.seed;
    j["mesh_fingerprint"] = hex(sim_->mesh.fingerprint());
    double realized = 0.0;
    const Eigen::VectorXd noisy = add_noise(v_base_clean, p.snr_db, p.seed, &realized);
    j["V_clean"] = to_json(v_base_clean);
    j["V_noisy"] = to_json(noisy);
    j["noise_sigma"] = realized;
    if (config_.mode == ReconMode::difference) {
      auto& frames = j["frames"] = json::array();
      for (std::size_t f = 0; f < frame_clean.size(); ++f) {
        frames.push_back({{"t", config_.frames[f]},
                          {"V_clean", to_json(frame_clean[f])},
                          {"V_noisy", to_json(add_noise(frame_clean[f], p.snr_db, frame_seed(p.seed, f)))}});
      }
    }
    written[i] = dataset_path(p);
    write_text(written[i], j.dump(1));
  });
  log("simulate: wrote " + std::to_string(written.size()) + " dataset(s)");
  return written;
}

Pipeline::Dataset Pipeline::load_dataset(const GridPoint& p) const {
  const fs::path path = config_.dataset ? *config_.dataset : dataset_path(p);
  const json j = read_json(path);
  if (!j.is_object() || !j.contains("V_noisy")) throw FormatError(path.string() + ": missing V_noisy");
  if (j.contains("protocol") && j.at("protocol") != json::parse(protocol_->serialize())) {
    throw ValidationError(path.string() + ": dataset protocol differs from the configured protocol");
  }
  if (sim_ && j.contains("mesh_fingerprint") && j.at("mesh_fingerprint") != hex(sim_->mesh.fingerprint())) {
    throw ValidationError(path.string() + ": dataset was simulated on a different mesh");
  }
  if (j.contains("mesh_fingerprint") && j.at("mesh_fingerprint") == hex(recon_->mesh.fingerprint()) &&
      config_.enforce_no_inverse_crime) {
    throw ValidationError(path.string() + ": dataset was simulated on the reconstruction mesh");
  }
  Dataset d;
  d.v = to_vector(j.at("V_noisy"), "V_noisy");
  if (d.v.size() != protocol_->num_measurements()) {
    throw ValidationError(path.string() + ": expected " + std::to_string(protocol_->num_measurements()) +
                          " measurements, found " + std::to_string(d.v.size()));
  }
  if (config_.mode == ReconMode::difference) {
    if (!j.contains("frames")) throw FormatError(path.string() + ": difference mode needs frames");
    for (const auto& f : j.at("frames")) {
      d.frames.emplace_back(f.at("t").get<double>(), to_vector(f.at("V_noisy"), "frames.V_noisy"));
      if (d.frames.back().second.size() != d.v.size()) throw ValidationError(path.string() + ": frame length mismatch");
    }
  }
  return d;
}

std::vector<MethodStatus> Pipeline::reconstruct() {
  const auto points = grid();
  if (std::find(config_.methods.begin(), config_.methods.end(), "bcsr") != config_.methods.end()) (void)basis();
  std::vector<std::vector<MethodStatus>> per(points.size());
  parallel_for(points.size(), config_.jobs, [&](std::size_t i) { per[i] = reconstruct_point(points[i]); });
  std::vector<MethodStatus> out;
  for (auto& v : per) out.insert(out.end(), v.begin(), v.end());
  return out;
}

std::vector<MethodStatus> Pipeline::reconstruct_point(const GridPoint& p) {
  const Dataset data = load_dataset(p);
  const ForwardModel& model = *recon_model_;
  const Mesh& mesh = recon_->mesh;
  const auto [lower, upper] = bounds();
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(mesh.num_nodes());
  const Calibration cal = calibrate_sigma0(data.v, model.measure(ones), ones, lower, upper, config_.scale_rule);
  log("reconstruct " + tag() + " snr " + format_snr(p.snr_db) + " seed " + std::to_string(p.seed) +
      ": sigma0 = " + std::to_string(cal.sigma0(0)));

  ReconOptions ropt;
  ropt.lmf = config_.lmf;
  ropt.tv = config_.tv;
  ropt.tv.enabled = config_.tv_mode == TVMode::on || (config_.tv_mode == TVMode::automatic && p.snr_db < 60.0);
  ropt.snr_db = p.snr_db;

  std::vector<MethodStatus> statuses;
  auto finish = [&](const std::string& method, json j, const Eigen::VectorXd& field, const char* column,
                    const std::vector<std::string>& log_lines) {
    j["method"] = method;
    j["case"] = tag();
    j["snr_db"] = snr_json(p.snr_db);
    j["seed"] = p.seed;
    j["mode"] = config_.mode == ReconMode::absolute ? "absolute" : "difference";
    j["recon_mesh_fingerprint"] = hex(mesh.fingerprint());
    j["status"] = "ok";
    write_text(result_path(p, method, ".json"), j.dump(1));
    write_text(result_path(p, method, ".csv"), nodal_csv(field, column));
    write_vtk(result_path(p, method, ".vtk"), mesh, {{column, field}});
    if (!log_lines.empty()) {
      std::string text;
      for (const auto& l : log_lines) text += l + "\n";
      write_text(result_path(p, method, ".log"), text);
    }
    statuses.push_back({method, p, true, ""});
  };
  auto fail = [&](const std::string& method, const std::exception& e) {
    json j{{"method", method}, {"case", tag()}, {"snr_db", snr_json(p.snr_db)}, {"seed", p.seed},
           {"status", "error"}, {"message", e.what()}};
    write_text(result_path(p, method, ".json"), j.dump(1));
    log("  " + method + " failed: " + e.what());
    statuses.push_back({method, p, false, e.what()});
  };

  for (const auto& method : config_.methods) {
    if (method == "bcsr") {
      for (Index nb : basis_sizes()) {
        const std::string name = bcsr_name(nb);
        try {
          const GraphBasis b = basis().size() == nb ? basis() : basis().truncated(nb);
          if (config_.mode == ReconMode::absolute) {
            const BoundMap map(lower, upper, cal.sigma0, cal.scale);
            const ReconResult r = bcsr::reconstruct(model, data.v, b, map, ropt);
            json j = json::parse(r.to_json());
            j["n_b"] = nb;
            j["scale"] = cal.scale;
            log("  " + name + ": " + std::to_string(r.outer_iterations) + " iterations, " +
                std::string(to_string(r.termination)));
            finish(name, std::move(j), r.sigma, "sigma", r.log_lines());
          } else {
            const BoundMap map = warm_start(cal.sigma0, lower, upper);
            json j;
            j["n_b"] = nb;
            auto& frames = j["frames"] = json::array();
            Eigen::VectorXd last;
            std::vector<std::string> lines;
            for (const auto& [t, vt] : data.frames) {
              const Eigen::VectorXd target = difference_target(model, cal.sigma0, data.v, vt);
              const ReconResult r = bcsr::reconstruct(model, target, b, map, ropt);
              last = r.sigma - cal.sigma0;
              frames.push_back({{"t", t},
                                {"delta_sigma", to_json(last)},
                                {"accepted_steps", r.accepted_steps},
                                {"termination_reason", std::string(to_string(r.termination))}});
              for (const auto& l : r.log_lines()) lines.push_back("frame " + std::to_string(frames.size() - 1) + " " + l);
            }
            finish(name, std::move(j), last, "delta_sigma", lines);
          }
        } catch (const SolverError& e) {
          fail(name, e);
        } catch (const ValidationError& e) {
          fail(name, e);
        }
      }
    } else if (method == "ld") {
      try {
        LDOperator ld = build_ld(model, cal.sigma0, config_.ld.alpha_reg);
        json j;
        const Eigen::VectorXd dv0 = config_.mode == ReconMode::absolute
                                        ? Eigen::VectorXd(data.v - model.measure(cal.sigma0))
                                        : Eigen::VectorXd(data.frames.empty() ? data.v - data.v
                                                                              : data.frames.back().second - data.v);
        if (config_.ld.sweep) {
          std::function<double(const Eigen::VectorXd&)> score;
          Eigen::VectorXd truth;
          if (case_ && config_.mode == ReconMode::absolute) {
            truth = truth_on_recon();
            score = [&](const Eigen::VectorXd& delta) { return rmse(truth, cal.sigma0 + delta); };
          }
          const AlphaSweep sw = sweep_alpha(ld, dv0, config_.ld.sweep_lo, config_.ld.sweep_hi, config_.ld.sweep_count, score);
          ld = ld.with_alpha(sw.best);
          j["sweep"] = {{"alphas", sw.alphas}, {"scores", sw.scores}, {"criterion", score ? "rmse" : "l_curve"}};
        }
        j["alpha_reg"] = ld.alpha_reg();
        if (config_.mode == ReconMode::absolute) {
          const Eigen::VectorXd sigma = ld_absolute(ld, model, data.v);
          j["sigma"] = to_json(sigma);
          finish("ld", std::move(j), sigma, "sigma", {});
        } else {
          auto& frames = j["frames"] = json::array();
          Eigen::VectorXd last;
          for (const auto& [t, vt] : data.frames) {
            last = ld.apply(vt - data.v);
            frames.push_back({{"t", t}, {"delta_sigma", to_json(last)}});
          }
          finish("ld", std::move(j), last, "delta_sigma", {});
        }
      } catch (const SolverError& e) {
        fail("ld", e);
      }
    } else if (method == "gn_l2") {
      try {
        json j;
        j["weight"] = config_.gn_l2.weight;
        if (config_.mode == ReconMode::absolute) {
          const GNResult g = gn_l2_reconstruct(model, data.v, cal.sigma0, config_.gn_l2.weight, config_.gn_l2.iters);
          j["sigma"] = to_json(g.sigma);
          j["objective_history"] = g.objective_history;
          j["iterations"] = g.iterations;
          finish("gn_l2", std::move(j), g.sigma, "sigma", {});
        } else {
          auto& frames = j["frames"] = json::array();
          Eigen::VectorXd last;
          for (const auto& [t, vt] : data.frames) {
            const Eigen::VectorXd target = difference_target(model, cal.sigma0, data.v, vt);
            const GNResult g = gn_l2_reconstruct(model, target, cal.sigma0, config_.gn_l2.weight, config_.gn_l2.iters);
            last = g.sigma - cal.sigma0;
            frames.push_back({{"t", t}, {"delta_sigma", to_json(last)}, {"iterations", g.iterations}});
          }
          finish("gn_l2", std::move(j), last, "delta_sigma", {});
        }
      } catch (const SolverError& e) {
        fail("gn_l2", e);
      }
    }
  }
  return statuses;
}

Evaluation Pipeline::evaluate() {
  if (!case_) throw ConfigError("case", "evaluation needs ground truth; no case is configured");
  const Mesh& mesh = recon_->mesh;
  Evaluation ev;
  const auto points = grid();
  auto methods = result_methods();
  if (config_.include_truth_row) methods.insert(methods.begin(), "truth");
  const bool difference = config_.mode == ReconMode::difference;

  std::size_t peak = 0;
  for (std::size_t f = 1; f < config_.frames.size(); ++f) {
    if (std::abs(config_.frames[f]) > std::abs(config_.frames[peak])) peak = f;
  }
  const double t_peak = difference ? config_.frames[peak] : 1.0;
  if (difference && t_peak == 0.0) throw ConfigError("frames", "every frame has zero contrast; nothing to evaluate");
  const Eigen::VectorXd truth = truth_on_recon(t_peak);
  std::optional<std::vector<char>> left, right;
  if (difference && case_->left_lung && case_->right_lung) {
    left = element_mask(mesh, *case_->left_lung);
    right = element_mask(mesh, *case_->right_lung);
  }

  struct Job {
    std::string method;
    GridPoint point;
  };
  std::vector<Job> jobs;
  for (const auto& m : methods) {
    for (const auto& p : points) jobs.push_back({m, p});
  }
  std::vector<std::optional<MetricReport>> rows(jobs.size());
  std::vector<std::optional<VentilationSeries>> vent(jobs.size());
  parallel_for(jobs.size(), config_.jobs, [&](std::size_t i) {
    const Job& job = jobs[i];
    Eigen::VectorXd recon;
    std::vector<Eigen::VectorXd> frames;
    if (job.method == "truth") {
      recon = truth;
      for (double t : config_.frames) frames.push_back(truth_on_recon(t));
    } else {
      const fs::path path = result_path(job.point, job.method, ".json");
      if (!fs::exists(path)) throw InputError("missing result " + path.string() + " (run reconstruct first)");
      const json j = read_json(path);
      if (j.value("status", "") != "ok") {
        log("evaluate: skipping failed result " + path.filename().string());
        return;
      }
      if (difference) {
        const auto& fr = j.at("frames");
        if (fr.size() != config_.frames.size()) throw ValidationError(path.string() + ": frame count mismatch");
        for (const auto& f : fr) frames.push_back(to_vector(f.at("delta_sigma"), "delta_sigma"));
        recon = frames[peak];
      } else {
        recon = to_vector(j.at("sigma"), "sigma");
      }
      if (recon.size() != mesh.num_nodes()) throw ValidationError(path.string() + ": field does not match the mesh");
    }
    MetricReport m = compute_metrics(truth, recon, mesh, config_.ssim);
    m.case_id = case_->id;
    m.method = job.method;
    m.snr_db = job.point.snr_db;
    m.seed = job.point.seed;
    rows[i] = std::move(m);
    if (left) vent[i] = ventilation_series(mesh, frames, *left, *right);
  });

  std::string csv = metrics_csv_header() + "\n";
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (!rows[i]) continue;
    for (const auto& w : rows[i]->warnings) log("warning: " + w);
    csv += to_csv_row(*rows[i]) + "\n";
    ev.rows.push_back(*rows[i]);
    if (vent[i]) {
      const std::string name = tag() + "_snr" + format_snr(jobs[i].point.snr_db) + "_seed" +
                               std::to_string(jobs[i].point.seed) + "_" + jobs[i].method;
      for (const auto& w : vent[i]->warnings) log("warning: " + name + ": " + w);
      write_text(config_.output_dir / ("ventilation_" + name + ".csv"), vent[i]->to_csv());
      ev.ventilation.emplace_back(name, *vent[i]);
    }
  }
  write_text(config_.output_dir / "metrics.csv", csv);

  std::string summary = "method,snr,n,ssim_mean,ssim_std,cc_mean,cc_std,rmse_mean,rmse_std\n";
  for (const auto& m : methods) {
    for (double snr : config_.snr_db) {
      std::vector<double> s, c, r;
      for (const auto& row : ev.rows) {
        if (row.method == m && (row.snr_db == snr || (std::isinf(row.snr_db) && std::isinf(snr)))) {
          s.push_back(row.ssim);
          c.push_back(row.cc);
          r.push_back(row.rmse);
        }
      }
      if (s.empty()) continue;
      SummaryRow sr{m, snr, static_cast<int>(s.size()), mean(s), stddev(s), mean(c), stddev(c), mean(r), stddev(r)};
      char buf[256];
      std::snprintf(buf, sizeof(buf), "%s,%s,%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", m.c_str(), format_snr(snr).c_str(),
                    sr.count, sr.ssim_mean, sr.ssim_std, sr.cc_mean, sr.cc_std, sr.rmse_mean, sr.rmse_std);
      summary += buf;
      ev.summary.push_back(sr);
    }
  }
  write_text(config_.output_dir / "summary.csv", summary);
  log("evaluate: " + std::to_string(ev.rows.size()) + " metric row(s)");
  return ev;
}

std::vector<fs::path> Pipeline::export_vtk() {
  std::vector<fs::path> out;
  const Mesh& mesh = recon_->mesh;
  std::map<std::string, Eigen::VectorXd> fields;
  if (case_) fields["truth"] = truth_on_recon();
  for (const auto& p : grid()) {
    for (const auto& m : result_methods()) {
      const fs::path path = result_path(p, m, ".json");
      if (!fs::exists(path)) continue;
      const json j = read_json(path);
      if (j.value("status", "") != "ok") continue;
      const std::string key = "snr" + format_snr(p.snr_db) + "_seed" + std::to_string(p.seed) + "_" + m;
      if (j.contains("sigma")) {
        fields[key] = to_vector(j.at("sigma"), "sigma");
      } else if (j.contains("frames")) {
        const auto& fr = j.at("frames");
        for (std::size_t f = 0; f < fr.size(); ++f) {
          fields[key + "_frame" + std::to_string(f)] = to_vector(fr[f].at("delta_sigma"), "delta_sigma");
        }
      }
    }
  }
  const fs::path path = config_.output_dir / (tag() + "_fields.vtk");
  fs::create_directories(config_.output_dir);
  write_vtk(path, mesh, fields);
  out.push_back(path);
  log("export-vtk: " + std::to_string(fields.size()) + " field(s) -> " + path.string());
  return out;
}

}  // namespace bcsr
