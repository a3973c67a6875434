#include "ktopo/config.hpp"

#include <sstream>

#include "ktopo/errors.hpp"
#include "ktopo/text_io.hpp"

namespace ktopo {

RunConfig::RunConfig() { pull_solver.grad_tol = 1e-7; }

void RunConfig::validate() const {
  materials.validate();
  solver.validate();
  beso.validate();
  pull_solver.validate();
  if (!(weights.body >= 0.0 && weights.garment >= 0.0 && weights.attach >= 0.0)) {
    throw ConfigError("solver: energy weights must be >= 0");
  }
}

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
  if (value.empty()) return {};
  std::filesystem::path p(value);
  if (p.is_relative()) p = base / p;
  return p.lexically_normal();
}

int to_int(const std::string& key, const std::string& value) {
  return static_cast<int>(parse_integer(key, value));
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "yes") return true;
  if (value == "0" || value == "false" || value == "no") return false;
  throw ConfigError("key '" + key + "': expected a boolean, got '" + value + "'");
}

}  // namespace

bool is_stencil_name(std::string_view text) {
  try {
    parse_stencil(text);
    return true;
  } catch (const ConfigError&) {
    return false;
  }
}

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
  const KeyValues kv = parse_key_values(text);
  const std::filesystem::path base = std::filesystem::absolute(base_dir);
  RunConfig c;

  // The material file is the base layer; [material] keys override it.
  if (auto it = kv.find("paths.material"); it != kv.end() && !it->second.empty()) {
    const auto path = resolve(base, it->second);
    require_files({path});
    c.materials = load_material(path);
  }
  std::ostringstream material_overrides;
  bool have_overrides = false;

  for (const auto& [key, value] : kv) {
    if (key == "paths.material") continue;
    if (key == "paths.body_rest") c.body_rest = resolve(base, value);
    else if (key == "paths.body_target") c.body_target = resolve(base, value);
    else if (key == "paths.patch") c.patch = resolve(base, value);
    else if (key == "paths.labels") c.labels = resolve(base, value);
    else if (key == "paths.motion") {
      std::stringstream ss(value);
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (!trim(item).empty()) c.motion.push_back(resolve(base, trim(item)));
      }
    } else if (key.rfind("material.", 0) == 0) {
      material_overrides << key.substr(9) << " = " << value << '\n';
      have_overrides = true;
    } else if (key == "solver.grad_tol") c.solver.grad_tol = parse_number(key, value);
    else if (key == "solver.max_iterations") c.solver.max_iterations = to_int(key, value);
    else if (key == "solver.history") c.solver.history = to_int(key, value);
    else if (key == "solver.c1") c.solver.c1 = parse_number(key, value);
    else if (key == "solver.c2") c.solver.c2 = parse_number(key, value);
    else if (key == "solver.log") c.solver.record_log = to_bool(key, value);
    else if (key == "solver.w_body") c.weights.body = parse_number(key, value);
    else if (key == "solver.w_garment") c.weights.garment = parse_number(key, value);
    else if (key == "solver.w_attach") c.weights.attach = parse_number(key, value);
    else if (key == "beso.target_area") c.beso.target_area = parse_number(key, value);
    else if (key == "beso.er") c.beso.er = parse_number(key, value);
    else if (key == "beso.ar_max") c.beso.ar_max = parse_number(key, value);
    else if (key == "beso.d_min") c.beso.d_min = parse_number(key, value);
    else if (key == "beso.p") c.beso.penalty = parse_number(key, value);
    else if (key == "beso.tau") c.beso.tau = parse_number(key, value);
    else if (key == "beso.window") c.beso.window = to_int(key, value);
    else if (key == "beso.max_iterations") c.beso.max_iterations = to_int(key, value);
    else if (key == "beso.reinit_every") c.beso.reinit_every = to_int(key, value);
    else if (key == "run.threads") c.threads = to_int(key, value);
    else if (key == "run.seed") c.seed = static_cast<std::uint64_t>(parse_integer(key, value));
    else if (key == "pulltest.resolution") c.pull.resolution = to_int(key, value);
    else if (key == "pulltest.stencil") c.stencil = value;
    else if (key == "pulltest.strains") c.strains = value;
    else if (key == "pulltest.line_height") c.pull.line_height = parse_number(key, value);
    else if (key == "pulltest.x_fraction") c.pull.target_fraction = parse_number(key, value);
    else if (key == "pulltest.grad_tol") c.pull_solver.grad_tol = parse_number(key, value);
    else if (key == "pulltest.max_iterations") c.pull_solver.max_iterations = to_int(key, value);
    else throw ConfigError("config: unknown key '" + key + "'");
  }
  if (have_overrides) {
    // Re-apply on top of the file values key by key.
    const KeyValues ov = parse_key_values(material_overrides.str());
    for (const auto& [key, value] : ov) {
      const double v = parse_number("material." + key, value);
      if (key == "E1_pa") c.materials.E1 = v;
      else if (key == "E2_pa") c.materials.E2 = v;
      else if (key == "nu") c.materials.nu = v;
      else if (key == "t1_m") c.materials.t1 = v;
      else if (key == "t2_m") c.materials.t2 = v;
      else if (key == "attach_k") c.materials.attach_k = v;
      else throw ConfigError("config: unknown key 'material." + key + "'");
    }
  }
  if (!is_stencil_name(c.stencil)) c.stencil = resolve(base, c.stencil).string();
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  require_files({path});
  return parse_run_config(read_text_file(path), std::filesystem::absolute(path).parent_path());
}

std::string to_string(const RunConfig& c) {
  std::ostringstream out;
  const auto p = [](const std::filesystem::path& x) { return x.empty() ? std::string() : x.string(); };
  out << "[paths]\n"
      << "body_rest = " << p(c.body_rest) << '\n'
      << "body_target = " << p(c.body_target) << '\n'
      << "motion = ";
  for (std::size_t i = 0; i < c.motion.size(); ++i) out << (i ? "," : "") << c.motion[i].string();
  out << '\n'
      << "patch = " << p(c.patch) << '\n'
      << "labels = " << p(c.labels) << "\n\n"
      << "[material]\n"
      << to_string(c.materials) << '\n'
      << "[solver]\n"
      << "grad_tol = " << format_double(c.solver.grad_tol) << '\n'
      << "max_iterations = " << c.solver.max_iterations << '\n'
      << "history = " << c.solver.history << '\n'
      << "c1 = " << format_double(c.solver.c1) << '\n'
      << "c2 = " << format_double(c.solver.c2) << '\n'
      << "log = " << (c.solver.record_log ? "true" : "false") << '\n'
      << "w_body = " << format_double(c.weights.body) << '\n'
      << "w_garment = " << format_double(c.weights.garment) << '\n'
      << "w_attach = " << format_double(c.weights.attach) << "\n\n"
      << "[beso]\n"
      << "target_area = " << format_double(c.beso.target_area) << '\n'
      << "er = " << format_double(c.beso.er) << '\n'
      << "ar_max = " << format_double(c.beso.ar_max) << '\n'
      << "d_min = " << format_double(c.beso.d_min) << '\n'
      << "p = " << format_double(c.beso.penalty) << '\n'
      << "tau = " << format_double(c.beso.tau) << '\n'
      << "window = " << c.beso.window << '\n'
      << "max_iterations = " << c.beso.max_iterations << '\n'
      << "reinit_every = " << c.beso.reinit_every << "\n\n"
      << "[run]\n"
      << "threads = " << c.threads << '\n'
      << "seed = " << c.seed << "\n\n"
      << "[pulltest]\n"
      << "resolution = " << c.pull.resolution << '\n'
      << "stencil = " << c.stencil << '\n'
      << "strains = " << c.strains << '\n'
      << "line_height = " << format_double(c.pull.line_height) << '\n'
      << "x_fraction = " << format_double(c.pull.target_fraction) << '\n'
      << "grad_tol = " << format_double(c.pull_solver.grad_tol) << '\n'
      << "max_iterations = " << c.pull_solver.max_iterations << '\n';
  return out.str();
}

void require_files(const std::vector<std::filesystem::path>& paths) {
  for (const auto& p : paths) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(p, ec)) throw ConfigError("missing file: " + p.string());
  }
}

}  // namespace ktopo
