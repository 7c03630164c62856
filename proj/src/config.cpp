#include "memsim/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "memsim/matrix_io.hpp"

namespace memsim {

using nlohmann::json;

const char* to_string(Equation e) {
  switch (e) {
    case Equation::semimarkov: return "semimarkov";
    case Equation::nonmarkov: return "nonmarkov";
    case Equation::order2: return "order2";
    case Equation::inhomogeneous: return "inhomogeneous";
  }
  return "unknown";
}

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& what) {
  throw ConfigError("config field '" + field + "': " + what);
}

void allow_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) fail(where.empty() ? "<root>" : where, "expected an object");
  const std::set<std::string> ok(keys.begin(), keys.end());
  for (const auto& [k, v] : obj.items()) {
    if (!ok.count(k)) fail(where.empty() ? k : where + "." + k, "unknown key");
  }
}

std::string join(const std::string& where, const char* key) {
  return where.empty() ? std::string(key) : where + "." + key;
}

double number(const json& obj, const std::string& where, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) fail(join(where, key), "missing");
  if (!it->is_number()) fail(join(where, key), "expected a number");
  const double v = it->get<double>();
  if (!std::isfinite(v)) fail(join(where, key), "must be finite");
  return v;
}

std::optional<double> opt_number(const json& obj, const std::string& where, const char* key) {
  if (!obj.contains(key) || obj[key].is_null()) return std::nullopt;
  return number(obj, where, key);
}

std::uint64_t count(const json& obj, const std::string& where, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) fail(join(where, key), "missing");
  if (!it->is_number_integer() || it->get<std::int64_t>() < 0) {
    fail(join(where, key), "expected a nonnegative integer");
  }
  return it->get<std::uint64_t>();
}

ComplexMatrix matrix(const json& obj, const std::string& where, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) fail(join(where, key), "missing");
  return matrix_from_json(*it, "config field '" + join(where, key) + "'");
}

KernelConfig parse_kernel(const json& j, const std::filesystem::path& base) {
  const std::string w = "kernel";
  if (!j.is_object()) fail(w, "expected an object");
  if (!j.contains("family") || !j["family"].is_string()) fail("kernel.family", "missing or not a string");
  const std::string fam = j["family"].get<std::string>();
  KernelConfig k;
  if (fam == "constant") {
    allow_keys(j, w, {"family", "kappa"});
    k.family = KernelFamily::constant;
    k.params = {number(j, w, "kappa")};
  } else if (fam == "exponential") {
    allow_keys(j, w, {"family", "amplitude", "decay"});
    k.family = KernelFamily::exponential;
    k.params = {number(j, w, "amplitude"), number(j, w, "decay")};
  } else if (fam == "gaussian") {
    allow_keys(j, w, {"family", "amplitude", "width", "center"});
    k.family = KernelFamily::gaussian;
    k.params = {number(j, w, "amplitude"), number(j, w, "width"),
                opt_number(j, w, "center").value_or(0.0)};
    if (!(k.params[1] > 0.0)) fail("kernel.width", "must be > 0");
  } else if (fam == "markov_delta") {
    allow_keys(j, w, {"family"});
    k.family = KernelFamily::markov_delta;
  } else if (fam == "tabulated") {
    allow_keys(j, w, {"family", "file"});
    k.family = KernelFamily::tabulated;
    if (!j.contains("file") || !j["file"].is_string()) fail("kernel.file", "missing or not a string");
    k.file = base / j["file"].get<std::string>();
    if (!std::filesystem::exists(k.file)) fail("kernel.file", "file not found: " + k.file.string());
  } else {
    fail("kernel.family", "unknown family '" + fam +
                              "' (constant, exponential, gaussian, markov_delta, tabulated)");
  }
  return k;
}

Equation parse_equation(const std::string& s) {
  if (s == "semimarkov") return Equation::semimarkov;
  if (s == "nonmarkov") return Equation::nonmarkov;
  if (s == "order2") return Equation::order2;
  if (s == "inhomogeneous") return Equation::inhomogeneous;
  fail("equation", "unknown equation '" + s + "' (semimarkov, nonmarkov, order2, inhomogeneous)");
}

std::size_t line_of(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

}  // namespace

MemoryKernel KernelConfig::build() const {
  switch (family) {
    case KernelFamily::constant: return MemoryKernel::constant(params.at(0));
    case KernelFamily::exponential: return MemoryKernel::exponential(params.at(0), params.at(1));
    case KernelFamily::gaussian:
      return MemoryKernel::gaussian(params.at(0), params.at(1), params.at(2));
    case KernelFamily::markov_delta: return MemoryKernel::markov_delta();
    case KernelFamily::tabulated: return MemoryKernel::tabulated(TabulatedKernel::load_csv(file));
  }
  throw ConfigError("kernel: unknown family");
}

json KernelConfig::to_json() const {
  json j{{"family", memsim::to_string(family)}};
  switch (family) {
    case KernelFamily::constant: j["kappa"] = params.at(0); break;
    case KernelFamily::exponential:
      j["amplitude"] = params.at(0);
      j["decay"] = params.at(1);
      break;
    case KernelFamily::gaussian:
      j["amplitude"] = params.at(0);
      j["width"] = params.at(1);
      j["center"] = params.at(2);
      break;
    case KernelFamily::tabulated: j["file"] = file.string(); break;
    case KernelFamily::markov_delta: break;
  }
  return j;
}

std::vector<std::size_t> RunConfig::output_nodes() const {
  std::vector<std::size_t> nodes;
  if (output_every > 0) {
    for (std::size_t j = 0; j < n_points; j += output_every) nodes.push_back(j);
  }
  if (nodes.empty() || nodes.back() != n_points - 1) nodes.push_back(n_points - 1);
  return nodes;
}

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    std::ostringstream os;
    os << "config parse error at line " << line_of(text, e.byte) << ": " << e.what();
    throw ConfigError(os.str());
  }
  allow_keys(j, "", {"schema_version", "system", "initial_state", "kernel", "equation", "channel",
                     "sigma", "grid", "epsilon", "epsilon_split", "lambda_override",
                     "composition_form", "output_every", "seed", "tolerance", "correlation",
                     "observable", "observable_file", "gamma", "convergence"});
  RunConfig c;
  c.schema_version = static_cast<int>(count(j, "", "schema_version"));
  if (c.schema_version != 1) fail("schema_version", "unsupported version (expected 1)");

  if (!j.contains("system")) fail("system", "missing");
  const json& sys = j["system"];
  allow_keys(sys, "system", {"dimension", "hamiltonian", "jumps"});
  const auto dim = count(sys, "system", "dimension");
  if (dim < 1 || dim > 8) fail("system.dimension", "must lie in [1, 8]");
  c.system.hamiltonian = matrix(sys, "system", "hamiltonian");
  if (static_cast<std::uint64_t>(c.system.hamiltonian.rows()) != dim) {
    fail("system.hamiltonian", "size differs from system.dimension");
  }
  if (sys.contains("jumps")) {
    if (!sys["jumps"].is_array()) fail("system.jumps", "expected an array");
    for (std::size_t k = 0; k < sys["jumps"].size(); ++k) {
      const std::string w = "system.jumps[" + std::to_string(k) + "]";
      const json& jj = sys["jumps"][k];
      allow_keys(jj, w, {"operator", "rate"});
      JumpOperator op{matrix(jj, w, "operator"), number(jj, w, "rate")};
      if (static_cast<std::uint64_t>(op.op.rows()) != dim) fail(w + ".operator", "size differs from system.dimension");
      if (op.rate < 0.0) fail(w + ".rate", "must be >= 0");
      c.system.jumps.push_back(std::move(op));
    }
  }
  try {
    c.system.validate();
  } catch (const ValidationError& e) {
    fail("system", e.what());
  }

  if (!j.contains("initial_state")) fail("initial_state", "missing");
  if (j["initial_state"].is_string()) {
    if (j["initial_state"].get<std::string>() != "maximally_mixed") {
      fail("initial_state", "expected a matrix or \"maximally_mixed\"");
    }
    c.initial_state = DensityMatrix::maximally_mixed(static_cast<int>(dim)).matrix();
  } else {
    c.initial_state = matrix(j, "", "initial_state");
  }
  if (static_cast<std::uint64_t>(c.initial_state.rows()) != dim) {
    fail("initial_state", "size differs from system.dimension");
  }
  try {
    (void)DensityMatrix(c.initial_state);
  } catch (const ValidationError& e) {
    fail("initial_state", e.what());
  }

  if (!j.contains("kernel")) fail("kernel", "missing");
  c.kernel = parse_kernel(j["kernel"], base_dir);

  if (j.contains("equation")) {
    if (!j["equation"].is_string()) fail("equation", "expected a string");
    c.equation = parse_equation(j["equation"].get<std::string>());
  }
  if (j.contains("channel")) {
    allow_keys(j["channel"], "channel", {"lambda"});
    c.channel_lambda = number(j["channel"], "channel", "lambda");
    if (!(c.channel_lambda > 0.0)) fail("channel.lambda", "must be > 0");
  }
  if (j.contains("sigma")) {
    c.sigma = matrix(j, "", "sigma");
    if (static_cast<std::uint64_t>(c.sigma->rows()) != dim) fail("sigma", "size differs from system.dimension");
  }
  if (c.equation == Equation::inhomogeneous && !c.sigma) fail("sigma", "required by equation inhomogeneous");

  if (!j.contains("grid")) fail("grid", "missing");
  allow_keys(j["grid"], "grid", {"t_max", "n_points"});
  c.t_max = number(j["grid"], "grid", "t_max");
  if (!(c.t_max > 0.0)) fail("grid.t_max", "must be > 0");
  c.n_points = count(j["grid"], "grid", "n_points");
  if (c.n_points < 2 || c.n_points > 100000) fail("grid.n_points", "must lie in [2, 100000]");

  if (j.contains("epsilon")) c.epsilon = number(j, "", "epsilon");
  if (!(c.epsilon > 0.0 && c.epsilon < 1.0)) fail("epsilon", "must lie in (0, 1)");
  if (j.contains("epsilon_split")) c.epsilon_split = number(j, "", "epsilon_split");
  if (!(c.epsilon_split > 0.0 && c.epsilon_split < 1.0)) fail("epsilon_split", "must lie in (0, 1)");
  c.lambda_override = opt_number(j, "", "lambda_override");
  if (c.lambda_override && !(*c.lambda_override > 0.0)) fail("lambda_override", "must be > 0");
  if (j.contains("composition_form")) {
    if (!j["composition_form"].is_boolean()) fail("composition_form", "expected a boolean");
    c.composition_form = j["composition_form"].get<bool>();
  }
  if (j.contains("output_every")) c.output_every = count(j, "", "output_every");
  if (j.contains("seed")) c.seed = count(j, "", "seed");
  if (j.contains("tolerance")) c.tolerance = number(j, "", "tolerance");
  if (!(c.tolerance > 0.0)) fail("tolerance", "must be > 0");

  if (j.contains("correlation")) {
    const json& cj = j["correlation"];
    allow_keys(cj, "correlation", {"unitaries", "times", "observable"});
    if (cj.contains("unitaries")) {
      if (!cj["unitaries"].is_array()) fail("correlation.unitaries", "expected an array of matrices");
      for (std::size_t k = 0; k < cj["unitaries"].size(); ++k) {
        const std::string w = "correlation.unitaries[" + std::to_string(k) + "]";
        ComplexMatrix u = matrix_from_json(cj["unitaries"][k], "config field '" + w + "'");
        if (static_cast<std::uint64_t>(u.rows()) != dim) fail(w, "size differs from system.dimension");
        if (max_abs(u * u.adjoint() - ComplexMatrix::Identity(u.rows(), u.rows())) > 1e-10) {
          fail(w, "not unitary (tol 1e-10)");
        }
        c.correlation.unitaries.push_back(std::move(u));
      }
    }
    if (cj.contains("times")) {
      if (!cj["times"].is_array()) fail("correlation.times", "expected an array of numbers");
      for (const auto& t : cj["times"]) {
        if (!t.is_number()) fail("correlation.times", "expected numbers");
        c.correlation.times.push_back(t.get<double>());
      }
      for (std::size_t k = 1; k < c.correlation.times.size(); ++k) {
        if (c.correlation.times[k] < c.correlation.times[k - 1]) {
          fail("correlation.times", "must be nondecreasing");
        }
      }
    }
    if (cj.contains("observable")) c.correlation.observable = matrix(cj, "correlation", "observable");
  }

  if (j.contains("observable") && j.contains("observable_file")) {
    fail("observable", "give either observable or observable_file, not both");
  }
  if (j.contains("observable")) c.observable = matrix(j, "", "observable");
  if (j.contains("observable_file")) {
    if (!j["observable_file"].is_string()) fail("observable_file", "expected a path string");
    const auto p = base_dir / j["observable_file"].get<std::string>();
    if (!std::filesystem::exists(p)) fail("observable_file", "file not found: " + p.string());
    c.observable = load_matrix_file(p);
  }
  c.gamma = opt_number(j, "", "gamma");

  if (j.contains("convergence")) {
    const json& cv = j["convergence"];
    allow_keys(cv, "convergence", {"levels", "quantity"});
    if (cv.contains("levels")) c.convergence.levels = static_cast<int>(count(cv, "convergence", "levels"));
    if (cv.contains("quantity")) {
      if (!cv["quantity"].is_string()) fail("convergence.quantity", "expected a string");
      c.convergence.quantity = cv["quantity"].get<std::string>();
    }
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.has_parent_path() ? path.parent_path() : ".");
}

json RunConfig::to_json() const {
  json j;
  j["schema_version"] = schema_version;
  json jumps = json::array();
  for (const auto& jp : system.jumps) jumps.push_back({{"operator", matrix_to_json(jp.op)}, {"rate", jp.rate}});
  j["system"] = {{"dimension", dim()}, {"hamiltonian", matrix_to_json(system.hamiltonian)}, {"jumps", jumps}};
  j["initial_state"] = matrix_to_json(initial_state);
  j["kernel"] = kernel.to_json();
  j["equation"] = to_string(equation);
  j["channel"] = {{"lambda", channel_lambda}};
  if (sigma) j["sigma"] = matrix_to_json(*sigma);
  j["grid"] = {{"t_max", t_max}, {"n_points", n_points}};
  j["epsilon"] = epsilon;
  j["epsilon_split"] = epsilon_split;
  if (lambda_override) j["lambda_override"] = *lambda_override;
  j["composition_form"] = composition_form;
  j["output_every"] = output_every;
  j["seed"] = seed;
  j["tolerance"] = tolerance;
  json corr = json::object();
  if (!correlation.unitaries.empty()) {
    json us = json::array();
    for (const auto& u : correlation.unitaries) us.push_back(matrix_to_json(u));
    corr["unitaries"] = us;
  }
  if (!correlation.times.empty()) corr["times"] = correlation.times;
  if (correlation.observable) corr["observable"] = matrix_to_json(*correlation.observable);
  if (!corr.empty()) j["correlation"] = corr;
  if (observable) j["observable"] = matrix_to_json(*observable);
  if (gamma) j["gamma"] = *gamma;
  j["convergence"] = {{"levels", convergence.levels}, {"quantity", convergence.quantity}};
  return j;
}

}  // namespace memsim
