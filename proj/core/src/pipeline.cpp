#include "rdsym/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace rdsym::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Reads one JSON object, remembering which keys were consumed so leftovers
// can be rejected.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <class T>
  T get(const std::string& key, T fallback) {
    if (!j_.contains(key)) return fallback;
    return required<T>(key);
  }

  template <class T>
  T required(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError("missing required key '" + name(key) + "'");
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("key '" + name(key) + "' has the wrong type");
    }
  }

  std::optional<Reader> child(const std::string& key) {
    if (!j_.contains(key)) return std::nullopt;
    seen_.insert(key);
    return Reader(j_.at(key), name(key));
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown key '" + name(key) + "'");
    }
  }

  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string where() const { return path_.empty() ? "config" : "'" + path_ + "'"; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class F>
void guard(const std::string& what, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

void read_train(Reader& r, pinn::TrainOptions& t) {
  t.adam.steps = r.get("adam_steps", t.adam.steps);
  t.adam.learning_rate = r.get("adam_lr", t.adam.learning_rate);
  t.lbfgs.max_iterations = r.get("lbfgs_max_iters", t.lbfgs.max_iterations);
  t.lbfgs.gradient_tolerance = r.get("lbfgs_tol", t.lbfgs.gradient_tolerance);
  if (t.adam.steps < 0 || t.lbfgs.max_iterations < 0) {
    throw ConfigError("step counts must be non-negative");
  }
  if (!(t.adam.learning_rate > 0.0)) throw ConfigError("adam_lr must be positive");
}

void read_symreg(Reader& r, symreg::SymregConfig& s) {
  s.iterations = r.get("iterations", s.iterations);
  s.population_size = r.get("population_size", s.population_size);
  s.tournament_size = r.get("tournament_size", s.tournament_size);
  s.max_complexity = r.get("max_complexity", s.max_complexity);
  s.parsimony = r.get("parsimony", s.parsimony);
  s.constant_evaluations = r.get("constant_evaluations", s.constant_evaluations);
  s.constant_probability = r.get("constant_probability", s.constant_probability);
  s.migration = r.get("migration", s.migration);
  s.kpp_penalty = r.get("kpp_penalty", s.kpp_penalty);
  guard(r.name("symreg"), [&] { s.validate(); });
}

cohort::GroupSpec read_group(const json& g, const std::string& path) {
  Reader r(g, path);
  cohort::GroupSpec spec;
  spec.label = r.required<std::string>("label");
  if (r.has("table1")) {
    const int k = r.required<int>("table1");
    if (k < 1 || k > 4) throw ConfigError("'" + r.name("table1") + "' must be 1..4");
    spec.reaction = cohort::table1_reaction(k);
  } else {
    const auto text = r.required<std::string>("reaction");
    try {
      spec.reaction = expr::parse(text);
    } catch (const expr::ParseError& e) {
      throw ConfigError("'" + r.name("reaction") + "': " + e.what());
    }
  }
  r.finish();
  return spec;
}

void read_cohort(Reader& r, RunConfig& c) {
  auto& g = c.cohort_gen;
  g.subjects_per_group = r.get("subjects_per_group", g.subjects_per_group);
  g.times = r.get("times", g.times);
  g.kappa_mean = r.get("kappa_mean", g.kappa_mean);
  g.kappa_sd = r.get("kappa_sd", g.kappa_sd);
  g.alpha_group_mean = r.get("alpha_group_mean", g.alpha_group_mean);
  g.alpha_group_sd = r.get("alpha_group_sd", g.alpha_group_sd);
  g.alpha_subject_sd = r.get("alpha_subject_sd", g.alpha_subject_sd);
  g.noise_sd = r.get("noise_sd", g.noise_sd);
  if (r.has("groups")) {
    const json& groups = r.raw("groups");
    if (!groups.is_array() || groups.empty()) {
      throw ConfigError("'" + r.name("groups") + "' must be a non-empty array");
    }
    for (std::size_t i = 0; i < groups.size(); ++i) {
      g.groups.push_back(read_group(groups[i], r.name("groups") + "[" + std::to_string(i) + "]"));
    }
  }
  if (auto init = r.child("initial")) {
    const auto law = init->get<std::string>("law", "normal");
    if (law == "normal") {
      g.initial.kind = cohort::InitialLaw::Kind::kNormal;
    } else if (law == "uniform") {
      g.initial.kind = cohort::InitialLaw::Kind::kUniform;
    } else {
      throw ConfigError("'" + init->name("law") + "' must be 'normal' or 'uniform'");
    }
    g.initial.a = init->get("a", g.initial.a);
    g.initial.b = init->get("b", g.initial.b);
    init->finish();
  }
  if (auto rg = r.child("random_graph")) {
    RandomGraphSpec spec;
    spec.nodes = rg->get("nodes", spec.nodes);
    spec.edge_probability = rg->get("edge_probability", spec.edge_probability);
    spec.weight_low = rg->get("weight_low", spec.weight_low);
    spec.weight_high = rg->get("weight_high", spec.weight_high);
    rg->finish();
    if (spec.nodes < 1 || spec.edge_probability < 0 || spec.edge_probability > 1 ||
        spec.weight_low < 0 || spec.weight_high < spec.weight_low) {
      throw ConfigError("'" + r.name("random_graph") + "' has invalid values");
    }
    c.random_graph = spec;
  }
  if (g.subjects_per_group < 1) throw ConfigError("subjects_per_group must be >= 1");
  if (g.times.size() < 2 || !std::is_sorted(g.times.begin(), g.times.end()) ||
      std::adjacent_find(g.times.begin(), g.times.end()) != g.times.end()) {
    throw ConfigError("'cohort.times' must be >= 2 strictly increasing values");
  }
  if (g.kappa_sd < 0 || g.alpha_group_sd < 0 || g.alpha_subject_sd < 0 || g.noise_sd < 0) {
    throw ConfigError("standard deviations must be non-negative");
  }
}

void read_pinn(Reader& r, RunConfig& c) {
  read_train(r, c.train);
  auto& p = c.pinn;
  p.collocation_count = r.get("collocation_count", p.collocation_count);
  p.surrogate_hidden = r.get("hidden", p.surrogate_hidden);
  p.reaction.spec.hidden_widths = r.get("reaction_hidden", p.reaction.spec.hidden_widths);
  p.reaction.grid_points = r.get("grid_points", p.reaction.grid_points);
  p.aux_points = r.get("aux_points", p.aux_points);
  p.weights.data = r.get("w_data", p.weights.data);
  p.weights.residual = r.get("w_res", p.weights.residual);
  p.weights.aux = r.get("w_aux", p.weights.aux);
  p.kappa_init = r.get("kappa_init", p.kappa_init);
  p.alpha_init = r.get("alpha_init", p.alpha_init);
  if (r.has("constraint_mode")) {
    guard("pinn.constraint_mode", [&] {
      p.reaction.mode = pinn::constraint_mode_from_string(r.required<std::string>("constraint_mode"));
    });
  }
  if (r.has("ensemble_size")) c.ensemble_size = r.required<int>("ensemble_size");
  if (r.has("seed")) c.seed = r.required<std::uint64_t>("seed");
  guard("pinn", [&] { p.validate(); });
}

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

void write_json(const fs::path& p, const json& j) { open_out(p) << j.dump(2) << '\n'; }

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot open " + p.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed JSON in " + p.string() + ": " + e.what());
  }
}

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double num_of(const json& j) { return j.is_null() ? kInf : j.get<double>(); }

std::string safe_name(std::string s) {
  for (char& ch : s) {
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_') ch = '_';
  }
  return s;
}

cohort::Cohort load_cohort_file(const RunConfig& config) {
  const fs::path p = config.resolve(config.cohort);
  if (!fs::exists(p)) throw ConfigError("cohort file not found: " + p.string());
  try {
    return cohort::load_cohort(p);
  } catch (const json::exception& e) {
    throw ConfigError("cohort file " + p.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError("cohort file " + p.string() + ": " + e.what());
  }
}

json candidate_json(const symreg::Candidate& c) {
  return {{"expression", expr::format(c.expression)},
          {"complexity", c.complexity},
          {"mse", num(c.mse)},
          {"mae", num(c.mae)},
          {"score", num(c.score)}};
}

symreg::Candidate candidate_from(const json& j) {
  symreg::Candidate c;
  c.expression = expr::parse(j.at("expression").get<std::string>());
  c.complexity = j.at("complexity").get<int>();
  c.mse = num_of(j.at("mse"));
  c.mae = num_of(j.at("mae"));
  c.score = num_of(j.at("score"));
  return c;
}

std::vector<int> region_columns(const RunConfig& config, const graph::LaplacianSystem& system) {
  std::vector<int> cols;
  for (const auto& label : config.regions) {
    try {
      cols.push_back(system.node_index(label));
    } catch (const std::out_of_range&) {
      throw ConfigError("unknown region label '" + label + "'");
    }
  }
  return cols;
}

std::vector<std::string> node_labels(const graph::LaplacianSystem& system) {
  if (!system.node_labels.empty()) return system.node_labels;
  std::vector<std::string> out;
  for (int i = 0; i < system.size(); ++i) out.push_back(std::to_string(i));
  return out;
}

}  // namespace

fs::path RunConfig::resolve(const fs::path& p) const {
  if (p.empty() || p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

RunConfig parse_config(const json& j, const fs::path& base_dir) {
  RunConfig c;
  c.base_dir = base_dir;
  Reader root(j, "");
  {
    auto paths = root.child("paths");
    if (!paths) throw ConfigError("missing required key 'paths'");
    c.laplacian = paths->required<std::string>("laplacian");
    c.cohort = paths->get<std::string>("cohort", "cohort.json");
    c.output = paths->get<std::string>("output", "out");
    paths->finish();
  }
  c.seed = root.get<std::uint64_t>("seed", c.seed);
  c.ensemble_size = root.get("ensemble_size", c.ensemble_size);
  if (root.has("constraint_mode")) {
    guard("constraint_mode", [&] {
      c.pinn.reaction.mode = pinn::constraint_mode_from_string(root.required<std::string>("constraint_mode"));
    });
  }
  if (auto r = root.child("cohort")) {
    read_cohort(*r, c);
    r->finish();
  }
  if (auto r = root.child("pinn")) {
    read_pinn(*r, c);
    r->finish();
  }
  if (auto r = root.child("symreg")) {
    c.symreg_samples = r->get("samples", c.symreg_samples);
    const auto grid = r->get<std::string>("grid", "visited");
    if (grid != "visited" && grid != "uniform") {
      throw ConfigError("'symreg.grid' must be 'visited' or 'uniform'");
    }
    c.symreg_uniform_grid = grid == "uniform";
    read_symreg(*r, c.symreg);
    r->finish();
    if (c.symreg_samples < 2) throw ConfigError("'symreg.samples' must be >= 2");
  }
  if (auto r = root.child("projection")) {
    c.horizon = r->get("horizon", c.horizon);
    c.step = r->get("step", c.step);
    c.regions = r->get("regions", c.regions);
    c.subject_ids = r->get("subjects", c.subject_ids);
    r->finish();
    if (!(c.step > 0.0)) throw ConfigError("'projection.step' must be positive");
  }
  if (auto r = root.child("ablation")) {
    c.ablation_horizons = r->get("horizons", c.ablation_horizons);
    if (r->has("modes")) {
      c.ablation_modes.clear();
      for (const auto& m : r->required<std::vector<std::string>>("modes")) {
        guard("ablation.modes", [&] { c.ablation_modes.push_back(pinn::constraint_mode_from_string(m)); });
      }
    }
    r->finish();
    for (double h : c.ablation_horizons) {
      if (!(h >= 1.0)) throw ConfigError("'ablation.horizons' entries must be >= 1");
    }
  }
  if (auto r = root.child("ko")) {
    c.ko.t_end = r->get("t_end", c.ko.t_end);
    c.ko.data_points = r->get("data_points", c.ko.data_points);
    c.ko.collocation_count = r->get("collocation_count", c.ko.collocation_count);
    c.ko.hidden = r->get("hidden", c.ko.hidden);
    read_train(*r, c.ko_train);
    if (auto s = r->child("symreg")) {
      read_symreg(*s, c.ko_symreg);
      s->finish();
    }
    r->finish();
    guard("ko", [&] { c.ko.validate(); });
  }
  root.finish();
  if (c.ensemble_size < 1) throw ConfigError("'ensemble_size' must be >= 1");
  return c;
}

RunConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  return parse_config(read_json(path), path.parent_path());
}

graph::LaplacianSystem load_system(const RunConfig& config) {
  const fs::path p = config.resolve(config.laplacian);
  if (!fs::exists(p)) {
    if (!config.random_graph) throw ConfigError("laplacian file not found: " + p.string());
    const auto& g = config.random_graph;
    const Eigen::MatrixXd W = graph::random_weights(
        g->nodes, g->edge_probability, g->weight_low, g->weight_high,
        cohort::derive_seed(config.seed, "graph"));
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    graph::save_weights_csv(p, W);
  }
  try {
    return graph::load_laplacian_csv(p);
  } catch (const graph::ValidationError& e) {
    throw ConfigError("laplacian " + p.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------- simulate

SimulateSummary cmd_simulate(const RunConfig& config) {
  const graph::LaplacianSystem system = load_system(config);
  const cohort::Cohort co = cohort::generate_cohort(config.cohort_gen, system, config.seed);
  SimulateSummary out;
  out.cohort_file = config.resolve(config.cohort);
  if (out.cohort_file.has_parent_path()) fs::create_directories(out.cohort_file.parent_path());
  cohort::save_cohort(out.cohort_file, co);

  json groups = json::array();
  for (const auto& label : co.group_labels()) {
    std::vector<double> k, a;
    for (const auto& s : co.subjects) {
      if (s.group != label) continue;
      k.push_back(*s.true_kappa);
      a.push_back(*s.true_alpha);
    }
    const auto stats = [](const std::vector<double>& v) {
      const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - m) * (x - m);
      return json{{"mean", m},
                  {"sd", v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0},
                  {"min", *std::min_element(v.begin(), v.end())},
                  {"max", *std::max_element(v.begin(), v.end())}};
    };
    groups.push_back({{"label", label},
                      {"subjects", k.size()},
                      {"reaction", expr::format(*co.true_reaction(label))},
                      {"kappa", stats(k)},
                      {"alpha", stats(a)}});
  }
  out.summary = {{"seed", config.seed}, {"nodes", co.node_count}, {"groups", groups}};
  write_json(config.resolve(config.output) / "simulate_summary.json", out.summary);
  return out;
}

// ---------------------------------------------------------------- discover

DiscoveryResult discover(const cohort::Cohort& co, const graph::LaplacianSystem& system,
                         const RunConfig& config, int workers) {
  const pinn::GraphProblem problem(co, system, config.pinn);
  const auto trained = pinn::ensemble_train(problem, config.seed, config.ensemble_size,
                                            config.train, workers);
  DiscoveryResult result;
  result.seed = config.seed;
  result.mode = config.pinn.reaction.mode;
  result.group_labels = co.group_labels();
  result.created = timestamp();

  for (const auto& m : trained) {
    MemberResult member;
    member.index = m.index;
    member.seed = m.seed;
    if (!m.result) {
      member.error = m.error;
      member.projection_error = kInf;
      result.members.push_back(std::move(member));
      continue;
    }
    member.trained = pinn::rescale_alpha_f(problem, *m.result);
    for (int g = 0; g < problem.group_count(); ++g) {
      const auto f = pinn::reaction_function(config.pinn.reaction,
                                             member.trained->groups[static_cast<std::size_t>(g)].reaction);
      const std::vector<double> grid =
          config.symreg_uniform_grid
              ? symreg::uniform_grid(config.symreg_samples)
              : symreg::quantile_grid(pinn::visited_concentrations(problem, *member.trained, g),
                                      config.symreg_samples);
      symreg::SymregConfig sr = config.symreg;
      sr.seed = cohort::derive_seed(m.seed, "symreg", static_cast<std::uint64_t>(g));
      GroupDiscovery d;
      d.label = problem.group_label(g);
      d.frontier = symreg::score_frontier(symreg::evolve(symreg::sample_function(f, grid), sr));
      d.selected = symreg::select_candidate(d.frontier);
      member.groups.push_back(std::move(d));
    }
    try {
      member.projection_error = evalproj::projection_error(co, system, member_models(member));
    } catch (const std::exception&) {
      member.projection_error = kInf;  // discovered model blew up under integration
    }
    result.members.push_back(std::move(member));
  }
  std::vector<double> errors;
  for (const auto& m : result.members) errors.push_back(m.projection_error);
  result.best_member = evalproj::rank_ensemble(errors).best;
  return result;
}

expr::Expression member_reaction(const MemberResult& member, const std::string& group) {
  for (const auto& g : member.groups) {
    if (g.label == group) return g.selected.expression;
  }
  throw std::out_of_range("member has no reaction for group '" + group + "'");
}

evalproj::ModelMap member_models(const MemberResult& member) {
  if (!member.trained) throw std::invalid_argument("member " + std::to_string(member.index) + " failed");
  evalproj::ModelMap out;
  for (const auto& s : member.trained->subjects) {
    out[s.id] = {s.kappa, s.alpha, member_reaction(member, s.group), member.seed};
  }
  return out;
}

json to_json(const DiscoveryResult& r) {
  json members = json::array();
  for (const auto& m : r.members) {
    json jm{{"index", m.index}, {"seed", m.seed}, {"projection_error", num(m.projection_error)}};
    if (!m.ok()) {
      jm["error"] = m.error;
      members.push_back(std::move(jm));
      continue;
    }
    jm["final_loss"] = num(m.trained->loss_history.back());
    jm["subjects"] = json::array();
    for (const auto& s : m.trained->subjects) {
      jm["subjects"].push_back({{"id", s.id}, {"group", s.group}, {"kappa", s.kappa}, {"alpha", s.alpha}});
    }
    jm["groups"] = json::array();
    for (const auto& g : m.groups) {
      json frontier = json::array();
      for (const auto& c : g.frontier) frontier.push_back(candidate_json(c));
      jm["groups"].push_back({{"label", g.label},
                              {"f_sym", expr::format(g.selected.expression)},
                              {"selected", candidate_json(g.selected)},
                              {"frontier", frontier}});
    }
    jm["trained"] = pinn::to_json(*m.trained);
    members.push_back(std::move(jm));
  }

  // Across-member spread of the per-subject parameters.
  json summary = json::array();
  const MemberResult* first = nullptr;
  for (const auto& m : r.members) {
    if (m.ok()) {
      first = &m;
      break;
    }
  }
  if (first != nullptr) {
    for (std::size_t i = 0; i < first->trained->subjects.size(); ++i) {
      std::vector<double> k, a;
      for (const auto& m : r.members) {
        if (!m.ok()) continue;
        k.push_back(m.trained->subjects[i].kappa);
        a.push_back(m.trained->subjects[i].alpha);
      }
      const auto ms = [](const std::vector<double>& v) {
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
        return std::pair{mean, sd};
      };
      const auto [km, ks] = ms(k);
      const auto [am, as] = ms(a);
      summary.push_back({{"id", first->trained->subjects[i].id},
                         {"kappa_mean", km},
                         {"kappa_sd", ks},
                         {"alpha_mean", am},
                         {"alpha_sd", as}});
    }
  }

  // f_sym envelope per group on the 101-point grid.
  json bands = json::array();
  for (const auto& label : r.group_labels) {
    std::vector<Eigen::MatrixXd> curves;
    int best = 0;
    for (const auto& m : r.members) {
      if (!m.ok()) continue;
      if (m.index == r.best_member) best = static_cast<int>(curves.size());
      Eigen::MatrixXd curve(101, 1);
      const auto e = member_reaction(m, label);
      for (int k = 0; k <= 100; ++k) {
        const double c = k / 100.0;
        curve(k, 0) = expr::eval(e, std::span<const double>(&c, 1));
      }
      curves.push_back(std::move(curve));
    }
    if (curves.empty()) continue;
    const auto b = evalproj::band(curves, Eigen::VectorXd::LinSpaced(101, 0.0, 1.0), best);
    json rows = json::array();
    for (int k = 0; k <= 100; ++k) {
      rows.push_back({num(k / 100.0), num(b.min(k, 0)), num(b.max(k, 0)), num(b.best(k, 0))});
    }
    bands.push_back({{"group", label}, {"columns", {"c", "min", "max", "best"}}, {"rows", rows}});
  }

  return {{"format_version", 1},
          {"seed", r.seed},
          {"constraint_mode", pinn::to_string(r.mode)},
          {"created", r.created},
          {"groups", r.group_labels},
          {"best_member", r.best_member},
          {"members", members},
          {"subject_summary", summary},
          {"f_sym_bands", bands}};
}

DiscoveryResult discovery_from_json(const json& j) {
  try {
    if (j.at("format_version").get<int>() != 1) throw ConfigError("unsupported result format_version");
    DiscoveryResult r;
    r.seed = j.at("seed").get<std::uint64_t>();
    r.mode = pinn::constraint_mode_from_string(j.at("constraint_mode").get<std::string>());
    r.created = j.value("created", "");
    r.group_labels = j.at("groups").get<std::vector<std::string>>();
    r.best_member = j.at("best_member").get<int>();
    for (const auto& jm : j.at("members")) {
      MemberResult m;
      m.index = jm.at("index").get<int>();
      m.seed = jm.at("seed").get<std::uint64_t>();
      m.projection_error = num_of(jm.at("projection_error"));
      if (jm.contains("error")) {
        m.error = jm.at("error").get<std::string>();
        if (m.error.empty()) m.error = "failed";
      } else {
        m.trained = pinn::trained_from_json(jm.at("trained"));
        for (const auto& jg : jm.at("groups")) {
          GroupDiscovery g;
          g.label = jg.at("label").get<std::string>();
          g.selected = candidate_from(jg.at("selected"));
          for (const auto& c : jg.at("frontier")) g.frontier.push_back(candidate_from(c));
          m.groups.push_back(std::move(g));
        }
      }
      r.members.push_back(std::move(m));
    }
    if (r.members.empty() || r.best_member < 0 || r.best_member >= static_cast<int>(r.members.size())) {
      throw ConfigError("result has no valid best member");
    }
    return r;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed discovery result: ") + e.what());
  } catch (const expr::ParseError& e) {
    throw ConfigError(std::string("malformed expression in discovery result: ") + e.what());
  }
}

json comparable(const json& result_json) {
  json j = result_json;
  j.erase("created");
  return j;
}

DiscoveryResult cmd_discover(const RunConfig& config, int workers) {
  const graph::LaplacianSystem system = load_system(config);
  const cohort::Cohort co = load_cohort_file(config);
  const DiscoveryResult r = discover(co, system, config, workers);
  const fs::path out = config.resolve(config.output);
  write_json(out / "discovery.json", to_json(r));
  for (const auto& m : r.members) {
    for (const auto& g : m.groups) {
      symreg::write_frontier_csv(out / ("frontier_member" + std::to_string(m.index) + "_" +
                                        safe_name(g.label) + ".csv"),
                                 g.frontier);
    }
  }
  return r;
}

// ----------------------------------------------------------- project/report

namespace {

struct Loaded {
  graph::LaplacianSystem system;
  cohort::Cohort cohort;
  DiscoveryResult result;
};

Loaded load_all(const RunConfig& config, const fs::path& result_file) {
  Loaded l{load_system(config), load_cohort_file(config), discovery_from_json(read_json(result_file))};
  return l;
}

std::vector<fs::path> write_projections(const RunConfig& config, const Loaded& l, const fs::path& dir) {
  const std::vector<int> cols = region_columns(config, l.system);
  const auto labels = node_labels(l.system);
  std::vector<const cohort::Subject*> subjects;
  if (config.subject_ids.empty()) {
    for (const auto& s : l.cohort.subjects) subjects.push_back(&s);
  } else {
    for (const auto& id : config.subject_ids) {
      try {
        subjects.push_back(&l.cohort.subject(id));
      } catch (const std::out_of_range&) {
        throw ConfigError("unknown subject id '" + id + "'");
      }
    }
  }
  std::vector<fs::path> written;
  for (const auto* s : subjects) {
    std::vector<evalproj::ProjectionResult> runs;
    std::vector<Eigen::MatrixXd> trajectories;
    int best = 0;
    for (const auto& m : l.result.members) {
      if (!m.ok()) continue;
      const auto models = member_models(m);
      const auto it = models.find(s->id);
      if (it == models.end()) throw ConfigError("result has no model for subject " + s->id);
      if (m.index == l.result.best_member) best = static_cast<int>(runs.size());
      runs.push_back(evalproj::project(l.system, *s, it->second, config.horizon, config.step));
      trajectories.push_back(runs.back().trajectory);
    }
    if (runs.empty()) throw std::runtime_error("no successful members to project");
    const fs::path p = dir / ("projection_" + safe_name(s->id) + ".csv");
    auto out = open_out(p);
    evalproj::write_projection_csv(out, runs, labels, cols);
    written.push_back(p);
    const fs::path b = dir / ("band_" + safe_name(s->id) + ".csv");
    auto bout = open_out(b);
    evalproj::write_band_csv(bout, evalproj::band(trajectories, runs.front().t_grid, best), labels, cols);
    written.push_back(b);
  }
  return written;
}

}  // namespace

std::vector<fs::path> cmd_project(const RunConfig& config, const fs::path& result_file) {
  const Loaded l = load_all(config, result_file);
  return write_projections(config, l, config.resolve(config.output) / "projection");
}

double silverman_bandwidth(const std::vector<double>& sample) {
  if (sample.empty()) throw std::invalid_argument("kernel density of an empty sample");
  const auto n = static_cast<double>(sample.size());
  const double mean = std::accumulate(sample.begin(), sample.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : sample) ss += (x - mean) * (x - mean);
  const double sd = sample.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  std::vector<double> s = sample;
  std::sort(s.begin(), s.end());
  const auto q = [&](double p) {
    const double pos = p * (n - 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, s.size() - 1);
    return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
  };
  const double iqr = q(0.75) - q(0.25);
  double spread = sd;
  if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
  double h = 0.9 * spread * std::pow(n, -0.2);
  if (!(h > 0.0)) h = std::max(0.1 * std::abs(mean), 1e-3);  // degenerate sample
  return h;
}

std::vector<std::pair<double, double>> kernel_density(const std::vector<double>& sample, int points) {
  const double h = silverman_bandwidth(sample);
  const auto [lo_it, hi_it] = std::minmax_element(sample.begin(), sample.end());
  const double lo = *lo_it - 4.0 * h, hi = *hi_it + 4.0 * h;
  const double norm = 1.0 / (static_cast<double>(sample.size()) * h * std::sqrt(2.0 * M_PI));
  std::vector<std::pair<double, double>> out;
  for (int k = 0; k < points; ++k) {
    const double x = lo + (hi - lo) * k / (points - 1);
    double d = 0.0;
    for (double v : sample) d += std::exp(-0.5 * ((x - v) / h) * ((x - v) / h));
    out.emplace_back(x, d * norm);
  }
  return out;
}

std::vector<fs::path> cmd_report(const RunConfig& config, const fs::path& result_file) {
  const Loaded l = load_all(config, result_file);
  const fs::path dir = config.resolve(config.output) / "report";
  std::vector<fs::path> written;
  const MemberResult& best = l.result.members[static_cast<std::size_t>(l.result.best_member)];
  if (!best.ok()) throw std::runtime_error("best member has no trained state");

  for (const char* which : {"kappa", "alpha"}) {
    std::vector<double> v;
    for (const auto& s : best.trained->subjects) v.push_back(which[0] == 'k' ? s.kappa : s.alpha);
    const fs::path p = dir / (std::string("density_") + which + ".csv");
    auto out = open_out(p);
    out.precision(12);
    out << "value,density\n";
    for (const auto& [x, d] : kernel_density(v)) out << x << ',' << d << '\n';
    written.push_back(p);
  }

  const pinn::GraphProblem problem(l.cohort, l.system, config.pinn);
  for (const auto& label : l.result.group_labels) {
    const int g = problem.group_index(label);
    const auto f_phi = pinn::reaction_function(
        config.pinn.reaction, best.trained->groups[static_cast<std::size_t>(g)].reaction);
    std::vector<expr::Expression> syms;
    for (const auto& m : l.result.members) {
      if (m.ok()) syms.push_back(member_reaction(m, label));
    }
    const auto best_sym = member_reaction(best, label);
    const auto truth = l.cohort.true_reaction(label);
    const fs::path p = dir / ("f_curves_" + safe_name(label) + ".csv");
    auto out = open_out(p);
    out.precision(12);
    out << "c,f_phi,f_sym,f_sym_min,f_sym_max" << (truth ? ",f_true" : "") << '\n';
    for (int k = 0; k <= 100; ++k) {
      const double c = k / 100.0;
      const std::span<const double> x(&c, 1);
      double lo = kInf, hi = -kInf;
      for (const auto& e : syms) {
        const double v = expr::eval(e, x);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      out << c << ',' << f_phi(c) << ',' << expr::eval(best_sym, x) << ',' << lo << ',' << hi;
      if (truth) out << ',' << expr::eval(*truth, x);
      out << '\n';
    }
    written.push_back(p);
    for (const auto& gd : best.groups) {
      if (gd.label != label) continue;
      const fs::path fp = dir / ("frontier_" + safe_name(label) + ".csv");
      symreg::write_frontier_csv(fp, gd.frontier);
      written.push_back(fp);
    }
  }
  const auto bands = write_projections(config, l, dir);
  written.insert(written.end(), bands.begin(), bands.end());
  return written;
}

// ----------------------------------------------------------------- ablation

double sup_error(const graph::ReactionFn& g, const graph::ReactionFn& f, double lo, double hi) {
  double worst = 0.0;
  for (int k = 0; k <= 1000; ++k) {
    const double c = lo + (hi - lo) * k / 1000.0;
    const double e = std::abs(g(c) - f(c));
    worst = std::isfinite(e) ? std::max(worst, e) : kInf;
  }
  return worst;
}

std::vector<AblationCell> run_ablation(const RunConfig& config, int workers) {
  const graph::LaplacianSystem system = load_system(config);
  std::vector<AblationCell> cells;
  for (double horizon : config.ablation_horizons) {
    RunConfig cfg = config;
    cfg.cohort_gen.times.clear();
    for (int t = 0; t <= static_cast<int>(std::floor(horizon + 1e-9)); ++t) {
      cfg.cohort_gen.times.push_back(t);
    }
    const cohort::Cohort co = cohort::generate_cohort(cfg.cohort_gen, system, config.seed);
    const std::string label = co.group_labels().front();
    const auto truth = graph::reaction_from_expression(*co.true_reaction(label));
    for (auto mode : config.ablation_modes) {
      cfg.pinn.reaction.mode = mode;
      const DiscoveryResult r = discover(co, system, cfg, workers);
      const MemberResult& best = r.members[static_cast<std::size_t>(r.best_member)];
      if (!best.ok()) throw std::runtime_error("ablation cell failed: " + best.error);
      AblationCell cell;
      cell.horizon = horizon;
      cell.mode = mode;
      const auto f_phi = pinn::reaction_function(cfg.pinn.reaction, best.trained->groups.front().reaction);
      const auto f_sym = graph::reaction_from_expression(member_reaction(best, label));
      cell.f_sym = expr::format(member_reaction(best, label));
      cell.f_phi_error = sup_error(f_phi, truth, 0.0, 1.0);
      cell.f_phi_error_high = sup_error(f_phi, truth, 0.7, 1.0);
      cell.f_sym_error = sup_error(f_sym, truth, 0.0, 1.0);
      for (const auto& s : best.trained->subjects) {
        const double k0 = *co.subject(s.id).true_kappa;
        cell.kappa_rel_error = std::max(cell.kappa_rel_error, std::abs(s.kappa - k0) / k0);
      }
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

std::vector<AblationCell> cmd_ablate(const RunConfig& config, int workers) {
  const auto cells = run_ablation(config, workers);
  const fs::path out = config.resolve(config.output);
  json rows = json::array();
  auto csv = open_out(out / "ablation.csv");
  csv.precision(12);
  csv << "horizon,constraint_mode,f_phi_error,f_phi_error_high,f_sym_error,kappa_rel_error,f_sym\n";
  for (const auto& c : cells) {
    rows.push_back({{"horizon", c.horizon},
                    {"constraint_mode", pinn::to_string(c.mode)},
                    {"f_sym", c.f_sym},
                    {"f_phi_error", num(c.f_phi_error)},
                    {"f_phi_error_high", num(c.f_phi_error_high)},
                    {"f_sym_error", num(c.f_sym_error)},
                    {"kappa_rel_error", num(c.kappa_rel_error)}});
    csv << c.horizon << ',' << pinn::to_string(c.mode) << ',' << c.f_phi_error << ','
        << c.f_phi_error_high << ',' << c.f_sym_error << ',' << c.kappa_rel_error << ",\"" << c.f_sym
        << "\"\n";
  }
  write_json(out / "ablation.json", {{"seed", config.seed}, {"cells", rows}});
  return cells;
}

// ---------------------------------------------------------------------- KO

kodemo::KoReport cmd_ko(const RunConfig& config) {
  const kodemo::KoReport r = kodemo::ko_discover(config.ko, config.seed, config.ko_train, config.ko_symreg);
  write_json(config.resolve(config.output) / "ko_report.json", kodemo::to_json(r));
  return r;
}

}  // namespace rdsym::pipeline
