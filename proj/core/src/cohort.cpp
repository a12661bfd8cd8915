#include "rdsym/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

namespace rdsym::cohort {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t root, std::string_view tag,
                          std::uint64_t index) {
  // FNV-1a over the tag keeps the mapping stable across platforms.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char ch : tag) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  return splitmix64(splitmix64(root ^ h) + index);
}

std::vector<std::string> Cohort::group_labels() const {
  std::vector<std::string> out;
  for (const auto& s : subjects) {
    if (std::find(out.begin(), out.end(), s.group) == out.end()) out.push_back(s.group);
  }
  return out;
}

const Subject& Cohort::subject(const std::string& id) const {
  for (const auto& s : subjects) {
    if (s.id == id) return s;
  }
  throw std::out_of_range("unknown subject '" + id + "'");
}

std::optional<expr::Expression> Cohort::true_reaction(const std::string& group) const {
  for (const auto& [label, e] : true_reactions) {
    if (label == group) return e;
  }
  return std::nullopt;
}

void Cohort::validate() const {
  if (node_count < 1) throw std::invalid_argument("cohort: node_count < 1");
  if (subjects.empty()) throw std::invalid_argument("cohort: no subjects");
  std::set<std::string> ids;
  for (const auto& s : subjects) {
    if (!ids.insert(s.id).second) {
      throw std::invalid_argument("cohort: duplicate subject id '" + s.id + "'");
    }
    if (s.times.size() < 2) {
      throw std::invalid_argument("subject " + s.id + " needs >= 2 observation times");
    }
    for (Eigen::Index k = 1; k < s.times.size(); ++k) {
      if (!(s.times[k] > s.times[k - 1])) {
        throw std::invalid_argument("subject " + s.id + ": times not increasing");
      }
    }
    if (s.concentrations.rows() != s.times.size() ||
        s.concentrations.cols() != node_count) {
      throw std::invalid_argument("subject " + s.id + ": concentration shape");
    }
    if (!s.concentrations.allFinite() || s.concentrations.minCoeff() < 0.0 ||
        s.concentrations.maxCoeff() > 1.0) {
      throw std::invalid_argument("subject " + s.id +
                                  ": concentrations must lie in [0, 1]");
    }
  }
}

expr::Expression table1_reaction(int group) {
  using expr::Expression;
  const Expression c = Expression::variable(0);
  const Expression one = Expression::constant(1.0);
  switch (group) {
    case 1:
      return c * (one - c);
    case 2:
      return Expression::constant(3.0 * std::sqrt(3.0) / 8.0) * (c * (one - c * c));
    case 3:
      return Expression::constant(std::cbrt(4.0) / 3.0) * (c * (one - c * c * c));
    case 4: {
      const double k = (std::sqrt(5.0) + 2.0) / 4.0;
      const double shift = -1.0 - (std::sqrt(5.0) - 3.0) / 2.0;
      return Expression::constant(k) * (c * (one - c)) *
             expr::exp(c + Expression::constant(shift));
    }
    default:
      throw std::out_of_range("table1_reaction: group must be in 1..4");
  }
}

std::vector<GroupSpec> CohortConfig::resolved_groups() const {
  if (!groups.empty()) return groups;
  std::vector<GroupSpec> out;
  for (int g = 1; g <= 4; ++g) out.push_back({"group" + std::to_string(g), table1_reaction(g)});
  return out;
}

double sample_positive_normal(double mean, double sd, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(mean, sd);
  for (int attempt = 0; attempt < 1'000'000; ++attempt) {
    const double v = dist(rng);
    if (v > 0.0) return v;
  }
  throw std::runtime_error("truncated normal rejection sampling did not terminate");
}

Cohort generate_cohort(const CohortConfig& config,
                       const graph::LaplacianSystem& system, std::uint64_t seed) {
  if (config.subjects_per_group < 1) {
    throw std::invalid_argument("subjects_per_group must be positive");
  }
  if (config.times.size() < 2) throw std::invalid_argument("need >= 2 observation times");
  system.validate();
  const auto groups = config.resolved_groups();
  if (groups.empty()) throw std::invalid_argument("no groups configured");
  for (const auto& g : groups) {
    for (int k = 0; k <= 100; ++k) {
      const double c = k / 100.0;
      if (!std::isfinite(expr::eval(g.reaction, std::span<const double>(&c, 1)))) {
        throw std::invalid_argument("reaction for group " + g.label +
                                    " is not finite on [0, 1]");
      }
    }
  }

  std::mt19937_64 rng(derive_seed(seed, "cohort"));
  std::normal_distribution<double> unit(0.0, 1.0);
  const Eigen::VectorXd t_grid =
      Eigen::Map<const Eigen::VectorXd>(config.times.data(),
                                        static_cast<Eigen::Index>(config.times.size()));
  const int n = system.size();

  Cohort cohort;
  cohort.node_count = n;
  for (const auto& g : groups) cohort.true_reactions.emplace_back(g.label, g.reaction);

  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& g = groups[gi];
    const double alpha_group = config.alpha_group_mean + config.alpha_group_sd * unit(rng);
    const auto f = graph::reaction_from_expression(g.reaction);
    for (int s = 0; s < config.subjects_per_group; ++s) {
      graph::SubjectParams p;
      p.kappa = sample_positive_normal(config.kappa_mean, config.kappa_sd, rng);
      p.alpha = alpha_group + config.alpha_subject_sd * unit(rng);
      p.c0.resize(n);
      for (int i = 0; i < n; ++i) {
        double v;
        if (config.initial.kind == InitialLaw::Kind::kNormal) {
          v = config.initial.a + config.initial.b * unit(rng);
        } else {
          v = config.initial.a + (config.initial.b - config.initial.a) *
                                     std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        }
        p.c0[i] = std::clamp(v, 0.0, 1.0);
      }
      Subject subj;
      subj.id = g.label + "-s" + std::to_string(s + 1);
      subj.group = g.label;
      subj.times = t_grid;
      subj.concentrations = graph::integrate(system, p, f, t_grid);
      if (config.noise_sd > 0.0) {
        for (Eigen::Index r = 0; r < subj.concentrations.rows(); ++r) {
          for (Eigen::Index c = 0; c < subj.concentrations.cols(); ++c) {
            subj.concentrations(r, c) += config.noise_sd * unit(rng);
          }
        }
      }
      subj.concentrations = subj.concentrations.cwiseMax(0.0).cwiseMin(1.0);
      subj.true_kappa = p.kappa;
      subj.true_alpha = p.alpha;
      cohort.subjects.push_back(std::move(subj));
    }
  }
  cohort.validate();
  return cohort;
}

nlohmann::json to_json(const Cohort& cohort) {
  nlohmann::json j;
  j["format_version"] = kCohortFormatVersion;
  j["node_count"] = cohort.node_count;
  if (!cohort.true_reactions.empty()) {
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& [label, e] : cohort.true_reactions) {
      groups.push_back({{"label", label}, {"reaction", expr::format(e)}});
    }
    j["groups"] = groups;
  }
  nlohmann::json subjects = nlohmann::json::array();
  for (const auto& s : cohort.subjects) {
    nlohmann::json js;
    js["id"] = s.id;
    js["group"] = s.group;
    js["times"] = std::vector<double>(s.times.data(), s.times.data() + s.times.size());
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < s.concentrations.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(s.concentrations.cols()));
      for (Eigen::Index c = 0; c < s.concentrations.cols(); ++c) {
        row[static_cast<std::size_t>(c)] = s.concentrations(r, c);
      }
      rows.push_back(row);
    }
    js["concentrations"] = rows;
    if (s.true_kappa) js["kappa"] = *s.true_kappa;
    if (s.true_alpha) js["alpha"] = *s.true_alpha;
    subjects.push_back(std::move(js));
  }
  j["subjects"] = subjects;
  return j;
}

Cohort cohort_from_json(const nlohmann::json& j) {
  if (!j.contains("format_version") || j.at("format_version").get<int>() != kCohortFormatVersion) {
    throw std::invalid_argument("cohort: unsupported or missing format_version");
  }
  Cohort cohort;
  cohort.node_count = j.at("node_count").get<int>();
  if (j.contains("groups")) {
    for (const auto& g : j.at("groups")) {
      cohort.true_reactions.emplace_back(g.at("label").get<std::string>(),
                                         expr::parse(g.at("reaction").get<std::string>()));
    }
  }
  for (const auto& js : j.at("subjects")) {
    Subject s;
    s.id = js.at("id").get<std::string>();
    s.group = js.at("group").get<std::string>();
    const auto times = js.at("times").get<std::vector<double>>();
    s.times = Eigen::Map<const Eigen::VectorXd>(times.data(),
                                                static_cast<Eigen::Index>(times.size()));
    const auto rows = js.at("concentrations").get<std::vector<std::vector<double>>>();
    s.concentrations.resize(static_cast<Eigen::Index>(rows.size()), cohort.node_count);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (static_cast<int>(rows[r].size()) != cohort.node_count) {
        throw std::invalid_argument("subject " + s.id + ": row width != node_count");
      }
      for (int c = 0; c < cohort.node_count; ++c) {
        s.concentrations(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
      }
    }
    if (js.contains("kappa")) s.true_kappa = js.at("kappa").get<double>();
    if (js.contains("alpha")) s.true_alpha = js.at("alpha").get<double>();
    cohort.subjects.push_back(std::move(s));
  }
  cohort.validate();
  return cohort;
}

void save_cohort(const std::filesystem::path& path, const Cohort& cohort) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write cohort file " + path.string());
  out << to_json(cohort).dump(2) << '\n';
}

Cohort load_cohort(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open cohort file " + path.string());
  return cohort_from_json(nlohmann::json::parse(in));
}

}  // namespace rdsym::cohort
