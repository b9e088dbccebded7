// Command-line driver: runs single algorithms, comparison suites, replays of
// trajectory files through the servo models, and model diagnostics.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fosep/fosep.hpp"
#include "svg_plot.hpp"

namespace fs = std::filesystem;
using fosep::Algorithm;
using fosep::ExperimentConfig;
using fosep::RunResult;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitConfig = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitNumerical = 4;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

// Value as it reads back from the CSV files.
double as_written(double v) { return std::stod(fmt(v)); }

std::string quote(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return "\"" + out + "\"";
}

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_file(const fs::path& file, const std::string& content) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write '" + file.string() + "'");
  out << content;
  if (!out) throw IoError("failed writing '" + file.string() + "'");
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

std::string trajectory_csv(const RunResult& r) {
  std::string out = "t,s,x_d,y_d,x_dm,y_dm,feedrate,ax,ay,jx,jy\n";
  const auto& c = r.commands;
  for (std::size_t k = 0; k < c.size(); ++k) {
    out += fmt(static_cast<double>(k) * c.sample_time) + "," + fmt(c.s[k]) + "," + fmt(c.x_d[k]) + "," +
           fmt(c.y_d[k]) + "," + fmt(r.x_dm[k]) + "," + fmt(r.y_dm[k]) + "," + fmt(c.feedrate[k]) + "," +
           fmt(c.ax[k]) + "," + fmt(c.ay[k]) + "," + fmt(c.jx[k]) + "," + fmt(c.jy[k]) + "\n";
  }
  return out;
}

std::string ce_csv(const fosep::ContourResult& ce, double ts) {
  std::string out = "t,ce_estimated,ce_exact\n";
  for (std::size_t k = 0; k < ce.estimated_um.size(); ++k) {
    out += fmt(static_cast<double>(k) * ts) + "," + fmt(ce.estimated_um[k]) + "," + fmt(ce.exact_um[k]) + "\n";
  }
  return out;
}

double max_abs_written(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(as_written(x)));
  return m;
}

nlohmann::json summary_json(const RunResult& r, const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["algorithm"] = fosep::to_string(r.algorithm);
  j["limits"] = r.limits;
  j["cycle_time_s"] = as_written(r.cycle_time);
  j["compute_time_s"] = r.compute_time;
  j["compute_time_note"] = "wall clock of formulation and solve; machine-dependent";
  j["max_ce_estimated_um"] = max_abs_written(r.contour.estimated_um);
  j["max_ce_simulated_um"] = max_abs_written(r.contour.exact_um);
  if (r.max_ce_linearized_um) j["max_ce_linearized_um"] = as_written(*r.max_ce_linearized_um);
  if (cfg.ce_limit_um && (r.algorithm == Algorithm::kFoTime || r.algorithm == Algorithm::kFoSep)) {
    j["ce_limit_um"] = *cfg.ce_limit_um;
  }
  if (!r.initialization.empty()) j["initialization"] = r.initialization;
  j["horizon_samples"] = r.commands.size();
  j["sample_time_s"] = cfg.sample_time;
  j["jerk_constraints"] = cfg.jerk;
  j["dc_normalize"] = cfg.dc_normalize;
  j["lp_iterations"] = r.lp_iterations;
  j["lp_max_violation"] = r.lp_max_violation;
  if (!r.passes.empty()) {
    auto arr = nlohmann::json::array();
    for (const auto& p : r.passes) arr.push_back({{"pass", p.pass}, {"cycle_time_s", p.cycle_time}, {"status", p.status}});
    j["passes"] = arr;
  }
  if (cfg.seed) j["seed"] = *cfg.seed;
  return j;
}

void write_plots(const fs::path& dir, const RunResult& r) {
  const auto& c = r.commands;
  std::vector<double> t(c.size());
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = static_cast<double>(k) * c.sample_time;
  const std::string name = fosep::to_string(r.algorithm);
  using fosep::plot::Panel;
  using fosep::plot::Series;
  const std::vector<Panel> kin{
      {"feedrate [mm/s]", {Series{"feedrate", t, c.feedrate, "#1f77b4"}}},
      {"acceleration [m/s^2]", {Series{"x", t, c.ax, "#d62728"}, Series{"y", t, c.ay, "#2ca02c"}}},
      {"jerk [m/s^3]", {Series{"x", t, c.jx, "#d62728"}, Series{"y", t, c.jy, "#2ca02c"}}},
  };
  if (!fosep::plot::write_svg((dir / "kinematics.svg").string(), name + ": commanded kinematics", "time [s]", kin)) {
    throw IoError("cannot write kinematics.svg");
  }
  const std::vector<Panel> ce{{"contour error [um]",
                               {Series{"estimated", t, r.contour.estimated_um, "#1f77b4"},
                                Series{"exact", t, r.contour.exact_um, "#ff7f0e"}}}};
  if (!fosep::plot::write_svg((dir / "ce.svg").string(), name + ": simulated contour error", "time [s]", ce)) {
    throw IoError("cannot write ce.svg");
  }
}

void write_run(const fs::path& dir, const RunResult& r, const ExperimentConfig& cfg) {
  make_dir(dir);
  write_file(dir / "trajectory.csv", trajectory_csv(r));
  write_file(dir / "ce.csv", ce_csv(r.contour, r.commands.sample_time));
  write_file(dir / "summary.json", summary_json(r, cfg).dump(2) + "\n");
  write_plots(dir, r);
}

struct Overrides {
  std::optional<std::string> algorithm;
  std::optional<std::string> limits;
  std::optional<std::string> ce_limit;
  bool no_dc_normalize = false;
  bool no_jerk = false;
  std::optional<int> passes;
  std::optional<long long> seed;
};

ExperimentConfig load(const std::string& file, const Overrides& o) {
  ExperimentConfig cfg = fosep::load_config(file);
  if (o.algorithm) cfg.algorithm = fosep::parse_algorithm(*o.algorithm);
  if (o.limits) cfg.limits = *o.limits;
  if (o.ce_limit) {
    if (*o.ce_limit == "none") {
      cfg.ce_limit_um.reset();
    } else {
      try {
        std::size_t used = 0;
        cfg.ce_limit_um = std::stod(*o.ce_limit, &used);
        if (used != o.ce_limit->size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw fosep::ConfigError("--ce-limit-um expects a number or 'none'");
      }
    }
  }
  if (o.no_dc_normalize) cfg.dc_normalize = false;
  if (o.no_jerk) cfg.jerk = false;
  if (o.passes) cfg.passes = *o.passes;
  if (o.seed) cfg.seed = *o.seed;
  cfg.validate();
  return cfg;
}

int cmd_run(const ExperimentConfig& cfg, const fs::path& out) {
  const fosep::Experiment exp(cfg);
  const RunResult r = exp.run();
  write_run(out, r, cfg);
  std::cout << "algorithm=" << fosep::to_string(r.algorithm) << " cycle_time_s=" << fmt(r.cycle_time)
            << " max_ce_estimated_um=" << fmt(r.contour.max_estimated_um)
            << " max_ce_simulated_um=" << fmt(r.contour.max_exact_um) << "\n";
  return kExitOk;
}

struct Cell {
  std::string group;
  std::string label;
  std::string slug;
  ExperimentConfig cfg;
};

int cmd_compare(const ExperimentConfig& base, const std::string& suite, const fs::path& out) {
  std::vector<Cell> cells;
  if (suite == "table1") {
    for (bool jerk : {false, true}) {
      const std::string group = jerk ? "w/ jerk constraints" : "w/o jerk constraints";
      for (Algorithm alg : {Algorithm::kFoTime, Algorithm::kFoPath}) {
        ExperimentConfig c = base;
        c.algorithm = alg;
        c.jerk = jerk;
        c.ce_limit_um.reset();
        const std::string label = alg == Algorithm::kFoTime ? "Time-based LP" : "Path-based LP";
        const std::string slug = std::string(alg == Algorithm::kFoTime ? "time" : "path") + (jerk ? "_jerk" : "_nojerk");
        cells.push_back({group, label, slug, c});
      }
    }
  } else if (suite == "table2") {
    if (!base.ce_limit_um) throw fosep::ConfigError("table2 needs ce_limit_um");
    for (Algorithm alg : {Algorithm::kFoTime, Algorithm::kFoSep}) {
      ExperimentConfig c = base;
      c.algorithm = alg;
      cells.push_back({"", alg == Algorithm::kFoTime ? "FO" : "FO + SEP", alg == Algorithm::kFoTime ? "fo" : "fo_sep", c});
    }
  } else {
    throw fosep::ConfigError("unknown suite '" + suite + "' (expected table1 or table2)");
  }

  std::vector<RunResult> results;
  for (const auto& cell : cells) results.push_back(fosep::Experiment(cell.cfg).run());

  make_dir(out);
  std::ostringstream table;
  char line[256];
  std::snprintf(line, sizeof line, "%-22s %-16s %14s %20s %18s %18s\n", "", "FO algorithm", "Cycle time [s]",
                "Computation time [s]", "max CE est. [um]", "max CE exact [um]");
  table << line;
  auto report = nlohmann::json::array();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& r = results[i];
    std::snprintf(line, sizeof line, "%-22s %-16s %14.3f %20.3f %18.2f %18.2f\n",
                  (i == 0 || cells[i].group != cells[i - 1].group) ? cells[i].group.c_str() : "",
                  cells[i].label.c_str(), r.cycle_time, r.compute_time, r.contour.max_estimated_um,
                  r.contour.max_exact_um);
    table << line;
    write_run(out / cells[i].slug, r, cells[i].cfg);
    nlohmann::json row = summary_json(r, cells[i].cfg);
    row["group"] = cells[i].group;
    row["label"] = cells[i].label;
    row["directory"] = cells[i].slug;
    report.push_back(row);
  }
  table << "(computation time is machine-dependent)\n";
  write_file(out / "report.txt", table.str());
  write_file(out / "report.json", report.dump(2) + "\n");
  std::cout << table.str();
  return kExitOk;
}

// Minimal reader for the CSV files this tool writes.
std::map<std::string, std::vector<double>> read_csv(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw fosep::ConfigError("cannot read trajectory file '" + file + "'");
  std::string header;
  if (!std::getline(in, header)) throw fosep::ConfigError("trajectory file is empty");
  std::vector<std::string> names;
  std::stringstream hs(header);
  for (std::string col; std::getline(hs, col, ',');) {
    if (!col.empty() && col.back() == '\r') col.pop_back();
    names.push_back(col);
  }
  std::map<std::string, std::vector<double>> cols;
  std::size_t row = 1;
  for (std::string l; std::getline(in, l);) {
    ++row;
    if (l.empty()) continue;
    std::stringstream ls(l);
    std::size_t i = 0;
    for (std::string cell; std::getline(ls, cell, ','); ++i) {
      if (i >= names.size()) throw fosep::ConfigError("row " + std::to_string(row) + " has too many fields");
      try {
        cols[names[i]].push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw fosep::ConfigError("row " + std::to_string(row) + ": not a number '" + cell + "'");
      }
    }
    if (i != names.size()) throw fosep::ConfigError("row " + std::to_string(row) + " has too few fields");
  }
  return cols;
}

int cmd_simulate(const ExperimentConfig& cfg, const std::string& trajectory, const fs::path& out) {
  auto cols = read_csv(trajectory);
  for (const char* need : {"s", "x_d", "y_d"}) {
    if (!cols.count(need)) throw fosep::ConfigError(std::string("trajectory file lacks column '") + need + "'");
  }
  const bool has_modified = cols.count("x_dm") && cols.count("y_dm");
  const fosep::Experiment exp(cfg);
  // Commands are replayed as given: a file with x_dm/y_dm already carries its pre-compensation.
  // Deviations are taken from the desired start point, like every other simulation.
  const auto replay = [](const fosep::DiscreteTransferFunction& g, const std::vector<double>& cmd, double origin) {
    Eigen::VectorXd u(static_cast<Eigen::Index>(cmd.size()));
    for (Eigen::Index k = 0; k < u.size(); ++k) u(k) = cmd[static_cast<std::size_t>(k)] - origin;
    const Eigen::VectorXd out = fosep::simulate(g, u);
    std::vector<double> pos(cmd.size());
    for (Eigen::Index k = 0; k < out.size(); ++k) pos[static_cast<std::size_t>(k)] = out(k) + origin;
    return pos;
  };
  const std::vector<double> x = replay(exp.model_x(), has_modified ? cols["x_dm"] : cols["x_d"], cols["x_d"].front());
  const std::vector<double> y = replay(exp.model_y(), has_modified ? cols["y_dm"] : cols["y_d"], cols["y_d"].front());
  const fosep::ContourResult ce = fosep::contour_errors(exp.path(), cols["s"], cols["x_d"], cols["y_d"], x, y);
  make_dir(out);
  write_file(out / "ce.csv", ce_csv(ce, cfg.sample_time));
  nlohmann::json j;
  j["algorithm"] = "simulate";
  j["source"] = trajectory;
  j["used_modified_commands"] = has_modified;
  j["max_ce_estimated_um"] = max_abs_written(ce.estimated_um);
  j["max_ce_simulated_um"] = max_abs_written(ce.exact_um);
  write_file(out / "summary.json", j.dump(2) + "\n");
  std::cout << "max_ce_estimated_um=" << fmt(ce.max_estimated_um) << " max_ce_simulated_um=" << fmt(ce.max_exact_um)
            << "\n";
  return kExitOk;
}

int cmd_info(const ExperimentConfig& cfg) {
  const fosep::Experiment exp(cfg);
  const auto raw = [&](const fosep::ModelCoefficients& c) {
    return fosep::DiscreteTransferFunction(c.num, c.den, cfg.sample_time);
  };
  const auto describe = [&](const char* axis, const fosep::ModelCoefficients& c, const fosep::DiscreteTransferFunction& used) {
    const auto r = raw(c);
    std::cout << "axis=" << axis << " raw_dc_gain=" << fmt(fosep::dc_gain(r))
              << " raw_spectral_radius=" << fmt(fosep::spectral_radius(r)) << " used_dc_gain=" << fmt(fosep::dc_gain(used))
              << " used_spectral_radius=" << fmt(fosep::spectral_radius(used)) << "\n";
  };
  describe("x", cfg.model_x, exp.model_x());
  describe("y", cfg.model_y, exp.model_y());
  const auto rows = static_cast<int>(exp.initial_trajectory(cfg.limits).size());
  const auto cx = fosep::Compensator::build(exp.model_x(), rows, cfg.fbs_x.control_points, cfg.fbs_x.degree, cfg.knots);
  const auto cy = fosep::Compensator::build(exp.model_y(), rows, cfg.fbs_y.control_points, cfg.fbs_y.degree, cfg.knots);
  std::cout << "fbs_rows=" << rows << " condition_x=" << fmt(cx.condition_number())
            << " condition_y=" << fmt(cy.condition_number()) << "\n";
  std::cout << "path_length_mm=" << fmt(exp.path().length()) << " limits=" << cfg.limits << "\n";
  return kExitOk;
}

void fail(const std::string& kind, const std::string& reason, const std::string& extra = "") {
  std::cerr << "error=" << kind << extra << " reason=" << quote(reason) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feedrate optimization with servo error pre-compensation"};
  app.require_subcommand(1);
  std::string config;
  std::string out = "out";
  std::string suite;
  std::string trajectory;
  Overrides o;

  const auto common = [&](CLI::App* sub, bool with_out) {
    sub->add_option("--config", config, "configuration file (JSON)")->required();
    if (with_out) sub->add_option("--out", out, "output directory");
    sub->add_option("--alg", o.algorithm, "tap | fo-time | fo-sep | fo-path");
    sub->add_option("--limits", o.limits, "name of the limit set");
    sub->add_option("--ce-limit-um", o.ce_limit, "contour-error limit in um, or 'none'");
    sub->add_flag("--no-dc-normalize", o.no_dc_normalize, "use the models' raw DC gain");
    sub->add_flag("--no-jerk", o.no_jerk, "drop the jerk constraints");
    sub->add_option("--passes", o.passes, "linearization passes for the time-based LP");
    sub->add_option("--seed", o.seed, "reserved; all algorithms are deterministic");
  };
  CLI::App* run = app.add_subcommand("run", "run one algorithm and write its artifacts");
  common(run, true);
  CLI::App* compare = app.add_subcommand("compare", "run a comparison suite");
  common(compare, true);
  compare->add_option("--suite", suite, "table1 | table2")->required();
  CLI::App* sim = app.add_subcommand("simulate", "replay a trajectory CSV through the servo models");
  common(sim, true);
  sim->add_option("--trajectory", trajectory, "trajectory CSV with s, x_d, y_d (and optionally x_dm, y_dm)")->required();
  CLI::App* info = app.add_subcommand("info", "print model DC gains and compensator conditioning");
  common(info, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    fail("config", e.what());
    return kExitConfig;
  }

  try {
    const ExperimentConfig cfg = load(config, o);
    if (run->parsed()) return cmd_run(cfg, out);
    if (compare->parsed()) return cmd_compare(cfg, suite, out);
    if (sim->parsed()) return cmd_simulate(cfg, trajectory, out);
    return cmd_info(cfg);
  } catch (const fosep::ConfigError& e) {
    fail("config", e.what());
    return kExitConfig;
  } catch (const fosep::ArgumentError& e) {
    fail("config", e.what());
    return kExitConfig;
  } catch (const fosep::GeometryError& e) {
    fail("config", e.what());
    return kExitConfig;
  } catch (const fosep::InfeasibleError& e) {
    fail("infeasible", e.what(), " family=" + e.family());
    return kExitInfeasible;
  } catch (const fosep::NumericalError& e) {
    fail("numerical", e.what());
    return kExitNumerical;
  } catch (const fosep::RankDeficiencyError& e) {
    fail("numerical", e.what());
    return kExitNumerical;
  } catch (const IoError& e) {
    fail("io", e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    fail("numerical", e.what());
    return kExitNumerical;
  }
}
