#include "cdwmf/io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#ifndef CDWMF_VERSION
#define CDWMF_VERSION "0.0.0"
#endif

namespace cdwmf {

namespace {

double num(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.at(key).get<double>();
}

SolveStatus status_from_string(const std::string& s) {
  if (s == "converged") return SolveStatus::converged;
  if (s == "collapsed") return SolveStatus::collapsed;
  return SolveStatus::not_converged;
}

std::string csv_num(double x) {
  if (!std::isfinite(x)) return "nan";
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

std::string prov_lines(const json& prov) {
  std::string out = "# schema_version=" + std::string(schema_version) + "\n";
  out += "# provenance=" + prov.dump() + "\n";
  return out;
}

}  // namespace

std::string code_version() { return CDWMF_VERSION; }

void write_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  std::ostringstream tag;
  tag << std::this_thread::get_id();
  const fs::path tmp = target.string() + ".tmp." + tag.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json provenance(const json& config) {
  return json{{"schema_version", schema_version}, {"code_version", code_version()},
              {"config", config}};
}

json to_json(const TtpvParams& p) {
  return json{{"model", "ttpv"}, {"t", p.t},      {"tp", p.t_prime}, {"V", p.V},
              {"mu", p.mu},      {"beta", p.beta}, {"L", p.L}};
}

json to_json(const LuttParams& p) {
  return json{{"model", "luttinger"},
              {"t", p.t},
              {"tp", p.t_prime},
              {"V", p.V},
              {"beta", p.beta},
              {"kappa", p.kappa},
              {"Q", p.Q},
              {"band", p.band == BandChoice::taylor ? "taylor" : "full"},
              {"antinodal_count", p.antinodal_count}};
}

json to_json(const VariationalAnsatz& a) {
  return json{{"q", a.q}, {"m", a.m}, {"restricted", a.restricted}};
}

json to_json(const MfSolution& s) {
  return json{{"branch", to_string(s.branch)},
              {"status", to_string(s.status)},
              {"converged", s.converged},
              {"omega_per_site", s.omega_per_site},
              {"nu", s.nu},
              {"gap", s.gap},
              {"delta", s.ansatz.m[0]},
              {"ansatz", to_json(s.ansatz)},
              {"residual_norm", s.residual_norm},
              {"iterations", s.iterations}};
}

json to_json(const LuttSolution& s) {
  return json{{"branch", to_string(s.branch)},
              {"status", to_string(s.status)},
              {"converged", s.converged},
              {"omega_total_per_site", s.omega_total_per_site},
              {"omega_antinodal_per_site", s.omega_antinodal_per_site},
              {"nu", s.nu_total},
              {"nu_a", s.nu_a},
              {"gap", s.gap},
              {"ansatz", {{"q0", s.ansatz.q0}, {"q1", s.ansatz.q1}, {"delta", s.ansatz.delta}}},
              {"tQ", s.nodal.tQ},
              {"tQ_over_pi", s.nodal.tQ / 3.14159265358979323846},
              {"tQ_in_window", s.nodal.tQ_in_window},
              {"C", s.nodal.C},
              {"mu_a", s.nodal.mu_a},
              {"g_a", s.couplings.g_a},
              {"g_eff", s.couplings.g_eff},
              {"v_F", s.couplings.v_F},
              {"energy_constants",
               {{"e_kin", s.constants.e_kin}, {"e_1", s.constants.e_1}, {"e_int", s.constants.e_int}}},
              {"residual_norm", s.residual_norm},
              {"nu_a_change", s.nu_a_change},
              {"iterations", s.iterations},
              {"outer_iterations", s.outer_iterations}};
}

json to_json(const BranchPoint& p) {
  return json{{"mu", p.mu},       {"branch", to_string(p.branch)}, {"status", to_string(p.status)},
              {"omega", p.omega}, {"nu", p.nu},                    {"gap", p.gap},
              {"nu_a", p.nu_a},   {"tQ", p.tQ},                    {"residual", p.residual},
              {"state", p.state}};
}

BranchPoint branch_point_from_json(const json& j) {
  BranchPoint p;
  p.mu = j.at("mu").get<double>();
  p.branch = j.at("branch").get<std::string>() == "CDW" ? Branch::CDW : Branch::N;
  p.status = status_from_string(j.at("status").get<std::string>());
  p.omega = num(j, "omega");
  p.nu = num(j, "nu");
  p.gap = num(j, "gap");
  p.nu_a = num(j, "nu_a");
  p.tQ = num(j, "tQ");
  p.residual = num(j, "residual");
  for (int i = 0; i < 3; ++i) {
    const json& s = j.at("state").at(i);
    p.state[i] = s.is_null() ? std::numeric_limits<double>::quiet_NaN() : s.get<double>();
  }
  return p;
}

json to_json(const Crossing& c) {
  return json{{"mu", c.mu},
              {"kind", to_string(c.kind)},
              {"cdw_above", c.cdw_above},
              {"nu_cdw", c.nu_cdw},
              {"nu_n", c.nu_n},
              {"gap_cdw", c.gap_cdw},
              {"omega_diff", c.omega_diff},
              {"nu_a_cdw", c.nu_a_cdw},
              {"nu_a_n", c.nu_a_n},
              {"tQ_cdw", c.tQ_cdw},
              {"tQ_n", c.tQ_n},
              {"Q", c.Q},
              {"bracket_width", c.bracket_width},
              {"bisection_steps", c.bisection_steps},
              {"cdw_point", to_json(c.cdw_point)},
              {"n_point", to_json(c.n_point)}};
}

Crossing crossing_from_json(const json& j) {
  Crossing c;
  c.mu = j.at("mu").get<double>();
  c.kind = j.at("kind").get<std::string>() == "continuous" ? TransitionKind::continuous
                                                           : TransitionKind::first_order;
  c.cdw_above = j.at("cdw_above").get<bool>();
  c.nu_cdw = num(j, "nu_cdw");
  c.nu_n = num(j, "nu_n");
  c.gap_cdw = num(j, "gap_cdw");
  c.omega_diff = num(j, "omega_diff");
  c.nu_a_cdw = num(j, "nu_a_cdw");
  c.nu_a_n = num(j, "nu_a_n");
  c.tQ_cdw = num(j, "tQ_cdw");
  c.tQ_n = num(j, "tQ_n");
  c.Q = num(j, "Q");
  c.bracket_width = num(j, "bracket_width");
  c.bisection_steps = j.at("bisection_steps").get<int>();
  c.cdw_point = branch_point_from_json(j.at("cdw_point"));
  c.n_point = branch_point_from_json(j.at("n_point"));
  return c;
}

json to_json(const BoundarySet& b) {
  json cs = json::array();
  for (const auto& c : b.crossings) cs.push_back(to_json(c));
  json out{{"crossings", cs},
           {"below", to_string(b.below)},
           {"n_everywhere", b.n_everywhere},
           {"cdw_everywhere", b.cdw_everywhere}};
  if (const Crossing* lo = b.lower()) {
    out["mu1"] = lo->mu;
    out["nu_cdw_1"] = lo->nu_cdw;
    out["nu_n_1"] = lo->nu_n;
  }
  if (const Crossing* hi = b.upper()) {
    out["mu2"] = hi->mu;
    out["nu_cdw_2"] = hi->nu_cdw;
    out["nu_n_2"] = hi->nu_n;
  }
  return out;
}

PhaseLabel label_from_string(const std::string& s) {
  if (s == "CDW") return PhaseLabel::CDW;
  if (s == "N") return PhaseLabel::N;
  if (s == "MIXED") return PhaseLabel::MIXED;
  return PhaseLabel::NONE;
}

BoundarySet boundaries_from_json(const json& j) {
  BoundarySet b;
  for (const auto& c : j.at("crossings")) b.crossings.push_back(crossing_from_json(c));
  b.below = label_from_string(j.at("below").get<std::string>());
  b.n_everywhere = j.at("n_everywhere").get<bool>();
  b.cdw_everywhere = j.at("cdw_everywhere").get<bool>();
  return b;
}

json to_json(const ColumnResult& c) {
  json labels = json::array();
  for (PhaseLabel l : c.labels) labels.push_back(to_string(l));
  return json{{"index", c.index},           {"axis_value", c.axis_value}, {"ok", c.ok},
              {"error", c.error},           {"boundaries", to_json(c.boundaries)},
              {"labels", labels},           {"lambda", c.lambda}};
}

ColumnResult column_from_json(const json& j) {
  ColumnResult c;
  c.index = j.at("index").get<int>();
  c.axis_value = j.at("axis_value").get<double>();
  c.ok = j.at("ok").get<bool>();
  c.error = j.at("error").get<std::string>();
  c.boundaries = boundaries_from_json(j.at("boundaries"));
  for (const auto& l : j.at("labels")) c.labels.push_back(label_from_string(l.get<std::string>()));
  for (const auto& l : j.at("lambda")) c.lambda.push_back(l.is_null() ? 0.0 : l.get<double>());
  return c;
}

json to_json(const PhaseDiagram& d) {
  json cols = json::array();
  for (const auto& c : d.columns) cols.push_back(to_json(c));
  json lines = json::array();
  for (const auto& l : d.boundaries) {
    json pts = json::array();
    for (const auto& [nu, v] : l.points) pts.push_back({nu, v});
    lines.push_back({{"name", l.name}, {"points", pts}});
  }
  json prov = json::parse(d.provenance_json.empty() ? "{}" : d.provenance_json);
  return json{{"schema_version", schema_version},
              {"provenance", prov},
              {"axis", {{"name", d.axis.name}, {"values", d.axis.values}}},
              {"nu", d.nu},
              {"columns", cols},
              {"boundaries", lines}};
}

json to_json(const FixQResult& r) {
  json trace = json::array();
  for (const auto& s : r.trace) {
    trace.push_back({{"Q", s.Q}, {"tQ", s.tQ}, {"Q_over_pi", s.Q / 3.14159265358979323846},
                     {"tQ_over_pi", s.tQ / 3.14159265358979323846}});
  }
  return json{{"Q", r.Q},
              {"Q_over_pi", r.Q / 3.14159265358979323846},
              {"iterations", r.iterations},
              {"converged", r.converged},
              {"failure", r.failure},
              {"trace", trace}};
}

void write_column(const std::string& path, const ColumnResult& c, const std::string& prov) {
  json j{{"schema_version", schema_version}, {"provenance", prov}, {"column", to_json(c)}};
  write_atomic(path, j.dump(1) + "\n");
}

std::optional<ColumnResult> read_column(const std::string& path, const std::string& prov,
                                        double axis_value) {
  if (!std::filesystem::exists(path)) return std::nullopt;
  try {
    const json j = json::parse(read_file(path));
    if (j.at("schema_version").get<std::string>() != schema_version) return std::nullopt;
    if (j.at("provenance").get<std::string>() != prov) return std::nullopt;
    ColumnResult c = column_from_json(j.at("column"));
    if (c.axis_value != axis_value) return std::nullopt;
    return c;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::string scan_to_csv(const MuScan& scan, const json& prov) {
  std::string out = prov_lines(prov);
  out += "mu,omega_N,omega_CDW,nu_N,nu_CDW,gap_CDW,status_N,status_CDW,nu_a_N,nu_a_CDW,tQ_N,tQ_CDW\n";
  for (std::size_t i = 0; i < scan.mu.size(); ++i) {
    const BranchPoint& n = scan.normal[i];
    const BranchPoint& c = scan.cdw[i];
    out += csv_num(scan.mu[i]) + "," + csv_num(n.omega) + "," + csv_num(c.omega) + "," +
           csv_num(n.nu) + "," + csv_num(c.nu) + "," + csv_num(c.gap) + "," +
           to_string(n.status) + "," + to_string(c.status) + "," + csv_num(n.nu_a) + "," +
           csv_num(c.nu_a) + "," + csv_num(n.tQ) + "," + csv_num(c.tQ) + "\n";
  }
  return out;
}

std::string column_to_csv(const ColumnResult& c, const std::vector<double>& nu, const json& prov) {
  std::string out = prov_lines(prov);
  out += "axis_value,nu,label,lambda\n";
  for (std::size_t i = 0; i < nu.size() && i < c.labels.size(); ++i) {
    out += csv_num(c.axis_value) + "," + csv_num(nu[i]) + "," + to_string(c.labels[i]) + "," +
           csv_num(c.lambda[i]) + "\n";
  }
  return out;
}

std::string render_svg(const json& d) {
  const std::vector<double> nu = d.at("nu").get<std::vector<double>>();
  const std::vector<double> ax = d.at("axis").at("values").get<std::vector<double>>();
  const std::string axis_name = d.at("axis").at("name").get<std::string>();
  const double W = 640, H = 480, left = 70, right = 20, top = 20, bottom = 60;
  const double pw = W - left - right, ph = H - top - bottom;
  double amin = ax.empty() ? 0.0 : ax.front(), amax = ax.empty() ? 1.0 : ax.back();
  for (double v : ax) {
    amin = std::min(amin, v);
    amax = std::max(amax, v);
  }
  if (amax == amin) amax = amin + 1.0;
  auto X = [&](double x) { return left + pw * x; };
  auto Y = [&](double v) { return top + ph * (1.0 - (v - amin) / (amax - amin)); };
  std::ostringstream s;
  s << std::setprecision(6);
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  s << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  const double cw = nu.size() > 1 ? pw / double(nu.size() - 1) : pw;
  const double chh = ax.size() > 1 ? ph / double(ax.size() - 1) : ph;
  for (const auto& col : d.at("columns")) {
    const double v = col.at("axis_value").get<double>();
    const auto& labels = col.at("labels");
    for (std::size_t i = 0; i < labels.size() && i < nu.size(); ++i) {
      const std::string l = labels[i].get<std::string>();
      const char* fill = l == "CDW"     ? "#2b5d8a"
                         : l == "N"     ? "#f3efe2"
                         : l == "MIXED" ? "#c9a227"
                                        : "#9a9a9a";
      s << "<rect x=\"" << X(nu[i]) - cw / 2 << "\" y=\"" << Y(v) - chh / 2 << "\" width=\"" << cw
        << "\" height=\"" << chh << "\" fill=\"" << fill << "\" stroke=\"none\"/>\n";
    }
  }
  for (const auto& line : d.at("boundaries")) {
    s << "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"1.2\" points=\"";
    for (const auto& p : line.at("points")) {
      if (p[0].is_null()) continue;
      s << X(p[0].get<double>()) << "," << Y(p[1].get<double>()) << " ";
    }
    s << "\"><title>" << line.at("name").get<std::string>() << "</title></polyline>\n";
  }
  s << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double x = 0.25 * i;
    s << "<text x=\"" << X(x) << "\" y=\"" << top + ph + 18 << "\" font-size=\"12\" "
      << "text-anchor=\"middle\">" << x << "</text>\n";
    const double v = amin + (amax - amin) * 0.25 * i;
    s << "<text x=\"" << left - 6 << "\" y=\"" << Y(v) + 4 << "\" font-size=\"12\" "
      << "text-anchor=\"end\">" << v << "</text>\n";
  }
  s << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 15
    << "\" font-size=\"14\" text-anchor=\"middle\">filling nu</text>\n";
  s << "<text x=\"18\" y=\"" << top + ph / 2 << "\" font-size=\"14\" text-anchor=\"middle\" "
    << "transform=\"rotate(-90 18 " << top + ph / 2 << ")\">" << axis_name << "</text>\n";
  s << "</svg>\n";
  return s.str();
}

}  // namespace cdwmf
