#include "glosa/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace glosa {

namespace {

constexpr double kCoincidentTol_m = 1e-9;

double floor_mod(double x, double period) {
  double r = std::fmod(x, period);
  if (r < 0.0) r += period;
  return r;
}

}  // namespace

const char* to_string(Color c) { return c == Color::green ? "green" : "red"; }

PathGeometry::PathGeometry(std::vector<Waypoint> waypoints)
    : waypoints_(std::move(waypoints)) {
  if (waypoints_.size() < 2) {
    throw ScenarioError("road.waypoint: at least 2 waypoints required, got " +
                        std::to_string(waypoints_.size()));
  }
  abscissas_.resize(waypoints_.size());
  abscissas_[0] = 0.0;
  for (size_t i = 1; i < waypoints_.size(); ++i) {
    const double dx = waypoints_[i].x_m - waypoints_[i - 1].x_m;
    const double dy = waypoints_[i].y_m - waypoints_[i - 1].y_m;
    const double seg = std::hypot(dx, dy);
    if (seg <= kCoincidentTol_m) {
      throw ScenarioError("road.waypoint: waypoints " + std::to_string(i - 1) +
                          " and " + std::to_string(i) + " are coincident");
    }
    abscissas_[i] = abscissas_[i - 1] + seg;
  }
}

Waypoint PathGeometry::point_at(double s_m) const {
  if (s_m <= 0.0) return waypoints_.front();
  if (s_m >= total_length_m()) return waypoints_.back();
  const auto it =
      std::upper_bound(abscissas_.begin(), abscissas_.end(), s_m);
  const size_t i = static_cast<size_t>(it - abscissas_.begin());
  const double u = (s_m - abscissas_[i - 1]) / (abscissas_[i] - abscissas_[i - 1]);
  return {waypoints_[i - 1].x_m + u * (waypoints_[i].x_m - waypoints_[i - 1].x_m),
          waypoints_[i - 1].y_m + u * (waypoints_[i].y_m - waypoints_[i - 1].y_m)};
}

double PathGeometry::heading_at(double s_m) const {
  size_t i = 1;
  if (s_m > 0.0) {
    const auto it =
        std::lower_bound(abscissas_.begin(), abscissas_.end(), s_m);
    i = std::min(static_cast<size_t>(it - abscissas_.begin()) + (it != abscissas_.end() && *it == s_m ? 1 : 0),
                 waypoints_.size() - 1);
    i = std::max<size_t>(i, 1);
  }
  return std::atan2(waypoints_[i].y_m - waypoints_[i - 1].y_m,
                    waypoints_[i].x_m - waypoints_[i - 1].x_m);
}

double PhaseSchedule::cycle_time(double t_s) const {
  return floor_mod(t_s - offset_s, cycle_s);
}

Color PhaseSchedule::phase_at(double t_s) const {
  return cycle_time(t_s) < green_duration_s ? Color::green : Color::red;
}

void PhaseSchedule::validate(const std::string& context) const {
  if (!(cycle_s > 0.0)) {
    throw ScenarioError(context + ".cycle_s: must be > 0, got " +
                        std::to_string(cycle_s));
  }
  if (!(green_duration_s > 0.0 && green_duration_s < cycle_s)) {
    throw ScenarioError(context + ".green_s: must satisfy 0 < green < cycle, got green=" +
                        std::to_string(green_duration_s) + " cycle=" +
                        std::to_string(cycle_s));
  }
  if (!(offset_s >= 0.0 && offset_s < cycle_s)) {
    throw ScenarioError(context + ".offset_s: must be in [0, cycle), got " +
                        std::to_string(offset_s));
  }
  if (!(stop_line_abscissa_m >= 0.0)) {
    throw ScenarioError(context + ".abscissa_m: must be >= 0, got " +
                        std::to_string(stop_line_abscissa_m));
  }
}

std::vector<ShiftEvent> next_shifts(const PhaseSchedule& sched, double t_s,
                                    int count) {
  std::vector<ShiftEvent> out;
  out.reserve(static_cast<size_t>(std::max(count, 0)));
  const double tau = sched.cycle_time(t_s);
  // Boundaries within one cycle, measured from the green start: the
  // green-to-red shift at green_duration and the red-to-green shift at cycle.
  double base = t_s - tau;  // most recent red->green shift at or before t
  int k = 0;
  while (static_cast<int>(out.size()) < count && k < 2 * count + 4) {
    const int cycle_idx = k / 2;
    const bool to_red = (k % 2 == 0);
    const double abs_time = base + cycle_idx * sched.cycle_s +
                            (to_red ? sched.green_duration_s : sched.cycle_s);
    ++k;
    if (abs_time <= t_s) continue;  // shift at t itself already applied
    out.push_back({abs_time - t_s, to_red ? Color::red : Color::green});
  }
  return out;
}

void VehicleParams::validate(const std::string& context) const {
  auto positive = [&](double v, const char* field) {
    if (!(v > 0.0)) {
      throw ScenarioError(context + "." + field + ": must be > 0, got " +
                          std::to_string(v));
    }
  };
  positive(mass_kg, "mass_kg");
  positive(frontal_area_m2, "frontal_area_m2");
  positive(air_density_kgpm3, "air_density_kgpm3");
  positive(drag_coeff, "drag_coeff");
  positive(rolling_coeff, "rolling_coeff");
  positive(gravity_mps2, "gravity_mps2");
  positive(a_max_mps2, "a_max_mps2");
  if (!(f_min_n < 0.0 && f_max_n > 0.0)) {
    throw ScenarioError(context + ".f_min_n/f_max_n: need f_min < 0 < f_max, got " +
                        std::to_string(f_min_n) + ", " + std::to_string(f_max_n));
  }
  if (!(j_min_mps3 < 0.0 && j_max_mps3 > 0.0)) {
    throw ScenarioError(context + ".j_min_mps3/j_max_mps3: need j_min < 0 < j_max, got " +
                        std::to_string(j_min_mps3) + ", " + std::to_string(j_max_mps3));
  }
}

void RoadLimits::validate(const std::string& context) const {
  if (!(v_min_road_mps > 0.0 && v_min_road_mps < v_max_road_mps)) {
    throw ScenarioError(context + ".v_min_road_kmh/v_max_road_kmh: need 0 < min < max, got " +
                        std::to_string(v_min_road_mps / kKmhToMps) + ", " +
                        std::to_string(v_max_road_mps / kKmhToMps));
  }
  if (!(horizon_single_m > 0.0 && horizon_single_m <= horizon_multi_m)) {
    throw ScenarioError(context + ".horizon_single_m: need 0 < single <= multi, got " +
                        std::to_string(horizon_single_m) + ", " +
                        std::to_string(horizon_multi_m));
  }
  if (!(d_comfort_mps2 > 0.0)) {
    throw ScenarioError(context + ".d_comfort_mps2: must be > 0, got " +
                        std::to_string(d_comfort_mps2));
  }
}

void OcpConfig::validate(const std::string& context) const {
  if (!(t_f_s > 0.0)) {
    throw ScenarioError(context + ".t_f_s: must be > 0, got " +
                        std::to_string(t_f_s));
  }
  if (n_steps < 10) {
    throw ScenarioError(context + ".n_steps: must be >= 10, got " +
                        std::to_string(n_steps));
  }
  if (w_v < 0.0 || w_a < 0.0 || !(w_j > 0.0)) {
    throw ScenarioError(context + ".w_v/w_a/w_j: need w_v, w_a >= 0 and w_j > 0");
  }
  if (!(tolerance > 0.0)) {
    throw ScenarioError(context + ".tolerance: must be > 0");
  }
}

void Scenario::validate() const {
  vehicle.validate("vehicle");
  limits.validate("limits");
  mpc.validate("mpc");
  const double length = path.total_length_m();
  double prev = -1.0;
  for (size_t i = 0; i < lights.size(); ++i) {
    const std::string ctx = "light[" + std::to_string(i) + "]";
    lights[i].validate(ctx);
    if (lights[i].stop_line_abscissa_m <= prev) {
      throw ScenarioError(ctx + ".abscissa_m: lights must be in strictly "
                          "ascending abscissa order");
    }
    if (lights[i].stop_line_abscissa_m > length) {
      throw ScenarioError(ctx + ".abscissa_m: stop line at " +
                          std::to_string(lights[i].stop_line_abscissa_m) +
                          " beyond road length " + std::to_string(length));
    }
    prev = lights[i].stop_line_abscissa_m;
  }
  if (!(initial_speed_mps >= 0.0 && initial_speed_mps <= limits.v_max_road_mps)) {
    throw ScenarioError("sim.initial_speed_kmh: must be within [0, v_max_road], got " +
                        std::to_string(initial_speed_mps / kKmhToMps) + " km/h");
  }
  if (!(sim_step_s > 0.0)) {
    throw ScenarioError("sim.step_s: must be > 0, got " +
                        std::to_string(sim_step_s));
  }
}

std::string Scenario::fingerprint() const {
  std::ostringstream os;
  os.precision(12);
  os << path.total_length_m() << '|' << initial_speed_mps << '|' << sim_step_s
     << '|' << vehicle.mass_kg << '|' << vehicle.f_max_n << '|' << vehicle.f_min_n;
  for (const auto& l : lights) {
    os << '|' << l.stop_line_abscissa_m << ',' << l.cycle_s << ','
       << l.green_duration_s << ',' << l.offset_s;
  }
  const size_t h = std::hash<std::string>{}(os.str());
  std::ostringstream hex;
  hex << name << '-' << std::hex << static_cast<std::uint64_t>(h);
  return hex.str();
}

namespace {

struct RawSection {
  std::string name;
  // key -> values in file order (repeated keys allowed, e.g. waypoint)
  std::vector<std::pair<std::string, std::string>> entries;
  int line_no = 0;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<RawSection> tokenize(const std::string& text) {
  std::vector<RawSection> sections;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      std::string name = line;
      name.erase(std::remove_if(name.begin(), name.end(),
                                [](char c) { return c == '[' || c == ']'; }),
                 name.end());
      name = trim(name);
      if (name.empty()) {
        throw ScenarioError("line " + std::to_string(line_no) +
                            ": empty section header");
      }
      sections.push_back({name, {}, line_no});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ScenarioError("line " + std::to_string(line_no) +
                          ": expected key = value, got '" + line + "'");
    }
    if (sections.empty()) {
      throw ScenarioError("line " + std::to_string(line_no) +
                          ": key outside any section");
    }
    sections.back().entries.emplace_back(trim(line.substr(0, eq)),
                                         trim(line.substr(eq + 1)));
  }
  return sections;
}

class SectionReader {
 public:
  SectionReader(const RawSection& raw, std::string context)
      : raw_(raw), context_(std::move(context)) {}

  std::optional<std::string> find(const std::string& key) const {
    for (const auto& [k, v] : raw_.entries) {
      if (k == key) return v;
    }
    return std::nullopt;
  }

  double number(const std::string& key) const {
    const auto v = find(key);
    if (!v) {
      throw ScenarioError(context_ + "." + key + ": missing required field");
    }
    return parse_number(key, *v);
  }

  double number_or(const std::string& key, double fallback) const {
    const auto v = find(key);
    return v ? parse_number(key, *v) : fallback;
  }

  std::string text_or(const std::string& key, const std::string& fallback) const {
    const auto v = find(key);
    return v ? *v : fallback;
  }

  std::vector<std::string> all(const std::string& key) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : raw_.entries) {
      if (k == key) out.push_back(v);
    }
    return out;
  }

  double parse_number(const std::string& key, const std::string& v) const {
    try {
      size_t pos = 0;
      const double d = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument("trailing chars");
      return d;
    } catch (const std::exception&) {
      throw ScenarioError(context_ + "." + key + ": not a number: '" + v + "'");
    }
  }

  const std::string& context() const { return context_; }

 private:
  const RawSection& raw_;
  std::string context_;
};

Waypoint parse_waypoint(const SectionReader& sec, const std::string& v) {
  const auto comma = v.find(',');
  if (comma == std::string::npos) {
    throw ScenarioError(sec.context() + ".waypoint: expected 'x,y', got '" + v + "'");
  }
  return {sec.parse_number("waypoint", trim(v.substr(0, comma))),
          sec.parse_number("waypoint", trim(v.substr(comma + 1)))};
}

}  // namespace

Scenario parse_scenario(const std::string& text, const std::string& name) {
  const auto sections = tokenize(text);
  Scenario sc;
  sc.name = name;
  sc.lights.clear();

  bool have_road = false;
  bool have_sim = false;
  int light_idx = 0;
  for (const auto& raw : sections) {
    if (raw.name == "road") {
      SectionReader sec(raw, "road");
      std::vector<Waypoint> wps;
      for (const auto& v : sec.all("waypoint")) wps.push_back(parse_waypoint(sec, v));
      if (wps.size() < 2) {
        throw ScenarioError("road.waypoint: at least 2 waypoints required");
      }
      sc.path = PathGeometry(std::move(wps));
      const double declared = sec.number("length_m");
      if (std::abs(declared - sc.path.total_length_m()) > 1e-6 * std::max(1.0, declared)) {
        throw ScenarioError("road.length_m: declared " + std::to_string(declared) +
                            " does not match waypoint arclength " +
                            std::to_string(sc.path.total_length_m()));
      }
      have_road = true;
    } else if (raw.name == "limits") {
      SectionReader sec(raw, "limits");
      sc.limits.v_min_road_mps = sec.number_or("v_min_road_kmh", 20.0) * kKmhToMps;
      sc.limits.v_max_road_mps = sec.number_or("v_max_road_kmh", 50.0) * kKmhToMps;
      sc.limits.horizon_single_m = sec.number_or("horizon_single_m", 100.0);
      sc.limits.horizon_multi_m = sec.number_or("horizon_multi_m", 500.0);
      sc.limits.d_comfort_mps2 = sec.number_or("d_comfort_mps2", 1.0);
    } else if (raw.name == "vehicle") {
      SectionReader sec(raw, "vehicle");
      VehicleParams& vp = sc.vehicle;
      vp.mass_kg = sec.number_or("mass_kg", vp.mass_kg);
      vp.frontal_area_m2 = sec.number_or("frontal_area_m2", vp.frontal_area_m2);
      vp.air_density_kgpm3 = sec.number_or("air_density_kgpm3", vp.air_density_kgpm3);
      vp.drag_coeff = sec.number_or("drag_coeff", vp.drag_coeff);
      vp.rolling_coeff = sec.number_or("rolling_coeff", vp.rolling_coeff);
      vp.gravity_mps2 = sec.number_or("gravity_mps2", vp.gravity_mps2);
      vp.f_min_n = sec.number_or("f_min_n", vp.f_min_n);
      vp.f_max_n = sec.number_or("f_max_n", vp.f_max_n);
      vp.a_max_mps2 = sec.number_or("a_max_mps2", vp.a_max_mps2);
      vp.j_min_mps3 = sec.number_or("j_min_mps3", vp.j_min_mps3);
      vp.j_max_mps3 = sec.number_or("j_max_mps3", vp.j_max_mps3);
    } else if (raw.name == "light") {
      const std::string ctx = "light[" + std::to_string(light_idx) + "]";
      SectionReader sec(raw, ctx);
      PhaseSchedule ps;
      ps.tl_id = sec.text_or("id", "tl" + std::to_string(light_idx + 1));
      ps.stop_line_abscissa_m = sec.number("abscissa_m");
      ps.cycle_s = sec.number("cycle_s");
      ps.green_duration_s = sec.number("green_s");
      ps.offset_s = sec.number("offset_s");
      sc.lights.push_back(ps);
      ++light_idx;
    } else if (raw.name == "sim") {
      SectionReader sec(raw, "sim");
      sc.initial_speed_mps = sec.number("initial_speed_kmh") * kKmhToMps;
      sc.sim_step_s = sec.number_or("step_s", 0.05);
      have_sim = true;
    } else if (raw.name == "mpc") {
      SectionReader sec(raw, "mpc");
      OcpConfig& oc = sc.mpc;
      oc.t_f_s = sec.number_or("t_f_s", oc.t_f_s);
      oc.n_steps = static_cast<int>(sec.number_or("n_steps", oc.n_steps));
      oc.w_v = sec.number_or("w_v", oc.w_v);
      oc.w_a = sec.number_or("w_a", oc.w_a);
      oc.w_j = sec.number_or("w_j", oc.w_j);
      oc.tolerance = sec.number_or("tolerance", oc.tolerance);
      oc.max_outer_iters = static_cast<int>(sec.number_or("max_outer_iters", oc.max_outer_iters));
      oc.max_inner_iters = static_cast<int>(sec.number_or("max_inner_iters", oc.max_inner_iters));
    } else if (raw.name == "friction") {
      SectionReader sec(raw, "friction");
      for (const auto& v : sec.all("mu")) {
        const auto comma = v.find(',');
        if (comma == std::string::npos) {
          throw ScenarioError("friction.mu: expected 'abscissa,mu', got '" + v + "'");
        }
        sc.friction.push_back({sec.parse_number("mu", trim(v.substr(0, comma))),
                               sec.parse_number("mu", trim(v.substr(comma + 1)))});
      }
    } else {
      throw ScenarioError("line " + std::to_string(raw.line_no) +
                          ": unknown section [" + raw.name + "]");
    }
  }
  if (!have_road) throw ScenarioError("road: missing [road] section");
  if (!have_sim) throw ScenarioError("sim: missing [sim] section");
  sc.validate();
  return sc;
}

Scenario load_scenario(const std::string& path_to_file) {
  std::ifstream in(path_to_file);
  if (!in) {
    throw ScenarioError("cannot open scenario file: " + path_to_file);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string name = path_to_file;
  const auto slash = name.find_last_of("/\\");
  if (slash != std::string::npos) name.erase(0, slash + 1);
  const auto dot = name.find_last_of('.');
  if (dot != std::string::npos) name.erase(dot);
  return parse_scenario(buf.str(), name);
}

}  // namespace glosa
