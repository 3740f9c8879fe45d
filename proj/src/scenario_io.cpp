// Scenario config (INI) and trace file (JSON lines) serialization.

#include <charconv>
#include <fstream>
#include <variant>
#include <sstream>
#include <string>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "hyloc/errors.hpp"
#include "hyloc/world_sim.hpp"

namespace hyloc {

namespace pt = boost::property_tree;
using ojson = nlohmann::ordered_json;

namespace {

constexpr int kTraceVersion = 1;

std::vector<double> parse_numbers(const std::string& text, const std::string& where) {
  std::vector<std::string> parts;
  boost::split(parts, text, boost::is_any_of(","));
  std::vector<double> out;
  for (auto& p : parts) {
    boost::trim(p);
    if (p.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(p, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != p.size()) throw ValidationError(where + ": '" + p + "' is not a number");
    out.push_back(v);
  }
  return out;
}

/// "a,b,c; d,e,f" -> groups of numbers, each of the given arity.
std::vector<std::vector<double>> parse_groups(const std::string& text, std::size_t arity, const std::string& where) {
  std::vector<std::string> groups;
  boost::split(groups, text, boost::is_any_of(";"));
  std::vector<std::vector<double>> out;
  for (auto& g : groups) {
    boost::trim(g);
    if (g.empty()) continue;
    auto nums = parse_numbers(g, where);
    if (nums.size() != arity)
      throw ValidationError(where + ": expected " + std::to_string(arity) + " values per entry, got " +
                            std::to_string(nums.size()));
    out.push_back(std::move(nums));
  }
  return out;
}

Rect to_rect(const std::vector<double>& v) { return {v[0], v[1], v[2], v[3]}; }

template <class T>
T get_required(const pt::ptree& tree, const std::string& key) {
  try {
    return tree.get<T>(key);
  } catch (const pt::ptree_bad_path&) {
    throw ValidationError(key + ": missing");
  } catch (const pt::ptree_bad_data&) {
    throw ValidationError(key + ": bad value");
  }
}

template <class T>
T get_or(const pt::ptree& tree, const std::string& key, T fallback) {
  try {
    return tree.get<T>(key, fallback);
  } catch (const pt::ptree_bad_data&) {
    throw ValidationError(key + ": bad value");
  }
}

ojson noise_to_json(const NoiseModel& n) {
  return ojson{{"sigma_los", n.sigma_los},       {"nlos_bias_mean", n.nlos_bias_mean},
               {"sigma_nlos", n.sigma_nlos},     {"p0", n.p0},
               {"d0", n.d0},                     {"gamma_los", n.gamma_los},
               {"gamma_nlos", n.gamma_nlos},     {"wall_penalty", n.wall_penalty},
               {"shadow_sigma", n.shadow_sigma}, {"vo_r_sigma0", n.vo_r_sigma0},
               {"vo_theta_sigma0", n.vo_theta_sigma0}, {"m_well_lit", n.m_well_lit},
               {"m_speed_penalty", n.m_speed_penalty}};
}

NoiseModel noise_from_json(const ojson& j) {
  NoiseModel n;
  n.sigma_los = j.at("sigma_los").get<double>();
  n.nlos_bias_mean = j.at("nlos_bias_mean").get<double>();
  n.sigma_nlos = j.at("sigma_nlos").get<double>();
  n.p0 = j.at("p0").get<double>();
  n.d0 = j.at("d0").get<double>();
  n.gamma_los = j.at("gamma_los").get<double>();
  n.gamma_nlos = j.at("gamma_nlos").get<double>();
  n.wall_penalty = j.at("wall_penalty").get<double>();
  n.shadow_sigma = j.at("shadow_sigma").get<double>();
  n.vo_r_sigma0 = j.at("vo_r_sigma0").get<double>();
  n.vo_theta_sigma0 = j.at("vo_theta_sigma0").get<double>();
  n.m_well_lit = j.at("m_well_lit").get<int>();
  n.m_speed_penalty = j.at("m_speed_penalty").get<double>();
  return n;
}

ojson rect_to_json(const Rect& r) { return ojson::array({r.x0, r.y0, r.x1, r.y1}); }

Rect rect_from_json(const ojson& j) {
  if (!j.is_array() || j.size() != 4) throw std::invalid_argument("rectangle must be [x0,y0,x1,y1]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

}  // namespace

// --- scenario config ----------------------------------------------------------

ScenarioConfig parse_scenario_config(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(e.message(), static_cast<int>(e.line()));
  }

  ScenarioConfig cfg;
  cfg.name = get_or<std::string>(tree, "scenario.name", "scenario");
  cfg.seed = get_or<std::uint64_t>(tree, "scenario.seed", 0);

  auto& env = cfg.environment;
  {
    auto b = parse_numbers(get_required<std::string>(tree, "environment.bounds"), "environment.bounds");
    if (b.size() != 4) throw ValidationError("environment.bounds: expected x0,y0,x1,y1");
    env.bounds = to_rect(b);
    for (auto& g : parse_groups(get_or<std::string>(tree, "environment.occluders", ""), 4, "environment.occluders"))
      env.occluders.push_back(to_rect(g));
    for (auto& g : parse_groups(get_or<std::string>(tree, "environment.dim_zones", ""), 5, "environment.dim_zones"))
      env.dim_zones.push_back({to_rect(g), g[4]});
  }

  const auto anchors = tree.get_child_optional("anchors");
  if (!anchors) throw ValidationError("anchors: section missing");
  for (const auto& [key, node] : *anchors) {
    const std::string where = "anchors." + key;
    int id = 0;
    try {
      std::size_t used = 0;
      id = std::stoi(key, &used);
      if (used != key.size()) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      throw ValidationError(where + ": anchor keys must be integer ids");
    }
    auto xy = parse_numbers(node.get_value<std::string>(), where);
    if (xy.size() != 2) throw ValidationError(where + ": expected x,y");
    cfg.anchors.push_back({id, {xy[0], xy[1]}});
  }

  const std::string shape = get_required<std::string>(tree, "trajectory.shape");
  cfg.speed = get_required<double>(tree, "trajectory.speed");
  cfg.duration = get_required<double>(tree, "trajectory.duration");
  auto point = [&](const std::string& key) {
    auto v = parse_numbers(get_required<std::string>(tree, key), key);
    if (v.size() != 2) throw ValidationError(key + ": expected x,y");
    return Position2D{v[0], v[1]};
  };
  if (shape == "line") {
    cfg.shape = LineShape{point("trajectory.start"), get_or<double>(tree, "trajectory.heading", 0.0)};
  } else if (shape == "rectangle") {
    cfg.shape = RectangleShape{point("trajectory.origin"), get_required<double>(tree, "trajectory.width"),
                               get_required<double>(tree, "trajectory.height")};
  } else if (shape == "s_curve") {
    cfg.shape = SCurveShape{point("trajectory.origin"), get_required<double>(tree, "trajectory.length"),
                            get_required<double>(tree, "trajectory.amplitude"),
                            get_required<double>(tree, "trajectory.wavelength")};
  } else if (shape == "waypoints") {
    WaypointsShape w;
    for (auto& g : parse_groups(get_required<std::string>(tree, "trajectory.points"), 2, "trajectory.points"))
      w.points.push_back({g[0], g[1]});
    w.closed = get_or<bool>(tree, "trajectory.closed", false);
    w.segment_speeds = parse_numbers(get_or<std::string>(tree, "trajectory.segment_speeds", ""),
                                     "trajectory.segment_speeds");
    cfg.shape = std::move(w);
  } else {
    throw ValidationError("trajectory.shape: unknown shape '" + shape + "'");
  }

  auto& n = cfg.noise;
  const auto d = NoiseModel{};
  n.sigma_los = get_or(tree, "noise.sigma_los", d.sigma_los);
  n.nlos_bias_mean = get_or(tree, "noise.nlos_bias_mean", d.nlos_bias_mean);
  n.sigma_nlos = get_or(tree, "noise.sigma_nlos", d.sigma_nlos);
  n.p0 = get_or(tree, "noise.p0", d.p0);
  n.d0 = get_or(tree, "noise.d0", d.d0);
  n.gamma_los = get_or(tree, "noise.gamma_los", d.gamma_los);
  n.gamma_nlos = get_or(tree, "noise.gamma_nlos", d.gamma_nlos);
  n.wall_penalty = get_or(tree, "noise.wall_penalty", d.wall_penalty);
  n.shadow_sigma = get_or(tree, "noise.shadow_sigma", d.shadow_sigma);
  n.vo_r_sigma0 = get_or(tree, "noise.vo_r_sigma0", d.vo_r_sigma0);
  n.vo_theta_sigma0 = get_or(tree, "noise.vo_theta_sigma0", d.vo_theta_sigma0);
  n.m_well_lit = get_or(tree, "noise.m_well_lit", d.m_well_lit);
  n.m_speed_penalty = get_or(tree, "noise.m_speed_penalty", d.m_speed_penalty);

  cfg.rates.rf_hz = get_or(tree, "rates.rf_hz", 15.0);
  cfg.rates.vo_hz = get_or(tree, "rates.vo_hz", cfg.rates.rf_hz);

  cfg.validate();
  return cfg;
}

namespace {

/// Shortest text that parses back to the same double.
std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string join(std::initializer_list<double> v) {
  std::string out;
  for (double x : v) out += (out.empty() ? "" : ",") + fmt(x);
  return out;
}

std::string rect_text(const Rect& r) { return join({r.x0, r.y0, r.x1, r.y1}); }

}  // namespace

std::string scenario_config_to_ini(const ScenarioConfig& c) {
  std::ostringstream os;
  os << "[scenario]\nname = " << c.name << "\nseed = " << c.seed << "\n\n";
  os << "[environment]\nbounds = " << rect_text(c.environment.bounds) << "\n";
  std::string occ, dim;
  for (const auto& r : c.environment.occluders) occ += (occ.empty() ? "" : "; ") + rect_text(r);
  for (const auto& z : c.environment.dim_zones)
    dim += (dim.empty() ? "" : "; ") + rect_text(z.area) + "," + fmt(z.keypoint_scale);
  if (!occ.empty()) os << "occluders = " << occ << "\n";
  if (!dim.empty()) os << "dim_zones = " << dim << "\n";
  os << "\n[anchors]\n";
  for (const auto& a : c.anchors) os << a.id << " = " << join({a.position.x, a.position.y}) << "\n";
  os << "\n[trajectory]\n";
  std::visit(
      [&](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, LineShape>) {
          os << "shape = line\nstart = " << join({s.start.x, s.start.y}) << "\nheading = " << fmt(s.heading) << "\n";
        } else if constexpr (std::is_same_v<S, RectangleShape>) {
          os << "shape = rectangle\norigin = " << join({s.origin.x, s.origin.y}) << "\nwidth = " << fmt(s.width)
             << "\nheight = " << fmt(s.height) << "\n";
        } else if constexpr (std::is_same_v<S, SCurveShape>) {
          os << "shape = s_curve\norigin = " << join({s.origin.x, s.origin.y}) << "\nlength = " << fmt(s.length)
             << "\namplitude = " << fmt(s.amplitude) << "\nwavelength = " << fmt(s.wavelength) << "\n";
        } else {
          std::string pts, spd;
          for (const auto& p : s.points) pts += (pts.empty() ? "" : "; ") + join({p.x, p.y});
          for (double v : s.segment_speeds) spd += (spd.empty() ? "" : ",") + fmt(v);
          os << "shape = waypoints\npoints = " << pts << "\nclosed = " << (s.closed ? "true" : "false") << "\n";
          if (!spd.empty()) os << "segment_speeds = " << spd << "\n";
        }
      },
      c.shape);
  os << "speed = " << fmt(c.speed) << "\nduration = " << fmt(c.duration) << "\n\n";
  const auto& n = c.noise;
  os << "[noise]\nsigma_los = " << fmt(n.sigma_los) << "\nnlos_bias_mean = " << fmt(n.nlos_bias_mean)
     << "\nsigma_nlos = " << fmt(n.sigma_nlos) << "\np0 = " << fmt(n.p0) << "\nd0 = " << fmt(n.d0)
     << "\ngamma_los = " << fmt(n.gamma_los) << "\ngamma_nlos = " << fmt(n.gamma_nlos)
     << "\nwall_penalty = " << fmt(n.wall_penalty) << "\nshadow_sigma = " << fmt(n.shadow_sigma)
     << "\nvo_r_sigma0 = " << fmt(n.vo_r_sigma0) << "\nvo_theta_sigma0 = " << fmt(n.vo_theta_sigma0)
     << "\nm_well_lit = " << n.m_well_lit << "\nm_speed_penalty = " << fmt(n.m_speed_penalty) << "\n\n";
  os << "[rates]\nrf_hz = " << fmt(c.rates.rf_hz) << "\nvo_hz = " << fmt(c.rates.vo_hz) << "\n";
  return os.str();
}

ScenarioConfig load_scenario_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario_config(ss.str());
}

// --- trace files ----------------------------------------------------------------

std::string trace_to_jsonl(const Trace& trace) {
  std::string out;
  ojson anchors = ojson::array();
  for (const auto& a : trace.layout.anchors())
    anchors.push_back(ojson{{"id", a.id}, {"x", a.position.x}, {"y", a.position.y}});
  ojson occluders = ojson::array();
  for (const auto& o : trace.environment.occluders) occluders.push_back(rect_to_json(o));
  ojson dims = ojson::array();
  for (const auto& z : trace.environment.dim_zones)
    dims.push_back(ojson{{"rect", rect_to_json(z.area)}, {"keypoint_scale", z.keypoint_scale}});

  ojson meta{{"kind", "meta"},
             {"version", kTraceVersion},
             {"scenario", trace.scenario},
             {"seed", trace.seed},
             {"anchors", anchors},
             {"environment",
              ojson{{"bounds", rect_to_json(trace.environment.bounds)}, {"occluders", occluders}, {"dim_zones", dims}}},
             {"rates", ojson{{"rf_hz", trace.rates.rf_hz}, {"vo_hz", trace.rates.vo_hz}}},
             {"noise_model", noise_to_json(trace.noise)}};
  out += meta.dump();
  out += '\n';

  for (std::size_t k = 0; k < trace.epochs(); ++k) {
    const auto& g = trace.gt[k];
    ojson rf = ojson::array();
    for (const auto& e : trace.rf[k].entries)
      rf.push_back(ojson{{"id", e.anchor_id}, {"range", e.range}, {"power", e.power}, {"los", e.los}});
    const auto& v = trace.vo[k];
    ojson rec{{"kind", "epoch"},
              {"t", g.t},
              {"gt", ojson{{"x", g.value.x}, {"y", g.value.y}}},
              {"rf", rf},
              {"vo", ojson{{"r", v.r}, {"theta", v.theta}, {"m", v.keypoints}, {"lost", v.tracking_lost}}}};
    out += rec.dump();
    out += '\n';
  }
  return out;
}

void write_trace(const Trace& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write trace " + path.string());
  out << trace_to_jsonl(trace);
  if (!out) throw IoError("failed writing trace " + path.string());
}

Trace parse_trace(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;

  std::optional<ojson> meta;
  std::vector<Trajectory::Sample> gt;
  std::vector<RfSample> rf;
  std::vector<VoSample> vo;

  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const ojson rec = ojson::parse(line);
      const std::string kind = rec.at("kind").get<std::string>();
      if (kind == "meta") {
        if (meta) throw std::invalid_argument("duplicate meta record");
        if (lineno != 1) throw std::invalid_argument("meta record must be the first line");
        if (rec.at("version").get<int>() != kTraceVersion) throw std::invalid_argument("unsupported trace version");
        meta = rec;
      } else if (kind == "epoch") {
        if (!meta) throw std::invalid_argument("epoch record before meta record");
        const double t = rec.at("t").get<double>();
        gt.push_back({t, {rec.at("gt").at("x").get<double>(), rec.at("gt").at("y").get<double>()}});
        RfSample s{t, {}};
        for (const auto& e : rec.at("rf"))
          s.entries.push_back({e.at("id").get<int>(), e.at("range").get<double>(), e.at("power").get<double>(),
                               e.at("los").get<bool>()});
        rf.push_back(std::move(s));
        const auto& v = rec.at("vo");
        vo.push_back({t, v.at("r").get<double>(), v.at("theta").get<double>(), v.at("m").get<int>(),
                      v.at("lost").get<bool>()});
      } else {
        throw std::invalid_argument("unknown record kind '" + kind + "'");
      }
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  if (!meta) throw ParseError("missing meta record", std::max(lineno, 1));
  if (gt.empty()) throw ParseError("trace has no epochs", std::max(lineno, 1));

  try {
    const ojson& m = *meta;
    std::vector<Anchor> anchors;
    for (const auto& a : m.at("anchors")) anchors.push_back({a.at("id").get<int>(), {a.at("x").get<double>(), a.at("y").get<double>()}});
    Environment env;
    const auto& je = m.at("environment");
    env.bounds = rect_from_json(je.at("bounds"));
    for (const auto& o : je.at("occluders")) env.occluders.push_back(rect_from_json(o));
    for (const auto& z : je.at("dim_zones"))
      env.dim_zones.push_back({rect_from_json(z.at("rect")), z.at("keypoint_scale").get<double>()});
    Rates rates{m.at("rates").at("rf_hz").get<double>(), m.at("rates").at("vo_hz").get<double>()};
    AnchorLayout layout(std::move(anchors));
    for (std::size_t k = 0; k < rf.size(); ++k)
      if (rf[k].entries.size() != layout.size())
        throw ParseError("epoch has " + std::to_string(rf[k].entries.size()) + " rf entries, layout has " +
                             std::to_string(layout.size()),
                         static_cast<int>(k) + 2);
    return Trace{m.at("scenario").get<std::string>(),
                 m.at("seed").get<std::uint64_t>(),
                 std::move(layout),
                 std::move(env),
                 noise_from_json(m.at("noise_model")),
                 Trajectory(std::move(gt)),
                 std::move(rf),
                 std::move(vo),
                 rates};
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(e.what(), 1);
  }
}

Trace read_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open trace " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_trace(ss.str());
}

}  // namespace hyloc
