#include "hyloc/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <sstream>

#include <boost/algorithm/string.hpp>

#include "hyloc/errors.hpp"

namespace hyloc {

double median(std::vector<double> v) {
  if (v.empty()) throw ArgumentError("median of an empty list");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

AteSummary summarize_errors(std::vector<double> errors, std::vector<double> times) {
  if (errors.empty()) throw ArgumentError("no errors to summarize");
  AteSummary s;
  s.count = errors.size();
  s.mean = std::accumulate(errors.begin(), errors.end(), 0.0) / static_cast<double>(s.count);
  double var = 0.0;
  for (double e : errors) var += (e - s.mean) * (e - s.mean);
  s.std = std::sqrt(var / static_cast<double>(s.count));
  s.max = *std::max_element(errors.begin(), errors.end());
  s.median = median(errors);
  s.errors = std::move(errors);
  s.times = std::move(times);
  return s;
}

AteSummary ate(const Trajectory& est, const Trajectory& gt) {
  const auto pairs = align_pairs_timed(est, gt);
  if (pairs.empty()) throw ArgumentError("estimate and ground truth do not overlap in time");
  std::vector<double> errors, times;
  for (const auto& [t, pq] : pairs) {
    times.push_back(t);
    errors.push_back(distance(pq.first, pq.second));
  }
  return summarize_errors(std::move(errors), std::move(times));
}

PairwiseRelError relative_errors(const Trajectory& est_a, const Trajectory& est_b, const Trajectory& gt_a,
                                 const Trajectory& gt_b) {
  const double t0 = std::max({est_a.start_time(), est_b.start_time(), gt_a.start_time(), gt_b.start_time()});
  const double t1 = std::min({est_a.end_time(), est_b.end_time(), gt_a.end_time(), gt_b.end_time()});
  PairwiseRelError out;
  for (const auto& s : est_a.samples()) {
    if (s.t < t0 || s.t > t1) continue;
    const Position2D ea = s.value;
    const Position2D eb = interpolate_position(est_b, s.t);
    const Position2D ga = interpolate_position(gt_a, s.t);
    const Position2D gb = interpolate_position(gt_b, s.t);
    const Position2D dv = gb - ga;
    const double d = dv.norm();
    if (d < 1e-6) continue;
    const Position2D ev = eb - ea;
    out.distance_errors.push_back(std::abs(ev.norm() - d));
    const double diff = wrap_angle(std::atan2(ev.y, ev.x) - std::atan2(dv.y, dv.x));
    out.angle_errors.push_back(std::abs(diff) * 180.0 / std::numbers::pi);
  }
  if (out.distance_errors.empty()) throw ArgumentError("no common epochs with distinct true positions");
  out.median_distance = median(out.distance_errors);
  out.median_angle = median(out.angle_errors);
  const auto n = static_cast<double>(out.distance_errors.size());
  out.mean_distance = std::accumulate(out.distance_errors.begin(), out.distance_errors.end(), 0.0) / n;
  out.mean_angle = std::accumulate(out.angle_errors.begin(), out.angle_errors.end(), 0.0) / n;
  return out;
}

MultiUserRelError multi_user_errors(const std::vector<Trajectory>& est, const std::vector<Trajectory>& gt) {
  if (est.size() != gt.size() || est.size() < 2) throw ArgumentError("need matching estimates for at least two agents");
  MultiUserRelError out;
  for (std::size_t i = 0; i < est.size(); ++i)
    for (std::size_t j = i + 1; j < est.size(); ++j) {
      out.pairs.emplace_back(i, j);
      out.per_pair.push_back(relative_errors(est[i], est[j], gt[i], gt[j]));
      out.mean_distance += out.per_pair.back().mean_distance;
      out.mean_angle += out.per_pair.back().mean_angle;
    }
  out.mean_distance /= static_cast<double>(out.pairs.size());
  out.mean_angle /= static_cast<double>(out.pairs.size());
  return out;
}

std::vector<CdfPoint> cdf(std::vector<double> errors) {
  if (errors.empty()) throw ArgumentError("cdf of an empty list");
  std::sort(errors.begin(), errors.end());
  std::vector<CdfPoint> out;
  const auto n = static_cast<double>(errors.size());
  for (std::size_t k = 0; k < errors.size(); ++k) out.push_back({errors[k], static_cast<double>(k + 1) / n});
  return out;
}

std::vector<CompareRow> compare_report(const std::vector<MethodResult>& results) {
  std::vector<CompareRow> rows;
  for (const auto& r : results)
    rows.push_back({r.method, r.summary.mean, r.summary.median, r.summary.std, r.summary.max, r.summary.count});
  std::sort(rows.begin(), rows.end(), [](const CompareRow& a, const CompareRow& b) {
    if (a.median != b.median) return a.median < b.median;
    return a.method < b.method;
  });
  return rows;
}

namespace {

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

double parse_double(const std::string& s, int line) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) throw ParseError("not a number: '" + s + "'", line);
  return v;
}

}  // namespace

std::string compare_to_csv(const std::vector<CompareRow>& rows) {
  std::string out = "method,mean,median,std,max,count\n";
  for (const auto& r : rows)
    out += r.method + "," + num(r.mean) + "," + num(r.median) + "," + num(r.std) + "," + num(r.max) + "," +
           std::to_string(r.count) + "\n";
  return out;
}

std::vector<CompareRow> compare_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  std::vector<CompareRow> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1) {
      if (line != "method,mean,median,std,max,count") throw ParseError("unexpected header", 1);
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> f;
    boost::split(f, line, boost::is_any_of(","));
    if (f.size() != 6) throw ParseError("expected 6 fields", lineno);
    CompareRow r;
    r.method = f[0];
    r.mean = parse_double(f[1], lineno);
    r.median = parse_double(f[2], lineno);
    r.std = parse_double(f[3], lineno);
    r.max = parse_double(f[4], lineno);
    r.count = static_cast<std::size_t>(parse_double(f[5], lineno));
    rows.push_back(r);
  }
  if (lineno == 0) throw ParseError("empty table", 1);
  return rows;
}

std::string compare_to_text(const std::vector<CompareRow>& rows) {
  std::size_t w = 6;
  for (const auto& r : rows) w = std::max(w, r.method.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(w)) << "method" << std::right;
  for (const char* h : {"mean", "median", "std", "max"}) os << std::setw(10) << h;
  os << std::setw(8) << "count" << '\n';
  os << std::fixed << std::setprecision(3);
  for (const auto& r : rows) {
    os << std::left << std::setw(static_cast<int>(w)) << r.method << std::right;
    for (double v : {r.mean, r.median, r.std, r.max}) os << std::setw(10) << v;
    os << std::setw(8) << r.count << '\n';
  }
  return os.str();
}

std::string errors_to_csv(const AteSummary& s) {
  std::string out = "t,error_m\n";
  for (std::size_t i = 0; i < s.errors.size(); ++i)
    out += (i < s.times.size() ? num(s.times[i]) : std::string()) + "," + num(s.errors[i]) + "\n";
  return out;
}

std::string cdf_to_csv(const std::vector<CdfPoint>& points) {
  std::string out = "error_m,fraction\n";
  for (const auto& p : points) out += num(p.value) + "," + num(p.fraction) + "\n";
  return out;
}

}  // namespace hyloc
