#include "wristloc/evaluation.hpp"

#include "wristloc/errors.hpp"
#include "wristloc/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

namespace wristloc::eval {

namespace {

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string join_tags(const ErrorRecord& r) {
  auto names = r.tags.names();
  if (r.multi_object) names.emplace_back("multi_object");
  if (r.lighting_unusual) names.emplace_back("lighting_unusual");
  std::string out;
  for (const auto& t : names) out += (out.empty() ? "" : ";") + t;
  return out;
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

ErrorSummary summarize(const std::vector<ErrorRecord>& records) {
  ErrorSummary s;
  s.count = records.size();
  std::array<std::vector<double>, 5> cols;
  for (const auto& r : records) {
    cols[0].push_back(r.mae);
    cols[1].push_back(r.euclidean);
    for (int c = 0; c < 3; ++c) cols[2 + c].push_back(r.abs_err(c));
  }
  s.median_mae = median(cols[0]);
  s.median_euclidean = median(cols[1]);
  for (int c = 0; c < 3; ++c) s.median_abs_err(c) = median(cols[2 + c]);
  return s;
}

}  // namespace

double mae(const Vec3& pred, const Vec3& target) { return (pred - target).cwiseAbs().sum() / 3.0; }

double euclidean_error(const Vec3& pred, const Vec3& target) { return (pred - target).norm(); }

double quantile(std::vector<double> values, double q) {
  if (values.empty()) fail(ErrorCode::EmptyInput, "quantile of an empty list");
  if (!(q >= 0.0 && q <= 1.0)) fail(ErrorCode::InvalidArgument, "quantile level must be in [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

std::vector<double> ErrorTable::maes() const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.mae);
  return out;
}

std::vector<double> ErrorTable::euclideans() const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.euclidean);
  return out;
}

ErrorRecord make_record(const data::FrameRecord& frame, const Vec3& prediction) {
  ErrorRecord r;
  r.frame_id = frame.image_rel.empty() ? frame.image_ref.string() : frame.image_rel;
  r.abs_err = (prediction - frame.target).cwiseAbs();
  r.mae = mae(prediction, frame.target);
  r.euclidean = euclidean_error(prediction, frame.target);
  r.group = frame.group;
  r.tags = frame.tags;
  r.multi_object = frame.multi_object;
  r.lighting_unusual = frame.lighting_unusual;
  return r;
}

ErrorTable error_table(const std::vector<data::FrameRecord>& frames, const std::vector<Vec3>& predictions) {
  if (frames.empty()) fail(ErrorCode::EmptyTestSet, "no test frames to evaluate");
  if (frames.size() != predictions.size()) {
    fail(ErrorCode::DimensionMismatch, std::to_string(frames.size()) + " frames but " +
                                           std::to_string(predictions.size()) + " predictions");
  }
  ErrorTable t;
  t.records.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) t.records.push_back(make_record(frames[i], predictions[i]));
  t.summary = summarize(t.records);
  return t;
}

ErrorTable evaluate(const model::PositionRegressor& model, const std::vector<data::FrameRecord>& frames, int jobs) {
  if (frames.empty()) fail(ErrorCode::EmptyTestSet, "no test frames to evaluate");
  std::vector<Vec3> predictions(frames.size(), Vec3::Zero());
  const auto workers = static_cast<std::size_t>(std::clamp(jobs, 1, 64));
  std::vector<std::exception_ptr> errors(workers);
  auto work = [&](std::size_t w) {
    try {
      for (std::size_t i = w; i < frames.size(); i += workers) {
        predictions[i] = model.predict_position(read_png(frames[i].image_ref), frames[i].prompt);
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return error_table(frames, predictions);
}

std::vector<CdfPoint> cdf(std::vector<double> errors) {
  if (errors.empty()) fail(ErrorCode::EmptyInput, "cdf of an empty list");
  std::sort(errors.begin(), errors.end());
  std::vector<CdfPoint> out;
  const double n = static_cast<double>(errors.size());
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (i + 1 < errors.size() && errors[i + 1] == errors[i]) continue;
    out.push_back({errors[i], i + 1 == errors.size() ? 1.0 : static_cast<double>(i + 1) / n});
  }
  return out;
}

double cdf_at(const std::vector<CdfPoint>& steps, double x) {
  const auto it = std::upper_bound(steps.begin(), steps.end(), x,
                                   [](double v, const CdfPoint& p) { return v < p.threshold; });
  return it == steps.begin() ? 0.0 : std::prev(it)->fraction;
}

std::vector<GroupCount> outlier_counts(const ErrorTable& table, double threshold) {
  if (!(threshold >= 0.0)) fail(ErrorCode::InvalidArgument, "outlier threshold must be >= 0");
  std::map<std::string, std::size_t> counts;
  for (const auto& r : table.records) {
    if (r.mae > threshold) ++counts[r.group];
  }
  std::vector<GroupCount> out;
  for (const auto& [g, n] : counts) out.push_back({g, n});
  std::stable_sort(out.begin(), out.end(), [](const GroupCount& a, const GroupCount& b) { return a.count > b.count; });
  return out;
}

std::vector<double> iqr_scale(const std::vector<double>& values) {
  if (values.size() < 4) fail(ErrorCode::InvalidArgument, "iqr_scale needs at least 4 values");
  const double med = quantile(values, 0.5);
  const double iqr = quantile(values, 0.75) - quantile(values, 0.25);
  if (!(iqr > 0.0)) fail(ErrorCode::DegenerateSpread, "interquartile range is zero");
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) out.push_back((v - med) / iqr);
  return out;
}

namespace {

// counts[u] = number of arrangements of n a's and m b's with U_a = u.
std::vector<double> u_distribution(std::size_t n, std::size_t m) {
  // f[i][j] is the distribution for sizes (i, j); built up row by row.
  std::vector<std::vector<std::vector<std::uint64_t>>> f(
      n + 1, std::vector<std::vector<std::uint64_t>>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) {
    for (std::size_t j = 0; j <= m; ++j) {
      auto& cur = f[i][j];
      cur.assign(i * j + 1, 0);
      if (i == 0 || j == 0) {
        cur[0] = 1;
        continue;
      }
      // The largest value is either an a (beating all j b's) or a b.
      const auto& with_a = f[i - 1][j];
      for (std::size_t u = 0; u < with_a.size(); ++u) cur[u + j] += with_a[u];
      const auto& with_b = f[i][j - 1];
      for (std::size_t u = 0; u < with_b.size(); ++u) cur[u] += with_b[u];
    }
  }
  const auto& last = f[n][m];
  return std::vector<double>(last.begin(), last.end());
}

}  // namespace

MannWhitney mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) fail(ErrorCode::EmptyGroup, "mann_whitney_u needs two non-empty samples");
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  const std::size_t total = n + m;

  // Mid-ranks over the pooled sample.
  std::vector<std::pair<double, bool>> pooled;
  pooled.reserve(total);
  for (double v : a) pooled.emplace_back(v, true);
  for (double v : b) pooled.emplace_back(v, false);
  std::sort(pooled.begin(), pooled.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  double rank_sum_a = 0.0;
  double tie_term = 0.0;
  bool ties = false;
  for (std::size_t i = 0; i < total;) {
    std::size_t j = i;
    while (j < total && pooled[j].first == pooled[i].first) ++j;
    const double t = static_cast<double>(j - i);
    const double mid = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (pooled[k].second) rank_sum_a += mid;
    }
    if (t > 1) {
      ties = true;
      tie_term += t * t * t - t;
    }
    i = j;
  }
  const double dn = static_cast<double>(n);
  const double dm = static_cast<double>(m);
  MannWhitney out;
  out.u = rank_sum_a - dn * (dn + 1.0) / 2.0;

  if (n * m <= 64 && !ties) {
    const auto dist = u_distribution(n, m);
    const double all = std::accumulate(dist.begin(), dist.end(), 0.0);
    const auto u = static_cast<std::size_t>(std::llround(out.u));
    double lower = 0.0;
    for (std::size_t k = 0; k <= u; ++k) lower += dist[k];
    double upper = 0.0;
    for (std::size_t k = u; k < dist.size(); ++k) upper += dist[k];
    out.p = std::min(1.0, 2.0 * std::min(lower, upper) / all);
    out.exact = true;
    return out;
  }

  const double dt = static_cast<double>(total);
  const double variance = dn * dm / 12.0 * ((dt + 1.0) - tie_term / (dt * (dt - 1.0)));
  if (!(variance > 0.0)) {
    out.p = 1.0;
    return out;
  }
  const double z = std::max(0.0, std::abs(out.u - dn * dm / 2.0) - 0.5) / std::sqrt(variance);
  out.p = std::clamp(std::erfc(z / std::sqrt(2.0)), std::numeric_limits<double>::min(), 1.0);
  return out;
}

std::vector<double> bonferroni(const std::vector<double>& p_values, std::size_t tests) {
  const double k = static_cast<double>(tests == 0 ? p_values.size() : tests);
  std::vector<double> out;
  out.reserve(p_values.size());
  for (double p : p_values) {
    if (!(p >= 0.0 && p <= 1.0)) fail(ErrorCode::InvalidArgument, "p-values must be in [0, 1]");
    out.push_back(std::min(1.0, p * k));
  }
  return out;
}

bool has_property(const ErrorRecord& r, std::string_view hypothesis) {
  if (hypothesis == "vertical") return r.tags.vertical;
  if (hypothesis == "unusual_design") return r.tags.unusual_design;
  if (hypothesis == "irregular") return r.tags.irregular;
  if (hypothesis == "wide") return r.tags.wide;
  if (hypothesis == "lighting_unusual") return r.lighting_unusual;
  fail(ErrorCode::InvalidArgument, "unknown hypothesis " + std::string(hypothesis));
}

std::vector<HypothesisResult> hypothesis_report(const ErrorTable& table, double alpha) {
  std::vector<HypothesisResult> out;
  std::vector<double> raw;
  for (const auto name : kHypotheses) {
    std::vector<double> tagged;
    std::vector<double> untagged;
    for (const auto& r : table.records) (has_property(r, name) ? tagged : untagged).push_back(r.mae);
    if (tagged.size() < 2 || untagged.size() < 2) {
      fail(ErrorCode::InsufficientGroup,
           std::string(name) + ": needs at least 2 records on each side, got " + std::to_string(tagged.size()) +
               " tagged and " + std::to_string(untagged.size()) + " untagged");
    }
    HypothesisResult h;
    h.name = name;
    h.tagged = tagged.size();
    h.untagged = untagged.size();
    const auto test = mann_whitney_u(tagged, untagged);
    h.u = test.u;
    h.p_raw = test.p;
    const double mt = median(tagged);
    const double mu = median(untagged);
    h.direction = mt > mu ? "tagged" : mt < mu ? "untagged" : "equal";
    raw.push_back(h.p_raw);
    out.push_back(std::move(h));
  }
  const auto corrected = bonferroni(raw, raw.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].p_corrected = corrected[i];
    out[i].significant = corrected[i] < alpha;
  }
  return out;
}

SpreadReport coordinate_spread_report(const ErrorTable& table, int bins) {
  if (table.records.empty()) fail(ErrorCode::EmptyInput, "spread report of an empty table");
  if (bins < 1) fail(ErrorCode::InvalidArgument, "histogram needs at least one bin");
  SpreadReport rep;
  for (int c = 0; c < 3; ++c) {
    std::vector<double> v;
    v.reserve(table.records.size());
    for (const auto& r : table.records) v.push_back(r.abs_err(c));
    std::vector<double> scaled;
    try {
      scaled = iqr_scale(v);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateSpread) throw;
      fail(ErrorCode::DegenerateSpread, std::string("coordinate ") + "xyz"[c] + ": " + e.what());
    }
    auto& cs = rep.coordinates[c];
    cs.axis = "xyz"[c];
    for (std::size_t k = 0; k < kSpreadLevels.size(); ++k) cs.quantiles[k] = quantile(scaled, kSpreadLevels[k]);
    cs.spread = cs.quantiles[4] - cs.quantiles[0];
    const auto [mn, mx] = std::minmax_element(scaled.begin(), scaled.end());
    cs.histogram.lo = *mn;
    cs.histogram.hi = *mx;
    std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
    const double width = (*mx - *mn) / bins;
    for (double s : scaled) {
      auto b = width > 0.0 ? static_cast<std::size_t>((s - *mn) / width) : 0;
      ++counts[std::min(b, counts.size() - 1)];
    }
    for (auto n : counts) cs.histogram.fractions.push_back(static_cast<double>(n) / static_cast<double>(scaled.size()));
  }
  const double xy = 0.5 * (rep.coordinates[0].spread + rep.coordinates[1].spread);
  rep.z_spread_ratio = xy > 0.0 ? rep.coordinates[2].spread / xy : std::numeric_limits<double>::infinity();
  return rep;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

void write_error_csv(std::ostream& out, const ErrorTable& table) {
  out << "frame_id,group,tags,mae,euclidean,ax,ay,az\n";
  for (const auto& r : table.records) {
    out << r.frame_id << ',' << r.group << ',' << join_tags(r) << ',' << fixed(r.mae) << ','
        << fixed(r.euclidean) << ',' << fixed(r.abs_err.x()) << ',' << fixed(r.abs_err.y()) << ','
        << fixed(r.abs_err.z()) << '\n';
  }
}

ErrorTable read_error_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "frame_id,group,tags,mae,euclidean,ax,ay,az") {
    fail(ErrorCode::SchemaError, "error table: unexpected header");
  }
  ErrorTable t;
  for (int n = 2; std::getline(in, line); ++n) {
    if (line.empty()) continue;
    const auto f = split_on(line, ',');
    if (f.size() != 8) fail(ErrorCode::SchemaError, "error table line " + std::to_string(n) + ": expected 8 fields");
    ErrorRecord r;
    r.frame_id = f[0];
    r.group = f[1];
    std::vector<std::string> tags;
    for (const auto& name : split_on(f[2], ';')) {
      if (name == "multi_object") {
        r.multi_object = true;
      } else if (name == "lighting_unusual") {
        r.lighting_unusual = true;
      } else if (!name.empty()) {
        tags.push_back(name);
      }
    }
    try {
      r.tags = synth::TagSet::from_names(tags);
      r.mae = std::stod(f[3]);
      r.euclidean = std::stod(f[4]);
      for (int c = 0; c < 3; ++c) r.abs_err(c) = std::stod(f[5 + c]);
    } catch (const std::exception& e) {
      fail(ErrorCode::SchemaError, "error table line " + std::to_string(n) + ": " + e.what());
    }
    t.records.push_back(std::move(r));
  }
  if (t.records.empty()) fail(ErrorCode::EmptyInput, "error table has no records");
  t.summary = summarize(t.records);
  return t;
}

void write_cdf_csv(std::ostream& out, const std::vector<CdfPoint>& steps) {
  out << "threshold,fraction\n";
  for (const auto& p : steps) out << fixed(p.threshold) << ',' << fixed(p.fraction, 9) << '\n';
}

void write_spread_csv(std::ostream& out, const SpreadReport& report) {
  out << "axis,kind,key,value\n";
  for (const auto& c : report.coordinates) {
    for (std::size_t k = 0; k < kSpreadLevels.size(); ++k) {
      out << c.axis << ",quantile," << fixed(kSpreadLevels[k], 2) << ',' << fixed(c.quantiles[k]) << '\n';
    }
    const double width = (c.histogram.hi - c.histogram.lo) / static_cast<double>(c.histogram.fractions.size());
    for (std::size_t b = 0; b < c.histogram.fractions.size(); ++b) {
      out << c.axis << ",bin," << fixed(c.histogram.lo + (static_cast<double>(b) + 0.5) * width) << ','
          << fixed(c.histogram.fractions[b], 9) << '\n';
    }
  }
}

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

}  // namespace

std::string cdf_svg(const std::vector<std::pair<std::string, std::vector<CdfPoint>>>& curves, double marker_mm) {
  constexpr double W = 640, H = 400, L = 60, R = 20, T = 20, B = 50;
  double xmax = marker_mm;
  for (const auto& [name, pts] : curves) {
    if (!pts.empty()) xmax = std::max(xmax, quantile([&] {
                                        std::vector<double> v;
                                        for (const auto& p : pts) v.push_back(p.threshold);
                                        return v;
                                      }(), 0.98));
  }
  auto sx = [&](double x) { return L + (W - L - R) * std::min(x, xmax) / xmax; };
  auto sy = [&](double y) { return H - B - (H - T - B) * y; };
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << sy(0) << "\" x2=\"" << W - R << "\" y2=\"" << sy(0) << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << sy(0) << "\" x2=\"" << L << "\" y2=\"" << sy(1) << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double y = k / 4.0;
    s << "<text x=\"" << L - 8 << "\" y=\"" << sy(y) + 4 << "\" font-size=\"11\" text-anchor=\"end\">" << fixed(y, 2) << "</text>\n";
  }
  for (int k = 0; k <= 5; ++k) {
    const double x = xmax * k / 5.0;
    s << "<text x=\"" << sx(x) << "\" y=\"" << H - B + 16 << "\" font-size=\"11\" text-anchor=\"middle\">" << fixed(x, 0) << "</text>\n";
  }
  s << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10 << "\" font-size=\"12\" text-anchor=\"middle\">MAE (mm)</text>\n";
  s << "<line x1=\"" << sx(marker_mm) << "\" y1=\"" << sy(0) << "\" x2=\"" << sx(marker_mm) << "\" y2=\"" << sy(1)
    << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
  for (std::size_t c = 0; c < curves.size(); ++c) {
    const auto& [name, pts] = curves[c];
    std::string d = "M " + fixed(sx(0), 2) + " " + fixed(sy(0), 2);
    double prev = 0.0;
    for (const auto& p : pts) {
      d += " L " + fixed(sx(p.threshold), 2) + " " + fixed(sy(prev), 2);
      d += " L " + fixed(sx(p.threshold), 2) + " " + fixed(sy(p.fraction), 2);
      prev = p.fraction;
    }
    const char* color = kPalette[c % 4];
    s << "<path d=\"" << d << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n";
    s << "<text x=\"" << W - R - 10 << "\" y=\"" << sy(0.1) + 16.0 * c << "\" font-size=\"12\" text-anchor=\"end\" fill=\""
      << color << "\">" << name << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string violin_svg(const SpreadReport& report) {
  constexpr double W = 480, H = 400, T = 20, B = 40, L = 50;
  double lo = 0.0, hi = 0.0, peak = 0.0;
  for (const auto& c : report.coordinates) {
    lo = std::min(lo, c.histogram.lo);
    hi = std::max(hi, c.quantiles[4]);
    for (double f : c.histogram.fractions) peak = std::max(peak, f);
  }
  if (hi <= lo) hi = lo + 1.0;
  auto sy = [&](double v) { return H - B - (H - T - B) * (std::clamp(v, lo, hi) - lo) / (hi - lo); };
  const double slot = (W - L) / 3.0;
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << sy(lo) << "\" x2=\"" << L << "\" y2=\"" << sy(hi) << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = lo + (hi - lo) * k / 4.0;
    s << "<text x=\"" << L - 6 << "\" y=\"" << sy(v) + 4 << "\" font-size=\"11\" text-anchor=\"end\">" << fixed(v, 1) << "</text>\n";
  }
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& c = report.coordinates[i];
    const double cx = L + slot * (static_cast<double>(i) + 0.5);
    const double half = 0.45 * slot;
    const auto& f = c.histogram.fractions;
    const double width = (c.histogram.hi - c.histogram.lo) / static_cast<double>(f.size());
    std::string right, left;
    for (std::size_t b = 0; b < f.size(); ++b) {
      const double y = sy(c.histogram.lo + (static_cast<double>(b) + 0.5) * width);
      const double dx = peak > 0.0 ? half * f[b] / peak : 0.0;
      right += (b == 0 ? "M " : " L ") + fixed(cx + dx, 2) + " " + fixed(y, 2);
      left = " L " + fixed(cx - dx, 2) + " " + fixed(y, 2) + left;
    }
    s << "<path d=\"" << right << left << " Z\" fill=\"" << kPalette[i] << "\" fill-opacity=\"0.4\" stroke=\""
      << kPalette[i] << "\"/>\n";
    s << "<line x1=\"" << cx - half / 2 << "\" y1=\"" << sy(c.quantiles[2]) << "\" x2=\"" << cx + half / 2 << "\" y2=\""
      << sy(c.quantiles[2]) << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
    s << "<line x1=\"" << cx << "\" y1=\"" << sy(c.quantiles[1]) << "\" x2=\"" << cx << "\" y2=\"" << sy(c.quantiles[3])
      << "\" stroke=\"black\" stroke-width=\"4\"/>\n";
    s << "<text x=\"" << cx << "\" y=\"" << H - B + 20 << "\" font-size=\"13\" text-anchor=\"middle\">" << c.axis << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

nlohmann::ordered_json to_json(const ErrorSummary& s) {
  nlohmann::ordered_json j;
  j["count"] = s.count;
  j["median_mae"] = s.median_mae;
  j["median_euclidean"] = s.median_euclidean;
  j["median_abs_err"] = {s.median_abs_err.x(), s.median_abs_err.y(), s.median_abs_err.z()};
  return j;
}

nlohmann::ordered_json to_json(const std::vector<HypothesisResult>& results) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& h : results) {
    nlohmann::ordered_json j;
    j["hypothesis"] = h.name;
    j["tagged"] = h.tagged;
    j["untagged"] = h.untagged;
    j["u"] = h.u;
    j["p_raw"] = h.p_raw;
    j["p_corrected"] = h.p_corrected;
    j["significant"] = h.significant;
    j["larger_error"] = h.direction;
    arr.push_back(std::move(j));
  }
  return arr;
}

nlohmann::ordered_json to_json(const SpreadReport& report) {
  nlohmann::ordered_json j;
  auto coords = nlohmann::ordered_json::array();
  for (const auto& c : report.coordinates) {
    nlohmann::ordered_json cj;
    cj["axis"] = std::string(1, c.axis);
    cj["quantile_levels"] = kSpreadLevels;
    cj["quantiles"] = c.quantiles;
    cj["spread"] = c.spread;
    cj["histogram"] = {{"lo", c.histogram.lo}, {"hi", c.histogram.hi}, {"fractions", c.histogram.fractions}};
    coords.push_back(std::move(cj));
  }
  j["coordinates"] = coords;
  j["z_spread_ratio"] = report.z_spread_ratio;
  return j;
}

nlohmann::ordered_json to_json(const std::vector<GroupCount>& counts) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& c : counts) arr.push_back({{"group", c.group}, {"count", c.count}});
  return arr;
}

}  // namespace wristloc::eval
