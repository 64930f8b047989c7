#pragma once

#include "wristloc/dataset.hpp"
#include "wristloc/geometry.hpp"
#include "wristloc/model.hpp"

#include <json.hpp>

#include <array>
#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace wristloc::eval {

/// Mean of the per-coordinate absolute differences.
double mae(const Vec3& pred, const Vec3& target);
double euclidean_error(const Vec3& pred, const Vec3& target);

/// Sorted-order linear interpolation between closest ranks: with the values
/// sorted ascending and h = (n - 1) q, the result is
/// x[floor h] + (h - floor h) (x[floor h + 1] - x[floor h]).
/// Throws EmptyInput, InvalidArgument for q outside [0, 1].
double quantile(std::vector<double> values, double q);
double median(std::vector<double> values);

struct ErrorRecord {
  std::string frame_id;
  double mae = 0.0;
  double euclidean = 0.0;
  Vec3 abs_err = Vec3::Zero();
  std::string group;
  synth::TagSet tags;
  bool multi_object = false;
  bool lighting_unusual = false;
};

struct ErrorSummary {
  std::size_t count = 0;
  double median_mae = 0.0;
  double median_euclidean = 0.0;
  Vec3 median_abs_err = Vec3::Zero();
};

struct ErrorTable {
  std::vector<ErrorRecord> records;
  ErrorSummary summary;

  std::vector<double> maes() const;
  std::vector<double> euclideans() const;
};

ErrorRecord make_record(const data::FrameRecord& frame, const Vec3& prediction);
/// One record per frame plus summary medians. Throws EmptyTestSet,
/// DimensionMismatch when the two lists differ in length.
ErrorTable error_table(const std::vector<data::FrameRecord>& frames, const std::vector<Vec3>& predictions);

/// Runs the model on every frame (reading images from disk) and tabulates
/// the errors. Frames are split across `jobs` threads; results do not depend
/// on the thread count. Throws EmptyTestSet, RoutingViolation.
ErrorTable evaluate(const model::PositionRegressor& model, const std::vector<data::FrameRecord>& frames,
                    int jobs = 1);

struct CdfPoint {
  double threshold = 0.0;
  double fraction = 0.0;
};

/// Empirical CDF with one step per distinct value. Throws EmptyInput.
std::vector<CdfPoint> cdf(std::vector<double> errors);
/// Fraction of errors <= x read off the step function.
double cdf_at(const std::vector<CdfPoint>& steps, double x);

struct GroupCount {
  std::string group;
  std::size_t count = 0;
};

/// Records with mae strictly above `threshold`, per group, by count
/// descending then group name. Threshold 0 counts every record with a
/// positive error. Throws InvalidArgument for a negative threshold.
std::vector<GroupCount> outlier_counts(const ErrorTable& table, double threshold = 40.0);

/// (v - median) / IQR with quartiles from `quantile`. Needs at least 4
/// values (InvalidArgument) and a positive IQR (DegenerateSpread).
std::vector<double> iqr_scale(const std::vector<double>& values);

struct MannWhitney {
  double u = 0.0;  // pairs with a > b, ties counted one half
  double p = 1.0;  // two-sided
  bool exact = false;
};

/// Exact null distribution when n * m <= 64 and the pooled sample has no
/// ties; otherwise the normal approximation with tie-corrected variance and
/// a 0.5 continuity correction. p is clamped to (0, 1]. Throws EmptyGroup.
MannWhitney mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b);

/// Each p times `tests` (default: the list length), clamped to 1. Throws
/// InvalidArgument for p outside [0, 1].
std::vector<double> bonferroni(const std::vector<double>& p_values, std::size_t tests = 0);

inline constexpr std::array<std::string_view, 5> kHypotheses = {
    "vertical", "unusual_design", "irregular", "wide", "lighting_unusual"};

/// True when the record carries the named property.
bool has_property(const ErrorRecord& r, std::string_view hypothesis);

struct HypothesisResult {
  std::string name;
  std::size_t tagged = 0;
  std::size_t untagged = 0;
  double u = 0.0;
  double p_raw = 1.0;
  double p_corrected = 1.0;
  bool significant = false;
  std::string direction;  // "tagged", "untagged" or "equal": larger median mae
};

/// Tagged vs untagged mae for each of the five hypotheses, Bonferroni over
/// all five. Throws InsufficientGroup naming the first hypothesis with fewer
/// than 2 records on a side.
std::vector<HypothesisResult> hypothesis_report(const ErrorTable& table, double alpha = 0.05);

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> fractions;
};

struct CoordinateSpread {
  char axis = 'x';
  std::array<double, 5> quantiles{};  // 1, 25, 50, 75, 99 percent of the scaled errors
  double spread = 0.0;                // 99th minus 1st percentile
  Histogram histogram;
};

inline constexpr std::array<double, 5> kSpreadLevels = {0.01, 0.25, 0.50, 0.75, 0.99};

struct SpreadReport {
  std::array<CoordinateSpread, 3> coordinates;
  double z_spread_ratio = 0.0;  // z spread over the mean of the x and y spreads
};

/// IQR-scales the absolute error of each coordinate separately. Throws
/// EmptyInput, DegenerateSpread.
SpreadReport coordinate_spread_report(const ErrorTable& table, int bins = 24);

// Output formats. The tags column of the error CSV is a ';'-separated list
// that also carries the multi_object and lighting_unusual flags.
void write_error_csv(std::ostream& out, const ErrorTable& table);
/// Parses what write_error_csv produced and recomputes the summary. Throws
/// SchemaError naming the line, EmptyInput for a header-only file.
ErrorTable read_error_csv(std::istream& in);
void write_cdf_csv(std::ostream& out, const std::vector<CdfPoint>& steps);
void write_spread_csv(std::ostream& out, const SpreadReport& report);
std::string cdf_svg(const std::vector<std::pair<std::string, std::vector<CdfPoint>>>& curves,
                    double marker_mm = 10.0);
std::string violin_svg(const SpreadReport& report);

nlohmann::ordered_json to_json(const ErrorSummary& s);
nlohmann::ordered_json to_json(const std::vector<HypothesisResult>& results);
nlohmann::ordered_json to_json(const SpreadReport& report);
nlohmann::ordered_json to_json(const std::vector<GroupCount>& counts);

}  // namespace wristloc::eval
