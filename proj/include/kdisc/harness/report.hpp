#pragma once

#include <string>
#include <utility>
#include <vector>

namespace kdisc::harness {

/// Small SVG builder. Coordinates are in pixels, y grows downwards.
class Svg {
 public:
  Svg(double width, double height);

  Svg& rect(double x, double y, double w, double h, const std::string& fill,
            const std::string& cls = "", const std::string& title = "");
  Svg& line(double x1, double y1, double x2, double y2, const std::string& stroke = "#333",
            double width = 1.0);
  Svg& circle(double cx, double cy, double r, const std::string& fill, const std::string& cls = "");
  Svg& text(double x, double y, const std::string& s, double size = 11, const std::string& anchor = "start",
            double rotate = 0.0);
  std::string str() const;

 private:
  double w_, h_;
  std::string body_;
};

std::string xml_escape(const std::string& s);

/// Colour on a blue-white-red ramp for t in [0, 1].
std::string diverging_color(double t);
/// Colour on a dark-to-light sequential ramp for t in [0, 1].
std::string sequential_color(double t);

struct BoxStats {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
  std::vector<double> outliers;
};

/// Tukey-style box statistics: whiskers reach the most extreme points within
/// 1.5 IQR of the box; quartiles by linear interpolation.
BoxStats box_stats(std::vector<double> v);

std::string boxplot_svg(const std::string& title, const std::vector<std::string>& groups,
                        const std::vector<std::vector<double>>& values);

/// Lower-triangle heatmap of pairwise adjusted p-values. Each pair cell
/// carries class "pair".
std::string tukey_heatmap_svg(const std::string& title, const std::vector<std::string>& names,
                              const std::vector<std::vector<double>>& p);

struct CurvePoint {
  double mean_pred = 0, frac_pos = 0;
  std::size_t count = 0;
};

std::string calibration_svg(const std::string& title,
                            const std::vector<std::pair<std::string, std::vector<CurvePoint>>>& curves);

/// Horizontal bars, one per feature, each with class "bar".
std::string shap_bar_svg(const std::string& title, const std::vector<std::string>& features,
                         const std::vector<double>& values);

struct SwarmPoint {
  double phi = 0;
  double value_rank = 0;  ///< 0..1 percentile of the feature value, colours the point
};

std::string beeswarm_svg(const std::string& title, const std::vector<std::string>& features,
                         const std::vector<std::vector<SwarmPoint>>& points);

}  // namespace kdisc::harness
