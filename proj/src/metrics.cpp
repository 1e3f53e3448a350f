#include "orunet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace orunet::eval {

std::string to_string(Convention c) { return c == Convention::Train ? "train" : "test"; }

Convention convention_from_string(const std::string& name) {
  if (name == "train") return Convention::Train;
  if (name == "test") return Convention::Test;
  throw std::invalid_argument("unknown evaluation convention: " + name);
}

DiceValue dice_score(const img::MaskU8& pred, const img::MaskU8& gt, Convention convention) {
  if (pred.height != gt.height || pred.width != gt.width)
    throw std::invalid_argument("dice_score: shape mismatch " + std::to_string(pred.height) + "x" +
                                std::to_string(pred.width) + " vs " + std::to_string(gt.height) +
                                "x" + std::to_string(gt.width));
  int64_t p = 0, g = 0, inter = 0;
  for (size_t i = 0; i < pred.labels.size(); ++i) {
    const bool pi = pred.labels[i] != 0, gi = gt.labels[i] != 0;
    p += pi;
    g += gi;
    inter += pi && gi;
  }
  if (convention == Convention::Test && g == 0) return {true, 0.0};
  if (g == 0 && p == 0) return {true, 0.0};  // Dice undefined: excluded from averaging
  return {false, 2.0 * double(inter) / double(p + g)};
}

namespace {

// linear-interpolation quantile over a sorted vector, q in [0, 1]
double interp_quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * double(sorted.size() - 1);
  const size_t lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - double(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::vector<double> included_sorted(const std::vector<DiceValue>& records) {
  std::vector<double> v;
  for (const auto& r : records)
    if (!r.excluded) v.push_back(r.value);
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

CohortSummary summarize(const std::vector<DiceValue>& records, int bins) {
  if (bins < 1) throw std::invalid_argument("summarize: bins must be >= 1");
  std::vector<double> v = included_sorted(records);
  if (v.empty()) throw std::runtime_error("summarize: no included records");

  CohortSummary s;
  s.count_included = static_cast<int64_t>(v.size());
  s.count_excluded = static_cast<int64_t>(records.size()) - s.count_included;
  double sum = 0;
  for (double d : v) sum += d;
  s.mean = sum / double(v.size());
  const size_t n = v.size();
  s.median = n % 2 == 1 ? v[n / 2] : v[n / 2 - 1];  // lower of the two middles
  s.q25 = interp_quantile(v, 0.25);
  s.q75 = interp_quantile(v, 0.75);

  s.histogram.assign(static_cast<size_t>(bins), 0);
  for (double d : v) {
    const int bin = std::min(bins - 1, static_cast<int>(std::floor(d * bins)));
    ++s.histogram[static_cast<size_t>(std::max(0, bin))];
  }
  return s;
}

std::vector<size_t> percentile_cases(const std::vector<DiceValue>& records,
                                     const std::vector<double>& percentiles) {
  std::vector<double> v = included_sorted(records);
  if (v.empty()) throw std::runtime_error("percentile_cases: no included records");
  std::vector<size_t> out;
  for (double p : percentiles) {
    const double target = interp_quantile(v, std::clamp(p, 0.0, 100.0) / 100.0);
    size_t best = records.size();
    double best_diff = 0;
    for (size_t i = 0; i < records.size(); ++i) {
      if (records[i].excluded) continue;
      const double diff = std::abs(records[i].value - target);
      if (best == records.size() || diff < best_diff) {
        best = i;
        best_diff = diff;
      }
    }
    out.push_back(best);
  }
  return out;
}

void histogram_report(const CohortSummary& summary, const std::filesystem::path& text_path,
                      const std::filesystem::path& image_path) {
  const int bins = static_cast<int>(summary.histogram.size());
  {
    std::ofstream out(text_path);
    if (!out) throw std::runtime_error("cannot write " + text_path.string());
    out << "bin_lo,bin_hi,count\n";
    for (int b = 0; b < bins; ++b)
      out << double(b) / bins << ',' << double(b + 1) / bins << ',' << summary.histogram[b]
          << '\n';
  }

  // simple bar chart: white canvas, gray axis, filled bars
  const int64_t bar_w = 18, gap = 4, margin = 24, plot_h = 220;
  const int64_t width = margin * 2 + bins * (bar_w + gap);
  const int64_t height = plot_h + 2 * margin;
  img::ImageU8 canvas(height, width);
  std::fill(canvas.pixels.begin(), canvas.pixels.end(), 255);
  int64_t max_count = 1;
  for (int64_t c : summary.histogram) max_count = std::max(max_count, c);
  for (int b = 0; b < bins; ++b) {
    const int64_t bar_h = summary.histogram[b] * plot_h / max_count;
    const int64_t x0 = margin + b * (bar_w + gap);
    for (int64_t y = height - margin - bar_h; y < height - margin; ++y)
      for (int64_t x = x0; x < x0 + bar_w; ++x) {
        canvas.at(y, x, 0) = 38;
        canvas.at(y, x, 1) = 90;
        canvas.at(y, x, 2) = 158;
      }
  }
  for (int64_t x = margin - 2; x < width - margin + 2; ++x)
    for (int c = 0; c < 3; ++c) canvas.at(height - margin, x, c) = 90;
  img::write_image(image_path, canvas);
}

}  // namespace orunet::eval
