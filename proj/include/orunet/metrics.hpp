#pragma once

#include <filesystem>
#include <vector>

#include "orunet/image.hpp"

namespace orunet::eval {

/// Exclusion convention for undefined Dice cases.
/// Train: a frame is excluded only when prediction AND ground truth are both
/// empty; a single false-positive pixel on an empty ground truth scores 0.
/// Test: every frame with an empty ground truth is excluded.
enum class Convention { Train, Test };

std::string to_string(Convention c);
Convention convention_from_string(const std::string& name);

struct DiceValue {
  bool excluded = false;
  double value = 0.0;
};

/// Dice = 2|P∩G| / (|P| + |G|) over binary masks of equal shape.
DiceValue dice_score(const img::MaskU8& pred, const img::MaskU8& gt, Convention convention);

struct CohortSummary {
  double mean = 0, median = 0, q25 = 0, q75 = 0;
  int64_t count_included = 0, count_excluded = 0;
  std::vector<int64_t> histogram;  // fixed-width bins over [0, 1]
};

/// Mean/median/IQR over included records only. Median is the lower of the two
/// middles for even counts; quartiles use linear interpolation. Requires at
/// least one included record.
CohortSummary summarize(const std::vector<DiceValue>& records, int bins = 20);

/// For each requested percentile (0..100), the index of the record whose dice
/// is nearest the percentile value of the included distribution; ties pick
/// the lower index. Excluded records are never selected.
std::vector<size_t> percentile_cases(const std::vector<DiceValue>& records,
                                     const std::vector<double>& percentiles);

/// Writes the bin table as plain text and a rendered bar chart image.
void histogram_report(const CohortSummary& summary, const std::filesystem::path& text_path,
                      const std::filesystem::path& image_path);

}  // namespace orunet::eval
