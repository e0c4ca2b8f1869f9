#pragma once

// Evaluation reports over the per-epoch hash-learning metrics.

#include <iosfwd>
#include <string>
#include <vector>

#include "dshl/hashnet.h"

namespace dshl {

/// Tidy CSV: epoch,train_loss,ham_pos_train,ham_neg_train,ham_pos_val,ham_neg_val
void write_curves_csv(std::ostream& out, const std::vector<EpochMetrics>& rows);

/// Self-contained SVG: the four Hamming curves and the training loss.
/// Throws MissingMetrics on empty input.
std::string curves_svg(const std::vector<EpochMetrics>& rows);

struct CurveSummary {
  double pos_train_first10 = 0.0;  // mean over the first min(10, n) epochs
  double pos_train_last10 = 0.0;
  double final_train_gap = 0.0;    // ham_neg_train - ham_pos_train, last epoch
  double final_val_gap = 0.0;      // ham_neg_val - ham_pos_val, last epoch
};

/// Throws MissingMetrics on empty input.
CurveSummary summarize(const std::vector<EpochMetrics>& rows);

}  // namespace dshl
