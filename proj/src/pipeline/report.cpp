#include "dshl/report.h"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "dshl/errors.h"

namespace dshl {

void write_curves_csv(std::ostream& out, const std::vector<EpochMetrics>& rows) {
  out << "epoch,train_loss,ham_pos_train,ham_neg_train,ham_pos_val,ham_neg_val\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.10g,%.10g,%.10g,%.10g,%.10g\n", r.epoch, r.train_loss,
                  r.ham_pos_train, r.ham_neg_train, r.ham_pos_val, r.ham_neg_val);
    out << buf;
  }
}

namespace {

struct Series {
  const char* name;
  const char* color;
  double EpochMetrics::*field;
  bool dashed;
};

constexpr Series kHamming[] = {
    {"positive train", "#1f77b4", &EpochMetrics::ham_pos_train, false},
    {"negative train", "#d62728", &EpochMetrics::ham_neg_train, false},
    {"positive validation", "#1f77b4", &EpochMetrics::ham_pos_val, true},
    {"negative validation", "#d62728", &EpochMetrics::ham_neg_val, true},
};
constexpr Series kLoss{"training loss", "#2ca02c", &EpochMetrics::train_loss, false};

struct Panel {
  double x0, y0, w, h;  // plot area in pixels
  double lo, hi;        // value range
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

void draw_panel(std::ostringstream& svg, const Panel& p, const std::vector<EpochMetrics>& rows,
                const Series* series, std::size_t n_series, const char* title) {
  const int first = rows.front().epoch, last = rows.back().epoch;
  const double span_x = std::max(1, last - first);
  const double span_y = p.hi > p.lo ? p.hi - p.lo : 1.0;
  auto px = [&](int e) { return p.x0 + (e - first) / span_x * p.w; };
  auto py = [&](double v) { return p.y0 + p.h - (v - p.lo) / span_y * p.h; };

  svg << "<text x=\"" << p.x0 + p.w / 2 << "\" y=\"" << p.y0 - 12
      << "\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  svg << "<rect x=\"" << p.x0 << "\" y=\"" << p.y0 << "\" width=\"" << p.w << "\" height=\"" << p.h
      << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = p.lo + span_y * k / 4.0;
    svg << "<text x=\"" << p.x0 - 6 << "\" y=\"" << py(v) + 4
        << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(v) << "</text>\n";
    svg << "<line x1=\"" << p.x0 << "\" x2=\"" << p.x0 + p.w << "\" y1=\"" << py(v) << "\" y2=\"" << py(v)
        << "\" stroke=\"#ddd\"/>\n";
  }
  svg << "<text x=\"" << p.x0 << "\" y=\"" << p.y0 + p.h + 16 << "\" font-size=\"11\">" << first
      << "</text>\n";
  svg << "<text x=\"" << p.x0 + p.w << "\" y=\"" << p.y0 + p.h + 16
      << "\" text-anchor=\"end\" font-size=\"11\">" << last << "</text>\n";
  svg << "<text x=\"" << p.x0 + p.w / 2 << "\" y=\"" << p.y0 + p.h + 30
      << "\" text-anchor=\"middle\" font-size=\"12\">epoch</text>\n";

  for (std::size_t s = 0; s < n_series; ++s) {
    const auto& ser = series[s];
    svg << "<polyline class=\"series\" data-name=\"" << ser.name << "\" fill=\"none\" stroke=\""
        << ser.color << "\" stroke-width=\"2\"" << (ser.dashed ? " stroke-dasharray=\"6 4\"" : "")
        << " points=\"";
    for (const auto& r : rows) svg << px(r.epoch) << "," << py(r.*ser.field) << " ";
    svg << "\"/>\n";
    const double ly = p.y0 + 16 + 16.0 * static_cast<double>(s);
    svg << "<line x1=\"" << p.x0 + p.w - 150 << "\" x2=\"" << p.x0 + p.w - 128 << "\" y1=\"" << ly - 4
        << "\" y2=\"" << ly - 4 << "\" stroke=\"" << ser.color << "\" stroke-width=\"2\""
        << (ser.dashed ? " stroke-dasharray=\"6 4\"" : "") << "/>\n";
    svg << "<text x=\"" << p.x0 + p.w - 122 << "\" y=\"" << ly << "\" font-size=\"11\">" << ser.name
        << "</text>\n";
  }
}

}  // namespace

std::string curves_svg(const std::vector<EpochMetrics>& rows) {
  if (rows.empty()) throw MissingMetrics("no metric rows to plot");
  double ham_hi = 0.0, loss_lo = rows.front().train_loss, loss_hi = loss_lo;
  for (const auto& r : rows) {
    for (const auto& s : kHamming) ham_hi = std::max(ham_hi, r.*s.field);
    loss_lo = std::min(loss_lo, r.train_loss);
    loss_hi = std::max(loss_hi, r.train_loss);
  }
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"1000\" height=\"420\" "
         "font-family=\"sans-serif\">\n";
  svg << "<rect width=\"1000\" height=\"420\" fill=\"white\"/>\n";
  draw_panel(svg, {70, 50, 400, 300, 0.0, std::max(1.0, std::ceil(ham_hi))}, rows, kHamming, 4,
             "Average Hamming distance");
  draw_panel(svg, {570, 50, 400, 300, loss_lo, loss_hi}, rows, &kLoss, 1, "Training loss");
  svg << "</svg>\n";
  return svg.str();
}

CurveSummary summarize(const std::vector<EpochMetrics>& rows) {
  if (rows.empty()) throw MissingMetrics("no metric rows to summarize");
  const std::size_t n = std::min<std::size_t>(10, rows.size());
  CurveSummary s;
  for (std::size_t k = 0; k < n; ++k) {
    s.pos_train_first10 += rows[k].ham_pos_train / static_cast<double>(n);
    s.pos_train_last10 += rows[rows.size() - 1 - k].ham_pos_train / static_cast<double>(n);
  }
  s.final_train_gap = rows.back().ham_neg_train - rows.back().ham_pos_train;
  s.final_val_gap = rows.back().ham_neg_val - rows.back().ham_pos_val;
  return s;
}

}  // namespace dshl
