#include "cusal/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace cusal {

namespace {

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

std::string coord(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

std::string tick_label(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

const char* kPalette[] = {"#4472c4", "#ed7d31", "#70ad47", "#ffc000",
                          "#5b9bd5", "#c00000", "#7030a0", "#264478",
                          "#9e480e", "#636363"};

const MetricSummary& metric_of(const StrategySummary& s, const std::string& name) {
  if (name == "test_acc") return s.test_acc;
  if (name == "test_ece") return s.test_ece;
  if (name == "pool_ece") return s.pool_ece;
  throw std::invalid_argument("unknown metric " + name);
}

}  // namespace

std::string csv_header() {
  return "strategy,seed,round,n_labeled,pool_size,test_acc,test_ece,pool_ece,"
         "mean_pool_cal_estimate,n_cal_selected,n_unc_selected,wallclock_s\n";
}

std::string format_csv(const std::string& strategy, std::uint64_t seed,
                       std::span<const RoundRecord> records, bool with_header) {
  std::string out;
  if (with_header) out += csv_header();
  for (const RoundRecord& r : records) {
    out += strategy;
    out += ',';
    out += std::to_string(seed);
    out += ',';
    out += std::to_string(r.round);
    out += ',';
    out += std::to_string(r.n_labeled);
    out += ',';
    out += std::to_string(r.pool_size);
    out += ',';
    out += num(r.test_acc);
    out += ',';
    out += num(r.test_ece);
    out += ',';
    out += num(r.pool_ece);
    out += ',';
    out += num(r.mean_pool_cal_estimate);
    out += ',';
    out += std::to_string(r.n_cal_selected);
    out += ',';
    out += std::to_string(r.n_unc_selected);
    out += ',';
    out += num(r.wallclock_s);
    out += '\n';
  }
  return out;
}

std::string format_summary_json(const ExperimentConfig& cfg,
                                const RunSummary& summary) {
  nlohmann::ordered_json root;
  root["name"] = cfg.name;
  root["rounds"] = summary.rounds;
  root["seeds"] = cfg.seeds;

  nlohmann::ordered_json strategies;
  for (const StrategySummary& s : summary.strategies) {
    nlohmann::ordered_json entry;
    for (const char* name : {"test_acc", "test_ece", "pool_ece"}) {
      const MetricSummary& m = metric_of(s, name);
      nlohmann::ordered_json metric;
      metric["mean"] = m.mean;
      if (m.stddev.empty())
        metric["std"] = nullptr;
      else
        metric["std"] = m.stddev;
      entry[name] = metric;
    }
    strategies[s.strategy] = entry;
  }
  root["strategies"] = strategies;

  nlohmann::ordered_json welch = nlohmann::ordered_json::array();
  for (const WelchResult& w : summary.welch) {
    nlohmann::ordered_json t;
    t["metric"] = w.metric;
    t["round"] = w.round;
    t["a"] = w.strategy_a;
    t["b"] = w.strategy_b;
    t["mean_a"] = w.mean_a;
    t["mean_b"] = w.mean_b;
    t["p"] = w.p_value;
    welch.push_back(t);
  }
  root["welch"] = welch;
  root["config"] = serialize_config(cfg);
  return root.dump(2) + "\n";
}

std::string format_curve_svg(const RunSummary& summary, const std::string& metric) {
  const double width = 720, height = 480;
  const double left = 60, right = width - 170, top = 30, bottom = height - 45;
  const int t_final = summary.rounds;

  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const StrategySummary& s : summary.strategies) {
    const MetricSummary& m = metric_of(s, metric);
    for (std::size_t r = 0; r < m.mean.size(); ++r) {
      const double sd = m.stddev.empty() ? 0.0 : m.stddev[r];
      lo = std::min(lo, m.mean[r] - sd);
      hi = std::max(hi, m.mean[r] + sd);
    }
  }
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;

  auto x_of = [&](double round) {
    if (t_final == 0) return (left + right) / 2.0;
    return left + (right - left) * round / t_final;
  };
  auto y_of = [&](double v) {
    return bottom - (bottom - top) * (v - lo) / (hi - lo);
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " " << height
      << "\">\n";
  svg << "<rect width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";
  svg << "<text x=\"" << coord((left + right) / 2) << "\" y=\"18\" "
      << "text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
      << metric << " by round</text>\n";

  // axes and ticks
  svg << "<line x1=\"" << coord(left) << "\" y1=\"" << coord(bottom) << "\" x2=\""
      << coord(right) << "\" y2=\"" << coord(bottom)
      << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  svg << "<line x1=\"" << coord(left) << "\" y1=\"" << coord(top) << "\" x2=\""
      << coord(left) << "\" y2=\"" << coord(bottom)
      << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  const int n_ticks = 5;
  for (int i = 0; i <= n_ticks; ++i) {
    const double round = t_final * static_cast<double>(i) / n_ticks;
    const double x = x_of(round);
    svg << "<line x1=\"" << coord(x) << "\" y1=\"" << coord(bottom) << "\" x2=\""
        << coord(x) << "\" y2=\"" << coord(bottom + 5)
        << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << coord(x) << "\" y=\"" << coord(bottom + 18)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << tick_label(round) << "</text>\n";
    const double v = lo + (hi - lo) * static_cast<double>(i) / n_ticks;
    const double y = y_of(v);
    svg << "<line x1=\"" << coord(left - 5) << "\" y1=\"" << coord(y) << "\" x2=\""
        << coord(left) << "\" y2=\"" << coord(y)
        << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << coord(left - 8) << "\" y=\"" << coord(y + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
        << tick_label(v) << "</text>\n";
  }
  svg << "<text x=\"" << coord((left + right) / 2) << "\" y=\""
      << coord(height - 10)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
      << "round</text>\n";

  for (std::size_t si = 0; si < summary.strategies.size(); ++si) {
    const StrategySummary& s = summary.strategies[si];
    const MetricSummary& m = metric_of(s, metric);
    const char* color = kPalette[si % (sizeof kPalette / sizeof kPalette[0])];

    if (!m.stddev.empty()) {
      svg << "<polygon fill=\"" << color << "\" fill-opacity=\"0.18\" "
          << "stroke=\"none\" points=\"";
      for (std::size_t r = 0; r < m.mean.size(); ++r)
        svg << coord(x_of(static_cast<double>(r))) << ","
            << coord(y_of(m.mean[r] + m.stddev[r])) << " ";
      for (std::size_t r = m.mean.size(); r-- > 0;)
        svg << coord(x_of(static_cast<double>(r))) << ","
            << coord(y_of(m.mean[r] - m.stddev[r])) << " ";
      svg << "\"/>\n";
    }

    svg << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t r = 0; r < m.mean.size(); ++r)
      svg << coord(x_of(static_cast<double>(r))) << "," << coord(y_of(m.mean[r]))
          << " ";
    svg << "\"/>\n";

    const double ly = top + 18.0 * static_cast<double>(si);
    svg << "<line x1=\"" << coord(right + 12) << "\" y1=\"" << coord(ly) << "\" x2=\""
        << coord(right + 36) << "\" y2=\"" << coord(ly) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << coord(right + 42) << "\" y=\"" << coord(ly + 4)
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << s.strategy
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("cannot write " + path);
}

}  // namespace cusal
