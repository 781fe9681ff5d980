#include "cusal/experiment_config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <sstream>
#include <stdexcept>

namespace cusal {

namespace {

[[noreturn]] void fail(int line, const std::string& msg) {
  throw std::runtime_error("line " + std::to_string(line) + ": " + msg);
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  return parts;
}

double parse_double(const std::string& v, int line, const std::string& key) {
  const std::string t = trim(v);
  char* end = nullptr;
  const double x = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || !std::isfinite(x))
    fail(line, "expected finite number for '" + key + "'");
  return x;
}

long long parse_ll(const std::string& v, int line, const std::string& key) {
  const std::string t = trim(v);
  char* end = nullptr;
  const long long x = std::strtoll(t.c_str(), &end, 10);
  if (t.empty() || end != t.c_str() + t.size())
    fail(line, "expected integer for '" + key + "'");
  return x;
}

int parse_int(const std::string& v, int line, const std::string& key) {
  return static_cast<int>(parse_ll(v, line, key));
}

std::uint64_t parse_u64(const std::string& v, int line, const std::string& key) {
  const std::string t = trim(v);
  char* end = nullptr;
  const unsigned long long x = std::strtoull(t.c_str(), &end, 10);
  if (t.empty() || t[0] == '-' || end != t.c_str() + t.size())
    fail(line, "expected unsigned integer for '" + key + "'");
  return x;
}

bool parse_bool(const std::string& v, int line, const std::string& key) {
  const std::string t = trim(v);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  fail(line, "expected true/false for '" + key + "'");
}

std::vector<double> parse_vector(const std::string& v, int line,
                                 const std::string& key) {
  std::istringstream in(v);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) out.push_back(parse_double(tok, line, key));
  if (out.empty()) fail(line, "expected numbers for '" + key + "'");
  return out;
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

const std::vector<std::string>& strategy_names() {
  static const std::vector<std::string> names = {
      "cusal",          "random",         "least_confident",
      "margin",         "entropy",        "bald",
      "coreset",        "badge",          "rand_entropy",
      "cluster_margin", "cluster_cusal",  "combo_uniform",
      "combo_adaptive", "calibration_only", "least_confident_ts",
  };
  return names;
}

bool strategy_registered(const std::string& name) {
  const auto& names = strategy_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  cfg.strategies.clear();
  cfg.seeds.clear();

  std::set<std::string> seen;
  const std::vector<std::string> lines = split(text, '\n');
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const int line = static_cast<int>(li) + 1;
    std::string raw = lines[li];
    if (const auto hash = raw.find('#'); hash != std::string::npos)
      raw.resize(hash);
    const std::string stripped = trim(raw);
    if (stripped.empty()) continue;

    const auto eq = stripped.find('=');
    if (eq == std::string::npos) fail(line, "expected key = value");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) fail(line, "expected key = value");
    if (!seen.insert(key).second) fail(line, "duplicate key '" + key + "'");

    if (key == "name") {
      cfg.name = value;
    } else if (key == "dataset") {
      if (value != "gaussian_mixture" && value != "idx")
        fail(line, "dataset must be gaussian_mixture or idx");
      cfg.dataset = value;
    } else if (key == "idx_images") {
      cfg.idx_images = value;
    } else if (key == "idx_labels") {
      cfg.idx_labels = value;
    } else if (key == "classes") {
      cfg.synth.n_classes = parse_int(value, line, key);
      if (cfg.synth.n_classes < 2) fail(line, "classes must be at least 2");
    } else if (key == "dim") {
      cfg.synth.dim = parse_int(value, line, key);
      if (cfg.synth.dim < 1) fail(line, "dim must be positive");
    } else if (key == "samples") {
      cfg.synth.n_samples = parse_int(value, line, key);
      if (cfg.synth.n_samples < 1) fail(line, "samples must be positive");
    } else if (key == "label_noise") {
      cfg.synth.label_noise = parse_double(value, line, key);
      if (cfg.synth.label_noise < 0.0 || cfg.synth.label_noise >= 0.5)
        fail(line, "label_noise must lie in [0, 0.5)");
    } else if (key == "means") {
      cfg.synth.means.clear();
      for (const std::string& part : split(value, ';'))
        cfg.synth.means.push_back(parse_vector(part, line, key));
    } else if (key == "scales") {
      cfg.synth.scales = parse_vector(value, line, key);
      for (double s : cfg.synth.scales)
        if (!(s > 0.0)) fail(line, "scales must be positive");
    } else if (key == "imbalance_factor") {
      cfg.imbalance_factor = parse_double(value, line, key);
      if (cfg.imbalance_factor < 1.0) fail(line, "imbalance_factor must be >= 1");
    } else if (key == "subset") {
      cfg.subset = parse_int(value, line, key);
      if (cfg.subset < 0) fail(line, "subset must be non-negative");
    } else if (key == "test_fraction") {
      cfg.test_fraction = parse_double(value, line, key);
      if (cfg.test_fraction < 0.0 || cfg.test_fraction >= 1.0)
        fail(line, "test_fraction must lie in [0, 1)");
    } else if (key == "warmup_size") {
      cfg.warmup_size = parse_int(value, line, key);
      if (cfg.warmup_size < 1) fail(line, "warmup_size must be positive");
    } else if (key == "warmup_balanced") {
      cfg.warmup_balanced = parse_bool(value, line, key);
    } else if (key == "rounds") {
      cfg.rounds = parse_int(value, line, key);
      if (cfg.rounds < 0) fail(line, "rounds must be non-negative");
    } else if (key == "batch") {
      cfg.batch = parse_int(value, line, key);
      if (cfg.batch < 1) fail(line, "batch must be positive");
    } else if (key == "strategies") {
      for (const std::string& part : split(value, ',')) {
        const std::string s = trim(part);
        if (s.empty()) fail(line, "empty strategy name");
        if (!strategy_registered(s)) fail(line, "unknown strategy '" + s + "'");
        cfg.strategies.push_back(s);
      }
    } else if (key == "seeds") {
      for (const std::string& part : split(value, ','))
        cfg.seeds.push_back(parse_u64(part, line, key));
    } else if (key == "hidden") {
      cfg.hidden.clear();
      for (const std::string& part : split(value, ',')) {
        const int w = parse_int(part, line, key);
        if (w < 1) fail(line, "hidden widths must be positive");
        cfg.hidden.push_back(w);
      }
    } else if (key == "dropout") {
      cfg.dropout = parse_double(value, line, key);
      if (cfg.dropout < 0.0 || cfg.dropout >= 1.0)
        fail(line, "dropout must lie in [0, 1)");
    } else if (key == "learning_rate") {
      cfg.train.learning_rate = parse_double(value, line, key);
      if (!(cfg.train.learning_rate > 0.0))
        fail(line, "learning_rate must be positive");
    } else if (key == "batch_size") {
      cfg.train.batch_size = parse_int(value, line, key);
      if (cfg.train.batch_size < 1) fail(line, "batch_size must be positive");
    } else if (key == "epochs") {
      cfg.train.epochs = parse_int(value, line, key);
      if (cfg.train.epochs < 1) fail(line, "epochs must be positive");
    } else if (key == "mc_samples") {
      cfg.mc_samples = parse_int(value, line, key);
      if (cfg.mc_samples < 2) fail(line, "mc_samples must be at least 2");
    } else if (key == "bandwidth") {
      cfg.calibration.bandwidth = parse_double(value, line, key);
      if (!(cfg.calibration.bandwidth > 0.0))
        fail(line, "bandwidth must be positive");
    } else if (key == "p_norm") {
      cfg.calibration.p = parse_int(value, line, key);
      if (cfg.calibration.p < 1) fail(line, "p_norm must be at least 1");
    } else if (key == "denominator_floor") {
      cfg.calibration.denominator_floor = parse_double(value, line, key);
      if (!(cfg.calibration.denominator_floor > 0.0))
        fail(line, "denominator_floor must be positive");
    } else if (key == "ece_bins") {
      cfg.ece.n_bins = parse_int(value, line, key);
      if (cfg.ece.n_bins < 1) fail(line, "ece_bins must be positive");
    } else if (key == "tie_significant_digits") {
      cfg.tie.significant_digits = parse_int(value, line, key);
    } else if (key == "tie_decimals") {
      cfg.tie.decimals = parse_int(value, line, key);
      if (cfg.tie.decimals < -1) fail(line, "tie_decimals must be >= -1");
    } else if (key == "shortlist_factor") {
      cfg.shortlist_factor = parse_int(value, line, key);
      if (cfg.shortlist_factor < 1) fail(line, "shortlist_factor must be positive");
    } else if (key == "combo_multiplier") {
      cfg.combo_multiplier = parse_double(value, line, key);
      if (!(cfg.combo_multiplier > 0.0))
        fail(line, "combo_multiplier must be positive");
    } else if (key == "timing") {
      if (value != "none" && value != "wall")
        fail(line, "timing must be none or wall");
      cfg.timing = value;
    } else if (key == "out_dir") {
      cfg.out_dir = value;
    } else if (key == "emit_svg") {
      cfg.emit_svg = parse_bool(value, line, key);
    } else {
      fail(line, "unknown key '" + key + "'");
    }
  }

  if (cfg.strategies.empty())
    throw std::runtime_error("config: strategies must be listed");
  if (cfg.seeds.empty()) throw std::runtime_error("config: seeds must be listed");
  if (cfg.dataset == "idx" && (cfg.idx_images.empty() || cfg.idx_labels.empty()))
    throw std::runtime_error("config: idx dataset needs idx_images and idx_labels");
  if (!cfg.synth.means.empty()) {
    if (static_cast<int>(cfg.synth.means.size()) != cfg.synth.n_classes)
      throw std::runtime_error("config: means count must equal classes");
    for (const auto& mu : cfg.synth.means)
      if (static_cast<int>(mu.size()) != cfg.synth.dim)
        throw std::runtime_error("config: mean dimension must equal dim");
  }
  if (!cfg.synth.scales.empty() &&
      static_cast<int>(cfg.synth.scales.size()) != cfg.synth.n_classes)
    throw std::runtime_error("config: scales count must equal classes");
  return cfg;
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "name = " << cfg.name << "\n";
  out << "dataset = " << cfg.dataset << "\n";
  if (!cfg.idx_images.empty()) out << "idx_images = " << cfg.idx_images << "\n";
  if (!cfg.idx_labels.empty()) out << "idx_labels = " << cfg.idx_labels << "\n";
  out << "classes = " << cfg.synth.n_classes << "\n";
  out << "dim = " << cfg.synth.dim << "\n";
  out << "samples = " << cfg.synth.n_samples << "\n";
  out << "label_noise = " << format_double(cfg.synth.label_noise) << "\n";
  if (!cfg.synth.means.empty()) {
    out << "means = ";
    for (std::size_t c = 0; c < cfg.synth.means.size(); ++c) {
      if (c > 0) out << "; ";
      for (std::size_t d = 0; d < cfg.synth.means[c].size(); ++d) {
        if (d > 0) out << ' ';
        out << format_double(cfg.synth.means[c][d]);
      }
    }
    out << "\n";
  }
  if (!cfg.synth.scales.empty()) {
    out << "scales = ";
    for (std::size_t c = 0; c < cfg.synth.scales.size(); ++c) {
      if (c > 0) out << ' ';
      out << format_double(cfg.synth.scales[c]);
    }
    out << "\n";
  }
  out << "imbalance_factor = " << format_double(cfg.imbalance_factor) << "\n";
  out << "subset = " << cfg.subset << "\n";
  out << "test_fraction = " << format_double(cfg.test_fraction) << "\n";
  out << "warmup_size = " << cfg.warmup_size << "\n";
  out << "warmup_balanced = " << (cfg.warmup_balanced ? "true" : "false") << "\n";
  out << "rounds = " << cfg.rounds << "\n";
  out << "batch = " << cfg.batch << "\n";
  out << "strategies = ";
  for (std::size_t i = 0; i < cfg.strategies.size(); ++i) {
    if (i > 0) out << ", ";
    out << cfg.strategies[i];
  }
  out << "\n";
  out << "seeds = ";
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
    if (i > 0) out << ", ";
    out << cfg.seeds[i];
  }
  out << "\n";
  out << "hidden = ";
  for (std::size_t i = 0; i < cfg.hidden.size(); ++i) {
    if (i > 0) out << ", ";
    out << cfg.hidden[i];
  }
  out << "\n";
  out << "dropout = " << format_double(cfg.dropout) << "\n";
  out << "learning_rate = " << format_double(cfg.train.learning_rate) << "\n";
  out << "batch_size = " << cfg.train.batch_size << "\n";
  out << "epochs = " << cfg.train.epochs << "\n";
  out << "mc_samples = " << cfg.mc_samples << "\n";
  out << "bandwidth = " << format_double(cfg.calibration.bandwidth) << "\n";
  out << "p_norm = " << cfg.calibration.p << "\n";
  out << "denominator_floor = " << format_double(cfg.calibration.denominator_floor)
      << "\n";
  out << "ece_bins = " << cfg.ece.n_bins << "\n";
  out << "tie_significant_digits = " << cfg.tie.significant_digits << "\n";
  out << "tie_decimals = " << cfg.tie.decimals << "\n";
  out << "shortlist_factor = " << cfg.shortlist_factor << "\n";
  out << "combo_multiplier = " << format_double(cfg.combo_multiplier) << "\n";
  out << "timing = " << cfg.timing << "\n";
  out << "out_dir = " << cfg.out_dir << "\n";
  out << "emit_svg = " << (cfg.emit_svg ? "true" : "false") << "\n";
  return out.str();
}

}  // namespace cusal
