#include "pausebench/stats.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <tuple>

#include "pausebench/error.hpp"

namespace pausebench {

namespace {

using GroupKey = std::tuple<std::string, std::string, RunMode, std::size_t>;

double mean_of(const std::vector<double>& xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

// Sample standard deviation (n - 1); zero for a single value.
double sample_std(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  std::string s = buf;
  if (s == "-0.0000" || s == "-0.00" || s == "-0.0") s.erase(0, 1);
  return s;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view csv) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < csv.size(); ++i) {
    char c = csv[i];
    if (quoted) {
      if (c == '"' && i + 1 < csv.size() && csv[i + 1] == '"') {
        field.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n') {
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else if (c != '\r') {
      field.push_back(c);
      any = true;
    }
  }
  if (any) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string length_label(std::size_t tokens) {
  if (tokens % 1000 == 0) return std::to_string(tokens / 1000) + "K";
  return std::to_string(tokens);
}

}  // namespace

std::vector<Summary> summarize(const std::vector<TrialResult>& results, StdMode mode) {
  struct Group {
    std::map<int, std::vector<double>> by_trial;
    std::vector<double> all;
  };
  std::map<GroupKey, Group> groups;
  for (const TrialResult& r : results) {
    Group& g = groups[{r.model, r.technique, r.mode, r.context_tokens}];
    if (r.error || !r.score) continue;
    g.by_trial[r.trial].push_back(*r.score);
    g.all.push_back(*r.score);
  }

  std::vector<Summary> out;
  for (const auto& [key, g] : groups) {
    const auto& [model, tech, run_mode, tokens] = key;
    if (g.all.empty()) {
      spdlog::warn("no scored rows for {}/{}/{}/{}; group omitted", model, tech, to_string(run_mode), tokens);
      continue;
    }
    Summary s{model, tech, run_mode, tokens};
    s.n_trials = static_cast<int>(g.by_trial.size());
    s.n_scores = static_cast<int>(g.all.size());
    if (mode == StdMode::per_trial_mean) {
      std::vector<double> trial_means;
      for (const auto& [trial, scores] : g.by_trial) trial_means.push_back(mean_of(scores));
      s.mean = mean_of(trial_means);
      s.std = sample_std(trial_means);
    } else {
      s.mean = mean_of(g.all);
      s.std = sample_std(g.all);
    }
    out.push_back(std::move(s));
  }
  return out;
}

PercentChangeRow percent_change(const std::vector<Summary>& baseline, const std::vector<Summary>& tech) {
  std::map<std::size_t, double> base_means;
  for (const Summary& s : baseline) base_means[s.context_tokens] = s.mean;

  PercentChangeRow row;
  if (!tech.empty()) {
    row.model = tech.front().model;
    row.technique = tech.front().technique;
    row.mode = tech.front().mode;
  }
  for (const Summary& s : tech) {
    auto it = base_means.find(s.context_tokens);
    if (it == base_means.end()) continue;
    if (it->second <= 0.0) {
      throw InvalidArgument("baseline mean must be positive at " + std::to_string(s.context_tokens) + " tokens");
    }
    row.per_length[s.context_tokens] = 100.0 * (s.mean - it->second) / it->second;
  }
  if (row.per_length.empty()) throw InvalidArgument("baseline and technique share no context length");
  double sum = 0.0;
  for (const auto& [len, pct] : row.per_length) sum += pct;
  row.averaged = sum / static_cast<double>(row.per_length.size());
  return row;
}

std::vector<PercentChangeRow> percent_change_table(const std::vector<Summary>& summaries) {
  // (model, mode) -> technique -> rows, keeping first-seen technique order.
  std::map<std::pair<std::string, RunMode>, std::vector<std::pair<std::string, std::vector<Summary>>>> groups;
  for (const Summary& s : summaries) {
    auto& techs = groups[{s.model, s.mode}];
    auto it = std::find_if(techs.begin(), techs.end(), [&](const auto& t) { return t.first == s.technique; });
    if (it == techs.end()) {
      techs.push_back({s.technique, {}});
      it = techs.end() - 1;
    }
    it->second.push_back(s);
  }

  const std::string base_name(to_string(TechniqueId::baseline));
  std::vector<PercentChangeRow> out;
  for (const auto& [key, techs] : groups) {
    auto base = std::find_if(techs.begin(), techs.end(), [&](const auto& t) { return t.first == base_name; });
    if (base == techs.end()) {
      spdlog::warn("no baseline for {} ({}); percent change skipped", key.first, to_string(key.second));
      continue;
    }
    for (const auto& [tech, rows] : techs) {
      if (tech == base_name) continue;
      try {
        out.push_back(percent_change(base->second, rows));
      } catch (const InvalidArgument& e) {
        spdlog::warn("{} {}: {}", key.first, tech, e.what());
      }
    }
  }
  return out;
}

HeatmapMatrix heatmap_data(const std::vector<TrialResult>& results, std::string_view model,
                           std::string_view technique) {
  std::set<std::size_t> lengths;
  std::set<double> depths;
  std::map<std::pair<std::size_t, double>, std::vector<double>> scores;
  for (const TrialResult& r : results) {
    if (r.mode != RunMode::single || r.model != model || r.technique != technique || !r.depth_pct) continue;
    lengths.insert(r.context_tokens);
    depths.insert(*r.depth_pct);
    if (r.score && !r.error) scores[{r.context_tokens, *r.depth_pct}].push_back(*r.score);
  }
  HeatmapMatrix m;
  m.lengths.assign(lengths.begin(), lengths.end());
  m.depths.assign(depths.begin(), depths.end());
  for (std::size_t len : m.lengths) {
    for (double d : m.depths) {
      HeatmapCell cell{len, d, std::nullopt};
      auto it = scores.find({len, d});
      if (it != scores.end()) cell.mean = mean_of(it->second);
      m.cells.push_back(cell);
    }
  }
  return m;
}

std::string summary_csv(const std::vector<Summary>& summaries) {
  std::string out = "model,technique,mode,context_tokens,mean,std,n_trials,n_scores\n";
  for (const Summary& s : summaries) {
    out += csv_field(s.model) + "," + csv_field(s.technique) + "," + std::string(to_string(s.mode)) + "," +
           std::to_string(s.context_tokens) + "," + fixed(s.mean, 4) + "," + fixed(s.std, 4) + "," +
           std::to_string(s.n_trials) + "," + std::to_string(s.n_scores) + "\n";
  }
  return out;
}

std::vector<Summary> parse_summary_csv(std::string_view csv) {
  auto rows = parse_csv(csv);
  if (rows.empty()) throw ParseError("summary csv is empty");
  const auto& header = rows.front();
  auto col = [&](std::string_view name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ParseError("summary csv lacks column " + std::string(name));
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_model = col("model"), c_tech = col("technique"), c_mode = col("mode"),
                    c_len = col("context_tokens"), c_mean = col("mean"), c_std = col("std"),
                    c_trials = col("n_trials");
  const auto c_scores = std::find(header.begin(), header.end(), "n_scores");

  std::vector<Summary> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() == 1 && r[0].empty()) continue;
    if (r.size() != header.size()) throw ParseError("summary csv row " + std::to_string(i + 1) + " has wrong width");
    try {
      Summary s;
      s.model = r[c_model];
      s.technique = r[c_tech];
      s.mode = parse_run_mode(r[c_mode]);
      s.context_tokens = std::stoul(r[c_len]);
      s.mean = std::stod(r[c_mean]);
      s.std = std::stod(r[c_std]);
      s.n_trials = std::stoi(r[c_trials]);
      s.n_scores = c_scores == header.end() ? s.n_trials : std::stoi(r[static_cast<std::size_t>(c_scores - header.begin())]);
      out.push_back(std::move(s));
    } catch (const std::logic_error& e) {
      throw ParseError("summary csv row " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

std::string percent_change_csv(const std::vector<PercentChangeRow>& rows) {
  std::set<std::size_t> lengths;
  for (const auto& r : rows) {
    for (const auto& [len, pct] : r.per_length) lengths.insert(len);
  }
  std::string out = "model,mode,technique";
  for (std::size_t len : lengths) out += "," + std::to_string(len);
  out += ",average\n";
  for (const auto& r : rows) {
    out += csv_field(r.model) + "," + std::string(to_string(r.mode)) + "," + csv_field(r.technique);
    for (std::size_t len : lengths) {
      out += ",";
      auto it = r.per_length.find(len);
      if (it != r.per_length.end()) out += fixed(it->second, 2);
    }
    out += "," + fixed(r.averaged, 2) + "\n";
  }
  return out;
}

std::string heatmap_csv(const HeatmapMatrix& matrix) {
  std::string out = "context_tokens,depth_pct,mean_score\n";
  for (const HeatmapCell& c : matrix.cells) {
    out += std::to_string(c.context_tokens) + "," + fixed(c.depth_pct, 4) + ",";
    if (c.mean) out += fixed(*c.mean, 4);
    out += "\n";
  }
  return out;
}

std::string score_color(double score) {
  // Linear blend from red at 1 to green at 10.
  constexpr int kLow[3] = {220, 38, 38};
  constexpr int kHigh[3] = {22, 163, 74};
  const double t = std::clamp((score - 1.0) / 9.0, 0.0, 1.0);
  char buf[8];
  int rgb[3];
  for (int i = 0; i < 3; ++i) rgb[i] = static_cast<int>(std::lround(kLow[i] + t * (kHigh[i] - kLow[i])));
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
  return buf;
}

std::string render_heatmap(const HeatmapMatrix& matrix) {
  if (matrix.cells.empty()) throw InvalidArgument("cannot render an empty heatmap");
  constexpr int kCellW = 48, kCellH = 22, kLeft = 64, kTop = 16, kBottom = 40;
  const int cols = static_cast<int>(matrix.lengths.size());
  const int rows = static_cast<int>(matrix.depths.size());
  const int width = kLeft + cols * kCellW + 16;
  const int height = kTop + rows * kCellH + kBottom;

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
         std::to_string(height) + "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  for (int ci = 0; ci < cols; ++ci) {
    for (int ri = 0; ri < rows; ++ri) {
      const HeatmapCell& c = matrix.at(static_cast<std::size_t>(ci), static_cast<std::size_t>(ri));
      const int x = kLeft + ci * kCellW;
      const int y = kTop + ri * kCellH;
      svg += "<rect class=\"cell\" x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) + "\" width=\"" +
             std::to_string(kCellW) + "\" height=\"" + std::to_string(kCellH) + "\" fill=\"" +
             (c.mean ? score_color(*c.mean) : std::string("#d1d5db")) + "\"><title>" +
             length_label(c.context_tokens) + " @ " + fixed(c.depth_pct, 1) + "%: " +
             (c.mean ? fixed(*c.mean, 2) : std::string("n/a")) + "</title></rect>\n";
    }
  }
  for (int ri = 0; ri < rows; ++ri) {
    svg += "<text x=\"" + std::to_string(kLeft - 6) + "\" y=\"" + std::to_string(kTop + ri * kCellH + 15) +
           "\" text-anchor=\"end\">" + fixed(matrix.depths[static_cast<std::size_t>(ri)], 1) + "%</text>\n";
  }
  for (int ci = 0; ci < cols; ++ci) {
    svg += "<text x=\"" + std::to_string(kLeft + ci * kCellW + kCellW / 2) + "\" y=\"" +
           std::to_string(kTop + rows * kCellH + 14) + "\" text-anchor=\"middle\">" +
           length_label(matrix.lengths[static_cast<std::size_t>(ci)]) + "</text>\n";
  }
  svg += "<text x=\"" + std::to_string(kLeft + cols * kCellW / 2) + "\" y=\"" + std::to_string(height - 6) +
         "\" text-anchor=\"middle\">context length (tokens)</text>\n";
  svg += "</svg>\n";
  return svg;
}

}  // namespace pausebench
