#include "pausebench/attnviz.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "pausebench/error.hpp"
#include "pausebench/util.hpp"

namespace pausebench {

namespace {

std::string num(double v, int digits = 6) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  std::string s = buf;
  if (s.find_first_not_of("-0.") == std::string::npos && s[0] == '-') s.erase(0, 1);
  return s;
}

double median(std::vector<double> xs) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  const std::size_t mid = xs.size() / 2;
  return xs.size() % 2 ? xs[mid] : 0.5 * (xs[mid - 1] + xs[mid]);
}

void check_weights(const AttentionDump& dump) {
  for (std::size_t l = 0; l < dump.layers.size(); ++l) {
    for (double w : dump.layers[l]) {
      if (std::isnan(w) || w < 0.0 || std::isinf(w)) {
        throw InvalidArgument("layer " + std::to_string(l) + " has a NaN, infinite or negative weight");
      }
    }
  }
}

// Spike metrics; an empty pause list is allowed here (baseline dumps).
SpikeReport spikes(const AttentionDump& dump, int window) {
  if (window < 3 || window % 2 == 0) {
    throw InvalidArgument("spike window must be odd and >= 3, got " + std::to_string(window));
  }
  check_weights(dump);
  const std::size_t n = dump.prompt_token_count;
  const std::size_t half = static_cast<std::size_t>(window / 2);
  for (std::size_t p : dump.pause_positions) {
    if (p >= n) throw InvalidArgument("pause position " + std::to_string(p) + " out of range");
  }

  SpikeReport report;
  report.technique = dump.technique;
  for (std::size_t l = 0; l < dump.layers.size(); ++l) {
    const std::vector<double>& w = dump.layers[l];
    LayerSpikes ls;
    ls.layer = l;
    double total = 0.0;
    for (double x : w) total += x;

    for (std::size_t p : dump.pause_positions) {
      std::vector<double> around;
      const std::size_t lo = p >= half ? p - half : 0;
      const std::size_t hi = std::min(n - 1, p + half);
      for (std::size_t i = lo; i <= hi; ++i) {
        if (i != p) around.push_back(w[i]);
      }
      const double m = median(std::move(around));
      ls.pause_spike_ratios.push_back(m == 0.0 ? kInfiniteRatio : w[p] / m);
    }

    if (total > 0.0) {
      double needle = 0.0;
      for (std::size_t i = dump.needle_span.first; i < dump.needle_span.second; ++i) needle += w[i];
      double tail = 0.0;
      for (std::size_t i = n / 2; i < n; ++i) tail += w[i];
      ls.needle_region_mass = needle / total;
      ls.tail_half_mass = tail / total;
    }
    report.per_layer.push_back(std::move(ls));
  }
  return report;
}

std::vector<double> binned_profile(const std::vector<double>& normalized, std::size_t bins) {
  const std::size_t n = normalized.size();
  std::vector<double> out(bins, 0.0);
  for (std::size_t b = 0; b < bins; ++b) {
    const std::size_t lo = std::min(n - 1, b * n / bins);
    const std::size_t hi = std::max((b + 1) * n / bins, lo + 1);
    double sum = 0.0;
    for (std::size_t i = lo; i < hi; ++i) sum += normalized[i];
    out[b] = sum / static_cast<double>(hi - lo);
  }
  return out;
}

double mean_finite(const std::vector<double>& xs) {
  double sum = 0.0;
  std::size_t k = 0;
  for (double x : xs) {
    if (std::isfinite(x)) {
      sum += x;
      ++k;
    }
  }
  return k == 0 ? std::nan("") : sum / static_cast<double>(k);
}

}  // namespace

AttentionDump parse_attention_dump(const nlohmann::json& j) {
  AttentionDump d;
  try {
    d.model_name = j.at("model_name").get<std::string>();
    d.prompt_token_count = j.at("prompt_token_count").get<std::size_t>();
    d.layers = j.at("layers").get<std::vector<std::vector<double>>>();
    d.pause_positions = j.at("pause_positions").get<std::vector<std::size_t>>();
    const auto span = j.at("needle_span").get<std::vector<std::size_t>>();
    if (span.size() != 2) throw ParseError("needle_span must hold [start, end]");
    d.needle_span = {span[0], span[1]};
    d.technique = j.at("technique").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("attention dump: ") + e.what());
  }
  if (d.prompt_token_count == 0) throw ParseError("attention dump: prompt_token_count must be positive");
  if (d.layers.empty()) throw ParseError("attention dump: no layers");
  for (std::size_t l = 0; l < d.layers.size(); ++l) {
    if (d.layers[l].size() != d.prompt_token_count) {
      throw ParseError("attention dump: layer " + std::to_string(l) + " has " +
                       std::to_string(d.layers[l].size()) + " weights, expected " +
                       std::to_string(d.prompt_token_count));
    }
  }
  for (std::size_t p : d.pause_positions) {
    if (p >= d.prompt_token_count) throw ParseError("attention dump: pause position " + std::to_string(p) + " out of range");
  }
  if (d.needle_span.first > d.needle_span.second || d.needle_span.second > d.prompt_token_count) {
    throw ParseError("attention dump: needle_span out of range");
  }
  return d;
}

AttentionDump load_attention_dump(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  try {
    return parse_attention_dump(j);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

nlohmann::json to_json(const AttentionDump& d) {
  return {{"model_name", d.model_name},
          {"prompt_token_count", d.prompt_token_count},
          {"layers", d.layers},
          {"pause_positions", d.pause_positions},
          {"needle_span", {d.needle_span.first, d.needle_span.second}},
          {"technique", d.technique},
          {"head_aggregation", "mean"}};
}

std::vector<std::vector<double>> normalize(const AttentionDump& dump) {
  check_weights(dump);
  std::vector<std::vector<double>> out;
  out.reserve(dump.layers.size());
  for (const auto& layer : dump.layers) {
    const double mx = layer.empty() ? 0.0 : *std::max_element(layer.begin(), layer.end());
    std::vector<double> scaled(layer.size(), 0.0);
    if (mx > 0.0) {
      for (std::size_t i = 0; i < layer.size(); ++i) scaled[i] = layer[i] / mx;
    }
    out.push_back(std::move(scaled));
  }
  return out;
}

SpikeReport spike_report(const AttentionDump& dump, int window) {
  if (dump.pause_positions.empty()) throw InvalidArgument("spike_report needs at least one pause position");
  return spikes(dump, window);
}

Comparison compare(const std::vector<AttentionDump>& dumps, int window, std::size_t bins) {
  if (dumps.size() < 2) throw InvalidArgument("compare needs at least two dumps");
  if (bins == 0) throw InvalidArgument("compare needs at least one bin");
  const std::size_t layers = dumps.front().layers.size();
  for (const AttentionDump& d : dumps) {
    if (d.layers.size() != layers) {
      throw InvalidArgument("layer count mismatch: " + d.technique + " has " + std::to_string(d.layers.size()) +
                            ", expected " + std::to_string(layers));
    }
  }

  Comparison c;
  c.layer_count = layers;
  c.bins = bins;
  std::vector<SpikeReport> reports;
  for (const AttentionDump& d : dumps) {
    c.techniques.push_back(d.technique);
    reports.push_back(spikes(d, window));
    std::vector<std::vector<double>> per_layer;
    for (const auto& layer : normalize(d)) per_layer.push_back(binned_profile(layer, bins));
    c.profiles.push_back(std::move(per_layer));
  }

  for (std::size_t d = 0; d < dumps.size(); ++d) {
    for (std::size_t l = 0; l < layers; ++l) {
      const LayerSpikes& s = reports[d].per_layer[l];
      const LayerSpikes& ref = reports[0].per_layer[l];
      ComparisonRow row;
      row.technique = dumps[d].technique;
      row.layer = l;
      row.needle_region_mass = s.needle_region_mass;
      row.tail_half_mass = s.tail_half_mass;
      row.mean_pause_spike_ratio = mean_finite(s.pause_spike_ratios);
      row.delta_needle_mass = s.needle_region_mass - ref.needle_region_mass;
      row.delta_tail_mass = s.tail_half_mass - ref.tail_half_mass;
      double l1 = 0.0;
      for (std::size_t b = 0; b < bins; ++b) l1 += std::abs(c.profiles[d][l][b] - c.profiles[0][l][b]);
      row.profile_l1 = l1 / static_cast<double>(bins);
      c.rows.push_back(std::move(row));
    }
  }
  return c;
}

std::string spikes_csv(const std::vector<SpikeReport>& reports) {
  std::string out = "technique,layer,pause_index,spike_ratio,needle_region_mass,tail_half_mass\n";
  for (const SpikeReport& r : reports) {
    for (const LayerSpikes& l : r.per_layer) {
      const std::string tail = "," + num(l.needle_region_mass) + "," + num(l.tail_half_mass) + "\n";
      if (l.pause_spike_ratios.empty()) {
        out += r.technique + "," + std::to_string(l.layer) + ",," + tail;
        continue;
      }
      for (std::size_t i = 0; i < l.pause_spike_ratios.size(); ++i) {
        out += r.technique + "," + std::to_string(l.layer) + "," + std::to_string(i) + "," +
               num(l.pause_spike_ratios[i]) + tail;
      }
    }
  }
  return out;
}

std::string comparison_csv(const Comparison& c) {
  std::string out =
      "technique,layer,needle_region_mass,tail_half_mass,mean_pause_spike_ratio,delta_needle_mass,"
      "delta_tail_mass,profile_l1\n";
  for (const ComparisonRow& r : c.rows) {
    out += r.technique + "," + std::to_string(r.layer) + "," + num(r.needle_region_mass) + "," +
           num(r.tail_half_mass) + "," + num(r.mean_pause_spike_ratio) + "," + num(r.delta_needle_mass) + "," +
           num(r.delta_tail_mass) + "," + num(r.profile_l1) + "\n";
  }
  return out;
}

std::string render_comparison_svg(const Comparison& c, const std::vector<AttentionDump>& dumps) {
  constexpr double kPlotW = 640, kPanelH = 90, kGap = 24, kLeft = 70, kTop = 30;
  constexpr std::array<const char*, 6> kColors = {"#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#17becf"};
  const double height = kTop + static_cast<double>(c.layer_count) * (kPanelH + kGap) + 10;
  const double width = kLeft + kPlotW + 20;

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width, 0) + "\" height=\"" +
                    num(height, 0) + "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  for (std::size_t d = 0; d < c.techniques.size(); ++d) {
    svg += "<text x=\"" + num(kLeft + 120.0 * static_cast<double>(d), 0) + "\" y=\"14\" fill=\"" +
           kColors[d % kColors.size()] + "\">" + c.techniques[d] + "</text>\n";
  }
  for (std::size_t l = 0; l < c.layer_count; ++l) {
    const double top = kTop + static_cast<double>(l) * (kPanelH + kGap);
    svg += "<g class=\"layer\" data-layer=\"" + std::to_string(l) + "\">\n";
    svg += "<text x=\"" + num(kLeft - 8, 0) + "\" y=\"" + num(top + kPanelH / 2, 1) +
           "\" text-anchor=\"end\">layer " + std::to_string(l) + "</text>\n";
    svg += "<rect x=\"" + num(kLeft, 0) + "\" y=\"" + num(top, 1) + "\" width=\"" + num(kPlotW, 0) +
           "\" height=\"" + num(kPanelH, 0) + "\" fill=\"none\" stroke=\"#999\"/>\n";
    for (std::size_t d = 0; d < dumps.size() && d < c.profiles.size(); ++d) {
      const AttentionDump& dump = dumps[d];
      const double n = static_cast<double>(dump.prompt_token_count);
      if (dump.needle_span.second > dump.needle_span.first) {
        const double x0 = kLeft + kPlotW * static_cast<double>(dump.needle_span.first) / n;
        const double x1 = kLeft + kPlotW * static_cast<double>(dump.needle_span.second) / n;
        svg += "<rect class=\"needle\" x=\"" + num(x0, 2) + "\" y=\"" + num(top, 1) + "\" width=\"" +
               num(std::max(x1 - x0, 1.0), 2) + "\" height=\"" + num(kPanelH, 0) +
               "\" fill=\"#9b59b6\" fill-opacity=\"0.15\"/>\n";
      }
      const auto& profile = c.profiles[d][l];
      std::string points;
      for (std::size_t b = 0; b < profile.size(); ++b) {
        const double x = kLeft + kPlotW * (static_cast<double>(b) + 0.5) / static_cast<double>(profile.size());
        const double y = top + kPanelH * (1.0 - profile[b]);
        if (!points.empty()) points += " ";
        points += num(x, 2) + "," + num(y, 2);
      }
      svg += "<polyline fill=\"none\" stroke=\"" + std::string(kColors[d % kColors.size()]) +
             "\" stroke-width=\"1.2\" points=\"" + points + "\"/>\n";
      for (std::size_t p : dump.pause_positions) {
        const double frac = (static_cast<double>(p) + 0.5) / n;
        const std::size_t b = std::min(profile.size() - 1, static_cast<std::size_t>(frac * static_cast<double>(profile.size())));
        svg += "<circle class=\"pause\" cx=\"" + num(kLeft + kPlotW * frac, 2) + "\" cy=\"" +
               num(top + kPanelH * (1.0 - profile[b]), 2) + "\" r=\"2\" fill=\"#d62728\"/>\n";
      }
    }
    svg += "</g>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace pausebench
