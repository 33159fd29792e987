//
// Copyright 2026 The rlu Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//


#include "rlu/plots.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "rlu/metrics.hpp"

namespace rlu {

namespace fs = std::filesystem;

namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 400;
constexpr double kMargin = 60;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string Escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string Num(double v) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << v;
  return out.str();
}

struct Bounds {
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
};

Bounds BoundsOf(const std::vector<Series>& series) {
  bool first = true;
  Bounds b;
  for (const Series& s : series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (first) {
        b = {s.x[i], s.x[i], s.y[i], s.y[i]};
        first = false;
      }
      b.x0 = std::min(b.x0, s.x[i]);
      b.x1 = std::max(b.x1, s.x[i]);
      b.y0 = std::min(b.y0, s.y[i]);
      b.y1 = std::max(b.y1, s.y[i]);
    }
  }
  if (b.x1 == b.x0) b.x1 = b.x0 + 1;
  if (b.y1 == b.y0) b.y1 = b.y0 + 1;
  return b;
}

std::string Plot(const std::string& title, const std::string& x_label, const std::string& y_label,
                 const std::vector<Series>& series, bool lines) {
  const Bounds b = BoundsOf(series);
  auto px = [&](double x) { return kMargin + (x - b.x0) / (b.x1 - b.x0) * (kWidth - 2 * kMargin); };
  auto py = [&](double y) { return kHeight - kMargin - (y - b.y0) / (b.y1 - b.y0) * (kHeight - 2 * kMargin); };
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << Escape(title)
      << "</text>\n";
  svg << "<line x1=\"" << kMargin << "\" y1=\"" << kHeight - kMargin << "\" x2=\"" << kWidth - kMargin
      << "\" y2=\"" << kHeight - kMargin << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << kMargin << "\" y1=\"" << kMargin << "\" x2=\"" << kMargin << "\" y2=\""
      << kHeight - kMargin << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double fx = b.x0 + (b.x1 - b.x0) * t / 4.0;
    const double fy = b.y0 + (b.y1 - b.y0) * t / 4.0;
    svg << "<text x=\"" << Num(px(fx)) << "\" y=\"" << kHeight - kMargin + 16 << "\" text-anchor=\"middle\">"
        << Num(fx) << "</text>\n";
    svg << "<text x=\"" << kMargin - 6 << "\" y=\"" << Num(py(fy) + 4) << "\" text-anchor=\"end\">" << Num(fy)
        << "</text>\n";
  }
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 16 << "\" text-anchor=\"middle\">"
      << Escape(x_label) << "</text>\n";
  svg << "<text x=\"16\" y=\"" << kHeight / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << kHeight / 2 << ")\">" << Escape(y_label) << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const Series& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    const std::size_t n = std::min(s.x.size(), s.y.size());
    if (lines && n > 1) {
      svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < n; ++i) svg << (i ? " " : "") << Num(px(s.x[i])) << "," << Num(py(s.y[i]));
      svg << "\"/>\n";
    }
    if (!lines || n == 1) {
      for (std::size_t i = 0; i < n; ++i) {
        svg << "<circle cx=\"" << Num(px(s.x[i])) << "\" cy=\"" << Num(py(s.y[i])) << "\" r=\"3\" fill=\"" << color
            << "\"/>\n";
      }
    }
    svg << "<text x=\"" << kWidth - kMargin + 4 - 120 << "\" y=\"" << kMargin + 14 * k << "\" fill=\"" << color
        << "\">" << Escape(s.name) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void Write(const fs::path& p, const std::string& text, std::vector<std::string>& written) {
  std::ofstream out(p);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + p.string());
  out << text;
  written.push_back(p.string());
}

std::vector<std::vector<std::string>> ReadCsv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    rows.push_back(std::move(f));
  }
  return rows;
}

}  // namespace

std::string SvgLinePlot(const std::string& title, const std::string& x_label, const std::string& y_label,
                        const std::vector<Series>& series) {
  return Plot(title, x_label, y_label, series, true);
}

std::string SvgScatterPlot(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series) {
  return Plot(title, x_label, y_label, series, false);
}

std::vector<std::string> EmitPlots(const std::string& run_dir) {
  const fs::path dir(run_dir);
  std::ifstream metrics_in(dir / "metrics.csv");
  if (!metrics_in) throw Error(ErrorCode::kMissingData, "run has no metrics.csv");
  const std::vector<MetricRecord> records = ReadMetricsCsv(metrics_in);
  if (records.empty()) throw Error(ErrorCode::kMissingData, "metrics.csv has no rows");
  std::vector<std::string> written;

  // Unlearning-env reward per phase, averaged over replicates, by setting.
  int unlearn_index = 0;
  {
    std::ifstream cfg(dir / "config.txt");
    for (std::string line; std::getline(cfg, line);) {
      if (line.rfind("unlearn_index = ", 0) == 0) unlearn_index = std::stoi(line.substr(16));
    }
  }
  std::map<std::string, std::map<int, std::pair<double, int>>> by_phase;
  for (const MetricRecord& r : records) {
    if (r.env_id != unlearn_index) continue;
    auto& acc = by_phase[r.phase][r.setting];
    acc.first += r.reward;
    acc.second += 1;
  }
  std::ostringstream csv;
  csv << "phase,setting,reward\n";
  std::vector<Series> reward_series;
  for (const auto& [phase, settings] : by_phase) {
    Series s{phase, {}, {}};
    for (const auto& [setting, acc] : settings) {
      const double mean = acc.first / acc.second;
      csv << phase << ',' << setting << ',' << std::setprecision(10) << mean << '\n';
      s.x.push_back(setting);
      s.y.push_back(mean);
    }
    reward_series.push_back(std::move(s));
  }
  Write(dir / "unlearn_reward.csv", csv.str(), written);
  Write(dir / "unlearn_reward.svg",
        SvgLinePlot("Reward in the unlearning environment", "setting", "mean reward", reward_series), written);

  if (fs::exists(dir / "loss_trace.csv")) {
    const auto rows = ReadCsv(dir / "loss_trace.csv");
    Series t1{"term1", {}, {}};
    Series t2{"term2", {}, {}};
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].size() < 3) throw Error(ErrorCode::kMissingData, "malformed loss trace row");
      const double epoch = std::stod(rows[i][0]);
      t1.x.push_back(epoch);
      t1.y.push_back(std::stod(rows[i][1]));
      t2.x.push_back(epoch);
      t2.y.push_back(std::stod(rows[i][2]));
    }
    if (t1.x.empty()) throw Error(ErrorCode::kMissingData, "loss trace has no rows");
    Write(dir / "loss_trace.svg", SvgLinePlot("Decremental loss terms", "epoch", "loss", {t1, t2}), written);
  }

  if (fs::exists(dir / "forget_quality.json")) {
    std::ifstream in(dir / "forget_quality.json");
    nlohmann::json rows;
    in >> rows;
    std::map<std::string, Series> points;
    std::ostringstream fq;
    fq << "replicate,setting,phase,p_value,utility\n" << std::setprecision(10);
    for (const nlohmann::json& r : rows) {
      const std::string phase = r.at("phase").get<std::string>();
      Series& s = points[phase];
      s.name = phase;
      s.x.push_back(r.at("p_value").get<double>());
      s.y.push_back(r.value("utility", 0.0));
      fq << r.at("replicate").get<int>() << ',' << r.at("setting").get<int>() << ',' << phase << ','
         << s.x.back() << ',' << s.y.back() << '\n';
    }
    std::vector<Series> series;
    for (auto& [phase, s] : points) series.push_back(std::move(s));
    Write(dir / "forget_quality.csv", fq.str(), written);
    Write(dir / "forget_quality.svg", SvgScatterPlot("Forget quality", "KS p-value", "model utility", series),
          written);
  }

  if (fs::exists(dir / "utility.csv")) {
    const auto rows = ReadCsv(dir / "utility.csv");
    std::map<std::string, std::map<int, std::pair<double, int>>> acc;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].size() < 5) throw Error(ErrorCode::kMissingData, "malformed utility row");
      auto& a = acc[rows[i][2]][std::stoi(rows[i][3])];
      a.first += std::stod(rows[i][4]);
      a.second += 1;
    }
    std::vector<Series> series;
    for (const auto& [phase, epochs] : acc) {
      Series s{phase, {}, {}};
      for (const auto& [epoch, a] : epochs) {
        s.x.push_back(epoch);
        s.y.push_back(a.first / a.second);
      }
      series.push_back(std::move(s));
    }
    Write(dir / "utility.svg", SvgLinePlot("Model utility during unlearning", "epoch", "utility", series), written);
  }
  return written;
}

}  // namespace rlu
