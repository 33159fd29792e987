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


#ifndef RLU_PLOTS_HPP_
#define RLU_PLOTS_HPP_

#include <string>
#include <vector>

namespace rlu {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

// Self-contained SVG documents; output depends only on the inputs.
std::string SvgLinePlot(const std::string& title, const std::string& x_label, const std::string& y_label,
                        const std::vector<Series>& series);
std::string SvgScatterPlot(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series);

// Series CSVs and SVGs for a finished run directory:
//   unlearn_reward.{csv,svg}  mean reward in the unlearning env per phase and setting
//   loss_trace.svg            both decremental loss terms per epoch
//   forget_quality.{csv,svg}  model utility against KS p-value
//   utility.svg               model utility across unlearning epochs
// Throws kMissingData when metrics.csv is absent or has no rows. Returns the
// written paths.
std::vector<std::string> EmitPlots(const std::string& run_dir);

}  // namespace rlu

#endif  // RLU_PLOTS_HPP_
