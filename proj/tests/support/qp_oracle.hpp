/*
 * Copyright 2026 The CAPT Intelligibility Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <vector>

namespace capt::testsupport {

// Reference solver for the SVM dual
//   max sum(a) - 0.5 a'Qa  s.t. 0 <= a <= C, y'a = 0
// by accelerated projected gradient, where the projection onto the box
// intersected with the hyperplane is found by bisection on its multiplier.
struct QpSolution {
  std::vector<double> alpha;
  double objective = 0.0;
};

QpSolution solve_dual_qp(const std::vector<std::vector<double>>& Q, const std::vector<int>& y, double C,
                         int iterations = 20000);

// Q_ij = y_i y_j exp(-gamma |x_i - x_j|^2).
std::vector<std::vector<double>> rbf_gram(const std::vector<std::vector<double>>& X, const std::vector<int>& y,
                                          double gamma);

double dual_objective(const std::vector<std::vector<double>>& Q, const std::vector<double>& alpha);

}  // namespace capt::testsupport
