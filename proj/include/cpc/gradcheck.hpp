// Copyright 2026 The cpclab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CPC_GRADCHECK_HPP_
#define CPC_GRADCHECK_HPP_

#include <functional>
#include <string>
#include <vector>

#include "cpc/tape.hpp"

namespace cpc {

struct GradCheckResult {
  std::string name;
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  bool pass = true;
};

// Central finite differences against the tape's analytic gradients. The
// forward closure receives freshly bound leaves each evaluation, so the
// numeric side never touches the backward rules it is checking.
//
// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, 1).
// An empty parameter list passes vacuously.
GradCheckResult check_gradients(
    const std::string& name, const std::vector<Tensor>& params,
    const std::function<Tensor(Tape&, const std::vector<Tensor>&)>& forward,
    double eps = 1e-5, double tol = 1e-4);

}  // namespace cpc

#endif  // CPC_GRADCHECK_HPP_
