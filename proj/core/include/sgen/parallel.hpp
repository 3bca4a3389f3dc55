// Copyright 2026 The sgen Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <functional>

namespace sgen {

/// Worker count: SGEN_THREADS when set and positive, otherwise the hardware
/// concurrency (at least 1).
int worker_count();

/// Calls fn(i) for i in [0, n) across up to `workers` threads (0: worker_count()).
/// Indices are claimed dynamically, so fn must only write state owned by i.
/// The first exception thrown by any call is rethrown after all workers stop.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, int workers = 0);

}  // namespace sgen
