// Copyright 2026 The Shepherd Authors
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

#ifndef SHEPHERD_PARALLEL_HPP_
#define SHEPHERD_PARALLEL_HPP_

#include <cstddef>
#include <functional>

namespace shepherd {

// Worker cap: SHEPHERD_THREADS if set and positive, else hardware concurrency.
int worker_count();

// Runs fn(i) for i in [0, n). Callers write results into index-addressed
// slots and reduce in index order afterwards, so results never depend on
// scheduling. The exception from the lowest failing index is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace shepherd

#endif  // SHEPHERD_PARALLEL_HPP_
