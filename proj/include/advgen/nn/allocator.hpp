// Copyright 2026 The advgen Authors
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

#ifndef ADVGEN_NN_ALLOCATOR_HPP_
#define ADVGEN_NN_ALLOCATOR_HPP_

namespace advgen::nn {

/// Keeps tensor-sized blocks on the heap instead of fresh mmap/munmap pairs.
/// Every forward pass reallocates the same buffers, and with glibc's default
/// thresholds that costs more system time than the arithmetic. No-op on other
/// C libraries. Call once at program start.
void tune_allocator();

}  // namespace advgen::nn

#endif  // ADVGEN_NN_ALLOCATOR_HPP_
