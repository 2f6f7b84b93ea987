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

#include <cstdint>
#include <vector>

#include "capt/acoustic_model.hpp"
#include "capt/frontend.hpp"
#include "capt/phoneset.hpp"

namespace capt::testsupport {

// Acoustic model trained on generator frames at the given noise level.
AcousticModel train_synthetic_acoustic_model(const PhonemeInventory& inv, double noise_level,
                                             std::uint64_t seed, std::size_t frames_per_phoneme = 200,
                                             std::size_t dim = 13);

// Shared model at noise 0.1, built once per process.
const AcousticModel& shared_acoustic_model();

}  // namespace capt::testsupport
