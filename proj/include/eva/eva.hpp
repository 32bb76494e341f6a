// Copyright 2026 The EVA Coreset Authors
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

#pragma once

// Umbrella header.

#include "eva/dynlog.hpp"
#include "eva/error.hpp"
#include "eva/score_io.hpp"
#include "eva/scorers.hpp"
#include "eva/selector.hpp"
#include "eva/synth.hpp"
#include "eva/train/harness.hpp"
#include "eva/train/ingest.hpp"
#include "eva/train/synthetic_data.hpp"
#include "eva/window_search.hpp"
