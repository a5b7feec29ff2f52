// Copyright 2026 The ndl Authors.
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

#include "ndl/checkpoint.hpp"
#include "ndl/data.hpp"
#include "ndl/eval.hpp"
#include "ndl/math.hpp"
#include "ndl/metrics.hpp"
#include "ndl/nd_layer.hpp"
#include "ndl/network.hpp"
#include "ndl/optim.hpp"
#include "ndl/report.hpp"
#include "ndl/train.hpp"
