// Copyright 2026 The nmqoc Authors
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

#include "nmqoc/analysis.hpp"
#include "nmqoc/bath.hpp"
#include "nmqoc/config.hpp"
#include "nmqoc/driver.hpp"
#include "nmqoc/dynamics.hpp"
#include "nmqoc/errors.hpp"
#include "nmqoc/fit.hpp"
#include "nmqoc/io.hpp"
#include "nmqoc/optimizer.hpp"
