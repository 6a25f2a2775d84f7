/*
 * Copyright 2026 The wdrq Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <wdrq/env.hpp>
#include <wdrq/reward.hpp>
#include <wdrq/net.hpp>
#include <wdrq/dro.hpp>
#include <wdrq/replay.hpp>
#include <wdrq/agent.hpp>
#include <wdrq/eval.hpp>
#include <wdrq/config.hpp>
#include <wdrq/io.hpp>
