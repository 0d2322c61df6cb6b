// Copyright 2026 The TypoLab Authors
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

#ifndef TYPOLAB_TYPOLAB_HPP_
#define TYPOLAB_TYPOLAB_HPP_

#include "typolab/checkpoint.hpp"
#include "typolab/corpus.hpp"
#include "typolab/dataset_io.hpp"
#include "typolab/detector.hpp"
#include "typolab/error.hpp"
#include "typolab/harness.hpp"
#include "typolab/model.hpp"
#include "typolab/pipeline.hpp"
#include "typolab/svg.hpp"
#include "typolab/tokenizer.hpp"
#include "typolab/train.hpp"

#endif  // TYPOLAB_TYPOLAB_HPP_
