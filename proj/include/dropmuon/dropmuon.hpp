// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The dropmuon authors

#ifndef DROPMUON_DROPMUON_HPP
#define DROPMUON_DROPMUON_HPP

#include "costmodel.hpp"
#include "geometry.hpp"
#include "model.hpp"
#include "optimizer.hpp"
#include "problems.hpp"
#include "rng.hpp"
#include "sampling.hpp"
#include "smoothness.hpp"
#include "theory.hpp"

#endif  // DROPMUON_DROPMUON_HPP
