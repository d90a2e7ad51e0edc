// Copyright 2026 The xsreg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "xsreg/core/geometry.h"

namespace xsreg::io {

// Transform interchange: a 4x4 row-major matrix written either as a JSON array
// of 16 numbers or as whitespace-separated text (four rows of four).

nlohmann::json transform_to_json(const RigidTransform &t);
/// Accepts a flat array of 16 numbers; rejects anything that is not a proper rigid motion.
RigidTransform transform_from_json(const nlohmann::json &j);

/// Writes JSON when the extension is .json, text otherwise.
void write_transform(const RigidTransform &t, const std::filesystem::path &path);
/// Detects JSON (leading '[') or whitespace text.
RigidTransform read_transform(const std::filesystem::path &path);

/// Text form with 17 significant digits (round-trips doubles exactly).
std::string transform_to_text(const RigidTransform &t);

}  // namespace xsreg::io
