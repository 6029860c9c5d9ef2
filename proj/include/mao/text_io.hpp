// Copyright 2026 The MAO Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mao::text {

// Shortest representation that parses back to the identical double.
std::string format_double(double v);

// Fixed two-decimal percentage, rounding half to even.
std::string format_percent(double v);

std::vector<std::string_view> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);

// Strict parsers: the whole field must be consumed. Return false on failure.
bool parse_double(std::string_view s, double& out);
bool parse_u64(std::string_view s, std::uint64_t& out);
bool parse_i64(std::string_view s, std::int64_t& out);

std::string join_doubles(std::span<const double> values, char sep = ',');

std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace mao::text
